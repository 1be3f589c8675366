"""Aggregate per-event flow and decomposition results into feature vectors."""

import numpy as np
from dataclasses import dataclass, field

from .errors import ShapeMismatch
from .flow import FlowField, FlowSequence


@dataclass
class FeatureConfig:
    trace_len: int = 128
    map_size: tuple = (32, 32)
    midline_col: int | None = None  # None: image center
    flip_vertical: bool = False     # set if image-up is anatomically down


@dataclass
class FeatureVector:
    vertical_fraction: float | None
    bottom_up_share: float | None
    medial_to_lateral_left: float | None
    medial_to_lateral_right: float | None
    up_total: float
    down_total: float
    left_total: float
    right_total: float
    peak_amplitude: float
    duration_s: float
    source_mean: np.ndarray
    sink_mean: np.ndarray
    dff_mean_map: np.ndarray
    trace: np.ndarray
    flow_up_trace: np.ndarray
    flow_down_trace: np.ndarray
    condition: str = ""


def _field_up_down(f: FlowField, flip=False):
    """Per-field upward / downward flow magnitudes (image-up = -u)."""
    u = -f.u if flip else f.u
    up = np.maximum(-u, 0.0)[f.valid].sum()
    down = np.maximum(u, 0.0)[f.valid].sum()
    return up, down


def directional_sums(seq: FlowSequence, flip=False):
    """Total upward, downward, leftward and rightward flow over a sequence.

    up and down partition the absolute vertical flow, left and right the
    absolute horizontal flow; image-up means decreasing row index unless
    flipped.
    """
    up = down = left = right = 0.0
    for f in seq.fields:
        fu, fd = _field_up_down(f, flip)
        up += fu
        down += fd
        left += np.maximum(-f.v, 0.0)[f.valid].sum()
        right += np.maximum(f.v, 0.0)[f.valid].sum()
    return up, down, left, right


def _ratio(num, den):
    return num / den if den > 0 else None


def flow_ratios(sums):
    """(vertical_fraction, bottom_up_share) from directional sums.

    Zero denominators yield None rather than NaN.
    """
    up, down, left, right = sums
    vertical_fraction = _ratio(up + down, up + down + left + right)
    bottom_up_share = _ratio(up, up + down)
    return vertical_fraction, bottom_up_share


def medial_to_lateral(seq: FlowSequence, midline_col):
    """Fraction of horizontal flow pointing away from the midline column.

    Decided per pixel: left of the midline, lateral means decreasing
    columns; right of it, increasing columns. Works for either hemisphere
    layout without a side label.
    """
    lateral = medial = 0.0
    for f in seq.fields:
        cols = np.arange(f.v.shape[1])[None, :]
        sign = np.where(cols < midline_col, -1.0, 1.0)
        away = np.maximum(sign * f.v, 0.0)
        toward = np.maximum(-sign * f.v, 0.0)
        lateral += away[f.valid].sum()
        medial += toward[f.valid].sum()
    return _ratio(lateral, lateral + medial)


def temporal_means(event, decompositions):
    """Time averages of the source map, sink map and event dF/F."""
    if not decompositions:
        raise ShapeMismatch("no decompositions supplied")
    shape = decompositions[0].O.shape
    if event.dffw.shape[1:] != shape:
        raise ShapeMismatch("event and decomposition spatial shapes differ")
    n = len(decompositions)
    source_mean = sum(d.O for d in decompositions) / n
    sink_mean = sum(d.I for d in decompositions) / n
    dff_mean_map = event.dffw.mean(axis=0)
    return source_mean, sink_mean, dff_mean_map


def resample_trace(trace, length):
    """Linear-interpolation resample of a 1-D trace to a fixed length."""
    trace = np.asarray(trace, dtype=np.float64)
    if trace.size == length:
        return trace.copy()
    if trace.size == 1:
        return np.full(length, trace[0])
    old = np.linspace(0.0, 1.0, trace.size)
    new = np.linspace(0.0, 1.0, length)
    return np.interp(new, old, trace)


def downsample_map(arr, size):
    """Block-average a 2-D map to the requested size (edge blocks padded)."""
    arr = np.asarray(arr, dtype=np.float64)
    H, W = arr.shape
    th, tw = size
    bh = -(-H // th)
    bw = -(-W // tw)
    padded = np.full((bh * th, bw * tw), np.nan)
    padded[:H, :W] = arr
    blocks = padded.reshape(th, bh, tw, bw)
    with np.errstate(invalid="ignore"):
        out = np.nanmean(blocks, axis=(1, 3))
    return np.nan_to_num(out)


def divergence_free_part(result):
    """The "flow" component: everything of the field except grad_phi."""
    return FlowField(
        u=result.rot_psi.u + result.harmonic.u,
        v=result.rot_psi.v + result.harmonic.v,
        valid=result.rot_psi.valid,
    )


def build_feature_vector(event, flow_seqs, decompositions, cfg: FeatureConfig | None = None,
                         condition=""):
    """Assemble the per-event FeatureVector.

    flow_seqs is the (left, right) pair of divergence-free FlowSequences;
    decompositions is the list of per-frame HelmholtzResults (combined
    across hemispheres or from the union mask).
    """
    cfg = cfg or FeatureConfig()
    left_seq, right_seq = flow_seqs
    combined = FlowSequence(
        fields=[
            FlowField(u=a.u + b.u, v=a.v + b.v, valid=a.valid | b.valid)
            for a, b in zip(left_seq.fields, right_seq.fields)
        ],
        fs=left_seq.fs,
    )

    sums = directional_sums(combined, flip=cfg.flip_vertical)
    vertical_fraction, bottom_up_share = flow_ratios(sums)

    W = combined.fields[0].v.shape[1] if combined.fields else 0
    midline = cfg.midline_col if cfg.midline_col is not None else W // 2
    m2l_left = medial_to_lateral(left_seq, midline)
    m2l_right = medial_to_lateral(right_seq, midline)

    source_mean, sink_mean, dff_mean_map = temporal_means(event, decompositions)

    per_frame_up = []
    per_frame_down = []
    for f in combined.fields:
        fu, fd = _field_up_down(f, cfg.flip_vertical)
        per_frame_up.append(fu)
        per_frame_down.append(fd)

    return FeatureVector(
        vertical_fraction=vertical_fraction,
        bottom_up_share=bottom_up_share,
        medial_to_lateral_left=m2l_left,
        medial_to_lateral_right=m2l_right,
        up_total=sums[0],
        down_total=sums[1],
        left_total=sums[2],
        right_total=sums[3],
        peak_amplitude=event.peak_amplitude,
        duration_s=event.duration_s,
        source_mean=downsample_map(source_mean, cfg.map_size),
        sink_mean=downsample_map(sink_mean, cfg.map_size),
        dff_mean_map=downsample_map(dff_mean_map, cfg.map_size),
        trace=resample_trace(event.mean_trace, cfg.trace_len),
        flow_up_trace=resample_trace(np.asarray(per_frame_up), cfg.trace_len),
        flow_down_trace=resample_trace(np.asarray(per_frame_down), cfg.trace_len),
        condition=condition,
    )
