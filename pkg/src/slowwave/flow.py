"""Horn-Schunck dense optical flow on masked frame pairs.

Axis convention: u is the vertical (row) component, positive towards
increasing row index (image-down); v is the horizontal (column)
component, positive towards increasing column index (image-right).
"""

import numpy as np
from dataclasses import dataclass

from .errors import EmptyMask, NonFiniteInput, ShapeMismatch


@dataclass
class HsConfig:
    alpha: float = 0.1      # smoothness weight (alpha^2 multiplies e_s)
    max_iters: int = 3000
    tol: float = 1e-6       # mean update magnitude, px

    def __post_init__(self):
        if self.alpha <= 0 or self.max_iters < 1 or self.tol < 0:
            raise ValueError("invalid HsConfig")


@dataclass
class FlowField:
    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if not (self.u.shape == self.v.shape == self.valid.shape):
            raise ShapeMismatch("u, v, valid must share one shape")


@dataclass
class FlowSequence:
    fields: list
    fs: float

    def __len__(self):
        return len(self.fields)


def gradients(frame_a, frame_b):
    """Spatio-temporal derivatives via the 4-point cube-average stencil.

    Each derivative averages forward differences over the 2x2x2 cube
    spanned by the two frames; edge rows/columns are replicated so the
    output keeps the input shape. Returns (Ix, Iy, It) where Ix is the
    row derivative, Iy the column derivative and It the frame difference
    (b - a).
    """
    a = np.asarray(frame_a, dtype=np.float64)
    b = np.asarray(frame_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch("frame shapes differ")
    if a.ndim != 2 or min(a.shape) < 2:
        raise ShapeMismatch("frames must be 2-D, at least 2x2")

    ap = np.pad(a, ((0, 1), (0, 1)), mode="edge")
    bp = np.pad(b, ((0, 1), (0, 1)), mode="edge")

    ix = 0.25 * (
        ap[1:, :-1] - ap[:-1, :-1] + ap[1:, 1:] - ap[:-1, 1:]
        + bp[1:, :-1] - bp[:-1, :-1] + bp[1:, 1:] - bp[:-1, 1:]
    )
    iy = 0.25 * (
        ap[:-1, 1:] - ap[:-1, :-1] + ap[1:, 1:] - ap[1:, :-1]
        + bp[:-1, 1:] - bp[:-1, :-1] + bp[1:, 1:] - bp[1:, :-1]
    )
    it = 0.25 * (
        bp[:-1, :-1] - ap[:-1, :-1] + bp[1:, :-1] - ap[1:, :-1]
        + bp[:-1, 1:] - ap[:-1, 1:] + bp[1:, 1:] - ap[1:, 1:]
    )
    return ix, iy, it


# 8-neighbour averaging weights: 1/6 cardinal, 1/12 diagonal.
_NEIGHBOURS = [
    (-1, 0, 1 / 6), (1, 0, 1 / 6), (0, -1, 1 / 6), (0, 1, 1 / 6),
    (-1, -1, 1 / 12), (-1, 1, 1 / 12), (1, -1, 1 / 12), (1, 1, 1 / 12),
]


def _masked_average(field, mask, weight_sum, shifted_masks):
    """Neighbourhood average restricted to in-mask pixels, renormalized."""
    acc = np.zeros_like(field)
    for (dr, dc, w), nb_mask in zip(_NEIGHBOURS, shifted_masks):
        shifted = np.zeros_like(field)
        src = field[max(dr, 0) or None:field.shape[0] + min(dr, 0),
                    max(dc, 0) or None:field.shape[1] + min(dc, 0)]
        shifted[max(-dr, 0) or None:field.shape[0] + min(-dr, 0),
                max(-dc, 0) or None:field.shape[1] + min(-dc, 0)] = src
        acc += w * shifted * nb_mask
    return acc / weight_sum


def _shifted_mask(mask, dr, dc):
    out = np.zeros_like(mask)
    src = mask[max(dr, 0) or None:mask.shape[0] + min(dr, 0),
               max(dc, 0) or None:mask.shape[1] + min(dc, 0)]
    out[max(-dr, 0) or None:mask.shape[0] + min(-dr, 0),
        max(-dc, 0) or None:mask.shape[1] + min(-dc, 0)] = src
    return out


def horn_schunck(frame_a, frame_b, mask, cfg: HsConfig | None = None):
    """Iterative Horn-Schunck flow between two frames on a masked domain.

    Jacobi-style simultaneous updates (order-independent, deterministic);
    neighbour averages use only in-mask pixels with renormalized weights,
    so no flow bleeds in from the background. Stops when the mean update
    magnitude drops below cfg.tol or after cfg.max_iters sweeps.
    """
    cfg = cfg or HsConfig()
    a = np.asarray(frame_a, dtype=np.float64)
    b = np.asarray(frame_b, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("horn_schunck on empty mask")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise NonFiniteInput("frames contain non-finite values")

    ix, iy, it = gradients(a, b)
    ix = np.where(mask, ix, 0.0)
    iy = np.where(mask, iy, 0.0)
    it = np.where(mask, it, 0.0)

    shifted_masks = [_shifted_mask(mask, dr, dc).astype(np.float64)
                     for dr, dc, _ in _NEIGHBOURS]
    weight_sum = np.zeros(mask.shape)
    for (dr, dc, w), nb in zip(_NEIGHBOURS, shifted_masks):
        weight_sum += w * nb
    # isolated pixels keep a zero neighbourhood average
    weight_sum[weight_sum == 0] = 1.0

    denom = cfg.alpha ** 2 + ix ** 2 + iy ** 2
    u = np.zeros(mask.shape)
    v = np.zeros(mask.shape)
    n_valid = mask.sum()

    for _ in range(cfg.max_iters):
        ubar = _masked_average(u, mask, weight_sum, shifted_masks)
        vbar = _masked_average(v, mask, weight_sum, shifted_masks)
        drive = (ix * ubar + iy * vbar + it) / denom
        u_new = np.where(mask, ubar - ix * drive, 0.0)
        v_new = np.where(mask, vbar - iy * drive, 0.0)
        delta = np.sqrt((u_new - u) ** 2 + (v_new - v) ** 2)[mask].sum() / n_valid
        u, v = u_new, v_new
        if delta < cfg.tol:
            break

    return FlowField(u=u, v=v, valid=mask.copy())


def hs_energy(field: FlowField, frame_a, frame_b, alpha):
    """Discrete Horn-Schunck energy e_f + alpha^2 * e_s of a flow field."""
    ix, iy, it = gradients(frame_a, frame_b)
    m = field.valid
    e_f = ((ix * field.u + iy * field.v + it) ** 2)[m].sum()

    e_s = 0.0
    for comp in (field.u, field.v):
        dr = np.diff(comp, axis=0)
        dc = np.diff(comp, axis=1)
        pair_r = m[1:, :] & m[:-1, :]
        pair_c = m[:, 1:] & m[:, :-1]
        e_s += (dr ** 2)[pair_r].sum() + (dc ** 2)[pair_c].sum()
    return e_f + alpha ** 2 * e_s


def flow_sequence(event, masks, cfg: HsConfig | None = None, fs=None):
    """Per-hemisphere flow for every consecutive frame pair of an event.

    masks is a (left, right) pair; returns (left_seq, right_seq).
    """
    cfg = cfg or HsConfig()
    stack = event.dffw
    if stack.shape[0] < 2:
        raise ValueError("event needs at least 2 frames")
    fs = fs if fs is not None else 1.0

    sequences = []
    for mask in masks:
        fields = [
            horn_schunck(stack[t], stack[t + 1], mask, cfg)
            for t in range(stack.shape[0] - 1)
        ]
        sequences.append(FlowSequence(fields=fields, fs=fs))
    return tuple(sequences)
