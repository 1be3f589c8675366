"""Raw stack normalization, filtering and slow-wave event segmentation."""

import numpy as np
from dataclasses import dataclass, field
from scipy.signal import periodogram

from .errors import (
    BandOutOfRange,
    EmptyMask,
    ShapeMismatch,
    ZeroBaseline,
)


@dataclass
class Recording:
    """A widefield fluorescence stack with per-hemisphere masks.

    frames: (T, H, W) non-negative intensities, arbitrary units.
    fs: sampling rate in Hz.
    mask_left / mask_right: boolean (H, W) hemisphere masks, disjoint.
    condition: experimental condition label (e.g. isoflurane level).
    aux: optional 1-D reference series aligned to frames (breathing etc.).
    """

    frames: np.ndarray
    fs: float
    mask_left: np.ndarray
    mask_right: np.ndarray
    condition: str = ""
    aux: np.ndarray | None = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[0] < 2:
            raise ShapeMismatch("frames must be (T, H, W) with T >= 2")
        if self.fs <= 0:
            raise ValueError("fs must be positive")
        self.mask_left = np.asarray(self.mask_left, dtype=bool)
        self.mask_right = np.asarray(self.mask_right, dtype=bool)
        spatial = self.frames.shape[1:]
        if self.mask_left.shape != spatial or self.mask_right.shape != spatial:
            raise ShapeMismatch("mask shape does not match frames")
        if np.any(self.mask_left & self.mask_right):
            raise ValueError("hemisphere masks overlap")
        if self.aux is not None:
            self.aux = np.asarray(self.aux, dtype=np.float64)

    @property
    def mask(self):
        """Union of both hemisphere masks."""
        return self.mask_left | self.mask_right


@dataclass
class Event:
    """One segmented slow-wave window of a recording."""

    onset_frame: int
    offset_frame: int
    dffw: np.ndarray        # (n_frames, H, W) event-relative dF_w/F_w
    baseline: np.ndarray    # (H, W) event baseline F_w0
    mean_trace: np.ndarray  # spatial mean of dffw per frame
    duration_s: float
    peak_amplitude: float

    @property
    def n_frames(self):
        return self.offset_frame - self.onset_frame


@dataclass
class BaselineSpec:
    """How the recording baseline F0 is formed from the pixel traces."""

    method: str = "percentile"  # "percentile" or "mean"
    percentile: float = 10.0


@dataclass
class SegmentConfig:
    """Hysteresis thresholding parameters for event segmentation."""

    k_on: float = 1.0
    k_off: float = 0.5
    min_duration: float = 0.1   # seconds
    merge_gap: float = 0.1      # seconds
    band: tuple = (10.0, 20.0)  # heartbeat band-stop, Hz
    baseline_window_s: float = 0.2
    min_baseline_frames: int = 5


def compute_baseline(frames, spec: BaselineSpec):
    """Per-pixel baseline F0 over the whole recording."""
    if spec.method == "percentile":
        return np.percentile(frames, spec.percentile, axis=0)
    if spec.method == "mean":
        return frames.mean(axis=0)
    raise ValueError(f"unknown baseline method {spec.method!r}")


def compute_dff(rec: Recording, baseline: BaselineSpec | None = None):
    """Fractional fluorescence change (F_t - F0) / F0, per pixel.

    Raises ZeroBaseline if any in-mask baseline pixel is <= 0.
    """
    baseline = baseline or BaselineSpec()
    f0 = compute_baseline(rec.frames, baseline)
    mask = rec.mask
    if np.any(f0[mask] <= 0):
        raise ZeroBaseline("non-positive baseline inside mask")
    with np.errstate(divide="ignore", invalid="ignore"):
        dff = (rec.frames - f0) / f0
    dff[:, ~mask] = 0.0
    return dff


def bandstop_filter(series, fs, band=(10.0, 20.0), transition=0.5):
    """Zero-phase FFT-domain band-stop filter.

    Frequencies inside [low, high] are zeroed; raised-cosine edges of
    width `transition` Hz avoid hard spectral discontinuities. Exactly
    linear and phase-free by construction.
    """
    series = np.asarray(series, dtype=np.float64)
    low, high = band
    if not (0.0 < low < high < fs / 2.0):
        raise BandOutOfRange(f"band {band} invalid for fs={fs}")
    if series.size < 8:
        raise ValueError("series too short to filter")

    freqs = np.fft.rfftfreq(series.size, d=1.0 / fs)
    gain = np.ones_like(freqs)
    in_stop = (freqs >= low) & (freqs <= high)
    gain[in_stop] = 0.0
    lo_edge = (freqs >= low - transition) & (freqs < low)
    gain[lo_edge] = 0.5 * (1 + np.cos(np.pi * (freqs[lo_edge] - (low - transition)) / transition))
    hi_edge = (freqs > high) & (freqs <= high + transition)
    gain[hi_edge] = 0.5 * (1 - np.cos(np.pi * (freqs[hi_edge] - high) / transition))

    return np.fft.irfft(np.fft.rfft(series) * gain, n=series.size)


def spatial_mean(stack, mask):
    """Mean over in-mask pixels for every frame."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("spatial mean over empty mask")
    stack = np.asarray(stack)
    if stack.shape[1:] != mask.shape:
        raise ShapeMismatch("stack and mask shapes differ")
    return stack[:, mask].mean(axis=1)


def detrend(series):
    """Remove the least-squares linear trend (and mean) from a series."""
    series = np.asarray(series, dtype=np.float64)
    if series.size < 2:
        raise ValueError("need at least 2 samples")
    t = np.arange(series.size, dtype=np.float64)
    slope, intercept = np.polyfit(t, series, 1)
    return series - (slope * t + intercept)


def segment_events(series, fs, cfg: SegmentConfig | None = None):
    """Hysteresis thresholding of the detrended mean trace.

    Onsets open at mu + k_on*sigma and each segment extends outward to
    where the series falls below mu + k_off*sigma. Segments shorter than
    min_duration are dropped; gaps below merge_gap are merged. Returns a
    sorted list of disjoint (onset, offset) frame intervals, offset
    exclusive.
    """
    cfg = cfg or SegmentConfig()
    series = np.asarray(series, dtype=np.float64)
    mu, sigma = series.mean(), series.std()
    if sigma == 0:
        return []
    thr_on = mu + cfg.k_on * sigma
    thr_off = mu + cfg.k_off * sigma

    above_off = series > thr_off
    segments = []
    i = 0
    n = series.size
    while i < n:
        if series[i] > thr_on:
            start = i
            while start > 0 and above_off[start - 1]:
                start -= 1
            end = i
            while end < n and above_off[end]:
                end += 1
            if not segments or start > segments[-1][1]:
                segments.append([start, end])
            else:
                segments[-1][1] = max(segments[-1][1], end)
            i = end
        else:
            i += 1

    merge_frames = cfg.merge_gap * fs
    merged = []
    for seg in segments:
        if merged and seg[0] - merged[-1][1] < merge_frames:
            merged[-1][1] = seg[1]
        else:
            merged.append(seg)

    min_frames = cfg.min_duration * fs
    return [(a, b) for a, b in merged if b - a >= min_frames]


def extract_event(rec: Recording, onset, offset, cfg: SegmentConfig | None = None):
    """Build an Event with its own pre-onset baseline F_w0.

    F_w0 is the per-pixel mean over the baseline window (default 200 ms)
    ending at onset; with fewer than min_baseline_frames pre-onset frames
    available it falls back to the first event frame.
    """
    cfg = cfg or SegmentConfig()
    T = rec.frames.shape[0]
    if not (0 <= onset < offset <= T):
        raise ValueError(f"invalid event range [{onset}, {offset}) for {T} frames")

    n_base = int(round(cfg.baseline_window_s * rec.fs))
    if onset >= cfg.min_baseline_frames and n_base > 0:
        lo = max(0, onset - n_base)
        f_w0 = rec.frames[lo:onset].mean(axis=0)
    else:
        f_w0 = rec.frames[onset].copy()

    mask = rec.mask
    if np.any(f_w0[mask] <= 0):
        raise ZeroBaseline("non-positive event baseline inside mask")

    window = rec.frames[onset:offset]
    with np.errstate(divide="ignore", invalid="ignore"):
        dffw = (window - f_w0) / f_w0
    dffw[:, ~mask] = 0.0

    mean_trace = spatial_mean(dffw, mask)
    return Event(
        onset_frame=int(onset),
        offset_frame=int(offset),
        dffw=dffw,
        baseline=f_w0,
        mean_trace=mean_trace,
        duration_s=(offset - onset) / rec.fs,
        peak_amplitude=float(mean_trace.max()),
    )


def exclude_events(events, aux=None, min_amplitude=0.05, max_aux_corr=0.3):
    """Drop low-amplitude events and events correlated with the aux signal.

    Keeps events with peak_amplitude >= min_amplitude and, when aux is
    present, Pearson r between the mean trace and the aux segment of the
    event window <= max_aux_corr. Surviving events are returned unchanged.
    """
    kept = []
    for ev in events:
        if ev.peak_amplitude < min_amplitude:
            continue
        if aux is not None:
            seg = np.asarray(aux, dtype=np.float64)[ev.onset_frame:ev.offset_frame]
            if seg.size == ev.mean_trace.size and seg.std() > 0 and ev.mean_trace.std() > 0:
                r = np.corrcoef(ev.mean_trace, seg)[0, 1]
                if r > max_aux_corr:
                    continue
        kept.append(ev)
    return kept


def power_spectrum(series, fs):
    """One-sided periodogram of a 1-D series."""
    series = np.asarray(series, dtype=np.float64)
    if series.size < 8:
        raise ValueError("series too short")
    return periodogram(series, fs=fs)


def peak_frequency(series, fs):
    """Frequency of maximal power, excluding DC."""
    freqs, power = power_spectrum(series, fs)
    idx = np.argmax(power[1:]) + 1
    return freqs[idx]
