"""Synthetic recordings and vector fields with known ground truth."""

import numpy as np
from dataclasses import dataclass, field

from .errors import ScheduleOverlap, SupportViolation
from .flow import FlowField
from .signal import Recording


def _gaussian_2d(shape, center, sigma):
    rows = np.arange(shape[0])[:, None]
    cols = np.arange(shape[1])[None, :]
    return np.exp(-((rows - center[0]) ** 2 + (cols - center[1]) ** 2) / (2 * sigma ** 2))


def make_translating_blob(shape=(64, 64), velocity=(0.5, 0.0), n_frames=10,
                          sigma_blob=8.0, amplitude=1.0, background=0.0):
    """Gaussian blob translated by analytic subpixel evaluation.

    No image resampling is involved, so the uniform ground-truth flow
    (velocity in px/frame, row then column) is exact. Returns
    (stack, ground_truth dict).
    """
    vr, vc = velocity
    if max(abs(vr), abs(vc)) > 2.0:
        raise ValueError("velocity above small-displacement validity (|v| <= 2)")
    center0 = ((shape[0] - 1) / 2.0 - vr * (n_frames - 1) / 2.0,
               (shape[1] - 1) / 2.0 - vc * (n_frames - 1) / 2.0)
    stack = np.empty((n_frames, *shape))
    for t in range(n_frames):
        c = (center0[0] + vr * t, center0[1] + vc * t)
        stack[t] = background + amplitude * _gaussian_2d(shape, c, sigma_blob)
    return stack, {"velocity": (vr, vc), "sigma": sigma_blob, "center0": center0}


def make_fig2b_stimulus(shape=(64, 64), n_frames=20, trend_direction=(1.0, 0.0),
                        source_center=(20, 40), trend_rate=0.01, source_rate=0.05,
                        source_sigma=4.0, baseline=1.0):
    """Global intensity ramp plus a focal spot of growing intensity.

    The ramp grows along trend_direction over time (a wave sweeping in
    from one side); the focal Gaussian at source_center grows linearly.
    Ground truth records the drift direction and the source center.
    """
    dr, dc = trend_direction
    norm = np.hypot(dr, dc)
    if norm > 0:
        dr, dc = dr / norm, dc / norm
    rows = np.arange(shape[0])[:, None]
    cols = np.arange(shape[1])[None, :]
    # ramp coordinate increases against the travel direction, so the
    # high edge is where the wave comes from
    coord = -(rows * dr + cols * dc)
    coord = coord - coord.min()
    coord = coord / max(coord.max(), 1e-12)

    spot = _gaussian_2d(shape, source_center, source_sigma)
    stack = np.empty((n_frames, *shape))
    for t in range(n_frames):
        stack[t] = baseline + trend_rate * t * coord + source_rate * t / max(n_frames - 1, 1) * spot
    return stack, {
        "trend_direction": (dr, dc),
        "source_center": tuple(source_center),
        "trend_rate": trend_rate,
        "source_rate": source_rate,
    }


def _bump(shape, center, radius):
    """C-infinity bump, identically zero outside the given radius."""
    rows = np.arange(shape[0])[:, None]
    cols = np.arange(shape[1])[None, :]
    r2 = ((rows - center[0]) ** 2 + (cols - center[1]) ** 2) / radius ** 2
    out = np.zeros(shape)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


def make_manufactured_field(kind, mask, center=None, radius=None, scale=1.0):
    """Compactly supported gradient or rotational field with its potential.

    kind is "gradient" (returns grad(phi*)) or "rotational" (returns
    J grad(psi*)). The potential is a smooth bump well inside the mask;
    SupportViolation is raised if it reaches within 2 px of the boundary.
    """
    mask = np.asarray(mask, dtype=bool)
    H, W = mask.shape
    if center is None:
        center = ((H - 1) / 2.0, (W - 1) / 2.0)
    if radius is None:
        radius = min(H, W) / 2.0 - 4.0
    pot = scale * _bump(mask.shape, center, radius)

    from scipy.ndimage import binary_erosion
    interior = binary_erosion(mask, iterations=2, border_value=0)
    if np.any(np.abs(pot[~interior]) >= 1e-12 * max(abs(scale), 1e-300)):
        raise SupportViolation("potential not compactly supported inside mask")

    dr = np.gradient(pot, axis=0)
    dc = np.gradient(pot, axis=1)
    if kind == "gradient":
        f = FlowField(u=np.where(mask, dr, 0.0), v=np.where(mask, dc, 0.0), valid=mask.copy())
    elif kind == "rotational":
        f = FlowField(u=np.where(mask, -dc, 0.0), v=np.where(mask, dr, 0.0), valid=mask.copy())
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return f, pot


@dataclass
class EventSpec:
    onset_s: float
    duration_s: float
    amplitude: float
    source_center: tuple = (20, 32)
    trend_direction: tuple = (1.0, 0.0)


def make_recording(shape=(32, 64), fs=100.0, duration_s=30.0, schedule=(),
                   baseline=100.0, noise_sigma=0.0, heartbeat_amplitude=0.0,
                   heartbeat_hz=15.0, condition="synth", seed=0):
    """Multi-event synthetic Recording with a ground-truth sidecar.

    Each scheduled event is a fig2b-style wave (amplitude is the peak
    fractional change); optional additive Gaussian noise and a global
    heartbeat sinusoid contaminate the stack. Hemisphere masks split the
    image at the vertical midline.
    """
    n_frames = int(round(duration_s * fs))
    rng = np.random.default_rng(seed)
    stack = np.full((n_frames, *shape), baseline)

    events = sorted(schedule, key=lambda e: e.onset_s)
    truth = []
    prev_end = -1.0
    for ev in events:
        if ev.onset_s < prev_end:
            raise ScheduleOverlap("event schedule overlaps")
        prev_end = ev.onset_s + ev.duration_s
        on = int(round(ev.onset_s * fs))
        off = min(int(round((ev.onset_s + ev.duration_s) * fs)), n_frames)
        n_ev = off - on
        spot = _gaussian_2d(shape, ev.source_center, min(shape) / 6.0)
        # flat-top profile normalized to unit spatial mean, so the peak
        # of the spatial-mean dF/F equals the scheduled amplitude
        profile = 0.5 + 0.5 * spot
        profile /= profile.mean()
        # sharp rise/fall (2 frames) keeps threshold crossings within
        # a couple of frames of the scheduled onset/offset
        edge = max(int(round(0.02 * fs)), 1)
        for i, t in enumerate(range(on, off)):
            env = min(1.0, (i + 1) / edge, (n_ev - i) / edge)
            stack[t] += baseline * ev.amplitude * env * profile
        truth.append({
            "onset_frame": on, "offset_frame": off,
            "amplitude": ev.amplitude,
            "source_center": list(ev.source_center),
        })

    if heartbeat_amplitude > 0:
        t = np.arange(n_frames) / fs
        beat = heartbeat_amplitude * np.sin(2 * np.pi * heartbeat_hz * t)
        stack += baseline * beat[:, None, None]
    if noise_sigma > 0:
        stack += baseline * noise_sigma * rng.standard_normal(stack.shape)

    mask_left = np.zeros(shape, dtype=bool)
    mask_right = np.zeros(shape, dtype=bool)
    mid = shape[1] // 2
    mask_left[:, :mid] = True
    mask_right[:, mid:] = True

    rec = Recording(frames=stack, fs=fs, mask_left=mask_left,
                    mask_right=mask_right, condition=condition)
    return rec, {"events": truth, "heartbeat_hz": heartbeat_hz if heartbeat_amplitude > 0 else None,
                 "seed": seed}
