"""Global time-warp operator.

A warp is parameterized by an F-vector of per-frame slopes. A cumulative sum
reconstructs the backward time map: output frame f samples the input at
t(f) = sum(slopes[1:f+1]), with t(0) = 0 anchoring the origin (slot 0 of the
slope vector is ignored by the map). Sample times are clamped to [0, F-1] and
the pose at fractional times comes from linear interpolation between the two
neighboring frames.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .motion import Motion

DEFAULT_SLOPE_FLOOR = 1e-3


class WarpError(ValueError):
    pass


@dataclass(frozen=True)
class WarpFunction:
    slopes: np.ndarray  # (F,), all >= floor
    floor: float

    def __post_init__(self):
        slopes = np.asarray(self.slopes, dtype=np.float64)
        if slopes.ndim != 1 or slopes.shape[0] < 2:
            raise WarpError(f"slope vector must be 1-D with F >= 2, got {slopes.shape}")
        if self.floor <= 0:
            raise WarpError("slope floor must be positive")
        if not np.all(np.isfinite(slopes)):
            raise WarpError("non-finite slope values")
        if np.any(slopes < self.floor):
            raise WarpError("stored slopes must not undercut the floor")
        slopes = slopes.copy()
        slopes.flags.writeable = False
        object.__setattr__(self, "slopes", slopes)

    @property
    def num_frames(self) -> int:
        return self.slopes.shape[0]

    def times(self) -> np.ndarray:
        """Unclamped sample times; t[0] = 0, strictly increasing afterwards."""
        t = np.empty(self.num_frames)
        t[0] = 0.0
        np.cumsum(self.slopes[1:], out=t[1:])
        return t

    def sample_times(self) -> np.ndarray:
        """Times clamped into the valid frame range [0, F-1]."""
        return np.clip(self.times(), 0.0, self.num_frames - 1.0)


def identity_warp(num_frames: int, floor: float = DEFAULT_SLOPE_FLOOR) -> WarpFunction:
    return WarpFunction(slopes=np.ones(num_frames), floor=floor)


def warp_from_slopes(raw: np.ndarray, floor: float = DEFAULT_SLOPE_FLOOR) -> WarpFunction:
    """Floor raw (pre-activation) slopes elementwise to guarantee a monotone map."""
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise WarpError("non-finite raw slopes")
    return WarpFunction(slopes=np.maximum(raw, floor), floor=floor)


def warp_frames(w: WarpFunction, frames: np.ndarray) -> np.ndarray:
    """Resample a (F, D) buffer at the warp's sample times (linear interpolation)."""
    frames = np.asarray(frames, dtype=np.float64)
    num_f = frames.shape[0]
    if w.num_frames != num_f:
        raise WarpError(f"warp length {w.num_frames} != frame count {num_f}")
    t = w.sample_times()
    lo = np.minimum(np.floor(t).astype(np.int64), num_f - 2)
    u = (t - lo)[:, None]
    return (1.0 - u) * frames[lo] + u * frames[lo + 1]


def apply_warp(w: WarpFunction, motion: Motion) -> Motion:
    """Retimed motion; frame f is the input interpolated at time t(f)."""
    return motion.with_frames(warp_frames(w, motion.frames))


def warp_gradient(raw: np.ndarray, frames: np.ndarray, floor: float = DEFAULT_SLOPE_FLOOR) -> np.ndarray:
    """Analytic gradient of sum(warp_frames) w.r.t. the raw slope vector.

    Piecewise-linear interpolation gives d(out_f)/dt(f) = X[a+1] - X[a]; the
    cumulative sum routes that to every raw slope at or before f that sits
    above the floor. Valid away from the floor, clamp and integer-time kinks.
    """
    raw = np.asarray(raw, dtype=np.float64)
    frames = np.asarray(frames, dtype=np.float64)
    num_f = frames.shape[0]
    w = warp_from_slopes(raw, floor)
    t = w.times()
    tc = np.clip(t, 0.0, num_f - 1.0)
    lo = np.minimum(np.floor(tc).astype(np.int64), num_f - 2)
    # d(sum_d out[f, d]) / dt(f); zero where the clamp is active
    seg = (frames[lo + 1] - frames[lo]).sum(axis=1)
    seg[(t <= 0.0) | (t >= num_f - 1.0)] = 0.0
    # grad w.r.t. slope[i] accumulates every f >= i; slot 0 never enters the map
    tail = np.cumsum(seg[::-1])[::-1]
    grad = np.zeros(num_f)
    grad[1:] = tail[1:]
    grad[raw <= floor] = 0.0
    grad[0] = 0.0
    return grad


def warp_jacobian_check(
    w_raw: np.ndarray,
    motion: Motion,
    h: float = 1e-4,
    floor: float = DEFAULT_SLOPE_FLOOR,
) -> float:
    """Max relative error between the analytic gradient and central differences.

    Inputs should keep all slopes above floor + h and sample times away from
    clamp boundaries and integer kinks; this is a diagnostic, not a guard.
    """
    w_raw = np.asarray(w_raw, dtype=np.float64)
    frames = motion.frames
    analytic = warp_gradient(w_raw, frames, floor)
    err = 0.0
    for i in range(w_raw.shape[0]):
        bumped = w_raw.copy()
        bumped[i] = w_raw[i] + h
        g_plus = warp_frames(warp_from_slopes(bumped, floor), frames).sum()
        bumped[i] = w_raw[i] - h
        g_minus = warp_frames(warp_from_slopes(bumped, floor), frames).sum()
        fd = (g_plus - g_minus) / (2.0 * h)
        err = max(err, abs(analytic[i] - fd) / (abs(fd) + 1e-8))
    return err
