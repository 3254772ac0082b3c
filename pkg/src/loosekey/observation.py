"""Keyframe constraints, timeline placement and linear-spline infilling.

Placing a keyframe set on the timeline yields the observation signal: a
motion-shaped buffer that is only defined where the mask is true. Infilling
replaces the undefined rows with straight lines between the bounding
constrained frames (constant hold before the first / after the last).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .motion import Motion, Pose, PoseLayout


class ObservationError(ValueError):
    pass


@dataclass(frozen=True)
class Keyframe:
    frame: int
    pose: Pose


@dataclass(frozen=True)
class KeyframeSet:
    """Sparse keyframe constraints on a timeline of `length` frames."""

    entries: tuple[Keyframe, ...]
    length: int
    fps: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ObservationError("a keyframe set needs at least one entry")
        if self.length < 2:
            raise ObservationError("timeline length must be >= 2")
        layout = self.entries[0].pose.layout
        prev = -1
        for e in self.entries:
            if not 0 <= e.frame < self.length:
                raise ObservationError(f"keyframe index {e.frame} outside [0, {self.length})")
            if e.frame <= prev:
                raise ObservationError("keyframe indices must be strictly increasing")
            if e.pose.layout != layout:
                raise ObservationError("keyframes must share one layout")
            prev = e.frame

    @property
    def layout(self) -> PoseLayout:
        return self.entries[0].pose.layout

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "F": self.length,
            "fps": self.fps,
            "keyframes": [
                {"frame": e.frame, "pose": [float(v) for v in e.pose.values]}
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, layout: PoseLayout) -> "KeyframeSet":
        for key in ("F", "keyframes"):
            if key not in d:
                raise ObservationError(f"keyframe set missing field {key!r}")
        entries = tuple(
            Keyframe(frame=int(k["frame"]), pose=Pose(layout=layout, values=np.asarray(k["pose"])))
            for k in sorted(d["keyframes"], key=lambda k: int(k["frame"]))
        )
        return cls(entries=entries, length=int(d["F"]), fps=float(d.get("fps", 30.0)))


def read_keyframes(path, layout: PoseLayout) -> KeyframeSet:
    with open(path) as fh:
        return KeyframeSet.from_dict(json.load(fh), layout)


def write_keyframes(keys: KeyframeSet, path) -> None:
    with open(path, "w") as fh:
        json.dump(keys.to_dict(), fh)


@dataclass(frozen=True)
class ObservationSignal:
    """Partially defined motion: rows where mask is false hold zeros and must
    not be read before infilling. Constructed with at least one constrained
    frame except for window slices produced by the longform splicer."""

    layout: PoseLayout
    fps: float
    buffer: np.ndarray  # (F, D)
    mask: np.ndarray  # (F,) bool

    def __post_init__(self):
        buf = np.asarray(self.buffer, dtype=np.float64).copy()
        mask = np.asarray(self.mask, dtype=bool).copy()
        if buf.ndim != 2 or buf.shape[1] != self.layout.dim:
            raise ObservationError(f"buffer must be (F, {self.layout.dim}), got {buf.shape}")
        if mask.shape != (buf.shape[0],):
            raise ObservationError("mask length must match the buffer")
        buf.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "buffer", buf)
        object.__setattr__(self, "mask", mask)

    @property
    def num_frames(self) -> int:
        return self.buffer.shape[0]

    def constrained_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


def place_on_timeline(keys: KeyframeSet, num_frames: int | None = None) -> ObservationSignal:
    """Drop keyposes onto an undefined timeline.

    Contact flags of the observation are forced to 0: contact is unknown in
    unconstrained regions, so the condition never claims it.
    """
    num_frames = keys.length if num_frames is None else num_frames
    if num_frames < keys.length or any(e.frame >= num_frames for e in keys.entries):
        raise ObservationError("keyframe index out of range for the requested timeline")
    layout = keys.layout
    buf = np.zeros((num_frames, layout.dim))
    mask = np.zeros(num_frames, dtype=bool)
    for e in keys.entries:
        buf[e.frame] = e.pose.values
        mask[e.frame] = True
    buf[:, layout.contacts] = 0.0
    return ObservationSignal(layout=layout, fps=keys.fps, buffer=buf, mask=mask)


def infill_frames(buffer: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Linear infill of a masked buffer; constrained rows pass through bit-exactly."""
    mask = np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ObservationError("cannot infill a signal with zero constrained frames")
    out = np.array(buffer, dtype=np.float64)
    out[: idx[0]] = buffer[idx[0]]
    out[idx[-1] + 1 :] = buffer[idx[-1]]
    for a, b in zip(idx[:-1], idx[1:]):
        if b - a < 2:
            continue
        span = b - a
        for f in range(a + 1, b):
            u = (f - a) / span
            out[f] = (1.0 - u) * buffer[a] + u * buffer[b]
    out[idx] = buffer[idx]
    return out


def infill_linear(signal: ObservationSignal) -> Motion:
    """Fully defined motion from an observation signal via linear-spline infilling."""
    frames = infill_frames(signal.buffer, signal.mask)
    return Motion(layout=signal.layout, fps=signal.fps, frames=frames)


def condition_frames(signal: ObservationSignal, mask_channel: bool = False) -> np.ndarray:
    """Infilled condition buffer, optionally with the mask appended as one channel.

    The paper's model never sees which frames were constrained; the extra
    channel is off by default and exists as an explicit experiment knob.
    """
    frames = infill_frames(signal.buffer, signal.mask)
    if not mask_channel:
        return frames
    return np.concatenate([frames, signal.mask.astype(np.float64)[:, None]], axis=1)
