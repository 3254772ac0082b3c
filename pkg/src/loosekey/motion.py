"""Pose feature layout, motion containers and the canonical motion file formats."""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .skeleton import Skeleton, forward_kinematics_batch

BINARY_MAGIC = b"LKMO"
FORMAT_VERSION = 1


class MotionFormatError(ValueError):
    """Raised on malformed motion files; message names the offending frame/field."""


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class PoseLayout:
    """Layout of one frame vector.

    Blocks, in order: rotations (J*6), root translation (3), shape (S),
    contact flags (C), global joint positions (J*3). Total dim D.
    """

    num_joints: int
    shape_dims: int = 0
    contact_dims: int = 4

    def __post_init__(self):
        if self.num_joints < 1:
            raise LayoutError("num_joints must be >= 1")
        if self.shape_dims < 0 or self.contact_dims < 0:
            raise LayoutError("shape/contact dims must be nonnegative")

    @property
    def dim(self) -> int:
        return 6 * self.num_joints + 3 + self.shape_dims + self.contact_dims + 3 * self.num_joints

    @property
    def rotations(self) -> slice:
        return slice(0, 6 * self.num_joints)

    @property
    def root_translation(self) -> slice:
        start = 6 * self.num_joints
        return slice(start, start + 3)

    @property
    def shape(self) -> slice:
        start = 6 * self.num_joints + 3
        return slice(start, start + self.shape_dims)

    @property
    def contacts(self) -> slice:
        start = 6 * self.num_joints + 3 + self.shape_dims
        return slice(start, start + self.contact_dims)

    @property
    def joint_positions(self) -> slice:
        start = 6 * self.num_joints + 3 + self.shape_dims + self.contact_dims
        return slice(start, start + 3 * self.num_joints)

    def to_dict(self) -> dict:
        return {
            "num_joints": self.num_joints,
            "shape_dims": self.shape_dims,
            "contact_dims": self.contact_dims,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PoseLayout":
        return cls(
            num_joints=int(d["num_joints"]),
            shape_dims=int(d.get("shape_dims", 0)),
            contact_dims=int(d.get("contact_dims", 0)),
        )


@dataclass(frozen=True)
class Pose:
    """A single frame vector tied to a layout."""

    layout: PoseLayout
    values: np.ndarray  # (D,)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.layout.dim,):
            raise LayoutError(f"pose length {vals.shape} != layout dim {self.layout.dim}")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class Motion:
    """Fixed-rate sequence of frame vectors."""

    layout: PoseLayout
    fps: float
    frames: np.ndarray  # (F, D)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != self.layout.dim:
            raise LayoutError(
                f"frames must be (F, {self.layout.dim}), got {frames.shape}"
            )
        if frames.shape[0] < 2:
            raise LayoutError("a motion needs at least 2 frames")
        if not np.all(np.isfinite(frames)):
            bad = np.argwhere(~np.isfinite(frames))[0]
            raise MotionFormatError(f"non-finite value at frame {bad[0]}, dim {bad[1]}")
        if self.fps <= 0:
            raise LayoutError("fps must be positive")
        frames = frames.copy()
        frames.flags.writeable = False
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    def rotations(self) -> np.ndarray:
        """(F, J, 6) view of the rotation block."""
        f = self.num_frames
        return self.frames[:, self.layout.rotations].reshape(f, self.layout.num_joints, 6)

    def root_translations(self) -> np.ndarray:
        return self.frames[:, self.layout.root_translation]

    def contacts(self) -> np.ndarray:
        return self.frames[:, self.layout.contacts]

    def joint_positions(self) -> np.ndarray:
        f = self.num_frames
        return self.frames[:, self.layout.joint_positions].reshape(f, self.layout.num_joints, 3)

    def pose(self, f: int) -> Pose:
        return Pose(layout=self.layout, values=self.frames[f])

    def with_frames(self, frames: np.ndarray) -> "Motion":
        return Motion(layout=self.layout, fps=self.fps, frames=frames)


def refresh_positions(motion: Motion, skeleton: Skeleton) -> Motion:
    """Recompute the redundant joint-position block from rotations + root translation."""
    if skeleton.num_joints != motion.layout.num_joints:
        raise LayoutError(
            f"skeleton has {skeleton.num_joints} joints, layout {motion.layout.num_joints}"
        )
    pos = forward_kinematics_batch(skeleton, motion.rotations(), motion.root_translations())
    frames = motion.frames.copy()
    frames[:, motion.layout.joint_positions] = pos.reshape(motion.num_frames, -1)
    return motion.with_frames(frames)


def write_motion(motion: Motion, path, skeleton: Skeleton | None = None) -> None:
    """Write a motion file; `.json` selects the textual form, anything else binary.

    The binary form quantizes samples to little-endian f32 (its storage dtype);
    the textual form keeps full double precision.
    """
    path = str(path)
    if path.endswith(".json"):
        if skeleton is None:
            raise MotionFormatError("textual motion form embeds the skeleton; pass one")
        doc = {
            "version": FORMAT_VERSION,
            "fps": motion.fps,
            "layout": motion.layout.to_dict(),
            "skeleton": skeleton.to_dict(),
            "frames": [[float(v) for v in row] for row in motion.frames],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)
    else:
        header = BINARY_MAGIC + struct.pack(
            "<IIIf", FORMAT_VERSION, motion.num_frames, motion.layout.dim, float(motion.fps)
        )
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(motion.frames, dtype="<f4").tobytes())


def read_motion(path, layout: PoseLayout | None = None) -> Motion:
    """Read either motion form. The binary form carries no layout, so one is required."""
    path = str(path)
    if path.endswith(".json"):
        motion, _ = read_motion_json(path)
        if layout is not None and motion.layout != layout:
            raise MotionFormatError(
                f"dimension mismatch: file layout {motion.layout.to_dict()} != expected {layout.to_dict()}"
            )
        return motion
    return _read_motion_binary(path, layout)


def read_motion_json(path) -> tuple[Motion, Skeleton]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise MotionFormatError(f"malformed motion JSON: {e}") from e
    for key in ("version", "fps", "layout", "skeleton", "frames"):
        if key not in doc:
            raise MotionFormatError(f"malformed header: missing field {key!r}")
    if doc["version"] != FORMAT_VERSION:
        raise MotionFormatError(f"unsupported version {doc['version']}")
    layout = PoseLayout.from_dict(doc["layout"])
    skeleton = Skeleton.from_dict(doc["skeleton"])
    rows = doc["frames"]
    for i, row in enumerate(rows):
        if len(row) != layout.dim:
            raise MotionFormatError(f"dimension mismatch at frame {i}: {len(row)} != {layout.dim}")
    frames = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(frames)):
        bad = np.argwhere(~np.isfinite(frames))[0]
        raise MotionFormatError(f"non-finite value at frame {bad[0]}, dim {bad[1]}")
    return Motion(layout=layout, fps=float(doc["fps"]), frames=frames), skeleton


def _read_motion_binary(path, layout: PoseLayout | None) -> Motion:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 20 or raw[:4] != BINARY_MAGIC:
        raise MotionFormatError("malformed header: bad magic")
    version, num_f, dim, fps = struct.unpack("<IIIf", raw[4:20])
    if version != FORMAT_VERSION:
        raise MotionFormatError(f"unsupported version {version}")
    expected = 20 + num_f * dim * 4
    if len(raw) != expected:
        raise MotionFormatError(
            f"dimension mismatch: file holds {len(raw) - 20} data bytes, header implies {expected - 20}"
        )
    if layout is None:
        raise MotionFormatError("binary motion form carries no layout; pass one")
    if layout.dim != dim:
        raise MotionFormatError(f"dimension mismatch: file D={dim}, layout D={layout.dim}")
    frames = np.frombuffer(raw[20:], dtype="<f4").reshape(num_f, dim).astype(np.float64)
    if not np.all(np.isfinite(frames)):
        bad = np.argwhere(~np.isfinite(frames))[0]
        raise MotionFormatError(f"non-finite value at frame {bad[0]}, dim {bad[1]}")
    return Motion(layout=layout, fps=float(fps), frames=frames)
