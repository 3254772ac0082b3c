"""Skeleton definition, 6D rotation handling and forward kinematics.

Rotations are stored exclusively in the 6D continuous representation
(two 3-vectors that Gram-Schmidt orthonormalizes into the first two
columns of a rotation matrix).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IDENTITY_6D = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])

_DEGENERATE_EPS = 1e-8


class SkeletonError(ValueError):
    pass


class RotationError(ValueError):
    pass


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int  # -1 for the root
    offset: np.ndarray  # (3,) offset from parent, meters

    def __post_init__(self):
        off = np.asarray(self.offset, dtype=np.float64)
        if off.shape != (3,) or not np.all(np.isfinite(off)):
            raise SkeletonError(f"joint {self.name!r}: offset must be a finite 3-vector")
        off.flags.writeable = False
        object.__setattr__(self, "offset", off)


@dataclass(frozen=True)
class Skeleton:
    """Kinematic tree in topological order plus designated contact joints."""

    joints: tuple[Joint, ...]
    contact_joints: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "contact_joints", tuple(self.contact_joints))
        if not self.joints:
            raise SkeletonError("skeleton needs at least one joint")
        if self.joints[0].parent != -1:
            raise SkeletonError("joint 0 must be the root (parent -1)")
        for i, j in enumerate(self.joints[1:], start=1):
            if not 0 <= j.parent < i:
                raise SkeletonError(
                    f"joint {i} ({j.name!r}): parent {j.parent} breaks topological order"
                )
        for c in self.contact_joints:
            if not 0 <= c < len(self.joints):
                raise SkeletonError(f"contact joint index {c} out of range")

    @property
    def num_joints(self) -> int:
        return len(self.joints)

    @property
    def parents(self) -> np.ndarray:
        return np.array([j.parent for j in self.joints], dtype=np.int64)

    @property
    def offsets(self) -> np.ndarray:
        return np.stack([j.offset for j in self.joints])

    def rest_positions(self) -> np.ndarray:
        """Joint positions with identity rotations and the root at the origin."""
        rot = np.tile(IDENTITY_6D, (self.num_joints, 1))
        return forward_kinematics(self, rot, np.zeros(3))

    def to_dict(self) -> dict:
        return {
            "joints": [
                {"name": j.name, "parent": j.parent, "offset": [float(v) for v in j.offset]}
                for j in self.joints
            ],
            "contact_joints": list(self.contact_joints),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Skeleton":
        joints = tuple(
            Joint(name=j["name"], parent=int(j["parent"]), offset=np.asarray(j["offset"]))
            for j in d["joints"]
        )
        return cls(joints=joints, contact_joints=tuple(int(c) for c in d.get("contact_joints", ())))


def rot6d_to_matrix(r: np.ndarray) -> np.ndarray:
    """Orthonormalize a 6D rotation into a proper rotation matrix.

    The two encoded 3-vectors become the first two columns via Gram-Schmidt;
    the third column is their cross product.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (6,):
        raise RotationError(f"expected a 6-vector, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise RotationError("non-finite 6D rotation")
    a1, a2 = r[:3], r[3:]
    n1 = np.linalg.norm(a1)
    if n1 < _DEGENERATE_EPS:
        raise RotationError("degenerate 6D rotation: first column norm below 1e-8")
    b1 = a1 / n1
    a2p = a2 - np.dot(b1, a2) * b1
    n2 = np.linalg.norm(a2p)
    if n2 < _DEGENERATE_EPS:
        raise RotationError("degenerate 6D rotation: columns parallel within 1e-8")
    b2 = a2p / n2
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=1)


def matrix_to_rot6d(m: np.ndarray) -> np.ndarray:
    """First two columns of a rotation matrix, flattened to a 6-vector."""
    m = np.asarray(m, dtype=np.float64)
    return np.concatenate([m[:, 0], m[:, 1]])


def rot6d_to_matrix_batch(r: np.ndarray) -> np.ndarray:
    """Vectorized rot6d_to_matrix over leading axes; r: (..., 6) -> (..., 3, 3)."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1] != 6:
        raise RotationError(f"expected trailing dim 6, got {r.shape}")
    if not np.all(np.isfinite(r)):
        raise RotationError("non-finite 6D rotation")
    a1, a2 = r[..., :3], r[..., 3:]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    if np.any(n1 < _DEGENERATE_EPS):
        raise RotationError("degenerate 6D rotation: first column norm below 1e-8")
    b1 = a1 / n1
    a2p = a2 - np.sum(b1 * a2, axis=-1, keepdims=True) * b1
    n2 = np.linalg.norm(a2p, axis=-1, keepdims=True)
    if np.any(n2 < _DEGENERATE_EPS):
        raise RotationError("degenerate 6D rotation: columns parallel within 1e-8")
    b2 = a2p / n2
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def forward_kinematics(
    skeleton: Skeleton, rotations: np.ndarray, root_translation: np.ndarray
) -> np.ndarray:
    """Global joint positions from per-joint local 6D rotations.

    rotations: (J, 6); root_translation: (3,). Returns (J, 3).
    position(root) = root_translation;
    position(j) = position(parent) + R_global(parent) @ offset(j).
    """
    pos = forward_kinematics_batch(skeleton, rotations[None], np.asarray(root_translation)[None])
    return pos[0]


def forward_kinematics_batch(
    skeleton: Skeleton, rotations: np.ndarray, root_translations: np.ndarray
) -> np.ndarray:
    """FK over a batch of frames. rotations: (F, J, 6); translations: (F, 3) -> (F, J, 3)."""
    rotations = np.asarray(rotations, dtype=np.float64)
    root_translations = np.asarray(root_translations, dtype=np.float64)
    num_j = skeleton.num_joints
    if rotations.ndim != 3 or rotations.shape[1] != num_j or rotations.shape[2] != 6:
        raise RotationError(f"rotations must be (F, {num_j}, 6), got {rotations.shape}")
    local = rot6d_to_matrix_batch(rotations)  # (F, J, 3, 3)
    num_f = rotations.shape[0]
    glob_r = np.empty((num_f, num_j, 3, 3))
    pos = np.empty((num_f, num_j, 3))
    glob_r[:, 0] = local[:, 0]
    pos[:, 0] = root_translations
    for j in range(1, num_j):
        p = skeleton.joints[j].parent
        pos[:, j] = pos[:, p] + np.einsum("fab,b->fa", glob_r[:, p], skeleton.joints[j].offset)
        glob_r[:, j] = glob_r[:, p] @ local[:, j]
    return pos


def default_skeleton() -> Skeleton:
    """Desk-scale 8-joint skeleton: root, spine, head, two 2-joint arms, one leg proxy.

    Contact sites: leg end, both hands and the pelvis (any of them can touch
    the ground in the synthetic motions).
    """
    joints = (
        Joint("root", -1, np.array([0.0, 0.0, 0.0])),
        Joint("spine", 0, np.array([0.0, 0.25, 0.0])),
        Joint("head", 1, np.array([0.0, 0.25, 0.0])),
        Joint("l_arm", 1, np.array([-0.20, 0.20, 0.0])),
        Joint("l_hand", 3, np.array([-0.25, 0.0, 0.0])),
        Joint("r_arm", 1, np.array([0.20, 0.20, 0.0])),
        Joint("r_hand", 5, np.array([0.25, 0.0, 0.0])),
        Joint("leg", 0, np.array([0.0, -0.90, 0.0])),
    )
    return Skeleton(joints=joints, contact_joints=(7, 4, 6, 0))


_SMPL_PARENTS = [
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
]

_SMPL_NAMES = [
    "pelvis", "l_hip", "r_hip", "spine1", "l_knee", "r_knee", "spine2",
    "l_ankle", "r_ankle", "spine3", "l_foot", "r_foot", "neck", "l_collar",
    "r_collar", "head", "l_shoulder", "r_shoulder", "l_elbow", "r_elbow",
    "l_wrist", "r_wrist", "l_hand", "r_hand",
]


def smpl_like_skeleton() -> Skeleton:
    """24-joint skeleton with the SMPL topology and rough meter-scale offsets."""
    offsets = np.array([
        [0.0, 0.0, 0.0],
        [0.07, -0.08, 0.0], [-0.07, -0.08, 0.0], [0.0, 0.11, 0.0],
        [0.04, -0.38, 0.0], [-0.04, -0.38, 0.0], [0.0, 0.14, 0.0],
        [-0.01, -0.40, 0.0], [0.01, -0.40, 0.0], [0.0, 0.06, 0.0],
        [0.03, -0.06, 0.12], [-0.03, -0.06, 0.12], [0.0, 0.21, 0.0],
        [0.08, 0.12, 0.0], [-0.08, 0.12, 0.0], [0.0, 0.09, 0.0],
        [0.11, 0.05, 0.0], [-0.11, 0.05, 0.0], [0.26, 0.0, 0.0],
        [-0.26, 0.0, 0.0], [0.25, 0.0, 0.0], [-0.25, 0.0, 0.0],
        [0.08, 0.0, 0.0], [-0.08, 0.0, 0.0],
    ])
    joints = tuple(
        Joint(name, parent, offsets[i])
        for i, (name, parent) in enumerate(zip(_SMPL_NAMES, _SMPL_PARENTS))
    )
    # heel and toe of both feet: ankles + feet
    return Skeleton(joints=joints, contact_joints=(7, 8, 10, 11))
