"""Training/test pair synthesis.

A pair is built from a ground-truth clip Y by picking extrema keyframes k,
shifting each to k + dk (dk uniform in [-P, P]) and removing the frames in
[k - W, k + dk) and [k + dk + 1, k + W). Everything outside the removal
windows stays observed; inside, only the shifted keypose survives.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .motion import Motion, PoseLayout
from .observation import ObservationSignal
from .skeleton import Skeleton, forward_kinematics_batch, matrix_to_rot6d


class DatagenError(ValueError):
    pass


@dataclass(frozen=True)
class DatagenConfig:
    clip_frames: int = 60  # F
    max_shift: int = 5  # P, max |dk|
    removal_halfwidth: int = 10  # W
    keyframes_min: int = 1
    keyframes_max: int = 4
    stride: int = 30
    seed: int = 0
    zero_shift: bool = False  # NoTime ablation: dk forced to 0

    def __post_init__(self):
        problems = []
        if self.clip_frames < 2 * self.removal_halfwidth + 2:
            problems.append("clip_frames must be >= 2*removal_halfwidth + 2")
        if not 0 <= self.max_shift < self.removal_halfwidth:
            problems.append("max_shift must satisfy 0 <= P < W")
        if self.keyframes_min < 1:
            problems.append("keyframes_min must be >= 1")
        if self.keyframes_max < self.keyframes_min:
            problems.append("keyframes_max must be >= keyframes_min")
        if self.stride < 1:
            problems.append("stride must be >= 1")
        if problems:
            raise DatagenError("; ".join(problems))

    def to_dict(self) -> dict:
        return {
            "clip_frames": self.clip_frames,
            "max_shift": self.max_shift,
            "removal_halfwidth": self.removal_halfwidth,
            "keyframes_min": self.keyframes_min,
            "keyframes_max": self.keyframes_max,
            "stride": self.stride,
            "seed": self.seed,
            "zero_shift": self.zero_shift,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatagenConfig":
        return cls(**d)


@dataclass(frozen=True)
class TrainingPair:
    signal: ObservationSignal  # X
    target: Motion  # Y
    provenance: dict = field(default_factory=dict)

    @property
    def keyframes(self) -> list[dict]:
        return self.provenance.get("keyframes", [])


def slice_offsets(total: int, clip_frames: int, stride: int) -> list[int]:
    if total < clip_frames:
        return []
    offsets = list(range(0, total - clip_frames + 1, stride))
    if offsets[-1] != total - clip_frames:
        offsets.append(total - clip_frames)
    return offsets


def slice_clips(motion: Motion, clip_frames: int, stride: int) -> list[Motion]:
    """Overlapping windows at the given stride, last window aligned to the end."""
    return [
        motion.with_frames(motion.frames[o : o + clip_frames])
        for o in slice_offsets(motion.num_frames, clip_frames, stride)
    ]


def mean_joint_speed(motion: Motion) -> np.ndarray:
    """s(f) = mean_j ||p_j(f) - p_j(f-1)|| * fps for f >= 1; s(0) = 0."""
    pos = motion.joint_positions()
    speed = np.zeros(motion.num_frames)
    speed[1:] = np.linalg.norm(np.diff(pos, axis=0), axis=2).mean(axis=1) * motion.fps
    return speed


def find_extrema(motion: Motion, margin: int = 0) -> list[int]:
    """Interior frames where mean joint speed is a strict local extremum.

    Frames within `margin` of either clip boundary are excluded; falls back to
    the middle frame when nothing qualifies.
    """
    num_f = motion.num_frames
    if num_f < 3:
        raise DatagenError("need at least 3 frames to find extrema")
    s = mean_joint_speed(motion)
    out = []
    for f in range(2, num_f - 1):  # s is defined from f=1, so compare on [2, F-2]
        if f < margin or f > num_f - 1 - margin:
            continue
        if (s[f] > s[f - 1] and s[f] > s[f + 1]) or (s[f] < s[f - 1] and s[f] < s[f + 1]):
            out.append(f)
    if not out:
        return [num_f // 2]
    return out


def removal_mask(num_frames: int, k: int, dk: int, halfwidth: int) -> np.ndarray:
    """Constrained-frame mask for one shifted keyframe.

    False on [k - W, k + dk) and [k + dk + 1, k + W); true everywhere else,
    including the shifted index k + dk itself.
    """
    mask = np.ones(num_frames, dtype=bool)
    mask[max(k - halfwidth, 0) : min(k + halfwidth, num_frames)] = False
    mask[k + dk] = True
    return mask


def _sample_keyframe_indices(
    candidates: list[int], count: int, min_gap: int, rng: np.random.Generator
) -> list[int]:
    """Pick up to `count` indices, no two closer than min_gap (never overlap)."""
    pool = list(candidates)
    chosen: list[int] = []
    for _ in range(count):
        picked = None
        for _ in range(10):
            if not pool:
                break
            cand = int(pool[rng.integers(len(pool))])
            if all(abs(cand - k) >= min_gap for k in chosen):
                picked = cand
                break
        if picked is None:
            break  # reduce keyframe count rather than emit overlapping windows
        chosen.append(picked)
        pool.remove(picked)
    chosen.sort()
    return chosen


def make_pair(target: Motion, cfg: DatagenConfig, rng: np.random.Generator) -> TrainingPair:
    """Build one (X, Y) training pair from a clip of length cfg.clip_frames."""
    num_f = target.num_frames
    if num_f != cfg.clip_frames:
        raise DatagenError(f"clip must have {cfg.clip_frames} frames, got {num_f}")
    w = cfg.removal_halfwidth
    candidates = find_extrema(target, margin=w)
    count = int(rng.integers(cfg.keyframes_min, cfg.keyframes_max + 1))
    chosen = _sample_keyframe_indices(candidates, count, 2 * w, rng)

    mask = np.ones(num_f, dtype=bool)
    keyframes = []
    for k in chosen:
        dk = 0 if cfg.zero_shift else int(rng.integers(-cfg.max_shift, cfg.max_shift + 1))
        mask &= removal_mask(num_f, k, dk, w)
        keyframes.append({"k": int(k), "dk": dk})
    buf = np.array(target.frames)
    for kf in keyframes:
        buf[kf["k"] + kf["dk"]] = target.frames[kf["k"]]
    buf[~mask] = 0.0
    buf[:, target.layout.contacts] = 0.0  # contact unknown in the condition
    signal = ObservationSignal(layout=target.layout, fps=target.fps, buffer=buf, mask=mask)
    return TrainingPair(signal=signal, target=target, provenance={"keyframes": keyframes})


def load_source_motions(paths, layout: PoseLayout) -> list[Motion]:
    """Drop-in loader for externally captured clips in the motion file format.

    Stands in for a full mocap-dataset ingester: point it at motion files
    (textual or binary) and feed the result to build_dataset.
    """
    from .motion import read_motion

    motions = []
    for p in sorted(str(x) for x in paths):
        motions.append(read_motion(p, layout=layout))
    if not motions:
        raise DatagenError("no source files given")
    return motions


def synth_source_motions(
    n: int,
    skeleton: Skeleton,
    total_frames: int,
    seed: int,
    fps: float = 30.0,
    layout: PoseLayout | None = None,
    contact_height: float = 0.08,
) -> list[Motion]:
    """Procedural smooth source motions standing in for mocap clips.

    Joint rotations and root translation are sums of 2-5 random sinusoids,
    band-limited below fps/6. Contact flags threshold the contact joints'
    heights; the position block is refreshed through FK.
    """
    if n < 1:
        raise DatagenError("n must be >= 1")
    layout = layout or PoseLayout(
        num_joints=skeleton.num_joints, shape_dims=0, contact_dims=len(skeleton.contact_joints)
    )
    if layout.num_joints != skeleton.num_joints:
        raise DatagenError("layout joints must match the skeleton")
    return [
        _synth_one(np.random.default_rng([seed, i]), skeleton, layout, total_frames, fps, contact_height)
        for i in range(n)
    ]


SYNTH_FREQ_LO = 0.2  # Hz
SYNTH_FREQ_HI = 1.2  # Hz; well below the fps/6 band limit, and long enough
# periods that poses rarely recur inside one clip (keeps keyposes distinctive)
SYNTH_JOINT_AMP = 0.5  # rad
SYNTH_TRANS_AMP = 0.25  # m (horizontal); vertical bob is smaller


def _random_sinusoids(rng: np.random.Generator, t: np.ndarray, fps: float, amp: float) -> np.ndarray:
    terms = int(rng.integers(2, 6))
    freq_hi = min(SYNTH_FREQ_HI, fps / 6.0 * 0.9)
    out = np.zeros_like(t)
    for _ in range(terms):
        f = rng.uniform(SYNTH_FREQ_LO, freq_hi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        out += rng.uniform(0.2, 1.0) * amp * np.sin(2.0 * np.pi * f * t + phase)
    return out


def _axis_angle_matrices(axis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rodrigues rotation about a fixed unit axis for a vector of angles."""
    kx, ky, kz = axis
    cross = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    outer = np.outer(axis, axis)
    c = np.cos(angles)[:, None, None]
    s = np.sin(angles)[:, None, None]
    return c * np.eye(3) + s * cross + (1.0 - c) * outer


def _synth_one(rng, skeleton, layout, total_frames, fps, contact_height) -> Motion:
    t = np.arange(total_frames) / fps
    num_j = skeleton.num_joints
    rot = np.empty((total_frames, num_j, 6))
    for j in range(num_j):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angles = _random_sinusoids(rng, t, fps, amp=SYNTH_JOINT_AMP)
        mats = _axis_angle_matrices(axis, angles)
        rot[:, j] = np.stack([matrix_to_rot6d(m) for m in mats])
    trans = np.stack(
        [
            _random_sinusoids(rng, t, fps, amp=SYNTH_TRANS_AMP),
            0.9 + _random_sinusoids(rng, t, fps, amp=0.06),
            _random_sinusoids(rng, t, fps, amp=SYNTH_TRANS_AMP),
        ],
        axis=1,
    )
    pos = forward_kinematics_batch(skeleton, rot, trans)
    frames = np.zeros((total_frames, layout.dim))
    frames[:, layout.rotations] = rot.reshape(total_frames, -1)
    frames[:, layout.root_translation] = trans
    heights = pos[:, list(skeleton.contact_joints), 1]
    ncontact = min(layout.contact_dims, len(skeleton.contact_joints))
    frames[:, layout.contacts][:, :ncontact] = (heights[:, :ncontact] < contact_height).astype(float)
    frames[:, layout.joint_positions] = pos.reshape(total_frames, -1)
    return Motion(layout=layout, fps=fps, frames=frames)


MANIFEST_NAME = "manifest.json"


def config_hash(d: dict) -> str:
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def build_dataset(
    sources: list[Motion],
    cfg: DatagenConfig,
    out_dir,
    skeleton: Skeleton | None = None,
) -> dict:
    """Slice sources, emit pairs, persist them; deterministic under cfg.seed.

    Each pair's RNG stream derives from (seed, clip id, slice offset), so the
    result is byte-identical no matter how the work is scheduled.
    """
    if not sources:
        raise DatagenError("no source motions given")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    layout = sources[0].layout
    pairs = 0
    index = []
    for clip_id, source in enumerate(sources):
        for offset in slice_offsets(source.num_frames, cfg.clip_frames, cfg.stride):
            clip = source.with_frames(source.frames[offset : offset + cfg.clip_frames])
            rng = np.random.default_rng([cfg.seed, clip_id, offset])
            pair = make_pair(clip, cfg, rng)
            pair.provenance.update({"clip_id": clip_id, "offset": offset})
            _write_pair(out / f"pair_{pairs:05d}.bin", pair)
            index.append(pair.provenance)
            pairs += 1
    manifest = {
        "version": 1,
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg.to_dict()),
        "pairs": pairs,
        "fps": sources[0].fps,
        "layout": layout.to_dict(),
        "skeleton": skeleton.to_dict() if skeleton else None,
        "index": index,
    }
    with open(out / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, sort_keys=True)
    return manifest


def _write_pair(path: Path, pair: TrainingPair) -> None:
    x = np.ascontiguousarray(pair.signal.buffer, dtype="<f4").tobytes()
    m = np.ascontiguousarray(pair.signal.mask, dtype=np.uint8).tobytes()
    y = np.ascontiguousarray(pair.target.frames, dtype="<f4").tobytes()
    prov = json.dumps(pair.provenance, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(x)
        fh.write(m)
        fh.write(y)
        fh.write(struct.pack("<I", len(prov)))
        fh.write(prov)


def load_dataset(path) -> tuple[dict, list[TrainingPair]]:
    """Read a dataset directory back into memory."""
    root = Path(path)
    with open(root / MANIFEST_NAME) as fh:
        manifest = json.load(fh)
    layout = PoseLayout.from_dict(manifest["layout"])
    num_f = manifest["config"]["clip_frames"]
    fps = manifest["fps"]
    dim = layout.dim
    pairs = []
    for i in range(manifest["pairs"]):
        raw = (root / f"pair_{i:05d}.bin").read_bytes()
        fl = num_f * dim * 4
        x = np.frombuffer(raw[:fl], dtype="<f4").reshape(num_f, dim).astype(np.float64)
        mask = np.frombuffer(raw[fl : fl + num_f], dtype=np.uint8).astype(bool)
        y = (
            np.frombuffer(raw[fl + num_f : 2 * fl + num_f], dtype="<f4")
            .reshape(num_f, dim)
            .astype(np.float64)
        )
        (plen,) = struct.unpack("<I", raw[2 * fl + num_f : 2 * fl + num_f + 4])
        prov = json.loads(raw[2 * fl + num_f + 4 : 2 * fl + num_f + 4 + plen].decode())
        pairs.append(
            TrainingPair(
                signal=ObservationSignal(layout=layout, fps=fps, buffer=x, mask=mask),
                target=Motion(layout=layout, fps=fps, frames=y),
                provenance=prov,
            )
        )
    return manifest, pairs
