"""Evaluation metrics: L2 reconstruction families, keypose error, jitter,
diversity, and the test-set evaluation runner.

All position-based metrics recompute joint positions through FK, in meters;
k-th order forward differences are scaled by fps^k.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .motion import Motion, Pose
from .skeleton import Skeleton, forward_kinematics_batch


class MetricsError(ValueError):
    pass


L2_NAMES = ("l2_pos", "l2_vel", "l2_acc", "l2_jerk")


@dataclass
class EvalReport:
    l2_pos_g: float = 0.0
    l2_pos_l: float = 0.0
    l2_vel_g: float = 0.0
    l2_vel_l: float = 0.0
    l2_acc_g: float = 0.0
    l2_acc_l: float = 0.0
    l2_jerk_g: float = 0.0
    l2_jerk_l: float = 0.0
    kpe: float = 0.0
    jitter: float = 0.0
    diversity: float = 0.0
    pairs: int = 0
    samples_per_input: int = 1
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "l2_pos_g": self.l2_pos_g, "l2_pos_l": self.l2_pos_l,
            "l2_vel_g": self.l2_vel_g, "l2_vel_l": self.l2_vel_l,
            "l2_acc_g": self.l2_acc_g, "l2_acc_l": self.l2_acc_l,
            "l2_jerk_g": self.l2_jerk_g, "l2_jerk_l": self.l2_jerk_l,
            "kpe": self.kpe, "jitter": self.jitter, "diversity": self.diversity,
            "pairs": self.pairs, "samples_per_input": self.samples_per_input,
        }
        d.update(self.extra)
        return d


def joint_positions_gl(motion: Motion, skeleton: Skeleton) -> tuple[np.ndarray, np.ndarray]:
    """FK world positions and root-relative positions, both (F, J, 3)."""
    global_pos = forward_kinematics_batch(
        skeleton, motion.rotations(), motion.root_translations()
    )
    local_pos = global_pos - global_pos[:, :1, :]
    return global_pos, local_pos


def _order_k_metric(gen_pos: np.ndarray, gt_pos: np.ndarray, order: int, fps: float) -> float:
    d_gen = np.diff(gen_pos, n=order, axis=0) * fps**order if order else gen_pos
    d_gt = np.diff(gt_pos, n=order, axis=0) * fps**order if order else gt_pos
    return float(np.linalg.norm(d_gen - d_gt, axis=2).mean())


def l2_family(gen: Motion, gt: Motion, skeleton: Skeleton) -> dict[str, float]:
    """Eight scalars: global/local x position/velocity/acceleration/jerk."""
    if gen.num_frames != gt.num_frames:
        raise MetricsError("generated and ground-truth motions must share F")
    gen_g, gen_l = joint_positions_gl(gen, skeleton)
    gt_g, gt_l = joint_positions_gl(gt, skeleton)
    out = {}
    for order, name in enumerate(L2_NAMES):
        out[f"{name}_g"] = _order_k_metric(gen_g, gt_g, order, gen.fps)
        out[f"{name}_l"] = _order_k_metric(gen_l, gt_l, order, gen.fps)
    return out


def pose_local_positions(pose: Pose, skeleton: Skeleton) -> np.ndarray:
    layout = pose.layout
    rot = pose.values[layout.rotations].reshape(1, layout.num_joints, 6)
    trans = pose.values[layout.root_translation].reshape(1, 3)
    pos = forward_kinematics_batch(skeleton, rot, trans)[0]
    return pos - pos[:1]


def keypose_distances(gen: Motion, keypose: Pose, skeleton: Skeleton) -> np.ndarray:
    """Per-frame mean joint distance between gen's local pose and the keypose."""
    _, gen_l = joint_positions_gl(gen, skeleton)
    key_l = pose_local_positions(keypose, skeleton)
    return np.linalg.norm(gen_l - key_l[None], axis=2).mean(axis=1)


def kpe(gen: Motion, keypose: Pose, skeleton: Skeleton) -> float:
    """Distance from the keypose to the most similar generated frame."""
    return float(keypose_distances(gen, keypose, skeleton).min())


def keypose_best_frame(gen: Motion, keypose: Pose, skeleton: Skeleton) -> int:
    return int(keypose_distances(gen, keypose, skeleton).argmin())


def jitter(gen: Motion, skeleton: Skeleton) -> float:
    """Mean second-difference magnitude of global joint positions, times fps^2."""
    if gen.num_frames < 3:
        raise MetricsError("jitter needs at least 3 frames")
    pos, _ = joint_positions_gl(gen, skeleton)
    acc = np.diff(pos, n=2, axis=0) * gen.fps**2
    return float(np.linalg.norm(acc, axis=2).mean())


def diversity(samples: list[Motion], skeleton: Skeleton) -> float:
    """Mean pairwise local-position distance across samples for one input."""
    if len(samples) < 2:
        raise MetricsError("diversity needs at least 2 samples")
    locals_ = [joint_positions_gl(s, skeleton)[1] for s in samples]
    total, count = 0.0, 0
    for i in range(len(locals_)):
        for j in range(i + 1, len(locals_)):
            total += float(np.linalg.norm(locals_[i] - locals_[j], axis=2).mean())
            count += 1
    return total / count


def evaluate(generator, pairs, skeleton: Skeleton, num_samples: int = 1) -> EvalReport:
    """Aggregate metrics for a generator over a test set.

    `generator(signal, num_samples, pair_index)` must return that many Motions
    deterministically. The first sample carries the reconstruction metrics;
    diversity uses all of them (skipped when num_samples < 2).
    """
    if not pairs:
        raise MetricsError("empty test set")
    sums: dict[str, float] = {}
    kpe_sum = 0.0
    kpe_count = 0
    jitter_sum = 0.0
    div_sum = 0.0
    for i, pair in enumerate(pairs):
        samples = generator(pair.signal, num_samples, i)
        gen = samples[0]
        for name, value in l2_family(gen, pair.target, skeleton).items():
            sums[name] = sums.get(name, 0.0) + value
        jitter_sum += jitter(gen, skeleton)
        for kf in pair.keyframes:
            kpe_sum += kpe(gen, pair.target.pose(kf["k"]), skeleton)
            kpe_count += 1
        if num_samples >= 2:
            div_sum += diversity(samples, skeleton)
    n = len(pairs)
    report = EvalReport(
        kpe=kpe_sum / max(kpe_count, 1),
        jitter=jitter_sum / n,
        diversity=div_sum / n if num_samples >= 2 else 0.0,
        pairs=n,
        samples_per_input=num_samples,
    )
    for name, value in sums.items():
        setattr(report, name, value / n)
    return report
