import hashlib
from pathlib import Path

import numpy as np
import pytest

from loosekey.datagen import (
    DatagenConfig,
    DatagenError,
    build_dataset,
    find_extrema,
    load_dataset,
    make_pair,
    mean_joint_speed,
    removal_mask,
    slice_clips,
    synth_source_motions,
)
from loosekey.motion import Motion, PoseLayout
from loosekey.skeleton import default_skeleton

SK = default_skeleton()
LAYOUT = PoseLayout(num_joints=8, shape_dims=0, contact_dims=4)


def motion_with_translation(y_curve, fps=30.0):
    """Identity rotations, root moving along the given 1-D curve in x."""
    from loosekey.motion import refresh_positions
    from loosekey.skeleton import IDENTITY_6D

    num_f = len(y_curve)
    frames = np.zeros((num_f, LAYOUT.dim))
    frames[:, LAYOUT.rotations] = np.tile(IDENTITY_6D, (num_f, 8))
    frames[:, LAYOUT.root_translation.start] = y_curve
    m = Motion(layout=LAYOUT, fps=fps, frames=frames)
    return refresh_positions(m, SK)


def test_slice_offsets():
    m = motion_with_translation(np.linspace(0, 1, 120))
    clips = slice_clips(m, 60, 30)
    assert len(clips) == 3
    assert np.array_equal(clips[0].frames, m.frames[0:60])
    assert np.array_equal(clips[1].frames, m.frames[30:90])
    assert np.array_equal(clips[2].frames, m.frames[60:120])


def test_slice_exact_and_short():
    m60 = motion_with_translation(np.linspace(0, 1, 60))
    assert len(slice_clips(m60, 60, 30)) == 1
    m59 = motion_with_translation(np.linspace(0, 1, 59))
    assert slice_clips(m59, 60, 30) == []


def test_slice_end_alignment():
    m = motion_with_translation(np.linspace(0, 1, 100))
    clips = slice_clips(m, 60, 30)
    assert len(clips) == 3
    assert np.array_equal(clips[1].frames, m.frames[30:90])
    assert np.array_equal(clips[-1].frames, m.frames[40:100])


def test_find_extrema_constant_motion():
    m = motion_with_translation(np.zeros(60))
    assert find_extrema(m, margin=10) == [30]


def test_find_extrema_single_peak():
    # speed s(f) ~ |cos| of a sine displacement peaks where displacement slope peaks
    t = np.arange(60) / 30.0
    curve = np.sin(2 * np.pi * 0.5 * (t - 1.0))  # speed max at t=1.0 -> f=30
    m = motion_with_translation(curve)
    s = mean_joint_speed(m)
    peak = int(np.argmax(s[1:]) + 1)
    assert abs(peak - 30) <= 1
    ext = find_extrema(m, margin=10)
    assert any(abs(e - 30) <= 1 for e in ext)


def test_find_extrema_boundary_exclusion():
    # lone peak at f=5 gets excluded by margin=10 -> fallback to middle
    curve = np.zeros(60)
    curve[:11] = np.sin(np.linspace(0, np.pi, 11))
    m = motion_with_translation(curve)
    ext = find_extrema(m, margin=10)
    assert all(e >= 10 and e <= 49 for e in ext)


def test_removal_mask_formula():
    # k=30, dk=+3, W=10: false on [20,33) and [34,40), true at 33, true outside [20,40)
    mask = removal_mask(60, 30, 3, 10)
    for f in range(60):
        inside = 20 <= f < 40
        if f == 33:
            assert mask[f]
        elif inside:
            assert not mask[f]
        else:
            assert mask[f]


def test_removal_mask_random_property():
    rng = np.random.default_rng(0)
    num_f = 60
    for _ in range(10_000):
        w = int(rng.integers(6, 15))
        k = int(rng.integers(w, num_f - w))
        p = min(5, w - 1)
        dk = int(rng.integers(-p, p + 1))
        assert abs(dk) <= 5
        mask = removal_mask(num_f, k, dk, w)
        expected = np.ones(num_f, dtype=bool)
        for f in range(max(k - w, 0), k + dk):
            expected[f] = False
        for f in range(k + dk + 1, min(k + w, num_f)):
            expected[f] = False
        assert np.array_equal(mask, expected)


def synth_clip(seed=0):
    return synth_source_motions(1, SK, 60, seed=seed)[0]


def test_make_pair_zero_shift():
    cfg = DatagenConfig(keyframes_min=1, keyframes_max=1, zero_shift=True, seed=3)
    clip = synth_clip()
    pair = make_pair(clip, cfg, np.random.default_rng(1))
    kf = pair.keyframes[0]
    assert kf["dk"] == 0
    k = kf["k"]
    nc = ~pair.signal.mask
    assert nc[k - 10 : k].all() and nc[k + 1 : k + 10].all()
    assert pair.signal.mask[k]


def test_make_pair_shifted_keypose():
    cfg = DatagenConfig(keyframes_min=1, keyframes_max=1, seed=4)
    clip = synth_clip(1)
    pair = make_pair(clip, cfg, np.random.default_rng(11))
    kf = pair.keyframes[0]
    k, dk = kf["k"], kf["dk"]
    assert abs(dk) <= cfg.max_shift
    # shifted keypose comes from Y_k bit-exactly outside the contact block
    noncontact = np.ones(LAYOUT.dim, dtype=bool)
    noncontact[LAYOUT.contacts] = False
    assert np.array_equal(
        pair.signal.buffer[k + dk][noncontact], pair.target.frames[k][noncontact]
    )
    assert np.all(pair.signal.buffer[:, LAYOUT.contacts] == 0.0)
    # constrained frames outside the windows match Y bit-exactly (non-contact dims)
    for f in np.flatnonzero(pair.signal.mask):
        if f == k + dk:
            continue
        assert np.array_equal(
            pair.signal.buffer[f][noncontact], pair.target.frames[f][noncontact]
        )


def test_make_pair_never_overlapping_windows():
    cfg = DatagenConfig(keyframes_min=2, keyframes_max=4, seed=5)
    rng = np.random.default_rng(2)
    for s in range(20):
        pair = make_pair(synth_clip(s), cfg, rng)
        ks = sorted(kf["k"] for kf in pair.keyframes)
        for a, b in zip(ks[:-1], ks[1:]):
            assert b - a >= 2 * cfg.removal_halfwidth


def test_config_validation():
    with pytest.raises(DatagenError):
        DatagenConfig(clip_frames=20, removal_halfwidth=10)
    with pytest.raises(DatagenError):
        DatagenConfig(max_shift=10, removal_halfwidth=10)
    with pytest.raises(DatagenError):
        DatagenConfig(keyframes_min=0)


def test_synth_determinism_and_contacts():
    a = synth_source_motions(2, SK, 90, seed=42)
    b = synth_source_motions(2, SK, 90, seed=42)
    for m1, m2 in zip(a, b):
        assert np.array_equal(m1.frames, m2.frames)
    m = a[0]
    pos = m.joint_positions()
    heights = pos[:, list(SK.contact_joints), 1]
    expected = (heights < 0.08).astype(float)
    assert np.array_equal(m.contacts(), expected)


def test_synth_band_limit_bounds_acceleration():
    from loosekey.datagen import SYNTH_FREQ_HI, SYNTH_TRANS_AMP

    m = synth_clip(7)
    # every channel is a sum of <=5 sinusoids with amp <= amp_max and freq < cap;
    # |x''| <= sum a_i (2 pi f_i)^2 <= 5 * amp_scale * (2 pi * cap)^2
    acc = np.diff(m.root_translations(), n=2, axis=0) * m.fps**2
    bound = 5 * SYNTH_TRANS_AMP * (2 * np.pi * SYNTH_FREQ_HI) ** 2
    assert np.abs(acc).max() < bound * 1.05


def dataset_digest(path):
    h = hashlib.sha256()
    for p in sorted(Path(path).iterdir()):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def test_build_dataset_deterministic(tmp_path):
    sources = synth_source_motions(3, SK, 150, seed=9)
    cfg = DatagenConfig(seed=100)
    build_dataset(sources, cfg, tmp_path / "a", skeleton=SK)
    build_dataset(sources, cfg, tmp_path / "b", skeleton=SK)
    assert dataset_digest(tmp_path / "a") == dataset_digest(tmp_path / "b")


def test_build_dataset_roundtrip(tmp_path):
    sources = synth_source_motions(2, SK, 120, seed=10)
    cfg = DatagenConfig(seed=101)
    manifest = build_dataset(sources, cfg, tmp_path / "d", skeleton=SK)
    loaded_manifest, pairs = load_dataset(tmp_path / "d")
    assert loaded_manifest["pairs"] == manifest["pairs"] == len(pairs)
    for pair in pairs:
        assert pair.signal.num_frames == cfg.clip_frames
        assert pair.signal.mask.any()
        for kf in pair.keyframes:
            assert abs(kf["dk"]) <= cfg.max_shift


def test_build_dataset_empty_sources(tmp_path):
    with pytest.raises(DatagenError):
        build_dataset([], DatagenConfig(), tmp_path / "x")


def test_zero_shift_dataset_flag(tmp_path):
    sources = synth_source_motions(2, SK, 120, seed=11)
    cfg = DatagenConfig(seed=102, zero_shift=True)
    build_dataset(sources, cfg, tmp_path / "nt", skeleton=SK)
    _, pairs = load_dataset(tmp_path / "nt")
    assert all(kf["dk"] == 0 for p in pairs for kf in p.keyframes)
