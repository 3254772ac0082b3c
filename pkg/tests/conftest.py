import numpy as np
import pytest
import torch

from loosekey.datagen import DatagenConfig, build_dataset, synth_source_motions
from loosekey.denoiser import Denoiser, NetConfig, save_checkpoint
from loosekey.diffusion import make_schedule
from loosekey.motion import PoseLayout
from loosekey.skeleton import default_skeleton
from loosekey.training import TrainConfig, train

TINY_NET = dict(latent=32, layers=2, heads=4, ff=64, warp_hidden=(64, 32))
TINY_STEPS = 8  # diffusion steps for fast service/CLI tests


@pytest.fixture(scope="session")
def desk_skeleton():
    return default_skeleton()


@pytest.fixture(scope="session")
def desk_layout(desk_skeleton):
    return PoseLayout(
        num_joints=desk_skeleton.num_joints,
        shape_dims=0,
        contact_dims=len(desk_skeleton.contact_joints),
    )


@pytest.fixture(scope="session")
def tiny_dataset_dir(tmp_path_factory, desk_skeleton):
    out = tmp_path_factory.mktemp("data") / "tiny"
    sources = synth_source_motions(3, desk_skeleton, 120, seed=5)
    cfg = DatagenConfig(seed=11, keyframes_min=1, keyframes_max=2)
    build_dataset(sources, cfg, out, skeleton=desk_skeleton)
    return out


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory, tiny_dataset_dir, desk_layout, desk_skeleton):
    from loosekey.datagen import load_dataset

    manifest, pairs = load_dataset(tiny_dataset_dir)
    torch.manual_seed(0)
    model = Denoiser(NetConfig(frames=60, dim=desk_layout.dim, **TINY_NET))
    schedule = make_schedule("cosine", TINY_STEPS)
    train(pairs, model, schedule, TrainConfig(steps=40, batch_size=8, log_every=20))
    path = tmp_path_factory.mktemp("ckpt") / "tiny.lkck"
    save_checkpoint(
        model,
        path,
        extra={
            "schedule": {"kind": "cosine", "num_steps": TINY_STEPS},
            "layout": desk_layout.to_dict(),
            "skeleton": desk_skeleton.to_dict(),
            "fps": 30.0,
            "max_shift": 5,
            "config_hash": "test",
        },
    )
    return path
