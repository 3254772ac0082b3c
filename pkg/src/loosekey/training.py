"""Reconstruction-loss training over a pair dataset."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .datagen import TrainingPair
from .denoiser import Denoiser, NetConfig
from .diffusion import NoiseSchedule, compose_prediction, mse_loss
from .observation import condition_frames


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 5000
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    threads: int = 1
    log_every: int = 100

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "seed": self.seed,
            "threads": self.threads,
            "log_every": self.log_every,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def _stack_pairs(pairs: list[TrainingPair], mask_channel: bool = False):
    conds = np.stack([condition_frames(p.signal, mask_channel) for p in pairs])
    targets = np.stack([p.target.frames for p in pairs])
    cond = torch.tensor(conds, dtype=torch.float32)
    return cond, torch.tensor(targets, dtype=torch.float32)


def build_model(pairs: list[TrainingPair], net_cfg: NetConfig, seed: int) -> Denoiser:
    """Seeded model construction so training runs are reproducible end to end."""
    del pairs
    torch.manual_seed(seed)
    return Denoiser(net_cfg)


def train(
    pairs: list[TrainingPair],
    model: Denoiser,
    schedule: NoiseSchedule,
    cfg: TrainConfig,
    progress: bool = False,
    early_stop=None,
) -> list[tuple[int, float]]:
    """Adam over MSE(Y, warp(w, infill(X)) + dX); returns (step, loss) history.

    `early_stop(step)` is polled at every log point; returning True ends the run.
    """
    torch.set_num_threads(max(1, cfg.threads))
    cond_all, target_all = _stack_pairs(pairs, model.config.mask_channel)
    num_pairs, num_f, dim = target_all.shape
    num_t = schedule.num_steps
    ab = torch.tensor(schedule.alpha_bar, dtype=torch.float32)

    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    noise_gen = torch.Generator().manual_seed(int(cfg.seed) & (2**63 - 1))
    history: list[tuple[int, float]] = []
    model.train()
    for step in range(cfg.steps):
        idx = rng.integers(0, num_pairs, size=min(cfg.batch_size, num_pairs))
        t = torch.tensor(rng.integers(1, num_t + 1, size=idx.shape[0]), dtype=torch.long)
        cond = cond_all[idx]
        target = target_all[idx]
        noise = torch.randn(target.shape, generator=noise_gen)
        ab_t = ab[t].view(-1, 1, 1)
        y_t = torch.sqrt(ab_t) * target + torch.sqrt(1.0 - ab_t) * noise
        w_raw, dx = model(y_t, cond, t)
        loss = mse_loss(compose_prediction(w_raw, dx, cond[..., :dim]), target)
        if not torch.isfinite(loss):
            raise RuntimeError(f"non-finite loss at step {step}")
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        if step % cfg.log_every == 0 or step == cfg.steps - 1:
            history.append((step, float(loss.detach())))
            if progress:
                print(f"step {step:6d}  loss {float(loss.detach()):.6f}", flush=True)
            if early_stop is not None and early_stop(step):
                break
    model.eval()
    return history


@torch.no_grad()
def eval_loss(
    pairs: list[TrainingPair],
    model: Denoiser,
    schedule: NoiseSchedule,
    seed: int = 1234,
    t_points: int = 5,
) -> float:
    """Deterministic loss probe on a fixed grid of diffusion steps."""
    cond_all, target_all = _stack_pairs(pairs, model.config.mask_channel)
    dim = target_all.shape[2]
    ab = torch.tensor(schedule.alpha_bar, dtype=torch.float32)
    num_t = schedule.num_steps
    grid = np.unique(np.linspace(1, num_t, t_points).round().astype(int))
    gen = torch.Generator().manual_seed(seed)
    model.eval()
    total = 0.0
    for t in grid:
        noise = torch.randn(target_all.shape, generator=gen)
        y_t = torch.sqrt(ab[t]) * target_all + torch.sqrt(1.0 - ab[t]) * noise
        t_tensor = torch.full((target_all.shape[0],), int(t), dtype=torch.long)
        w_raw, dx = model(y_t, cond_all, t_tensor)
        total += float(mse_loss(compose_prediction(w_raw, dx, cond_all[..., :dim]), target_all))
    return total / len(grid)
