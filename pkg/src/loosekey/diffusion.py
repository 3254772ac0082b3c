"""Noise schedule, forward process, training objective and the DDPM sampler.

The network predicts the clean motion (x0 parameterization) through the
dual-head composition: Y_hat = warp(w, infill(X)) + dX. Sampling runs the
standard DDPM posterior from t=T down to t=0, optionally overwriting the
constrained frames of every intermediate state at noise level s >= C with
forward-noised input constraints (imputation IMP(C)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .motion import Motion
from .observation import ObservationSignal, condition_frames
from .warp import DEFAULT_SLOPE_FLOOR


class DiffusionError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative signal-retention coefficients alpha_bar[0..T], alpha_bar[0] = 1."""

    alpha_bar: np.ndarray

    def __post_init__(self):
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        if ab.ndim != 1 or ab.shape[0] < 2:
            raise DiffusionError("alpha_bar must be a vector of length T+1")
        if abs(ab[0] - 1.0) > 1e-12:
            raise DiffusionError("alpha_bar[0] must be 1")
        if np.any(np.diff(ab) >= 0):
            raise DiffusionError("alpha_bar must be strictly decreasing")
        if np.any(ab <= 0.0) or np.any(ab > 1.0):
            raise DiffusionError("alpha_bar values must lie in (0, 1]")
        ab = ab.copy()
        ab.flags.writeable = False
        object.__setattr__(self, "alpha_bar", ab)

    @property
    def num_steps(self) -> int:
        return self.alpha_bar.shape[0] - 1


def cosine_schedule(num_steps: int, s: float = 0.008) -> NoiseSchedule:
    """Cosine alpha-bar schedule with the usual beta clipping."""
    x = np.linspace(0.0, 1.0, num_steps + 1)
    ab = np.cos((x + s) / (1.0 + s) * math.pi / 2.0) ** 2
    ab = ab / ab[0]
    betas = np.clip(1.0 - ab[1:] / ab[:-1], 1e-8, 0.999)
    return NoiseSchedule(alpha_bar=np.concatenate([[1.0], np.cumprod(1.0 - betas)]))


def linear_schedule(num_steps: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    betas = np.linspace(beta_start, beta_end, num_steps)
    return NoiseSchedule(alpha_bar=np.concatenate([[1.0], np.cumprod(1.0 - betas)]))


def make_schedule(kind: str, num_steps: int) -> NoiseSchedule:
    if kind == "cosine":
        return cosine_schedule(num_steps)
    if kind == "linear":
        return linear_schedule(num_steps)
    raise DiffusionError(f"unknown schedule kind {kind!r}")


@dataclass(frozen=True)
class SamplerConfig:
    num_steps: int = 100  # T
    schedule: str = "cosine"
    imputation_c: int = -1  # -1 disables imputation
    seed: int = 0
    num_samples: int = 1
    chain_mode: str = "sequential"  # longform: sequential | parallel window chaining

    def __post_init__(self):
        # any negative C disables imputation; C > T never triggers, so it is
        # equivalent to disabled ("C = T+1")
        if self.num_samples < 1:
            raise DiffusionError("num_samples must be >= 1")
        if self.num_steps < 1:
            raise DiffusionError("num_steps must be >= 1")
        if self.chain_mode not in ("sequential", "parallel"):
            raise DiffusionError("chain_mode must be 'sequential' or 'parallel'")


def forward_noise(frames: np.ndarray, t: int, noise: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """q(Y^t | Y): sqrt(ab_t) * Y + sqrt(1 - ab_t) * noise."""
    if not 0 <= t <= schedule.num_steps:
        raise DiffusionError(f"t={t} outside [0, {schedule.num_steps}]")
    ab = schedule.alpha_bar[t]
    return math.sqrt(ab) * np.asarray(frames) + math.sqrt(1.0 - ab) * np.asarray(noise)


def compose_prediction(
    w_raw: torch.Tensor | None,
    dx: torch.Tensor,
    cond: torch.Tensor,
    floor: float = DEFAULT_SLOPE_FLOOR,
) -> torch.Tensor:
    """Differentiable dual-head composition: warp(w, cond) + dx (batched).

    Mirrors warp.warp_frames: slopes floored at `floor`, cumulative sum with
    slot 0 anchoring t(0)=0, sample times clamped to [0, F-1], linear
    interpolation between neighboring frames.
    """
    if w_raw is None:
        return cond + dx
    batch, num_f, _ = cond.shape
    slopes = torch.clamp(w_raw, min=floor)
    # slot 0 anchors t(0) = 0 and never enters the map
    t = torch.cat(
        [torch.zeros_like(slopes[:, :1]), torch.cumsum(slopes[:, 1:], dim=1)], dim=1
    )
    t = torch.clamp(t, 0.0, float(num_f - 1))
    lo = torch.clamp(t.floor().long(), max=num_f - 2)
    u = (t - lo.to(t.dtype)).unsqueeze(-1)
    gather_lo = torch.gather(cond, 1, lo.unsqueeze(-1).expand(batch, num_f, cond.shape[2]))
    gather_hi = torch.gather(cond, 1, (lo + 1).unsqueeze(-1).expand(batch, num_f, cond.shape[2]))
    warped = (1.0 - u) * gather_lo + u * gather_hi
    return warped + dx


def mse_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return torch.mean((pred - target) ** 2)


def training_step(pair, model, schedule: NoiseSchedule, rng: np.random.Generator) -> float:
    """One reconstruction-loss step on a single pair; leaves gradients on the model.

    Samples t uniform in [1, T], noises Y, composes the dual-head prediction
    and backpropagates MSE(Y, Y_hat). The loss is taken on the composed Y_hat
    only, never on w or dX directly.
    """
    cond_np = condition_frames(pair.signal, model.config.mask_channel)
    t = int(rng.integers(1, schedule.num_steps + 1))
    noise = rng.standard_normal(pair.target.frames.shape)
    y_t_np = forward_noise(pair.target.frames, t, noise, schedule)

    cond = torch.tensor(cond_np, dtype=torch.float32).unsqueeze(0)
    cond_base = cond[..., : pair.target.frames.shape[1]]
    y_t = torch.tensor(y_t_np, dtype=torch.float32).unsqueeze(0)
    target = torch.tensor(pair.target.frames, dtype=torch.float32).unsqueeze(0)
    w_raw, dx = model(y_t, cond, torch.tensor([t], dtype=torch.long))
    y_hat = compose_prediction(w_raw, dx, cond_base)
    loss = mse_loss(y_hat, target)
    if not torch.isfinite(loss):
        raise DiffusionError(f"non-finite training loss at t={t}")
    model.zero_grad(set_to_none=True)
    loss.backward()
    return float(loss.detach())


def _derive_torch_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence([int(seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0] & np.uint64(2**63 - 1))


def _posterior_coeffs(schedule: NoiseSchedule, t: int):
    ab_t = schedule.alpha_bar[t]
    ab_prev = schedule.alpha_bar[t - 1]
    alpha_t = ab_t / ab_prev
    beta_t = 1.0 - alpha_t
    coef_x0 = math.sqrt(ab_prev) * beta_t / (1.0 - ab_t)
    coef_xt = math.sqrt(alpha_t) * (1.0 - ab_prev) / (1.0 - ab_t)
    var = beta_t * (1.0 - ab_prev) / (1.0 - ab_t)
    return coef_x0, coef_xt, var


@torch.no_grad()
def sample_batch(
    signals: list[ObservationSignal],
    model,
    schedule: NoiseSchedule,
    cfg: SamplerConfig,
    seeds: list[int] | None = None,
) -> np.ndarray:
    """Denoise a batch of observation signals; one output motion per signal.

    Per-item RNG streams derive from (cfg.seed, item index), so results do not
    depend on how items are batched together.
    """
    if not signals:
        raise DiffusionError("empty signal batch")
    num_t = schedule.num_steps
    layout = signals[0].layout
    num_f = signals[0].num_frames
    batch = len(signals)
    seeds = seeds if seeds is not None else [_derive_torch_seed(cfg.seed, i) for i in range(batch)]
    gens = [torch.Generator().manual_seed(s) for s in seeds]

    conds = np.stack([condition_frames(s, model.config.mask_channel) for s in signals])
    cond = torch.tensor(conds, dtype=torch.float32)
    cond_base = cond[..., : layout.dim]
    masks = torch.tensor(np.stack([s.mask for s in signals]))  # (B, F) bool
    xc = torch.tensor(np.stack([s.buffer for s in signals]), dtype=torch.float32)
    ab = torch.tensor(schedule.alpha_bar, dtype=torch.float32)

    def item_noise():
        return torch.stack([torch.randn(num_f, layout.dim, generator=g) for g in gens])

    impute_on = cfg.imputation_c >= 0

    def impute(y: torch.Tensor, level: int) -> torch.Tensor:
        noised = torch.sqrt(ab[level]) * xc + torch.sqrt(1.0 - ab[level]) * item_noise()
        return torch.where(masks.unsqueeze(-1), noised, y)

    model.eval()
    y = item_noise()
    if impute_on and num_t >= cfg.imputation_c:
        y = impute(y, num_t)
    for t in range(num_t, 0, -1):
        t_tensor = torch.full((batch,), t, dtype=torch.long)
        w_raw, dx = model(y, cond, t_tensor)
        y0 = compose_prediction(w_raw, dx, cond_base)
        coef_x0, coef_xt, var = _posterior_coeffs(schedule, t)
        y = coef_x0 * y0 + coef_xt * y
        if t > 1:
            y = y + math.sqrt(var) * item_noise()
        if impute_on and t - 1 >= cfg.imputation_c:
            y = impute(y, t - 1)
    out = y.numpy().astype(np.float64)
    if impute_on and cfg.imputation_c == 0:
        # the final overwrite is noise-free; redo it in f64 so constraints are bit-exact
        for i, s in enumerate(signals):
            out[i][s.mask] = s.buffer[s.mask]
    if not np.all(np.isfinite(out)):
        raise DiffusionError("sampler produced non-finite values")
    return out


def sample(
    signal: ObservationSignal,
    model,
    schedule: NoiseSchedule,
    cfg: SamplerConfig,
) -> list[Motion]:
    """Draw cfg.num_samples motions for one observation signal."""
    frames = sample_batch([signal] * cfg.num_samples, model, schedule, cfg)
    return [Motion(layout=signal.layout, fps=signal.fps, frames=f) for f in frames]
