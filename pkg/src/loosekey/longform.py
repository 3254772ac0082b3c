"""Arbitrary-length generation by splicing into half-overlapping windows.

Windows sit at stride F/2 (the last one end-aligned). During denoising, each
window's leading overlap is overwritten with the trailing frames of its
predecessor within the same step, so the assembled motion has exact seams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .diffusion import (
    DiffusionError,
    NoiseSchedule,
    SamplerConfig,
    _derive_torch_seed,
    _posterior_coeffs,
    compose_prediction,
    sample_batch,
)
from .motion import Motion
from .observation import ObservationSignal, condition_frames


@dataclass(frozen=True)
class SpliceLayout:
    total_frames: int
    window_frames: int
    offsets: tuple[int, ...]

    @property
    def overlaps(self) -> tuple[int, ...]:
        """Overlap of window i with window i-1 (0 for the first window)."""
        out = [0]
        for prev, cur in zip(self.offsets[:-1], self.offsets[1:]):
            out.append(prev + self.window_frames - cur)
        return tuple(out)


def splice(signal: ObservationSignal, window_frames: int) -> tuple[list[ObservationSignal], SpliceLayout]:
    """Slice a long observation into windows at stride F/2, last end-aligned."""
    total = signal.num_frames
    if total < window_frames:
        raise DiffusionError(f"signal length {total} shorter than window {window_frames}")
    stride = window_frames // 2
    offsets = list(range(0, total - window_frames + 1, stride))
    if offsets[-1] != total - window_frames:
        offsets.append(total - window_frames)
    windows = [
        ObservationSignal(
            layout=signal.layout,
            fps=signal.fps,
            buffer=signal.buffer[o : o + window_frames],
            mask=signal.mask[o : o + window_frames],
        )
        for o in offsets
    ]
    return windows, SpliceLayout(
        total_frames=total, window_frames=window_frames, offsets=tuple(offsets)
    )


@torch.no_grad()
def denoise_spliced(
    signal: ObservationSignal,
    model,
    schedule: NoiseSchedule,
    cfg: SamplerConfig,
    sample_index: int = 0,
) -> tuple[np.ndarray, SpliceLayout]:
    """Denoise all windows with per-step sequential chaining.

    Returns the final per-window predictions, (num_windows, F, D); the leading
    overlap of window i equals the tail of window i-1 exactly. The condition
    is the globally infilled signal sliced per window, so windows without any
    constrained frame are legal.
    """
    num_f = model.config.frames
    windows, layout_info = splice(signal, num_f)
    offsets = layout_info.offsets
    overlaps = layout_info.overlaps
    batch = len(windows)
    num_t = schedule.num_steps
    dim = signal.layout.dim

    global_cond = condition_frames(signal, model.config.mask_channel)
    cond = torch.tensor(
        np.stack([global_cond[o : o + num_f] for o in offsets]), dtype=torch.float32
    )
    cond_base = cond[..., :dim]
    masks = torch.tensor(np.stack([w.mask for w in windows]))
    xc = torch.tensor(np.stack([w.buffer for w in windows]), dtype=torch.float32)
    ab = torch.tensor(schedule.alpha_bar, dtype=torch.float32)

    gens = [
        torch.Generator().manual_seed(_derive_torch_seed(cfg.seed, sample_index * 10_000 + i))
        for i in range(batch)
    ]

    def item_noise():
        return torch.stack([torch.randn(num_f, dim, generator=g) for g in gens])

    def chain(y: torch.Tensor, final: bool = False) -> torch.Tensor:
        # sequential: window i reads window i-1's current (already chained)
        # state; parallel: every copy reads the pre-chain snapshot. The final
        # pass is always sequential so assembly seams are exact regardless.
        src = y if (final or cfg.chain_mode == "sequential") else y.clone()
        for i in range(1, batch):
            ov = overlaps[i]
            y[i, :ov] = src[i - 1, num_f - ov :]
        return y

    impute_on = cfg.imputation_c >= 0

    def impute(y: torch.Tensor, level: int) -> torch.Tensor:
        noised = torch.sqrt(ab[level]) * xc + torch.sqrt(1.0 - ab[level]) * item_noise()
        return torch.where(masks.unsqueeze(-1), noised, y)

    model.eval()
    y = item_noise()
    if impute_on and num_t >= cfg.imputation_c:
        y = impute(y, num_t)
    y = chain(y)
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
        y = chain(y, final=(t == 1))
    return y.numpy().astype(np.float64), layout_info


def assemble_windows(window_frames: np.ndarray, layout_info: SpliceLayout) -> np.ndarray:
    """Concatenate chained windows: first window whole, then each non-overlap tail."""
    num_f = layout_info.window_frames
    out = np.empty((layout_info.total_frames, window_frames.shape[2]))
    out[: num_f] = window_frames[0]
    for i in range(1, len(layout_info.offsets)):
        off, ov = layout_info.offsets[i], layout_info.overlaps[i]
        out[off + ov : off + num_f] = window_frames[i, ov:]
    return out


def constrained_sample(
    signal: ObservationSignal,
    model,
    schedule: NoiseSchedule,
    cfg: SamplerConfig,
    sample_index: int = 0,
) -> Motion:
    """Generate a motion of the signal's full length with seam-exact windows."""
    num_f = model.config.frames
    if signal.num_frames == num_f:
        frames = sample_batch([signal], model, schedule, cfg,
                              seeds=[_derive_torch_seed(cfg.seed, sample_index)])[0]
        return Motion(layout=signal.layout, fps=signal.fps, frames=frames)
    window_frames, layout_info = denoise_spliced(signal, model, schedule, cfg, sample_index)
    frames = assemble_windows(window_frames, layout_info)
    if cfg.imputation_c == 0:
        frames[signal.mask] = signal.buffer[signal.mask]
    return Motion(layout=signal.layout, fps=signal.fps, frames=frames)
