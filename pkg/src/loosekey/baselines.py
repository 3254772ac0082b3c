"""Generator factories for evaluation: trained models (LT / NoWarp / NoTime),
inference-time imputation IMP(C), and the pure linear-interpolation baseline."""
from __future__ import annotations

from dataclasses import replace



from .diffusion import NoiseSchedule, SamplerConfig, _derive_torch_seed, sample_batch
from .motion import Motion
from .observation import ObservationSignal, infill_linear

BASELINE_NAMES = ("LT", "NoWarp", "NoTime", "imp", "interp")


def interp_generator():
    """Pure linear infill of the observation signal; ignores seeds and sample count."""

    def gen(signal: ObservationSignal, num_samples: int, pair_index: int) -> list[Motion]:
        return [infill_linear(signal)] * num_samples

    return gen


def model_generator(model, schedule: NoiseSchedule, cfg: SamplerConfig):
    """Conditional sampling with a trained checkpoint (optionally with IMP(C)).

    Seeds per sample derive from (cfg.seed, pair index, sample index), so the
    evaluation is deterministic and independent of batching.
    """

    def gen(signal: ObservationSignal, num_samples: int, pair_index: int) -> list[Motion]:
        seeds = [
            _derive_torch_seed(cfg.seed, pair_index * 100_003 + i) for i in range(num_samples)
        ]
        frames = sample_batch([signal] * num_samples, model, schedule, cfg, seeds=seeds)
        return [Motion(layout=signal.layout, fps=signal.fps, frames=f) for f in frames]

    return gen


def make_generator(
    name: str,
    model=None,
    schedule: NoiseSchedule | None = None,
    sampler_cfg: SamplerConfig | None = None,
    imputation_c: int = 0,
):
    """Resolve a baseline selector into a generator callable."""
    if name == "interp":
        return interp_generator()
    if name not in BASELINE_NAMES:
        raise ValueError(f"unknown baseline {name!r}; expected one of {BASELINE_NAMES}")
    if model is None or schedule is None or sampler_cfg is None:
        raise ValueError(f"baseline {name!r} needs a checkpoint, schedule and sampler config")
    if name == "imp":
        sampler_cfg = replace(sampler_cfg, imputation_c=imputation_c)
    else:
        sampler_cfg = replace(sampler_cfg, imputation_c=-1)
    if name in ("NoWarp", "NoTime") and model.config.mode == "LT":
        raise ValueError(f"baseline {name!r} requires a checkpoint trained in that mode")
    return model_generator(model, schedule, sampler_cfg)
