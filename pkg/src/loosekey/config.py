"""Run configuration: file + CLI overrides, strict validation, stable hashing."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

import yaml

from .datagen import DatagenConfig, config_hash
from .denoiser import NetConfig
from .diffusion import SamplerConfig
from .training import TrainConfig


class ConfigError(ValueError):
    """Carries every violation found, not just the first."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid config:\n  " + "\n  ".join(problems))


@dataclass(frozen=True)
class SkeletonConfig:
    preset: str = "desk"  # desk | smpl
    shape_dims: int = 0
    fps: float = 30.0


@dataclass(frozen=True)
class SynthConfig:
    sources: int = 40
    frames_per_source: int = 240
    seed: int = 7


@dataclass(frozen=True)
class AcceptanceThresholds:
    """Pre-registered desk-scale trend parameters; fixed before any run."""

    retime_tolerance_frames: int = 2
    retime_hit_rate: float = 0.6
    trend_test_pairs: int = 200
    trend_train_steps: int = 8000
    trend_batch_size: int = 16
    trend_lr: float = 1e-3
    trend_train_sources: int = 40
    trend_test_sources: int = 29
    trend_train_synth_seed: int = 31
    trend_test_synth_seed: int = 77
    trend_train_datagen_seed: int = 1001
    trend_test_datagen_seed: int = 2002
    trend_diffusion_steps: int = 100
    trend_sample_seed: int = 42


@dataclass(frozen=True)
class RunConfig:
    skeleton: SkeletonConfig = field(default_factory=SkeletonConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    datagen: DatagenConfig = field(default_factory=DatagenConfig)
    net: NetConfig = field(default_factory=NetConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    acceptance: AcceptanceThresholds = field(default_factory=AcceptanceThresholds)
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


_SECTIONS = {
    "skeleton": SkeletonConfig,
    "synth": SynthConfig,
    "datagen": DatagenConfig,
    "net": NetConfig,
    "sampler": SamplerConfig,
    "train": TrainConfig,
    "acceptance": AcceptanceThresholds,
}


def _build_section(cls, data: dict, prefix: str, problems: list[str]):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            problems.append(f"unknown key {prefix}{key}")
            continue
        if key == "warp_hidden":
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        problems.append(f"{prefix.rstrip('.') or 'config'}: {e}")
        return cls()


def config_from_dict(data: dict) -> RunConfig:
    problems: list[str] = []
    sections = {}
    for key, value in data.items():
        if key == "seed":
            if not isinstance(value, int):
                problems.append("seed must be an integer")
            continue
        if key not in _SECTIONS:
            problems.append(f"unknown section {key!r}")
            continue
        if not isinstance(value, dict):
            problems.append(f"section {key!r} must be a mapping")
            continue
        sections[key] = _build_section(_SECTIONS[key], value, f"{key}.", problems)
    if problems:
        raise ConfigError(problems)
    return RunConfig(seed=int(data.get("seed", 0)), **sections)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Load a YAML/JSON config file and apply dotted-key overrides on top."""
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError([f"config root must be a mapping, got {type(loaded).__name__}"])
        data = loaded
    for dotted, value in (overrides or {}).items():
        parts = dotted.split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return config_from_dict(data)


def dump_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
