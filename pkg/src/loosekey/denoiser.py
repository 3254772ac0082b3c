"""Two-headed denoiser: shared transformer-decoder backbone, per-frame pose
residual head, and a whole-motion warp head (flatten -> 3-layer MLP -> prelu).

The decoder input is the sequence [t token, condition tokens, noisy-motion
tokens]; condition and motion tokens at the same frame share one positional
embedding, and the projected condition doubles as cross-attention memory.
At initialization the residual head is zeroed and the warp head emits raw
slopes of exactly 1, so the composed prediction starts at infill(X).
"""
from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

CHECKPOINT_MAGIC = b"LKCK"
CHECKPOINT_VERSION = 1

MODES = ("LT", "NoWarp", "NoTime")


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class NetConfig:
    frames: int = 60
    dim: int = 79
    latent: int = 64
    layers: int = 4
    heads: int = 4
    ff: int = 256
    warp_hidden: tuple[int, int] = (256, 64)
    mode: str = "LT"
    dropout: float = 0.0
    mask_channel: bool = False

    def __post_init__(self):
        if self.latent % self.heads != 0:
            raise ValueError("latent dim must be divisible by the head count")
        if self.latent % 2 != 0:
            raise ValueError("latent dim must be even (sinusoidal embedding)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if len(self.warp_hidden) != 2:
            raise ValueError("warp head takes exactly two hidden widths (3 linear layers)")
        object.__setattr__(self, "warp_hidden", tuple(int(w) for w in self.warp_hidden))

    @property
    def has_warp_head(self) -> bool:
        return self.mode == "LT"

    @property
    def cond_dim(self) -> int:
        return self.dim + (1 if self.mask_channel else 0)

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "dim": self.dim,
            "latent": self.latent,
            "layers": self.layers,
            "heads": self.heads,
            "ff": self.ff,
            "warp_hidden": list(self.warp_hidden),
            "mode": self.mode,
            "dropout": self.dropout,
            "mask_channel": self.mask_channel,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        d = dict(d)
        d["warp_hidden"] = tuple(d.get("warp_hidden", (256, 64)))
        return cls(**d)


class SinusoidalEmbedding(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.dim = dim

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        half = self.dim // 2
        freqs = torch.exp(
            -math.log(10000.0) * torch.arange(half, dtype=torch.float32) / (half - 1)
        )
        args = t.float()[:, None] * freqs[None, :]
        return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)


class Denoiser(nn.Module):
    """U(Y^t, X, t) -> (w_raw, dX); w_raw is None in NoWarp/NoTime modes."""

    def __init__(self, config: NetConfig):
        super().__init__()
        self.config = config
        lat, num_f, dim = config.latent, config.frames, config.dim
        self.cond_proj = nn.Linear(config.cond_dim, lat)
        self.input_proj = nn.Linear(dim, lat)
        self.time_embed = SinusoidalEmbedding(lat)
        self.time_proj = nn.Sequential(nn.Linear(lat, lat), nn.SiLU(), nn.Linear(lat, lat))
        self.pos_embed = nn.Parameter(torch.zeros(num_f, lat))
        layer = nn.TransformerDecoderLayer(
            d_model=lat,
            nhead=config.heads,
            dim_feedforward=config.ff,
            dropout=config.dropout,
            activation="gelu",
            batch_first=True,
        )
        self.decoder = nn.TransformerDecoder(layer, num_layers=config.layers)
        self.residual_head = nn.Linear(lat, dim)
        if config.has_warp_head:
            h1, h2 = config.warp_hidden
            self.warp_head = nn.Sequential(
                nn.Linear(num_f * lat, h1),
                nn.ReLU(),
                nn.Linear(h1, h2),
                nn.ReLU(),
                nn.Linear(h2, num_f),
                nn.PReLU(),
            )
        self._init_identity()

    def _init_identity(self):
        nn.init.normal_(self.pos_embed, std=0.02)
        # composed prediction at init equals infill(X): zero residuals, unit slopes
        nn.init.zeros_(self.residual_head.weight)
        nn.init.zeros_(self.residual_head.bias)
        if self.config.has_warp_head:
            last = self.warp_head[4]
            nn.init.zeros_(last.weight)
            nn.init.ones_(last.bias)

    def forward(
        self, y_t: torch.Tensor, cond: torch.Tensor, t: torch.Tensor
    ) -> tuple[torch.Tensor | None, torch.Tensor]:
        batch, num_f, dim = y_t.shape
        cfg = self.config
        if num_f != cfg.frames or dim != cfg.dim:
            raise ValueError(f"expected (B, {cfg.frames}, {cfg.dim}), got {tuple(y_t.shape)}")
        if cond.shape != (batch, num_f, cfg.cond_dim):
            raise ValueError(
                f"condition shape {tuple(cond.shape)} != (B, {cfg.frames}, {cfg.cond_dim})"
            )
        x_tok = self.cond_proj(cond) + self.pos_embed
        y_tok = self.input_proj(y_t) + self.pos_embed
        t_tok = self.time_proj(self.time_embed(t)).unsqueeze(1)
        tgt = torch.cat([t_tok, x_tok, y_tok], dim=1)
        out = self.decoder(tgt, memory=x_tok)
        latents = out[:, 1 + num_f :]
        dx = self.residual_head(latents)
        if not cfg.has_warp_head:
            return None, dx
        w_raw = self.warp_head(latents.reshape(batch, num_f * cfg.latent))
        return w_raw, dx


def param_count(model: Denoiser) -> int:
    return sum(p.numel() for p in model.parameters())


def save_checkpoint(model: Denoiser, path, extra: dict | None = None) -> None:
    """LKCK checkpoint: magic, version, JSON header, named f32 tensors."""
    header = {"net": model.config.to_dict()}
    if extra:
        header.update(extra)
    blob = json.dumps(header, sort_keys=True).encode()
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
    buf.write(blob)
    for name, tensor in model.state_dict().items():
        data = tensor.detach().cpu().numpy().astype("<f4")
        name_b = name.encode()
        buf.write(struct.pack("<I", len(name_b)))
        buf.write(name_b)
        buf.write(struct.pack("<I", data.ndim))
        buf.write(struct.pack(f"<{data.ndim}I", *data.shape))
        buf.write(np.ascontiguousarray(data).tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> tuple[Denoiser, dict]:
    """Rebuild a Denoiser from an LKCK file; validates config compatibility."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("not an LKCK checkpoint (bad magic)")
    version, hlen = struct.unpack("<II", raw[4:12])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    header = json.loads(raw[12 : 12 + hlen].decode())
    config = NetConfig.from_dict(header["net"])
    model = Denoiser(config)
    expected = model.state_dict()
    pos = 12 + hlen
    loaded = {}
    while pos < len(raw):
        (nlen,) = struct.unpack("<I", raw[pos : pos + 4])
        pos += 4
        name = raw[pos : pos + nlen].decode()
        pos += nlen
        (ndim,) = struct.unpack("<I", raw[pos : pos + 4])
        pos += 4
        shape = struct.unpack(f"<{ndim}I", raw[pos : pos + 4 * ndim])
        pos += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(raw[pos : pos + 4 * count], dtype="<f4").reshape(shape)
        pos += 4 * count
        if name not in expected:
            raise CheckpointError(f"unexpected tensor {name!r} for mode {config.mode}")
        if tuple(expected[name].shape) != tuple(shape):
            raise CheckpointError(
                f"shape mismatch for {name!r}: expected {tuple(expected[name].shape)}, got {tuple(shape)}"
            )
        loaded[name] = torch.tensor(data.copy(), dtype=torch.float32)
    missing = set(expected) - set(loaded)
    if missing:
        raise CheckpointError(f"checkpoint missing tensors: {sorted(missing)}")
    model.load_state_dict(loaded)
    return model, header
