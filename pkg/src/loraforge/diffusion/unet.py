"""Cross-attention U-Net noise predictor.

Three resolution levels with widths ``arch.widths``, two residual blocks
per level, cross-attention after each residual block at the middle and
bottom resolutions. Every cross-attention layer carries a stable string id
so adapters can target its projections, and the forward pass accepts

  * ``overlay``: {layer_id: {"q"|"k"|"v": [(A, B, strength), ...]}} with the
    low-rank factors applied on top of the frozen projection weights, and
  * ``cond``: optional per-resolution residual feature maps (from a trained
    structural conditioner) that are added to the skip/mid features.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import tensor as T
from ..errors import ConfigError
from ..nn import Conv2d, CrossAttention, GroupNorm, Linear, Module, ModuleList
from ..tensor import Tensor
from .text import CONTEXT_LEN, VOCAB


@dataclass
class ArchSpec:
    widths: tuple = (32, 64, 128)
    num_res_blocks: int = 2
    groups: int = 8
    text_dim: int = 64
    time_dim: int = 128
    in_channels: int = 3
    base_size: int = 32
    vocab_size: int = field(default_factory=lambda: len(VOCAB))
    ctx_len: int = CONTEXT_LEN

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        if len(self.widths) != 3:
            raise ConfigError(f"need exactly 3 widths, got {self.widths}")
        for c in self._all_channel_counts():
            if c % self.groups:
                raise ConfigError(
                    f"groups={self.groups} must divide every block width, "
                    f"offending channel count {c}")
        if self.base_size % 4:
            raise ConfigError(f"base_size must be divisible by 4, got {self.base_size}")

    def _all_channel_counts(self):
        c0, c1, c2 = self.widths
        return {c0, c1, c2, c1 + c2, c0 + c1}

    def canonical_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def content_hash(self) -> bytes:
        """8-byte digest identifying the architecture (adapter compatibility)."""
        return hashlib.blake2b(self.canonical_json().encode(), digest_size=8).digest()


def timestep_features(t: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal features of integer timesteps, [B, dim]."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    ang = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1).astype(np.float32)


class ResBlock(Module):
    def __init__(self, c_in: int, c_out: int, time_dim: int, groups: int,
                 rng: np.random.Generator):
        super().__init__()
        self.gn1 = GroupNorm(groups, c_in)
        self.conv1 = Conv2d(c_in, c_out, rng)
        self.temb = Linear(time_dim, c_out, rng)
        self.gn2 = GroupNorm(groups, c_out)
        self.conv2 = Conv2d(c_out, c_out, rng)
        self.skip = Conv2d(c_in, c_out, rng, kernel=1, padding=0) if c_in != c_out else None

    def forward(self, x: Tensor, temb: Tensor) -> Tensor:
        h = self.conv1(self.gn1(x).silu())
        b, c = temb.data.shape[0], h.data.shape[1]
        h = h + self.temb(temb).reshape(b, c, 1, 1)
        h = self.conv2(self.gn2(h).silu())
        return h + (self.skip(x) if self.skip is not None else x)

    __call__ = forward


class AttnBlock(Module):
    """Residual cross-attention over the spatial positions."""

    def __init__(self, channels: int, text_dim: int, layer_id: str, groups: int,
                 rng: np.random.Generator):
        super().__init__()
        self.gn = GroupNorm(groups, channels)
        self.attn = CrossAttention(channels, text_dim, layer_id, rng)

    def forward(self, x: Tensor, ctx: Tensor, overlay=None) -> Tensor:
        b, c, h, w = x.data.shape
        tokens = self.gn(x).reshape(b, c, h * w).transpose(0, 2, 1)
        terms = (overlay or {}).get(self.attn.layer_id)
        out = self.attn(tokens, ctx, lora_terms=terms)
        return x + out.transpose(0, 2, 1).reshape(b, c, h, w)

    __call__ = forward


class Denoiser(Module):
    """Predicts the noise added to a latent, conditioned on text context."""

    def __init__(self, arch: ArchSpec, rng: np.random.Generator):
        super().__init__()
        self.arch = arch
        c0, c1, c2 = arch.widths
        td, gd = arch.time_dim, arch.groups
        n = arch.num_res_blocks

        self.time1 = Linear(td // 4, td, rng)
        self.time2 = Linear(td, td, rng)

        self.stem = Conv2d(arch.in_channels, c0, rng)
        self.down0 = ModuleList(ResBlock(c0, c0, td, gd, rng) for _ in range(n))
        self.down1 = ModuleList(ResBlock(c0 if i == 0 else c1, c1, td, gd, rng)
                                for i in range(n))
        self.down1_attn = ModuleList(
            AttnBlock(c1, arch.text_dim, f"down1.{i}.attn", gd, rng) for i in range(n))
        self.mid = ModuleList(ResBlock(c1 if i == 0 else c2, c2, td, gd, rng)
                              for i in range(n))
        self.mid_attn = ModuleList(
            AttnBlock(c2, arch.text_dim, f"mid.{i}.attn", gd, rng) for i in range(n))
        self.up1 = ModuleList(ResBlock(c2 + c1 if i == 0 else c1, c1, td, gd, rng)
                              for i in range(n))
        self.up1_attn = ModuleList(
            AttnBlock(c1, arch.text_dim, f"up1.{i}.attn", gd, rng) for i in range(n))
        self.up0 = ModuleList(ResBlock(c1 + c0 if i == 0 else c0, c0, td, gd, rng)
                              for i in range(n))
        self.head_gn = GroupNorm(gd, c0)
        self.head = Conv2d(c0, arch.in_channels, rng)
        # start as epsilon ~ 0 predictor
        self.head.w.data[:] = 0.0

    # stable ids of the adapter-injectable attention layers
    def attention_layers(self) -> list[CrossAttention]:
        blocks = list(self.down1_attn) + list(self.mid_attn) + list(self.up1_attn)
        return [blk.attn for blk in blocks]

    def _time_embedding(self, t: np.ndarray) -> Tensor:
        feats = Tensor(timestep_features(t, self.arch.time_dim // 4))
        return self.time2(self.time1(feats).silu())

    def forward(self, z: Tensor, t: np.ndarray, ctx: Tensor,
                overlay=None, cond=None, cond_strength: float = 1.0) -> Tensor:
        temb = self._time_embedding(t)

        def fuse(x, idx):
            # skip the add for absent/all-zero residuals so a fresh
            # conditioner is a bit-exact identity
            if cond is None or cond_strength == 0.0:
                return x
            r = cond[idx]
            if not np.any(r.data):
                return x
            return x + r * float(cond_strength)

        h = self.stem(z)
        for blk in self.down0:
            h = blk(h, temb)
        skip0 = fuse(h, 0)
        h = T.avg_pool2(h)
        for blk, attn in zip(self.down1, self.down1_attn):
            h = attn(blk(h, temb), ctx, overlay)
        skip1 = fuse(h, 1)
        h = T.avg_pool2(h)
        for blk, attn in zip(self.mid, self.mid_attn):
            h = attn(blk(h, temb), ctx, overlay)
        h = fuse(h, 2)
        h = T.upsample2(h)
        h = T.concat([h, skip1], axis=1)
        for blk, attn in zip(self.up1, self.up1_attn):
            h = attn(blk(h, temb), ctx, overlay)
        h = T.upsample2(h)
        h = T.concat([h, skip0], axis=1)
        for blk in self.up0:
            h = blk(h, temb)
        return self.head(self.head_gn(h).silu())

    __call__ = forward
