"""Minimal video diffusion transformer.

Patchify -> K pre-norm transformer blocks with adaptive layer-norm
conditioning (all modulation projections zero-initialized, so each block
starts as the identity and the final head starts at zero) -> unpatchify.
The forward pass optionally returns every block's output tokens; the
dual-branch teacher and the distiller both consume those.

Conditioning is the sum of a sinusoidal-MLP timestep embedding and a
learned class embedding (one reserved null row enables classifier-free
guidance), with an optional externally supplied vector added on top (the
per-modality task embeddings enter through that hook).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange

from .rope import Rope3D


@dataclass
class BackboneConfig:
    K: int = 8
    d: int = 128
    heads: int = 4
    patch: tuple[int, int, int] = (1, 2, 2)
    in_channels: int = 12
    out_channels: int | None = None
    n_classes: int = 4
    rope: bool = True
    mlp_ratio: float = 4.0

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if self.d % self.heads:
            raise ValueError("d must be divisible by heads")
        if self.out_channels is None:
            self.out_channels = self.in_channels

    @property
    def null_class(self) -> int:
        return self.n_classes  # reserved embedding row for dropped conditions


def zero_module(m: nn.Module) -> nn.Module:
    for p in m.parameters():
        nn.init.zeros_(p)
    return m


def sinusoidal_embedding(t: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    """Standard frequency embedding of t (scaled by 1000) into `dim` dims."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(max_period) * torch.arange(half, dtype=t.dtype, device=t.device) / half
    )
    args = t[:, None] * 1000.0 * freqs[None]
    return torch.cat([torch.cos(args), torch.sin(args)], dim=-1)


class TimestepEmbedder(nn.Module):
    def __init__(self, d: int, freq_dim: int = 256):
        super().__init__()
        self.freq_dim = freq_dim
        self.mlp = nn.Sequential(nn.Linear(freq_dim, d), nn.SiLU(), nn.Linear(d, d))

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        return self.mlp(sinusoidal_embedding(t, self.freq_dim))


class Attention(nn.Module):
    def __init__(self, d: int, heads: int):
        super().__init__()
        self.heads = heads
        self.qkv = nn.Linear(d, 3 * d)
        self.proj = nn.Linear(d, d)

    def forward(self, x, rope_cos=None, rope_sin=None):
        B, n, d = x.shape
        q, k, v = rearrange(self.qkv(x), "b n (three h e) -> three b h n e", three=3, h=self.heads)
        if rope_cos is not None:
            q = Rope3D.rotate(q, rope_cos, rope_sin)
            k = Rope3D.rotate(k, rope_cos, rope_sin)
        out = F.scaled_dot_product_attention(q, k, v)
        return self.proj(rearrange(out, "b h n e -> b n (h e)"))


def modulate(x, shift, scale):
    return x * (1.0 + scale[:, None, :]) + shift[:, None, :]


class DiTBlock(nn.Module):
    def __init__(self, d: int, heads: int, mlp_ratio: float):
        super().__init__()
        self.norm1 = nn.LayerNorm(d, elementwise_affine=False, eps=1e-6)
        self.attn = Attention(d, heads)
        self.norm2 = nn.LayerNorm(d, elementwise_affine=False, eps=1e-6)
        hidden = int(d * mlp_ratio)
        self.mlp = nn.Sequential(nn.Linear(d, hidden), nn.GELU(approximate="tanh"), nn.Linear(hidden, d))
        self.ada = nn.Sequential(nn.SiLU(), zero_module(nn.Linear(d, 6 * d)))

    def forward(self, x, c, rope_cos=None, rope_sin=None):
        shift_a, scale_a, gate_a, shift_m, scale_m, gate_m = self.ada(c).chunk(6, dim=-1)
        x = x + gate_a[:, None, :] * self.attn(modulate(self.norm1(x), shift_a, scale_a), rope_cos, rope_sin)
        x = x + gate_m[:, None, :] * self.mlp(modulate(self.norm2(x), shift_m, scale_m))
        return x


class FinalLayer(nn.Module):
    def __init__(self, d: int, out_features: int):
        super().__init__()
        self.norm = nn.LayerNorm(d, elementwise_affine=False, eps=1e-6)
        self.ada = nn.Sequential(nn.SiLU(), zero_module(nn.Linear(d, 2 * d)))
        self.proj = zero_module(nn.Linear(d, out_features))

    def forward(self, x, c):
        shift, scale = self.ada(c).chunk(2, dim=-1)
        return self.proj(modulate(self.norm(x), shift, scale))


class Backbone(nn.Module):
    """The denoiser u(z_t, y, t; theta).

    Args (forward):
        z: noisy latent [B, c, f, h, w].
        y: class indices [B] (use cfg.null_class for unconditioned rows).
        t: diffusion times [B] in [0, 1].
        cond_add: optional [d] or [B, d] vector added to the condition
            (task-embedding hook).
        token_add: optional [d] vector added to every input token.
        return_hidden: also return the list of K per-block token outputs.
        pos_w_offset: shifts the rotary width coordinate (spatial-fusion
            uses it to disambiguate side-by-side modalities).

    Returns:
        eps prediction of z's shape, or (eps, hiddens).
    """

    def __init__(self, cfg: BackboneConfig):
        super().__init__()
        self.cfg = cfg
        pv = cfg.patch[0] * cfg.patch[1] * cfg.patch[2]
        self.patch_proj = nn.Linear(cfg.in_channels * pv, cfg.d)
        self.t_embedder = TimestepEmbedder(cfg.d)
        self.y_embedder = nn.Embedding(cfg.n_classes + 1, cfg.d)
        self.blocks = nn.ModuleList(DiTBlock(cfg.d, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.K))
        self.final = FinalLayer(cfg.d, cfg.out_channels * pv)
        self.rope = Rope3D(cfg.d // cfg.heads) if cfg.rope else None
        nn.init.normal_(self.y_embedder.weight, std=0.02)

    # -- token-level pieces (the dual-branch teacher drives these directly) --

    def grid_shape(self, latent_shape) -> tuple[int, int, int]:
        _, f, h, w = latent_shape[-4:]
        pt, ph, pw = self.cfg.patch
        if f % pt or h % ph or w % pw:
            raise ValueError(f"latent {latent_shape} not divisible by patch {self.cfg.patch}")
        return (f // pt, h // ph, w // pw)

    def token_grid(self, latent_shape) -> tuple[int, int]:
        """(temporal token count f, spatial token count n_s)."""
        gf, gh, gw = self.grid_shape(latent_shape)
        return gf, gh * gw

    def patchify(self, z: torch.Tensor) -> torch.Tensor:
        pt, ph, pw = self.cfg.patch
        x = rearrange(z, "b c (f pt) (h ph) (w pw) -> b (f h w) (c pt ph pw)", pt=pt, ph=ph, pw=pw)
        return self.patch_proj(x)

    def unpatchify(self, x: torch.Tensor, latent_shape) -> torch.Tensor:
        gf, gh, gw = self.grid_shape(latent_shape)
        pt, ph, pw = self.cfg.patch
        return rearrange(
            x,
            "b (f h w) (c pt ph pw) -> b c (f pt) (h ph) (w pw)",
            f=gf, h=gh, w=gw, pt=pt, ph=ph, pw=pw,
        )

    def positions(self, latent_shape, w_offset: int = 0, device=None) -> torch.Tensor:
        gf, gh, gw = self.grid_shape(latent_shape)
        f_i, h_i, w_i = torch.meshgrid(
            torch.arange(gf, device=device),
            torch.arange(gh, device=device),
            torch.arange(gw, device=device),
            indexing="ij",
        )
        pos = torch.stack([f_i, h_i, w_i + w_offset], dim=-1).reshape(-1, 3)
        return pos

    def rope_tables(self, positions: torch.Tensor | None):
        if self.rope is None or positions is None:
            return None, None
        return self.rope.angles(positions)

    def condition(self, t: torch.Tensor, y: torch.Tensor, cond_add: torch.Tensor | None = None):
        c = self.t_embedder(t) + self.y_embedder(y)
        if cond_add is not None:
            c = c + cond_add
        return c

    # -- standard single-stream forward --

    def forward(
        self,
        z: torch.Tensor,
        y: torch.Tensor,
        t: torch.Tensor,
        cond_add: torch.Tensor | None = None,
        token_add: torch.Tensor | None = None,
        return_hidden: bool = False,
        pos_w_offset: int = 0,
    ):
        c = self.condition(t, y, cond_add)
        x = self.patchify(z)
        if token_add is not None:
            x = x + token_add
        pos = self.positions(z.shape, w_offset=pos_w_offset, device=z.device) if self.rope else None
        cos, sin = self.rope_tables(pos)
        hiddens = []
        for block in self.blocks:
            x = block(x, c, cos, sin)
            if return_hidden:
                hiddens.append(x)
        eps = self.unpatchify(self.final(x, c), z.shape)
        if return_hidden:
            return eps, hiddens
        return eps

    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())
