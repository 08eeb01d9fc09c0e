"""Exactly invertible pixel<->latent codec.

Replaces a learned video VAE with a deterministic rearrangement: temporal
and spatial space-to-depth folds factors (t_f, s_f, s_f) into the channel
axis, followed by a fixed affine map to roughly unit scale.  Keeps the
latent shape contract

    [3, F, H, W]  <->  [3 * t_f * s_f^2, F / t_f, H / s_f, W / s_f]

without any information loss, so every diffusion-side property can be
verified end to end in pixel space.  A trainable codec could be swapped in
behind the same two functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from einops import rearrange


@dataclass(slots=True)
class CodecConfig:
    t_f: int = 2
    s_f: int = 2
    scale: float = 2.0
    shift: float = 0.5

    def latent_channels(self, pixel_channels: int = 3) -> int:
        return pixel_channels * self.t_f * self.s_f * self.s_f

    def latent_shape(self, pixel_shape: tuple[int, int, int, int]) -> tuple[int, int, int, int]:
        c, F, H, W = pixel_shape
        self.check_divisible(F, H, W)
        return (c * self.t_f * self.s_f**2, F // self.t_f, H // self.s_f, W // self.s_f)

    def check_divisible(self, F: int, H: int, W: int) -> None:
        if F % self.t_f:
            raise ValueError(f"frame axis F={F} not divisible by t_f={self.t_f}")
        if H % self.s_f:
            raise ValueError(f"height axis H={H} not divisible by s_f={self.s_f}")
        if W % self.s_f:
            raise ValueError(f"width axis W={W} not divisible by s_f={self.s_f}")


@dataclass(slots=True)
class LatentBlock:
    """Latent tensor [c, f, h, w] plus the codec config that produced it."""

    data: torch.Tensor
    config: CodecConfig

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)


def _to_tensor(frames) -> torch.Tensor:
    if isinstance(frames, torch.Tensor):
        return frames.float()
    return torch.from_numpy(np.ascontiguousarray(frames)).float()


def encode_tensor(x: torch.Tensor, cfg: CodecConfig) -> torch.Tensor:
    """Rearrange+affine for [..., c, F, H, W] tensors (batched or not)."""
    cfg.check_divisible(x.shape[-3], x.shape[-2], x.shape[-1])
    z = rearrange(
        x,
        "... c (f tf) (h sf) (w sg) -> ... (c tf sf sg) f h w",
        tf=cfg.t_f,
        sf=cfg.s_f,
        sg=cfg.s_f,
    )
    return (z - cfg.shift) * cfg.scale


def decode_tensor(z: torch.Tensor, cfg: CodecConfig) -> torch.Tensor:
    x = z / cfg.scale + cfg.shift
    return rearrange(
        x,
        "... (c tf sf sg) f h w -> ... c (f tf) (h sf) (w sg)",
        tf=cfg.t_f,
        sf=cfg.s_f,
        sg=cfg.s_f,
    )


def encode(frames, cfg: CodecConfig | None = None) -> LatentBlock:
    """Pixel clip [3, F, H, W] (numpy or tensor, or a clip object with a
    ``frames`` attribute) -> LatentBlock."""
    cfg = cfg or CodecConfig()
    if hasattr(frames, "frames"):
        frames = frames.frames
    return LatentBlock(data=encode_tensor(_to_tensor(frames), cfg), config=cfg)


def decode(latent: LatentBlock) -> np.ndarray:
    """Exact inverse of encode; returns float32 [3, F, H, W]."""
    return decode_tensor(latent.data, latent.config).numpy()
