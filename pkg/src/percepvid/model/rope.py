"""Axial 3D rotary position embedding over (frame, height, width) indices.

The per-head channel budget is split across the three axes (pairs of
channels rotate together, so each axis gets an even sub-dimension; the
frame axis absorbs the remainder).  Queries and keys are rotated by the
angle of their token's grid position; relative offsets then appear as
phase differences inside the attention dot product.
"""

from __future__ import annotations

import torch


def split_axis_dims(head_dim: int) -> tuple[int, int, int]:
    """Even per-axis channel counts (df, dh, dw) summing to head_dim."""
    if head_dim % 2:
        raise ValueError("head_dim must be even for rotary embedding")
    pairs = head_dim // 2
    base = pairs // 3
    rem = pairs - 3 * base
    return (2 * (base + rem), 2 * base, 2 * base)


class Rope3D:
    """Precomputes cos/sin tables for integer (f, h, w) token positions."""

    def __init__(self, head_dim: int, theta: float = 10000.0):
        self.head_dim = head_dim
        self.axis_dims = split_axis_dims(head_dim)
        self.theta = theta

    def angles(self, positions: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """positions [n, 3] int -> (cos, sin), each [n, head_dim // 2]."""
        parts = []
        for axis, dim in enumerate(self.axis_dims):
            if dim == 0:
                continue
            half = dim // 2
            freqs = self.theta ** (
                -torch.arange(half, dtype=torch.float64, device=positions.device) / half
            )
            parts.append(positions[:, axis].double()[:, None] * freqs[None, :])
        ang = torch.cat(parts, dim=1)
        return ang.cos(), ang.sin()

    @staticmethod
    def rotate(x: torch.Tensor, cos: torch.Tensor, sin: torch.Tensor) -> torch.Tensor:
        """Rotate channel pairs of x [..., n, head_dim] by per-token angles."""
        cos = cos.to(x.dtype)
        sin = sin.to(x.dtype)
        x1 = x[..., 0::2]
        x2 = x[..., 1::2]
        out = torch.empty_like(x)
        out[..., 0::2] = x1 * cos - x2 * sin
        out[..., 1::2] = x1 * sin + x2 * cos
        return out
