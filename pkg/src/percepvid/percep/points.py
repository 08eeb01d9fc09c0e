"""Point sampling on masks and the (x, y, 1/z) -> RGB color rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NoSubjectError(ValueError):
    """Raised when frame 1 contains no masked pixels to sample from."""


def sample_mask_pixels(mask: np.ndarray, n_points: int, rng: np.random.Generator):
    """Uniformly sample up to n_points distinct masked pixels of one mask.

    Returns (rows, cols) int arrays of length min(n_points, masked pixels).
    Raises NoSubjectError when the mask is empty.
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    flat = np.flatnonzero(mask)
    if flat.size == 0:
        raise NoSubjectError("no physical subject")
    take = min(n_points, flat.size)
    chosen = rng.choice(flat, size=take, replace=False)
    rows, cols = np.unravel_index(chosen, mask.shape)
    return rows, cols


@dataclass(slots=True)
class PointSet:
    """Frame-1 sample of surface points with their source pixels."""

    rows: np.ndarray  # [N] int
    cols: np.ndarray  # [N] int
    xyz: np.ndarray  # [N, 3] float64, camera-frame position at frame 1
    instance: np.ndarray  # [N] int16


def sample_points(masks: np.ndarray, pointmap: np.ndarray, n_points: int, seed: int = 0) -> PointSet:
    """Sample points uniformly from the union of frame-1 masks.

    Args:
        masks: [F, H, W] integer instance labels.
        pointmap: [3, F, H, W] camera-frame XYZ.
        n_points: requested count; the result holds
            min(n_points, masked pixels) points.
        seed: sampling seed.

    Raises:
        NoSubjectError: empty mask union in frame 1 (clip should be skipped).
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x9013]))
    rows, cols = sample_mask_pixels(masks[0], n_points, rng)
    xyz = pointmap[:, 0, rows, cols].astype(np.float64).T
    return PointSet(rows=rows, cols=cols, xyz=xyz, instance=masks[0, rows, cols].astype(np.int16))


def _minmax01(values: np.ndarray) -> np.ndarray:
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.full_like(values, 0.5)
    return (values - lo) / (hi - lo)


def assign_colors(xyz: np.ndarray) -> np.ndarray:
    """Color each point by its normalized (x, y, 1/z) coordinates.

    Normalization is per-axis min-max over this (frame-1) point set, which
    is what keeps every point's color constant for the rest of the clip.
    A degenerate axis (all values equal) maps to 0.5.

    Args:
        xyz: [N, 3] float64 camera-frame positions with z > 0.

    Returns:
        [N, 3] float64 RGB in [0, 1].
    """
    xyz = np.asarray(xyz, dtype=np.float64)
    if np.any(xyz[:, 2] <= 0):
        raise ValueError("all sampled points must have z > 0")
    r = _minmax01(xyz[:, 0])
    g = _minmax01(xyz[:, 1])
    b = _minmax01(1.0 / xyz[:, 2])
    return np.stack([r, g, b], axis=1)
