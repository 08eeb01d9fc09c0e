"""Compositing of segmentation, geometry and tracks into one pseudo-RGB clip.

Layer order (coarse to fine): the pointmap layer paints global geometry as
color, the segmentation layer tints object regions, and the track layer
stamps point discs on top, nearest point last.  Any subset of layers can be
selected; the result always has the exact shape of the paired RGB clip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import rasterize_discs
from .points import _minmax01

# Tints for the segmentation layer (instance id 1 -> entry 0, cycled).
SEG_TINTS = np.array(
    [
        [0.95, 0.45, 0.10],
        [0.20, 0.85, 0.45],
        [0.35, 0.45, 1.00],
        [0.90, 0.20, 0.75],
        [1.00, 0.90, 0.20],
        [0.15, 0.90, 0.95],
    ],
    dtype=np.float64,
)

SEG_ALPHA = 0.55
ALL_LAYERS = ("xyz", "seg", "tracks")


@dataclass(slots=True)
class PercepClip:
    """Pseudo-RGB perception video [3, F, H, W] float32 in [0, 1]."""

    frames: np.ndarray
    layers: tuple[str, ...] = ALL_LAYERS
    n_points: int = 0

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.frames.shape)


def default_disc_radius(H: int, W: int) -> int:
    """1 px at 64x64, scaled with resolution."""
    return max(1, round(min(H, W) / 64))


def _xyz_layer(pointmap: np.ndarray) -> np.ndarray:
    """Colorize the pointmap: per-clip min-max of (X, Y, 1/Z) -> RGB."""
    x = pointmap[0].astype(np.float64)
    y = pointmap[1].astype(np.float64)
    iz = 1.0 / pointmap[2].astype(np.float64)
    return np.stack([_minmax01(x), _minmax01(y), _minmax01(iz)]).astype(np.float32)


def render_percep(
    track_positions: np.ndarray,
    track_colors: np.ndarray,
    masks: np.ndarray,
    pointmap: np.ndarray,
    camera,
    layers: tuple[str, ...] = ALL_LAYERS,
    radius: int | None = None,
    background: float = 0.2,
) -> PercepClip:
    """Render the unified perception clip.

    Args:
        track_positions: [N, F, 3] camera-frame trajectories (N may be 0).
        track_colors: [N, 3] in [0, 1]; constant per point across frames.
        masks: [F, H, W] instance labels.
        pointmap: [3, F, H, W] camera-frame XYZ.
        camera: pinhole camera used for track projection.
        layers: subset of ("xyz", "seg", "tracks") to composite.
        radius: track disc radius in px; default scales with resolution.
        background: gray level used when the xyz layer is off.

    A track point with z <= 0 in some frame is omitted for that frame only;
    off-frame projections are clipped by the rasterizer.
    """
    for layer in layers:
        if layer not in ALL_LAYERS:
            raise ValueError(f"unknown layer {layer!r}")
    F, H, W = masks.shape
    if radius is None:
        radius = default_disc_radius(H, W)

    if "xyz" in layers:
        frames = _xyz_layer(pointmap).copy()
    else:
        frames = np.full((3, F, H, W), background, dtype=np.float32)

    if "seg" in layers:
        for s in range(F):
            m = masks[s]
            for inst in np.unique(m):
                if inst == 0:
                    continue
                tint = SEG_TINTS[(int(inst) - 1) % len(SEG_TINTS)]
                sel = m == inst
                frames[:, s, sel] = (
                    (1.0 - SEG_ALPHA) * frames[:, s, sel] + SEG_ALPHA * tint[:, None]
                ).astype(np.float32)

    n_tracks = int(track_positions.shape[0]) if track_positions is not None else 0
    if "tracks" in layers and n_tracks:
        colors = np.asarray(track_colors, dtype=np.float32)
        for s in range(F):
            pos = track_positions[:, s, :]
            z = pos[:, 2]
            visible = z > 0.0
            if not visible.any():
                continue
            u = camera.fx * pos[visible, 0] / z[visible] + camera.cx
            v = camera.fy * pos[visible, 1] / z[visible] + camera.cy
            # Far-to-near paint order, stable so ties resolve identically
            # on both kernel paths.
            order = np.argsort(-z[visible], kind="stable")
            rasterize_discs(frames[:, s], u[order], v[order], colors[visible][order], radius)

    frames = np.clip(frames, 0.0, 1.0)
    return PercepClip(frames=frames, layers=tuple(layers), n_points=n_tracks)
