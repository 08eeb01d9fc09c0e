"""Disc rasterization for track points, numba and numpy twins.

Points arrive pre-sorted far-to-nearest (the caller owns z-ordering so both
paths paint in the byte-identical order).  A disc of radius R covers every
pixel whose center lies within R of the rounded projection.
"""

import numpy as np

from ..accel import numba_enabled


def _rasterize_plain(img, us, vs, colors, radius):
    H = img.shape[1]
    W = img.shape[2]
    n = us.shape[0]
    r2 = radius * radius
    for p in range(n):
        cu = int(np.rint(us[p]))
        cv = int(np.rint(vs[p]))
        for di in range(-radius, radius + 1):
            i = cv + di
            if i < 0 or i >= H:
                continue
            for dj in range(-radius, radius + 1):
                j = cu + dj
                if j < 0 or j >= W:
                    continue
                if di * di + dj * dj <= r2:
                    img[0, i, j] = colors[p, 0]
                    img[1, i, j] = colors[p, 1]
                    img[2, i, j] = colors[p, 2]
    return img


try:
    from numba import njit

    _rasterize_numba = njit(cache=True, nogil=True)(_rasterize_plain)
except ImportError:  # pragma: no cover
    _rasterize_numba = _rasterize_plain


def _rasterize_numpy(img, us, vs, colors, radius):
    # Vectorized per point: stamp a precomputed disc footprint.
    H, W = img.shape[1], img.shape[2]
    di, dj = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    inside = (di * di + dj * dj) <= radius * radius
    di = di[inside]
    dj = dj[inside]
    cu = np.rint(us).astype(np.int64)
    cv = np.rint(vs).astype(np.int64)
    for p in range(us.shape[0]):
        ii = cv[p] + di
        jj = cu[p] + dj
        ok = (ii >= 0) & (ii < H) & (jj >= 0) & (jj < W)
        img[:, ii[ok], jj[ok]] = colors[p][:, None]
    return img


def rasterize_discs(img, us, vs, colors, radius=1):
    """Paint constant-color discs into img [3, H, W] in place.

    Args:
        img: float32 [3, H, W], modified in place and returned.
        us, vs: [n] float projections (u = column, v = row), already
            ordered far-to-near.
        colors: [n, 3] float32 per-point color.
        radius: disc radius in pixels.
    """
    us = np.ascontiguousarray(us, dtype=np.float64)
    vs = np.ascontiguousarray(vs, dtype=np.float64)
    colors = np.ascontiguousarray(colors, dtype=np.float32)
    if numba_enabled():
        return _rasterize_numba(img, us, vs, colors, int(radius))
    return _rasterize_numpy(img, us, vs, colors, int(radius))
