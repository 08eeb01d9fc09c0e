"""Per-frame ray rendering of the sphere scene.

The one genuinely hot loop in the data engine: for every pixel, intersect
the camera ray with every sphere, keep the nearest hit, and fall back to the
box interior (slab exit point) or the back wall.  Exists twice with the
same arithmetic:

* ``_render_frame_numba`` -- scalar loops under ``numba.njit``
* ``_render_frame_numpy`` -- broadcast over the pixel grid

``render_frame`` picks a path per call via :mod:`percepvid.accel`.

Outputs per frame:
    mask      [H, W] int16   nearest sphere's instance id, 0 = background
    pointmap  [3, H, W] f8   camera-frame XYZ of the hit (or wall) point
    shade     [H, W] f8      Lambert factor for object pixels, gray level
                             for background pixels
"""

import numpy as np

from ..accel import numba_enabled

# Direction from any surface point toward the light (unit length).
_L = np.array([-0.35, -0.5, -0.8])
_L = _L / np.linalg.norm(_L)
_LX, _LY, _LZ = float(_L[0]), float(_L[1]), float(_L[2])


def _render_frame_numpy(centers, radii, ids, fx, fy, cx, cy, z0, extent, H, W):
    n = centers.shape[0]
    jj, ii = np.meshgrid(np.arange(W, dtype=np.float64), np.arange(H, dtype=np.float64))
    dx = (jj - cx) / fx
    dy = (ii - cy) / fy
    # dz == 1 everywhere, so the ray parameter t equals camera-space Z.
    a = dx * dx + dy * dy + 1.0

    best_t = np.full((H, W), np.inf)
    best_k = np.full((H, W), -1, dtype=np.int64)
    for k in range(n):
        sx, sy, sz = centers[k]
        b = -2.0 * (dx * sx + dy * sy + sz)
        c0 = sx * sx + sy * sy + sz * sz - radii[k] * radii[k]
        disc = b * b - 4.0 * a * c0
        hit = disc >= 0.0
        t = np.where(hit, (-b - np.sqrt(np.where(hit, disc, 0.0))) / (2.0 * a), np.inf)
        closer = (t > 0.0) & (t < best_t)
        best_t = np.where(closer, t, best_t)
        best_k = np.where(closer, k, best_k)

    obj = best_k >= 0
    mask = np.zeros((H, W), dtype=np.int16)
    mask[obj] = ids[best_k[obj]]

    # Background: exit point of the box slab, else the back-wall plane.
    zlo, zhi = z0 - extent, z0 + extent
    with np.errstate(divide="ignore"):
        tx_hi = np.where(dx != 0.0, np.maximum(-extent / dx, extent / dx), np.inf)
        ty_hi = np.where(dy != 0.0, np.maximum(-extent / dy, extent / dy), np.inf)
        tx_lo = np.where(dx != 0.0, np.minimum(-extent / dx, extent / dx), -np.inf)
        ty_lo = np.where(dy != 0.0, np.minimum(-extent / dy, extent / dy), -np.inf)
    t_in = np.maximum(np.maximum(tx_lo, ty_lo), zlo)
    t_out = np.minimum(np.minimum(tx_hi, ty_hi), zhi)
    t_bg = np.where((t_in < t_out) & (t_out > 0.0), t_out, zhi)

    t_hit = np.where(obj, best_t, t_bg)
    pointmap = np.stack([dx * t_hit, dy * t_hit, t_hit])

    shade = np.empty((H, W), dtype=np.float64)
    bg_shade = 0.55 - 0.25 * (t_bg - zlo) / (2.0 * extent)
    shade[:] = np.clip(bg_shade, 0.25, 0.6)
    if n:
        csel = centers[np.where(obj, best_k, 0)]
        rsel = radii[np.where(obj, best_k, 0)]
        nx = (dx * t_hit - csel[..., 0]) / rsel
        ny = (dy * t_hit - csel[..., 1]) / rsel
        nz = (t_hit - csel[..., 2]) / rsel
        lam = np.maximum(0.0, nx * _LX + ny * _LY + nz * _LZ)
        shade = np.where(obj, lam, shade)
    return mask, pointmap, shade


def _render_frame_plain(centers, radii, ids, fx, fy, cx, cy, z0, extent, H, W):
    # Scalar-loop reference; the numba-compiled variant wraps this body.
    n = centers.shape[0]
    mask = np.zeros((H, W), dtype=np.int16)
    pointmap = np.empty((3, H, W), dtype=np.float64)
    shade = np.empty((H, W), dtype=np.float64)
    zlo = z0 - extent
    zhi = z0 + extent
    for i in range(H):
        for j in range(W):
            dx = (j - cx) / fx
            dy = (i - cy) / fy
            a = dx * dx + dy * dy + 1.0
            best_t = np.inf
            best_k = -1
            for k in range(n):
                sx = centers[k, 0]
                sy = centers[k, 1]
                sz = centers[k, 2]
                b = -2.0 * (dx * sx + dy * sy + sz)
                c0 = sx * sx + sy * sy + sz * sz - radii[k] * radii[k]
                disc = b * b - 4.0 * a * c0
                if disc < 0.0:
                    continue
                t = (-b - np.sqrt(disc)) / (2.0 * a)
                if 0.0 < t < best_t:
                    best_t = t
                    best_k = k
            if best_k >= 0:
                mask[i, j] = ids[best_k]
                px = dx * best_t
                py = dy * best_t
                pz = best_t
                pointmap[0, i, j] = px
                pointmap[1, i, j] = py
                pointmap[2, i, j] = pz
                r = radii[best_k]
                nx = (px - centers[best_k, 0]) / r
                ny = (py - centers[best_k, 1]) / r
                nz = (pz - centers[best_k, 2]) / r
                lam = nx * _LX + ny * _LY + nz * _LZ
                shade[i, j] = lam if lam > 0.0 else 0.0
            else:
                if dx != 0.0:
                    lo = -extent / dx
                    hi = extent / dx
                    tx_lo = lo if lo < hi else hi
                    tx_hi = hi if hi > lo else lo
                else:
                    tx_lo = -np.inf
                    tx_hi = np.inf
                if dy != 0.0:
                    lo = -extent / dy
                    hi = extent / dy
                    ty_lo = lo if lo < hi else hi
                    ty_hi = hi if hi > lo else lo
                else:
                    ty_lo = -np.inf
                    ty_hi = np.inf
                t_in = max(tx_lo, ty_lo, zlo)
                t_out = min(tx_hi, ty_hi, zhi)
                t_bg = t_out if (t_in < t_out and t_out > 0.0) else zhi
                pointmap[0, i, j] = dx * t_bg
                pointmap[1, i, j] = dy * t_bg
                pointmap[2, i, j] = t_bg
                s = 0.55 - 0.25 * (t_bg - zlo) / (2.0 * extent)
                shade[i, j] = min(max(s, 0.25), 0.6)
    return mask, pointmap, shade


try:
    from numba import njit

    _render_frame_numba = njit(cache=True, nogil=True)(_render_frame_plain)
except ImportError:  # pragma: no cover
    _render_frame_numba = _render_frame_plain


def render_frame(centers, radii, ids, camera, extent, H, W):
    """Render one frame of spheres; see module docstring for outputs.

    Args:
        centers: [n, 3] float64 sphere centers in camera frame.
        radii: [n] float64.
        ids: [n] int16 instance labels (>= 1).
        camera: Camera with fx/fy/cx/cy/z0.
        extent: box half-extent.
        H, W: output resolution.
    """
    centers = np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 3)
    radii = np.ascontiguousarray(radii, dtype=np.float64)
    ids = np.ascontiguousarray(ids, dtype=np.int16)
    args = (
        centers,
        radii,
        ids,
        float(camera.fx),
        float(camera.fy),
        float(camera.cx),
        float(camera.cy),
        float(camera.z0),
        float(extent),
        int(H),
        int(W),
    )
    if numba_enabled():
        return _render_frame_numba(*args)
    return _render_frame_numpy(*args)
