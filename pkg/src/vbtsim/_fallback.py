"""Pure-numpy implementations of the raster kernels.

Pixel convention for all kernels: pixel ``(row j, col i)`` has its centre at
``(x=i, y=j)`` in pixel units.  Coverage is estimated by ``ss x ss``
supersampling, so values are multiples of ``1 / ss**2``.
"""
import numpy as np


def _sub_offsets(ss):
    return (np.arange(ss, dtype=np.float64) + 0.5) / ss - 0.5


def _sample_axes(i0, j0, nx, ny, ss):
    off = _sub_offsets(ss)
    xs = np.arange(i0, i0 + nx, dtype=np.float64)[:, None] + off[None, :]
    ys = np.arange(j0, j0 + ny, dtype=np.float64)[:, None] + off[None, :]
    return xs, ys  # (nx, ss), (ny, ss)


def disk_coverage(cx, cy, r, i0, j0, nx, ny, ss=4):
    xs, ys = _sample_axes(i0, j0, nx, ny, ss)
    dx = xs - cx
    dy = ys - cy
    d2 = dx[None, None, :, :] * dx[None, None, :, :] + dy[:, :, None, None] * dy[:, :, None, None]
    inside = d2 <= r * r
    return inside.sum(axis=(1, 3)).astype(np.float64) / (ss * ss)


def capsule_coverage(ax, ay, bx, by, hw, i0, j0, nx, ny, ss=4):
    xs, ys = _sample_axes(i0, j0, nx, ny, ss)
    px = xs[None, None, :, :]
    py = ys[:, :, None, None]
    ux = bx - ax
    uy = by - ay
    L2 = ux * ux + uy * uy
    wx = px - ax
    wy = py - ay
    if L2 > 0:
        t = (wx * ux + wy * uy) / L2
        t = np.clip(t, 0.0, 1.0)
    else:
        t = np.zeros(np.broadcast(wx, wy).shape)
    ex = wx - t * ux
    ey = wy - t * uy
    inside = ex * ex + ey * ey <= hw * hw
    return inside.sum(axis=(1, 3)).astype(np.float64) / (ss * ss)


def shift_rows_linear(img, shifts):
    """``out[r, c] = img[r, c - shifts[r]]`` with linear interpolation and edge clamping."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    src = np.arange(w, dtype=np.float64)[None, :] - np.asarray(shifts, dtype=np.float64)[:, None]
    src = np.clip(src, 0.0, w - 1.0)
    left = np.floor(src).astype(np.intp)
    left = np.minimum(left, w - 2) if w > 1 else left
    frac = src - left
    rows = np.arange(h)[:, None]
    if w == 1:
        return img.copy()
    a = img[rows, left]
    b = img[rows, left + 1]
    if img.ndim == 3:
        frac = frac[:, :, None]
    return a + frac * (b - a)


def label_moments(labels, weights, n):
    """Per-label ``[sum w, sum w*x, sum w*y, pixel count]`` for labels ``1..n`` (row k-1)."""
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    h, w = labels.shape
    flat = labels.ravel()
    wf = weights.ravel()
    xs = np.tile(np.arange(w, dtype=np.float64), h)
    ys = np.repeat(np.arange(h, dtype=np.float64), w)
    out = np.zeros((n, 4))
    mask = (flat >= 1) & (flat <= n)
    idx = flat[mask] - 1
    out[:, 0] = np.bincount(idx, wf[mask], minlength=n)
    out[:, 1] = np.bincount(idx, wf[mask] * xs[mask], minlength=n)
    out[:, 2] = np.bincount(idx, wf[mask] * ys[mask], minlength=n)
    out[:, 3] = np.bincount(idx, minlength=n)
    return out
