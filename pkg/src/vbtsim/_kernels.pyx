# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled raster kernels; same contracts as ``vbtsim._fallback``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _off(int k, int ss) nogil:
    return (k + 0.5) / ss - 0.5


def disk_coverage(double cx, double cy, double r, long i0, long j0, long nx, long ny, int ss=4):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((ny, nx), dtype=np.float64)
    cdef double[::1] off = np.empty(ss, dtype=np.float64)
    cdef double r2 = r * r
    cdef double inv = 1.0 / (ss * ss)
    cdef long i, j
    cdef int a, b, cnt
    cdef double x, y, dx, dy
    for a in range(ss):
        off[a] = _off(a, ss)
    with nogil:
        for j in range(ny):
            for i in range(nx):
                cnt = 0
                for a in range(ss):
                    y = <double>(j0 + j) + off[a]
                    dy = y - cy
                    for b in range(ss):
                        x = <double>(i0 + i) + off[b]
                        dx = x - cx
                        if dx * dx + dy * dy <= r2:
                            cnt += 1
                out[j, i] = cnt * inv
    return out


def capsule_coverage(double ax, double ay, double bx, double by, double hw,
                     long i0, long j0, long nx, long ny, int ss=4):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((ny, nx), dtype=np.float64)
    cdef double[::1] off = np.empty(ss, dtype=np.float64)
    cdef double ux = bx - ax, uy = by - ay
    cdef double L2 = ux * ux + uy * uy
    cdef double hw2 = hw * hw
    cdef double inv = 1.0 / (ss * ss)
    cdef long i, j
    cdef int a, b, cnt
    cdef double wx, wy, t, ex, ey
    for a in range(ss):
        off[a] = _off(a, ss)
    with nogil:
        for j in range(ny):
            for i in range(nx):
                cnt = 0
                for a in range(ss):
                    wy = (<double>(j0 + j) + off[a]) - ay
                    for b in range(ss):
                        wx = (<double>(i0 + i) + off[b]) - ax
                        if L2 > 0:
                            t = (wx * ux + wy * uy) / L2
                            if t < 0.0:
                                t = 0.0
                            elif t > 1.0:
                                t = 1.0
                        else:
                            t = 0.0
                        ex = wx - t * ux
                        ey = wy - t * uy
                        if ex * ex + ey * ey <= hw2:
                            cnt += 1
                out[j, i] = cnt * inv
    return out


def shift_rows_linear(img, shifts):
    arr = np.ascontiguousarray(img, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    cdef double[:, :, ::1] src = arr
    cdef double[::1] sh = np.ascontiguousarray(shifts, dtype=np.float64)
    cdef long h = src.shape[0], w = src.shape[1], nc = src.shape[2]
    out_arr = np.empty((h, w, nc), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef long r, c, k, left
    cdef double s, frac, hi = w - 1.0
    if w == 1:
        out_arr[...] = arr
    else:
        with nogil:
            for r in range(h):
                for c in range(w):
                    s = <double>c - sh[r]
                    if s < 0.0:
                        s = 0.0
                    elif s > hi:
                        s = hi
                    left = <long>s
                    if left > w - 2:
                        left = w - 2
                    frac = s - left
                    for k in range(nc):
                        out[r, c, k] = src[r, left, k] + frac * (src[r, left + 1, k] - src[r, left, k])
    if squeeze:
        return out_arr[:, :, 0]
    return out_arr


def label_moments(labels, weights, long n):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, 4), dtype=np.float64)
    cdef long[:, ::1] lab = np.ascontiguousarray(labels, dtype=np.int64).astype(np.int_, copy=False)
    cdef double[:, ::1] wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef long h = lab.shape[0], w = lab.shape[1]
    cdef long r, c, k
    cdef double v
    with nogil:
        for r in range(h):
            for c in range(w):
                k = lab[r, c]
                if k >= 1 and k <= n:
                    v = wt[r, c]
                    out[k - 1, 0] += v
                    out[k - 1, 1] += v * c
                    out[k - 1, 2] += v * r
                    out[k - 1, 3] += 1.0
    return out
