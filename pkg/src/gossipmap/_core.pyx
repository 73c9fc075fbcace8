# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: RBF Gram assembly and per-scan TSDF frame sampling.

Semantics match gossipmap._purepy; keep both in sync.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, floor, fmin, sqrt

cnp.import_array()

# Same tolerances as _purepy.
cdef double DEGENERATE_EPS = 1e-12
cdef double ON_LINE_EPS = 1e-9


def rbf_gram(a, b, double amplitude, double length_scale):
    """Squared-exponential Gram matrix c^2 * exp(-|a_i - b_j|^2 / (2 l^2))."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 2)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 2)
    cdef Py_ssize_t n = av.shape[0]
    cdef Py_ssize_t m = bv.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double c2 = amplitude * amplitude
    cdef double inv = 0.5 / (length_scale * length_scale)
    cdef Py_ssize_t i, j
    cdef double dx, dy
    for i in range(n):
        for j in range(m):
            dx = av[i, 0] - bv[j, 0]
            dy = av[i, 1] - bv[j, 1]
            o[i, j] = c2 * exp(-(dx * dx + dy * dy) * inv)
    return out


def frame_samples(points, valid, double robot_x, double robot_y,
                  double truncation, double spacing, int half_extent,
                  double max_gap):
    """Raw lattice emissions for consecutive valid beam-endpoint pairs.

    See gossipmap._purepy.frame_samples for the full contract; outputs are
    identical (same pairs, same frame order, same values).
    """
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    cdef cnp.uint8_t[::1] ok = np.asarray(valid, dtype=np.uint8)
    cdef Py_ssize_t nb = pts.shape[0]
    cdef int f = half_extent
    cdef int side = 2 * f + 1
    cdef Py_ssize_t cap = 0
    if nb >= 2:
        cap = (nb - 1) * side * side

    ix_out = np.empty(cap, dtype=np.int64)
    iy_out = np.empty(cap, dtype=np.int64)
    val_out = np.empty(cap, dtype=np.float64)
    cdef cnp.int64_t[::1] ixv = ix_out
    cdef cnp.int64_t[::1] iyv = iy_out
    cdef double[::1] vv = val_out

    cdef Py_ssize_t i, count = 0
    cdef int dx, dy
    cdef double x1, y1, x2, y2, ux, uy, seg_len
    cdef double num_r, off_r, num_q, off_q, qx, qy, mag
    cdef cnp.int64_t cx, cy

    for i in range(nb - 1):
        if not ok[i] or not ok[i + 1]:
            continue
        x1 = pts[i, 0]
        y1 = pts[i, 1]
        x2 = pts[i + 1, 0]
        y2 = pts[i + 1, 1]
        ux = x2 - x1
        uy = y2 - y1
        seg_len = sqrt(ux * ux + uy * uy)
        if seg_len > max_gap or seg_len < DEGENERATE_EPS:
            continue
        num_r = ux * (y1 - robot_y) - (x1 - robot_x) * uy
        off_r = num_r / seg_len
        if fabs(off_r) < ON_LINE_EPS:
            continue
        cx = <cnp.int64_t> floor(x1 / spacing + 0.5)
        cy = <cnp.int64_t> floor(y1 / spacing + 0.5)
        for dy in range(-f, f + 1):
            for dx in range(-f, f + 1):
                qx = (cx + dx) * spacing
                qy = (cy + dy) * spacing
                num_q = ux * (y1 - qy) - (x1 - qx) * uy
                off_q = num_q / seg_len
                if fabs(off_q) < ON_LINE_EPS:
                    vv[count] = 0.0
                else:
                    mag = fmin(fabs(off_q), truncation)
                    if (off_q > 0.0) == (off_r > 0.0):
                        vv[count] = mag
                    else:
                        vv[count] = -mag
                ixv[count] = cx + dx
                iyv[count] = cy + dy
                count += 1

    return ix_out[:count], iy_out[:count], val_out[:count]
