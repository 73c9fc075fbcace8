"""NumPy implementations of the hot kernels.

Used when the compiled extension ``gossipmap._core`` is unavailable (or
forced via ``GOSSIPMAP_BACKEND=python``). Formulas and evaluation order
mirror the Cython versions so both backends emit the same samples in the
same order.
"""

from __future__ import annotations

import numpy as np

# Pair/sign tolerances shared with the compiled backend.
DEGENERATE_EPS = 1e-12
ON_LINE_EPS = 1e-9


def rbf_gram(a, b, amplitude, length_scale):
    """Squared-exponential Gram matrix c^2 * exp(-|a_i - b_j|^2 / (2 l^2))."""
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 2)
    inv = 0.5 / (length_scale * length_scale)
    c2 = amplitude * amplitude
    dx = a[:, 0][:, None] - b[:, 0][None, :]
    dy = a[:, 1][:, None] - b[:, 1][None, :]
    return c2 * np.exp(-(dx * dx + dy * dy) * inv)


def frame_samples(points, valid, robot_x, robot_y, truncation, spacing,
                  half_extent, max_gap):
    """Raw lattice emissions for consecutive valid beam-endpoint pairs.

    For every adjacent endpoint pair that passes the surface-continuity
    checks, a (2*half_extent+1)^2 lattice frame is laid over the cell of
    the first endpoint and each frame point gets a signed truncated
    distance to the line through the pair. Pairs are skipped when the gap
    exceeds ``max_gap``, the segment is degenerate, or the robot sits on
    the line (sign undecidable).

    Returns (ix, iy, value) arrays, one row per frame point per accepted
    pair, in pair-major order. Duplicate keys are not merged here.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    ok = np.asarray(valid, dtype=bool)
    if pts.shape[0] < 2:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                np.empty(0, dtype=np.float64))

    pair_ok = ok[:-1] & ok[1:]
    p1 = pts[:-1][pair_ok]
    p2 = pts[1:][pair_ok]

    ux = p2[:, 0] - p1[:, 0]
    uy = p2[:, 1] - p1[:, 1]
    seg_len = np.sqrt(ux * ux + uy * uy)
    keep = (seg_len <= max_gap) & (seg_len >= DEGENERATE_EPS)

    x1, y1 = p1[:, 0], p1[:, 1]
    num_r = ux * (y1 - robot_y) - (x1 - robot_x) * uy
    with np.errstate(divide="ignore", invalid="ignore"):
        off_r = num_r / seg_len
    keep &= np.abs(off_r) >= ON_LINE_EPS

    if not keep.any():
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                np.empty(0, dtype=np.float64))

    x1, y1 = x1[keep], y1[keep]
    ux, uy = ux[keep], uy[keep]
    seg_len = seg_len[keep]
    off_r = off_r[keep]

    cx = np.floor(x1 / spacing + 0.5).astype(np.int64)
    cy = np.floor(y1 / spacing + 0.5).astype(np.int64)

    f = int(half_extent)
    span = np.arange(-f, f + 1, dtype=np.int64)
    dxs = np.tile(span, 2 * f + 1)          # dx varies fastest
    dys = np.repeat(span, 2 * f + 1)

    ix = cx[:, None] + dxs[None, :]
    iy = cy[:, None] + dys[None, :]
    qx = ix * spacing
    qy = iy * spacing

    num_q = ux[:, None] * (y1[:, None] - qy) - (x1[:, None] - qx) * uy[:, None]
    off_q = num_q / seg_len[:, None]
    dist = np.abs(off_q)
    mag = np.minimum(dist, truncation)
    same_side = (off_q > 0.0) == (off_r[:, None] > 0.0)
    val = np.where(dist < ON_LINE_EPS, 0.0, np.where(same_side, mag, -mag))

    return ix.ravel(), iy.ravel(), val.ravel()
