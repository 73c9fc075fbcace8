"""Scan-to-training-sample conversion.

A posed 2D LiDAR scan becomes a set of lattice-snapped pseudo-point
samples: for every pair of adjacent beam hits that plausibly belong to
the same surface, a small frame of lattice points around the first hit is
labeled with the signed, truncated distance to the line through the pair.
Points on the robot's side of the line are free space (positive), points
behind it are inside the obstacle (negative).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .grid import GridKey, unsnap

DEGENERATE_EPS = 1e-12
ON_LINE_EPS = 1e-9


class DegenerateSegment(ValueError):
    """Adjacent hit points coincide; no line can be fit."""


class RobotOnLine(ValueError):
    """The robot sits on the surface line; the sign is undecidable."""


@dataclass(frozen=True)
class TsdfParams:
    truncation: float = 0.5          # h (meters)
    grid_spacing: float = 0.1        # g (meters)
    max_surface_gap: float = 0.5     # adjacent-hit continuity limit (default 5 g)
    frame_half_extent: int = 1       # 1 -> 3x3 frame

    def __post_init__(self):
        if self.truncation <= 0 or self.grid_spacing <= 0 or self.max_surface_gap <= 0:
            raise ValueError("truncation, grid spacing and surface gap must be positive")
        if self.frame_half_extent < 1:
            raise ValueError("frame_half_extent must be at least 1")


@dataclass(frozen=True)
class Pose2D:
    """Planar pose; heading normalized to [-pi, pi)."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        wrapped = math.remainder(self.theta, 2.0 * math.pi)
        if wrapped >= math.pi:          # remainder returns (-pi, pi]
            wrapped -= 2.0 * math.pi
        object.__setattr__(self, "theta", wrapped)

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Scan:
    """One range scan: beam angles are offsets from the pose heading,
    strictly increasing; a range equal to max_range means no return."""

    t: int
    robot_id: int
    pose: Pose2D
    beams: tuple[tuple[float, float], ...]
    max_range: float

    def __post_init__(self):
        object.__setattr__(self, "beams", tuple((float(a), float(r)) for a, r in self.beams))
        angles = [a for a, _ in self.beams]
        if any(a2 <= a1 for a1, a2 in zip(angles, angles[1:])):
            raise ValueError("beam angles must be strictly increasing")
        if any(r <= 0 or r > self.max_range for _, r in self.beams):
            raise ValueError("ranges must lie in (0, max_range]")


@dataclass(frozen=True)
class PseudoSample:
    key: GridKey
    location: tuple[float, float]
    tsdf_value: float
    count: int = 1


def _endpoints(scan: Scan) -> tuple[np.ndarray, np.ndarray]:
    """Per-beam world endpoints plus a hit mask (max-range beams are misses)."""
    n = len(scan.beams)
    pts = np.empty((n, 2))
    valid = np.empty(n, dtype=bool)
    ct, st = math.cos(scan.pose.theta), math.sin(scan.pose.theta)
    for i, (ang, rng) in enumerate(scan.beams):
        ca, sa = math.cos(ang), math.sin(ang)
        # rotate the beam direction by the pose heading
        dx, dy = ct * ca - st * sa, st * ca + ct * sa
        pts[i, 0] = scan.pose.x + rng * dx
        pts[i, 1] = scan.pose.y + rng * dy
        valid[i] = rng < scan.max_range
    return pts, valid


def world_points(scan: Scan) -> list[tuple[float, float]]:
    """Beam endpoints in the world frame, no-return beams excluded."""
    pts, valid = _endpoints(scan)
    return [(pts[i, 0], pts[i, 1]) for i in range(len(valid)) if valid[i]]


def point_line_distance(q, p1, p2) -> float:
    """Distance from q to the infinite line through p1, p2."""
    x0, y0 = q
    x1, y1 = p1
    x2, y2 = p2
    ux, uy = x2 - x1, y2 - y1
    seg_len = math.sqrt(ux * ux + uy * uy)
    if seg_len < DEGENERATE_EPS:
        raise DegenerateSegment("hit points coincide")
    return abs(ux * (y1 - y0) - (x1 - x0) * uy) / seg_len


def signed_truncated_distance(q, p1, p2, robot, h: float) -> float:
    """Signed truncated distance from q to line(p1, p2).

    Positive when q and the robot share a halfspace, negative otherwise,
    zero when q lies on the line (within 1e-9 meters).
    """
    x0, y0 = q
    x1, y1 = p1
    x2, y2 = p2
    rx, ry = robot
    ux, uy = x2 - x1, y2 - y1
    seg_len = math.sqrt(ux * ux + uy * uy)
    if seg_len < DEGENERATE_EPS:
        raise DegenerateSegment("hit points coincide")
    off_r = (ux * (y1 - ry) - (x1 - rx) * uy) / seg_len
    if abs(off_r) < ON_LINE_EPS:
        raise RobotOnLine("robot lies on the surface line")
    off_q = (ux * (y1 - y0) - (x1 - x0) * uy) / seg_len
    if abs(off_q) < ON_LINE_EPS:
        return 0.0
    mag = min(abs(off_q), h)
    return mag if (off_q > 0.0) == (off_r > 0.0) else -mag


def compute_pseudo_points(scan: Scan, params: TsdfParams) -> list[PseudoSample]:
    """Pseudo-point training samples for one scan.

    Frames from overlapping beam pairs may hit the same lattice cell; such
    values are averaged and the cell is emitted once with count 1. Output
    is ordered by key for determinism.
    """
    pts, valid = _endpoints(scan)
    ix, iy, val = _backend.frame_samples(
        pts, valid.astype(np.uint8),
        scan.pose.x, scan.pose.y,
        params.truncation, params.grid_spacing,
        params.frame_half_extent, params.max_surface_gap)

    acc: dict[GridKey, list[float]] = {}
    for kx, ky, v in zip(ix.tolist(), iy.tolist(), val.tolist()):
        key = GridKey(kx, ky)
        slot = acc.get(key)
        if slot is None:
            acc[key] = [v, 1.0]
        else:
            slot[0] += v
            slot[1] += 1.0

    out = []
    for key in sorted(acc):
        total, cnt = acc[key]
        out.append(PseudoSample(key=key, location=unsnap(key, params.grid_spacing),
                                tsdf_value=total / cnt, count=1))
    return out
