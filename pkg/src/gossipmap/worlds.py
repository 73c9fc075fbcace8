"""Built-in polygon worlds and deterministic scan synthesis.

A world is an outer free-space polygon plus solid obstacle polygons.
Scans are exact ray casts against the wall segments; robot poses follow
per-robot waypoint polylines at constant parameter speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tsdf import Pose2D, Scan


class ConfigError(ValueError):
    """Malformed world or simulation configuration."""


@dataclass(frozen=True)
class World:
    name: str
    outer: tuple[tuple[float, float], ...]
    obstacles: tuple[tuple[tuple[float, float], ...], ...] = ()

    def segments(self) -> list[tuple[tuple[float, float], tuple[float, float]]]:
        segs = []
        for poly in (self.outer, *self.obstacles):
            for a, b in zip(poly, poly[1:] + poly[:1]):
                segs.append((a, b))
        return segs

    def contains_free(self, x: float, y: float) -> bool:
        if not _point_in_polygon(x, y, self.outer):
            return False
        return not any(_point_in_polygon(x, y, ob) for ob in self.obstacles)

    def ground_truth_tsdf(self, x: float, y: float, truncation: float) -> float:
        """Signed truncated distance to the nearest wall; negative in
        occupied space."""
        d = min(_point_segment_distance(x, y, a, b) for a, b in self.segments())
        d = min(d, truncation)
        return d if self.contains_free(x, y) else -d


def _point_in_polygon(x: float, y: float, poly) -> bool:
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside


def _point_segment_distance(x, y, a, b) -> float:
    ax, ay = a
    bx, by = b
    ux, uy = bx - ax, by - ay
    den = ux * ux + uy * uy
    if den == 0.0:
        return math.hypot(x - ax, y - ay)
    s = ((x - ax) * ux + (y - ay) * uy) / den
    s = min(1.0, max(0.0, s))
    return math.hypot(x - (ax + s * ux), y - (ay + s * uy))


def _rect(x0, y0, x1, y1):
    return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))


def build_world(name: str, params: dict | None = None) -> World:
    params = dict(params or {})

    def take(key, default):
        return float(params.pop(key, default))

    if name == "square_room":
        side = take("side", 10.0)
        world = World(name=name, outer=_rect(0.0, 0.0, side, side))
    elif name == "corridor":
        length = take("length", 20.0)
        width = take("width", 3.0)
        world = World(name=name, outer=_rect(0.0, 0.0, length, width))
    elif name == "two_rooms":
        width = take("width", 12.0)
        height = take("height", 8.0)
        door_lo = take("door_low", 3.5)
        door_hi = take("door_high", 4.5)
        wall_x = take("divider_x", width / 2.0)
        wall_w = take("divider_width", 0.2)
        if not (0.0 < door_lo < door_hi < height):
            raise ConfigError("door interval must lie inside the room height")
        world = World(
            name=name,
            outer=_rect(0.0, 0.0, width, height),
            obstacles=(
                _rect(wall_x - wall_w / 2, 0.0, wall_x + wall_w / 2, door_lo),
                _rect(wall_x - wall_w / 2, door_hi, wall_x + wall_w / 2, height),
            ))
    else:
        raise ConfigError(f"unknown world {name!r}")
    if params:
        raise ConfigError(f"unknown world parameters: {sorted(params)}")
    return world


def ray_cast(world: World, origin: tuple[float, float], angle: float,
             max_range: float) -> float:
    """Range to the nearest wall along a ray, max_range when nothing hits."""
    ox, oy = origin
    dx, dy = math.cos(angle), math.sin(angle)
    best = max_range
    for (ax, ay), (bx, by) in world.segments():
        ux, uy = bx - ax, by - ay
        den = dx * uy - dy * ux
        if abs(den) < 1e-15:
            continue
        tr = ((ax - ox) * uy - (ay - oy) * ux) / den
        ts = ((ax - ox) * dy - (ay - oy) * dx) / den
        if tr > 1e-12 and -1e-12 <= ts <= 1.0 + 1e-12 and tr < best:
            best = tr
    return best


@dataclass(frozen=True)
class WorldSpec:
    """Declarative synthetic-scan setup: a named world plus robot paths."""

    world: str
    paths: tuple[tuple[tuple[float, float], ...], ...]
    steps: int
    beams: int = 72
    fov: float = 2.0 * math.pi
    max_range: float = 20.0
    world_params: dict = field(default_factory=dict)
    path_noise: float = 0.0

    @classmethod
    def from_dict(cls, raw: dict) -> "WorldSpec":
        d = dict(raw)
        try:
            world = d.pop("world")
            paths = d.pop("paths")
            steps = int(d.pop("steps"))
        except KeyError as exc:
            raise ConfigError(f"world spec missing required key {exc}") from exc
        beams = int(d.pop("beams", 72))
        fov = float(d.pop("fov", 2.0 * math.pi))
        max_range = float(d.pop("max_range", 20.0))
        world_params = d.pop("world_params", {})
        path_noise = float(d.pop("path_noise", 0.0))
        if d:
            raise ConfigError(f"unknown world spec keys: {sorted(d)}")
        if steps < 1:
            raise ConfigError("steps must be at least 1")
        if beams < 2:
            raise ConfigError("need at least two beams")
        if not paths or any(len(p) < 1 for p in paths):
            raise ConfigError("each robot needs at least one waypoint")
        paths_t = tuple(tuple((float(x), float(y)) for x, y in p) for p in paths)
        build_world(world, world_params)   # validate name and parameters early
        return cls(world=world, paths=paths_t, steps=steps, beams=beams,
                   fov=fov, max_range=max_range,
                   world_params=dict(world_params), path_noise=path_noise)


def _pose_on_path(path, frac: float) -> Pose2D:
    """Pose at parameter frac in [0, 1] along the waypoint polyline."""
    if len(path) == 1:
        return Pose2D(path[0][0], path[0][1], 0.0)
    lengths = [math.hypot(b[0] - a[0], b[1] - a[1])
               for a, b in zip(path, path[1:])]
    total = sum(lengths)
    if total == 0.0:
        return Pose2D(path[0][0], path[0][1], 0.0)
    target = frac * total
    run = 0.0
    for (a, b), seg in zip(zip(path, path[1:]), lengths):
        if run + seg >= target or (a, b) == (path[-2], path[-1]):
            s = 0.0 if seg == 0.0 else (target - run) / seg
            s = min(1.0, max(0.0, s))
            x = a[0] + s * (b[0] - a[0])
            y = a[1] + s * (b[1] - a[1])
            heading = math.atan2(b[1] - a[1], b[0] - a[0])
            return Pose2D(x, y, heading)
        run += seg
    raise AssertionError("unreachable")


def synth_world(spec: WorldSpec, seed: int = 0) -> tuple[list[Scan], World]:
    """Deterministic scan streams for every robot over every step.

    With path_noise > 0 the waypoints are jittered once per robot using
    the seed; the ray casting itself is exact either way.
    """
    world = build_world(spec.world, spec.world_params)
    rng = np.random.RandomState(seed)
    paths = []
    for path in spec.paths:
        if spec.path_noise > 0.0:
            jitter = rng.uniform(-spec.path_noise, spec.path_noise, size=(len(path), 2))
            paths.append(tuple((x + jx, y + jy)
                               for (x, y), (jx, jy) in zip(path, jitter)))
        else:
            paths.append(path)

    full_circle = abs(spec.fov - 2.0 * math.pi) < 1e-12
    if full_circle:
        # avoid duplicating the wrap-around angle
        angles = [-math.pi + k * (2.0 * math.pi / spec.beams)
                  for k in range(spec.beams)]
    else:
        angles = [-spec.fov / 2.0 + k * (spec.fov / (spec.beams - 1))
                  for k in range(spec.beams)]

    scans = []
    for t in range(spec.steps):
        frac = t / (spec.steps - 1) if spec.steps > 1 else 0.0
        for rid, path in enumerate(paths):
            pose = _pose_on_path(path, frac)
            beams = []
            for ang in angles:
                rng_val = ray_cast(world, pose.position, pose.theta + ang,
                                   spec.max_range)
                beams.append((ang, rng_val))
            scans.append(Scan(t=t, robot_id=rid, pose=pose,
                              beams=tuple(beams), max_range=spec.max_range))
    return scans, world
