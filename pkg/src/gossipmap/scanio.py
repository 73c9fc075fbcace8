"""Scan log parsing and stream splitting.

Native format, one scan per line:

    SCAN <t> <robot_id> <x> <y> <theta> <max_range> <n> <a0> <da> <r1> ... <rn>

with angles in radians and ranges in meters; beam k has angle a0 + k*da.
A CARMEN ``FLASER`` adapter maps Radish-style logs onto the same Scan
type. The split option relabels one log into k concurrent robot streams.
"""

from __future__ import annotations

import math

from .tsdf import Pose2D, Scan


class ParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class NonMonotonicTimestamp(ValueError):
    """A robot's scans must have strictly increasing timestamps."""


def parse_scan_line(line: str, lineno: int = 0) -> Scan:
    parts = line.split()
    if not parts or parts[0] != "SCAN":
        raise ParseError(lineno, "expected a SCAN line")
    if len(parts) < 10:
        raise ParseError(lineno, "truncated SCAN line")
    try:
        t = int(parts[1])
        robot = int(parts[2])
        x, y, theta = float(parts[3]), float(parts[4]), float(parts[5])
        max_range = float(parts[6])
        n = int(parts[7])
        a0, da = float(parts[8]), float(parts[9])
        ranges = [float(v) for v in parts[10:]]
    except ValueError as exc:
        raise ParseError(lineno, str(exc)) from exc
    if len(ranges) != n:
        raise ParseError(lineno, f"expected {n} ranges, found {len(ranges)}")
    if da <= 0:
        raise ParseError(lineno, "angle increment must be positive")
    if robot < 0:
        raise ParseError(lineno, "negative robot id")
    beams = tuple((a0 + k * da, r) for k, r in enumerate(ranges))
    try:
        return Scan(t=t, robot_id=robot, pose=Pose2D(x, y, theta),
                    beams=beams, max_range=max_range)
    except ValueError as exc:
        raise ParseError(lineno, str(exc)) from exc


def parse_scan_log(lines) -> list[Scan]:
    """Parse SCAN lines; blank lines and # comments are skipped.

    Scans come back in file order after validating that every robot's
    timestamps increase strictly.
    """
    scans = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        scans.append(parse_scan_line(line, lineno))
    last_t: dict[int, int] = {}
    for scan in scans:
        prev = last_t.get(scan.robot_id)
        if prev is not None and scan.t <= prev:
            raise NonMonotonicTimestamp(
                f"robot {scan.robot_id}: step {scan.t} after {prev}")
        last_t[scan.robot_id] = scan.t
    return scans


def load_scan_log(path) -> list[Scan]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scan_log(fh)


def scan_to_line(scan: Scan) -> str:
    a0 = scan.beams[0][0]
    da = scan.beams[1][0] - scan.beams[0][0] if len(scan.beams) > 1 else 1.0
    fields = ["SCAN", str(scan.t), str(scan.robot_id),
              repr(scan.pose.x), repr(scan.pose.y), repr(scan.pose.theta),
              repr(scan.max_range), str(len(scan.beams)), repr(a0), repr(da)]
    fields.extend(repr(r) for _, r in scan.beams)
    return " ".join(fields)


def write_scan_log(path, scans) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for scan in scans:
            fh.write(scan_to_line(scan) + "\n")


def split_streams(scans: list[Scan], k: int) -> list[Scan]:
    """Relabel one time-ordered log as k concurrent robot streams.

    The sequence is cut into k contiguous chunks (sizes differing by at
    most one); chunk j becomes robot j with steps renumbered from 0.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not scans:
        return []
    base = len(scans) // k
    extra = len(scans) % k
    out = []
    idx = 0
    for rid in range(k):
        size = base + (1 if rid < extra else 0)
        for step, scan in enumerate(scans[idx:idx + size]):
            out.append(Scan(t=step, robot_id=rid, pose=scan.pose,
                            beams=scan.beams, max_range=scan.max_range))
        idx += size
    return out


def parse_carmen_log(lines, max_range: float = 81.9, fov: float = math.pi) -> list[Scan]:
    """Map CARMEN FLASER lines onto Scan records.

    Beams span ``fov`` centered on the laser heading; readings at or
    beyond ``max_range`` are clamped to it (no return). Steps are the
    FLASER line sequence numbers.
    """
    scans = []
    seq = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line.startswith("FLASER"):
            continue
        parts = line.split()
        try:
            n = int(parts[1])
            ranges = [float(v) for v in parts[2:2 + n]]
            x, y, theta = (float(parts[2 + n]), float(parts[3 + n]),
                           float(parts[4 + n]))
        except (IndexError, ValueError) as exc:
            raise ParseError(lineno, f"bad FLASER line: {exc}") from exc
        if len(ranges) != n:
            raise ParseError(lineno, f"expected {n} ranges")
        da = fov / (n - 1) if n > 1 else 1.0
        a0 = -fov / 2.0
        beams = []
        for k, r in enumerate(ranges):
            r = min(r, max_range)
            if r <= 0.0:
                r = max_range
            beams.append((a0 + k * da, r))
        scans.append(Scan(t=seq, robot_id=0, pose=Pose2D(x, y, theta),
                          beams=tuple(beams), max_range=max_range))
        seq += 1
    return scans


def load_carmen_log(path, max_range: float = 81.9, fov: float = math.pi) -> list[Scan]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_carmen_log(fh, max_range=max_range, fov=fov)
