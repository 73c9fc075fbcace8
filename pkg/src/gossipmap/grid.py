"""Global lattice identity for pseudo-points.

Pseudo-points live on a world-axis-aligned lattice of spacing ``g``.
Snapping to integer cell indices gives every lattice point a global
identity, so the same cell observed by different robots merges into one
statistics entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


class GridKey(NamedTuple):
    """Integer cell index on the global lattice."""

    ix: int
    iy: int


def snap(x: float, y: float, spacing: float) -> GridKey:
    """Return the key of the lattice point nearest to ``(x, y)``.

    Uses floor(v / g + 0.5) so both backends and all platforms round
    half-up identically.
    """
    return GridKey(int(math.floor(x / spacing + 0.5)),
                   int(math.floor(y / spacing + 0.5)))


def unsnap(key: GridKey, spacing: float) -> tuple[float, float]:
    """World coordinates of a lattice key."""
    return (key.ix * spacing, key.iy * spacing)


@dataclass
class PseudoPointStats:
    """Aggregated observations at one lattice point.

    ``zeta`` is the running weighted average of the TSDF observations and
    ``m`` the accumulated (possibly fractional) observation weight.
    Invariants: m > 0 and |zeta| <= truncation.
    """

    key: GridKey
    location: tuple[float, float]
    zeta: float
    m: float

    def merge(self, delta_m: float, delta_weighted_value: float) -> None:
        """Fold in extra weight: m += dm, zeta = (m*zeta + dwv) / m_new."""
        new_m = self.m + delta_m
        self.zeta = (self.m * self.zeta + delta_weighted_value) / new_m
        self.m = new_m
