"""Quadtree over pseudo-point statistics.

Nodes are cells of a canonical dyadic hierarchy on the integer key
lattice: the level-j cell holding key (ix, iy) is (ix' >> j, iy' >> j)
where ix' = ix + 2^40 (the offset keeps all cell indices positive so
every pair of keys has a common ancestor). Anchoring every node to this
fixed hierarchy makes the final tree shape a function of the stored key
set alone, independent of insertion order, so two agents holding the
same statistics rasterize identical maps.

The root grows by doubling toward out-of-bounds keys; a leaf root widens
in place (adding no structure), an internal root is reattached under its
canonical parent. A leaf splits recursively once it holds more than
``max_leaf_size`` entries; level-0 cells hold a single lattice point, so
splitting always terminates.
"""

from __future__ import annotations

import math
from typing import Iterator

from .grid import GridKey, PseudoPointStats, unsnap

_OFFSET = 1 << 40


class _Node:
    __slots__ = ("level", "cx", "cy", "children", "table")

    def __init__(self, level: int, cx: int, cy: int):
        self.level = level
        self.cx = cx
        self.cy = cy
        self.children: list[_Node] | None = None
        self.table: dict[GridKey, PseudoPointStats] | None = {}

    def contains(self, key: GridKey) -> bool:
        return ((key.ix + _OFFSET) >> self.level) == self.cx and \
               ((key.iy + _OFFSET) >> self.level) == self.cy

    def child_index(self, key: GridKey) -> int:
        j = self.level - 1
        bx = ((key.ix + _OFFSET) >> j) - 2 * self.cx
        by = ((key.iy + _OFFSET) >> j) - 2 * self.cy
        return by * 2 + bx

    def world_bounds(self, spacing: float) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax); cells are centered on their lattice points."""
        side = (1 << self.level) * spacing
        xmin = ((self.cx << self.level) - _OFFSET) * spacing - 0.5 * spacing
        ymin = ((self.cy << self.level) - _OFFSET) * spacing - 0.5 * spacing
        return (xmin, ymin, xmin + side, ymin + side)


class QuadTree:
    """Single-writer spatial index; reads are safe between mutations."""

    def __init__(self, grid_spacing: float, max_leaf_size: int = 50):
        if grid_spacing <= 0:
            raise ValueError("grid_spacing must be positive")
        if max_leaf_size < 1:
            raise ValueError("max_leaf_size must be at least 1")
        self.grid_spacing = grid_spacing
        self.max_leaf_size = max_leaf_size
        self._root: _Node | None = None
        self._count = 0

    # -- mutation ----------------------------------------------------------

    def insert_or_merge(self, key: GridKey, delta_m: float,
                        delta_weighted_value: float) -> None:
        """Fold weight into the entry at ``key``, creating it if absent."""
        if delta_m <= 0:
            raise ValueError("delta_m must be positive")
        key = GridKey(int(key[0]), int(key[1]))
        if not (-_OFFSET < key.ix < _OFFSET and -_OFFSET < key.iy < _OFFSET):
            raise ValueError(f"key {key} outside the supported coordinate range")
        if self._root is None:
            self._root = _Node(0, key.ix + _OFFSET, key.iy + _OFFSET)
        while not self._root.contains(key):
            if self._root.children is None:
                # widening a leaf root adds no structure, so the final tree
                # shape depends only on the stored key set, not insert order
                self._root.level += 1
                self._root.cx >>= 1
                self._root.cy >>= 1
            else:
                self._grow_root()
        leaf = self._descend(key)
        entry = leaf.table.get(key)
        if entry is None:
            leaf.table[key] = PseudoPointStats(
                key=key, location=unsnap(key, self.grid_spacing),
                zeta=delta_weighted_value / delta_m, m=delta_m)
            self._count += 1
            if len(leaf.table) > self.max_leaf_size:
                self._split(leaf)
        else:
            entry.merge(delta_m, delta_weighted_value)

    def _grow_root(self) -> None:
        old = self._root
        parent = _Node(old.level + 1, old.cx >> 1, old.cy >> 1)
        parent.table = None
        parent.children = [
            _Node(old.level, 2 * parent.cx + bx, 2 * parent.cy + by)
            for by in (0, 1) for bx in (0, 1)
        ]
        idx = (old.cy - 2 * parent.cy) * 2 + (old.cx - 2 * parent.cx)
        parent.children[idx] = old
        self._root = parent

    def _descend(self, key: GridKey) -> _Node:
        node = self._root
        while node.children is not None:
            node = node.children[node.child_index(key)]
        return node

    def _split(self, node: _Node) -> None:
        while True:
            if node.level == 0 or len(node.table) <= self.max_leaf_size:
                return
            entries = node.table
            node.table = None
            node.children = [
                _Node(node.level - 1, 2 * node.cx + bx, 2 * node.cy + by)
                for by in (0, 1) for bx in (0, 1)
            ]
            for key, stats in entries.items():
                node.children[node.child_index(key)].table[key] = stats
            oversized = [c for c in node.children if len(c.table) > self.max_leaf_size]
            if not oversized:
                return
            for child in oversized[1:]:
                self._split(child)
            node = oversized[0]

    # -- queries -----------------------------------------------------------

    def get(self, key: GridKey) -> PseudoPointStats | None:
        if self._root is None or not self._root.contains(key):
            return None
        return self._descend(key).table.get(key)

    def _key_of(self, x: tuple[float, float]) -> GridKey:
        return GridKey(int(math.floor(x[0] / self.grid_spacing + 0.5)),
                       int(math.floor(x[1] / self.grid_spacing + 0.5)))

    def query_leaf(self, x: tuple[float, float],
                   halo_radius: float | None = None) -> list[PseudoPointStats]:
        """Statistics of the leaf containing ``x`` (sorted by key).

        With ``halo_radius`` set, entries from other leaves within that
        distance of ``x`` are appended, so predictions near leaf borders
        can see across them.
        """
        if self._root is None:
            return []
        key = self._key_of(x)
        if not self._root.contains(key):
            own: list[PseudoPointStats] = []
            leaf = None
        else:
            leaf = self._descend(key)
            own = list(leaf.table.values())
        if halo_radius is not None:
            r2 = halo_radius * halo_radius
            for other in self._leaf_nodes():
                if other is leaf:
                    continue
                if self._bounds_dist2(other, x) > r2:
                    continue
                for s in other.table.values():
                    dx = s.location[0] - x[0]
                    dy = s.location[1] - x[1]
                    if dx * dx + dy * dy <= r2:
                        own.append(s)
        own.sort(key=lambda s: s.key)
        return own

    def _bounds_dist2(self, node: _Node, x: tuple[float, float]) -> float:
        xmin, ymin, xmax, ymax = node.world_bounds(self.grid_spacing)
        dx = max(xmin - x[0], 0.0, x[0] - xmax)
        dy = max(ymin - x[1], 0.0, x[1] - ymax)
        return dx * dx + dy * dy

    def leaf_for(self, x: tuple[float, float]) -> _Node | None:
        """Leaf node containing the world point, or None if outside the root."""
        if self._root is None:
            return None
        key = self._key_of(x)
        if not self._root.contains(key):
            return None
        return self._descend(key)

    def _leaf_nodes(self) -> Iterator[_Node]:
        if self._root is None:
            return
        stack = [self._root]
        while stack:
            node = stack.pop()
            if node.children is None:
                yield node
            else:
                stack.extend(reversed(node.children))

    def global_stats_sum(self) -> tuple[float, float, int]:
        """(total m, total m*zeta, entry count) over the whole tree."""
        total_m = 0.0
        total_wv = 0.0
        count = 0
        for node in self._leaf_nodes():
            for s in node.table.values():
                total_m += s.m
                total_wv += s.m * s.zeta
                count += 1
        return total_m, total_wv, count

    def entries(self) -> list[PseudoPointStats]:
        """All statistics entries ordered by key."""
        out = []
        for node in self._leaf_nodes():
            out.extend(node.table.values())
        out.sort(key=lambda s: s.key)
        return out

    def leaf_count(self) -> int:
        return sum(1 for _ in self._leaf_nodes())

    def __len__(self) -> int:
        return self._count

    def content_bounds(self) -> tuple[float, float, float, float] | None:
        """Bounding box (xmin, ymin, xmax, ymax) of stored locations."""
        if self._count == 0:
            return None
        xs = []
        ys = []
        for node in self._leaf_nodes():
            for s in node.table.values():
                xs.append(s.location[0])
                ys.append(s.location[1])
        return (min(xs), min(ys), max(xs), max(ys))

    # -- serialization -----------------------------------------------------

    def to_records(self) -> list[tuple[int, int, float, float, float, float]]:
        """Flat (ix, iy, x, y, zeta, m) rows ordered by key."""
        return [(s.key.ix, s.key.iy, s.location[0], s.location[1], s.zeta, s.m)
                for s in self.entries()]

    @classmethod
    def from_records(cls, records, grid_spacing: float,
                     max_leaf_size: int = 50) -> "QuadTree":
        """Rebuild a tree from to_records() rows; zeta and m are restored
        verbatim (no merge arithmetic)."""
        tree = cls(grid_spacing, max_leaf_size)
        for row in records:
            ix, iy = int(row[0]), int(row[1])
            zeta, m = float(row[4]), float(row[5])
            key = GridKey(ix, iy)
            tree.insert_or_merge(key, m, m * zeta)
            entry = tree.get(key)
            entry.zeta = zeta
            entry.m = m
        return tree
