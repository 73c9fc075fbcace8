"""Centralized reference estimator.

An imaginary agent that receives every robot's fresh batch the moment it
is released. It shares the quadtree and statistics arithmetic with the
robots, so comparisons against it isolate protocol behavior.
"""

from __future__ import annotations

from typing import Sequence

from .protocol import MiniBatch
from .quadtree import QuadTree


class CentralAgent:
    def __init__(self, tree: QuadTree, n: int):
        self.tree = tree
        self.n = n
        self.t = 0

    def ingest(self, batches: Sequence[MiniBatch]) -> None:
        """Apply one step's released batches in ascending id order."""
        scale = 1.0 / self.n
        for batch in sorted(batches, key=lambda b: b.id):
            for s in batch.samples:
                dm = s.count * scale
                self.tree.insert_or_merge(s.key, dm, dm * s.value)
