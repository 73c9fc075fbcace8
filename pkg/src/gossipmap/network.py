"""Time-varying communication graphs.

Proximity graphs from robot positions, Metropolis weight matrices, and
the B-window connectivity check the diffusion protocol's convergence
guarantee rests on. The protocol itself consumes only connectivity; the
numeric weight matrices exist for the convergence diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GraphSnapshot:
    """Undirected graph at one step; edges are (i, j) pairs with i < j."""

    n: int
    t: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        for i, j in self.edges:
            if i == j:
                raise ValueError("self-edges are not allowed")
            if not (0 <= i < j < self.n):
                raise ValueError(f"edge ({i},{j}) out of range for n={self.n}")

    def neighbors(self, i: int) -> list[int]:
        out = [b if a == i else a for a, b in self.edges if i in (a, b)]
        out.sort()
        return out

    def degree(self, i: int) -> int:
        return sum(1 for a, b in self.edges if i in (a, b))

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a


@dataclass(frozen=True)
class ConnectivityReport:
    ok: bool
    first_violation: int | None
    windows_checked: int
    partial_window_skipped: bool


def proximity_graph(positions, comm_range: float, t: int = 0) -> GraphSnapshot:
    """Edge between robots at distance <= comm_range (inclusive boundary)."""
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    n = pos.shape[0]
    if n < 1:
        raise ValueError("need at least one robot")
    if comm_range <= 0:
        raise ValueError("comm_range must be positive")
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if math.hypot(pos[i, 0] - pos[j, 0], pos[i, 1] - pos[j, 1]) <= comm_range:
                edges.add((i, j))
    return GraphSnapshot(n=n, t=t, edges=frozenset(edges))


def metropolis_weights(g: GraphSnapshot) -> np.ndarray:
    """Symmetric doubly stochastic weights with 1/(1 + max degree) off-diagonals."""
    n = g.n
    deg = [g.degree(i) for i in range(n)]
    w = np.zeros((n, n))
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for i in range(n):
        w[i, i] = 1.0 - w[i].sum()
    return w


def validate_weight_matrix(w: np.ndarray, tol: float = 1e-12) -> None:
    """Raise if w is not symmetric doubly stochastic with positive diagonal."""
    if not np.allclose(w, w.T, atol=tol, rtol=0):
        raise ValueError("weight matrix not symmetric")
    if w.min() < -tol:
        raise ValueError("weight matrix has negative entries")
    ones = np.ones(w.shape[0])
    if not np.allclose(w @ ones, ones, atol=tol, rtol=0):
        raise ValueError("rows do not sum to 1")
    if not np.allclose(ones @ w, ones, atol=tol, rtol=0):
        raise ValueError("columns do not sum to 1")
    if np.any(np.diag(w) <= 0):
        raise ValueError("diagonal entries must be strictly positive")


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _is_connected(n: int, edges) -> bool:
    if n <= 1:
        return True
    uf = _UnionFind(n)
    for i, j in edges:
        uf.union(i, j)
    root = uf.find(0)
    return all(uf.find(i) == root for i in range(1, n))


def check_b_connected(snapshots: list[GraphSnapshot], window: int) -> ConnectivityReport:
    """Check that edge unions over every full length-B window are connected.

    A trailing partial window is skipped and flagged rather than checked.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    if not snapshots:
        raise ValueError("no snapshots to check")
    n = snapshots[0].n
    full = len(snapshots) // window
    for k in range(full):
        union_edges = set()
        for snap in snapshots[k * window:(k + 1) * window]:
            union_edges |= snap.edges
        if not _is_connected(n, union_edges):
            return ConnectivityReport(ok=False, first_violation=k,
                                      windows_checked=k + 1,
                                      partial_window_skipped=len(snapshots) % window != 0)
    return ConnectivityReport(ok=True, first_violation=None,
                              windows_checked=full,
                              partial_window_skipped=len(snapshots) % window != 0)


def weight_product_convergence(snapshots: list[GraphSnapshot]) -> np.ndarray:
    """Max-norm deviation of the running weight product from uniform.

    Entry t is max|prod_{s<=t} W_s - 11^T/n|; B-connected sequences drive
    this to zero, which is the mixing property the protocol's delivery
    guarantee mirrors.
    """
    if not snapshots:
        return np.empty(0)
    n = snapshots[0].n
    uniform = np.full((n, n), 1.0 / n)
    prod = np.eye(n)
    devs = np.empty(len(snapshots))
    for idx, snap in enumerate(snapshots):
        prod = metropolis_weights(snap) @ prod
        devs[idx] = np.abs(prod - uniform).max()
    return devs


# -- scripted graph logs ----------------------------------------------------

class GraphLogError(ValueError):
    """Malformed EDGE line in a scripted graph log."""


def parse_graph_log(lines, n: int, steps: int | None = None) -> list[GraphSnapshot]:
    """Parse ``EDGE <t> <i> <j>`` lines into per-step snapshots.

    Steps without edges get empty snapshots; the sequence covers
    0..max(t) (or ``steps`` when given).
    """
    per_step: dict[int, set[tuple[int, int]]] = {}
    max_t = -1
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] != "EDGE" or len(parts) != 4:
            raise GraphLogError(f"line {lineno}: expected 'EDGE <t> <i> <j>'")
        try:
            t, i, j = int(parts[1]), int(parts[2]), int(parts[3])
        except ValueError as exc:
            raise GraphLogError(f"line {lineno}: {exc}") from exc
        if t < 0:
            raise GraphLogError(f"line {lineno}: negative step {t}")
        if i == j or not (0 <= i < n) or not (0 <= j < n):
            raise GraphLogError(f"line {lineno}: bad edge ({i},{j}) for n={n}")
        per_step.setdefault(t, set()).add((min(i, j), max(i, j)))
        max_t = max(max_t, t)
    total = steps if steps is not None else max_t + 1
    return [GraphSnapshot(n=n, t=t, edges=frozenset(per_step.get(t, set())))
            for t in range(total)]


def load_graph_log(path, n: int, steps: int | None = None) -> list[GraphSnapshot]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph_log(fh, n, steps)
