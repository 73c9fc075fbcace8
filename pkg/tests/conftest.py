"""Shared test fixtures and independent oracles."""

from __future__ import annotations

import numpy as np
import pytest

from gossipmap.gp import GpPrior, KernelParams
from gossipmap.grid import GridKey
from gossipmap.network import GraphSnapshot
from gossipmap.tsdf import PseudoSample


@pytest.fixture
def paper_kernel() -> KernelParams:
    return KernelParams(amplitude=1.0, length_scale=0.1, noise_std=0.1)


@pytest.fixture
def paper_prior(paper_kernel) -> GpPrior:
    return GpPrior(mean=0.5, kernel=paper_kernel)


def brute_force_posterior(train_x, train_y, query, prior: GpPrior,
                          observation_noise: bool = True):
    """Dense Gaussian-conditioning oracle, written independently of the
    production path: builds the joint covariance and conditions with a
    plain matrix inverse."""
    kp = prior.kernel
    X = np.asarray(train_x, dtype=float).reshape(-1, 2)
    Q = np.asarray(query, dtype=float).reshape(-1, 2)
    y = np.asarray(train_y, dtype=float)

    def k(a, b):
        d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
        return kp.amplitude ** 2 * np.exp(-d2 / (2.0 * kp.length_scale ** 2))

    kxx = k(X, X) + kp.noise_std ** 2 * np.eye(len(X))
    kqx = k(Q, X)
    ik = np.linalg.inv(kxx)
    mean = prior.mean + kqx @ ik @ (y - prior.mean)
    cov = k(Q, Q) - kqx @ ik @ kqx.T
    var = np.diag(cov).copy()
    if observation_noise:
        var += kp.noise_std ** 2
    return mean, var


def random_b_connected(rng: np.random.RandomState, n: int, window: int,
                       steps: int) -> list[GraphSnapshot]:
    """Random graph sequence that is B-connected by construction: every
    window gets the edges of a random spanning tree spread over its
    steps, plus a sprinkle of extra random edges."""
    per_step: list[set[tuple[int, int]]] = [set() for _ in range(steps)]
    n_windows = -(-steps // window)
    for w in range(n_windows):
        lo = w * window
        hi = min(steps, lo + window)
        order = rng.permutation(n)
        for idx in range(1, n):
            a = int(order[idx])
            b = int(order[rng.randint(0, idx)])
            t = int(rng.randint(lo, hi))
            per_step[t].add((min(a, b), max(a, b)))
    for t in range(steps):
        for _ in range(rng.randint(0, 2)):
            a, b = rng.choice(n, size=2, replace=False)
            per_step[t].add((min(int(a), int(b)), max(int(a), int(b))))
    return [GraphSnapshot(n=n, t=t, edges=frozenset(per_step[t]))
            for t in range(steps)]


def random_sample_source(rng: np.random.RandomState, n: int, stream_steps: int,
                         truncation: float = 0.5, spacing: float = 0.1,
                         key_pool: int = 6):
    """Synthetic per-step observations: each robot emits unit-count samples
    on a small shared key pool, with gaps. Returns (source, releases_count)."""
    keys = [GridKey(int(a), int(b))
            for a, b in rng.randint(-3, 4, size=(key_pool, 2))]
    keys = sorted(set(keys))
    table: dict[tuple[int, int], list[PseudoSample]] = {}
    for t in range(stream_steps):
        for rid in range(n):
            if rng.rand() < 0.25:
                continue
            count = rng.randint(1, len(keys) + 1)
            picked = sorted(rng.choice(len(keys), size=count, replace=False).tolist())
            samples = [PseudoSample(
                key=keys[i],
                location=(keys[i].ix * spacing, keys[i].iy * spacing),
                tsdf_value=float(rng.uniform(-truncation, truncation)),
                count=1) for i in picked]
            table[(t, rid)] = samples

    def source(t, rid):
        return table.get((t, rid), [])

    return source, table
