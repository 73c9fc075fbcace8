"""Closed-form reference for the diffusion protocol.

Which robots hold a batch after a run of graph steps is read off the
sign pattern of the product of Metropolis weight matrices: robot i holds
the batch robot j released at step tau by the end of step t exactly when
entry (i, j) of W_t ... W_tau is positive. Summing the batch
contributions selected this way reproduces each robot's statistics table
without ever simulating an inbox, which makes it an independent check of
the protocol machinery.
"""

from __future__ import annotations

import numpy as np

from .grid import GridKey
from .network import GraphSnapshot, metropolis_weights
from .protocol import MiniBatch


def closed_form_tables(releases: dict, snapshots: list[GraphSnapshot],
                       n: int, t: int) -> list[dict[GridKey, tuple[float, float]]]:
    """Per-robot key -> (m, zeta) tables at the end of step t.

    ``releases`` maps BatchId -> MiniBatch for every batch released up to
    t. Contributions are summed in ascending (release step, origin) order.
    """
    weights = [metropolis_weights(s) for s in snapshots]
    # reach[tau] entry (i, j): does i hold j's step-tau batch after step t
    reach: dict[int, np.ndarray] = {}
    taus = sorted({bid.tau for bid in releases if bid.tau <= t})
    for tau in taus:
        prod = np.eye(n)
        for s in range(tau, t + 1):
            prod = weights[s] @ prod
        reach[tau] = prod > 0.0

    tables: list[dict[GridKey, tuple[float, float]]] = [dict() for _ in range(n)]
    acc: list[dict[GridKey, list[float]]] = [dict() for _ in range(n)]
    for bid in sorted(releases):
        if bid.tau > t:
            continue
        batch: MiniBatch = releases[bid]
        holders = reach[bid.tau][:, bid.origin]
        for i in range(n):
            if not holders[i]:
                continue
            slot = acc[i]
            for s in batch.samples:
                dm = s.count / n
                cell = slot.get(s.key)
                if cell is None:
                    slot[s.key] = [dm, dm * s.value]
                else:
                    cell[0] += dm
                    cell[1] += dm * s.value
    for i in range(n):
        for key, (m, wv) in acc[i].items():
            tables[i][key] = (m, wv / m)
    return tables


def compare_tables(oracle: dict[GridKey, tuple[float, float]],
                   actual: dict[GridKey, tuple[float, float]]) -> tuple[float, float, bool]:
    """(max |dm|, max |dzeta|, key sets equal) between two tables."""
    keys_match = set(oracle) == set(actual)
    max_dm = 0.0
    max_dz = 0.0
    for key in set(oracle) | set(actual):
        om, oz = oracle.get(key, (0.0, 0.0))
        am, az = actual.get(key, (0.0, 0.0))
        max_dm = max(max_dm, abs(om - am))
        max_dz = max(max_dz, abs(oz - az))
    return max_dm, max_dz, keys_match
