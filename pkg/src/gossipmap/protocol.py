"""Echo-free mini-batch diffusion.

Each robot's per-step observation becomes an immutable mini-batch tagged
with the set of robots known to hold a copy (its recipient list). Batches
are forwarded to any neighbor not on that list, applied to the local
statistics tree exactly once, and retired once every robot is listed (or,
in timer mode, after the worst-case diffusion horizon).

The recipient list travels with each copy. Copies held by different
robots may disagree about who has the batch; a stale list only causes a
redundant send, never a missed or repeated application, because the
applied-set makes application idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .grid import GridKey
from .quadtree import QuadTree


class ConfigMissing(ValueError):
    """Timer-based expiration needs the connectivity window B."""


@dataclass(frozen=True, order=True)
class BatchId:
    """Identity of a mini-batch, ordered by (release step, origin robot)."""

    tau: int
    origin: int


@dataclass(frozen=True)
class BatchSample:
    key: GridKey
    location: tuple[float, float]
    count: float      # observation weight within the batch
    value: float      # averaged TSDF observation


@dataclass(frozen=True)
class MiniBatch:
    id: BatchId
    samples: tuple[BatchSample, ...]
    recipients: frozenset[int]

    def __post_init__(self):
        if self.id.origin not in self.recipients:
            raise ValueError("the origin robot must be on the recipient list")
        keys = [s.key for s in self.samples]
        if len(set(keys)) != len(keys):
            raise ValueError("batch samples must have unique keys")


class RobotState:
    """One robot's protocol state: retained batches, applied-set, stats tree."""

    def __init__(self, robot_id: int, n: int, tree: QuadTree):
        if not (0 <= robot_id < n):
            raise ValueError("robot_id out of range")
        self.robot_id = robot_id
        self.n = n
        self.tree = tree
        self.retained: dict[BatchId, MiniBatch] = {}
        self.applied: set[BatchId] = set()
        self.pending: list[MiniBatch] = []
        self.received_at: dict[BatchId, int] = {}
        self.t = 0

    # -- release -------------------------------------------------------------

    def release_own(self, samples: Sequence[BatchSample], t: int) -> MiniBatch | None:
        """Wrap this step's fresh observation into a batch and queue it."""
        if not samples:
            return None
        batch = MiniBatch(id=BatchId(tau=t, origin=self.robot_id),
                          samples=tuple(samples),
                          recipients=frozenset((self.robot_id,)))
        self.retained[batch.id] = batch
        self.received_at[batch.id] = t
        self.pending.append(batch)
        return batch

    # -- exchange --------------------------------------------------------------

    def make_outgoing(self, neighbor: int) -> list[MiniBatch]:
        """Every retained batch the neighbor is not known to have."""
        if neighbor == self.robot_id:
            raise ValueError("cannot send to self")
        out = [b for b in self.retained.values() if neighbor not in b.recipients]
        out.sort(key=lambda b: b.id)
        return out

    def receive(self, incoming: Sequence[MiniBatch], t: int | None = None) -> None:
        """Ingest copies from neighbors.

        Already-applied ids are dropped. A new id is queued for
        application with this robot added to its recipient list; if the
        same id arrives from several neighbors in one step, their lists
        are unioned.
        """
        fresh: dict[BatchId, MiniBatch] = {}
        for batch in incoming:
            if batch.id in self.applied:
                continue
            seen = fresh.get(batch.id)
            if seen is None:
                fresh[batch.id] = replace(
                    batch, recipients=batch.recipients | {self.robot_id})
            else:
                fresh[batch.id] = replace(
                    seen, recipients=seen.recipients | batch.recipients)
        for bid in sorted(fresh):
            batch = fresh[bid]
            self.retained[bid] = batch
            if t is not None:
                self.received_at[bid] = t
            self.pending.append(batch)

    def apply_batches(self) -> list[BatchId]:
        """Apply queued batches in ascending id order; returns the ids applied.

        Each sample contributes weight count/n, so the fully diffused map
        matches the central estimator that divides every batch by n.
        """
        self.pending.sort(key=lambda b: b.id)
        done = []
        for batch in self.pending:
            if batch.id in self.applied:
                continue
            scale = 1.0 / self.n
            for s in batch.samples:
                dm = s.count * scale
                self.tree.insert_or_merge(s.key, dm, dm * s.value)
            self.applied.add(batch.id)
            done.append(batch.id)
        self.pending = []
        return done

    # -- expiration ------------------------------------------------------------

    def expire(self) -> list[BatchId]:
        """Drop retained batches whose recipient list covers the whole team."""
        everyone = frozenset(range(self.n))
        gone = [bid for bid, b in self.retained.items() if b.recipients == everyone]
        for bid in gone:
            del self.retained[bid]
        return gone

    def timer_expire(self, window: int | None, t: int) -> list[BatchId]:
        """Drop batches past the worst-case diffusion horizon.

        A batch released at tau is guaranteed to have reached every robot
        by (ceil(tau / B) + (n - 1)) * B, so holding it longer serves no
        one.
        """
        if window is None:
            raise ConfigMissing("timer expiration requires the window B")
        if window < 1:
            raise ValueError("window must be at least 1")
        gone = []
        for bid in list(self.retained):
            horizon = (-(-bid.tau // window) + (self.n - 1)) * window
            if t >= horizon:
                gone.append(bid)
                del self.retained[bid]
        return gone
