"""Step-driven multi-robot mapping simulation.

Each step runs in barrier-separated phases, robots in ascending id order
within a phase: sense (scan to pseudo-points to a fresh mini-batch),
build the step's communication graph, compute every outgoing message set
from the post-sense states, then deliver, apply, and expire, and finally
feed the step's fresh batches to the central reference agent. Batches
released at step t are therefore applicable by neighbors at t, and a
received batch is forwarded no earlier than t+1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .central import CentralAgent
from .gp import GpPrior, KernelParams, compressed_gp_posterior
from .grid import GridKey
from .network import GraphSnapshot, proximity_graph
from .protocol import BatchId, BatchSample, ConfigMissing, MiniBatch, RobotState
from .quadtree import QuadTree
from .tsdf import PseudoSample, Scan, TsdfParams, compute_pseudo_points
from .worlds import ConfigError


@dataclass
class SimConfig:
    """Flat simulation settings; defaults follow the indoor profile
    (h=0.5, g=0.1, c=1.0, l=0.1, sigma=0.1, leaf cap 50, range 20 m)."""

    n: int = 1
    comm_range: float = 20.0
    truncation: float = 0.5
    grid_spacing: float = 0.1
    max_surface_gap: float | None = None      # default 5 * grid_spacing
    frame_half_extent: int = 1
    signal_amplitude: float = 1.0
    length_scale: float = 0.1
    noise_std: float = 0.1
    prior_mean: float | None = None           # default truncation
    max_leaf_size: int = 50
    steps: int = 1
    window_b: int | None = None
    halo: bool = False
    seed: int = 0
    eval_resolution: float = 0.2
    expiration: str = "list"
    metrics_every: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.steps < 1:
            raise ConfigError("steps must be at least 1")
        if self.eval_resolution <= 0:
            raise ConfigError("eval_resolution must be positive")
        if self.expiration not in ("list", "timer"):
            raise ConfigError("expiration must be 'list' or 'timer'")
        if self.expiration == "timer" and self.window_b is None:
            raise ConfigMissing("timer expiration requires window_b")
        if self.metrics_every < 0:
            raise ConfigError("metrics_every must be nonnegative")

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "SimConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return cls.from_dict(raw)

    @classmethod
    def nclt_profile(cls, **overrides) -> "SimConfig":
        """Campus-scale profile: h=5, g=0.25, l=0.2, range 100 m."""
        base = dict(truncation=5.0, grid_spacing=0.25, length_scale=0.2,
                    comm_range=100.0)
        base.update(overrides)
        return cls(**base)

    def tsdf_params(self) -> TsdfParams:
        gap = self.max_surface_gap
        if gap is None:
            gap = 5.0 * self.grid_spacing
        return TsdfParams(truncation=self.truncation,
                          grid_spacing=self.grid_spacing,
                          max_surface_gap=gap,
                          frame_half_extent=self.frame_half_extent)

    def kernel_params(self) -> KernelParams:
        return KernelParams(amplitude=self.signal_amplitude,
                            length_scale=self.length_scale,
                            noise_std=self.noise_std)

    def prior(self) -> GpPrior:
        mean = self.truncation if self.prior_mean is None else self.prior_mean
        return GpPrior(mean=mean, kernel=self.kernel_params())

    def halo_radius(self) -> float | None:
        return 2.0 * self.length_scale if self.halo else None


@dataclass(frozen=True)
class SendRecord:
    t: int
    sender: int
    receiver: int
    batch_id: BatchId
    n_samples: int
    recipients_at_send: frozenset[int]


@dataclass
class SimTrace:
    """Audit log: releases, sends, applications, and per-step graphs."""

    releases: dict[BatchId, MiniBatch] = field(default_factory=dict)
    sends: list[SendRecord] = field(default_factory=list)
    applications: list[tuple[int, int, BatchId]] = field(default_factory=list)
    graphs: list[GraphSnapshot] = field(default_factory=list)


@dataclass
class MetricsRecord:
    t: int
    robot: int
    rmse: float                # NaN when the evaluation mask is empty
    pseudo_points: int
    leaves: int
    retained_batches: int
    empty_mask: bool = False


@dataclass
class EvalGrid:
    """One evaluation pass: shared query points, central and per-robot maps."""

    points: np.ndarray
    central_mean: np.ndarray
    central_var: np.ndarray
    robot_means: list[np.ndarray]
    robot_vars: list[np.ndarray]
    mask: np.ndarray
    rmse: list[float]


@dataclass
class RasterMap:
    xs: np.ndarray
    ys: np.ndarray
    mean: np.ndarray       # shape (len(ys), len(xs))
    variance: np.ndarray


def predict_points(tree: QuadTree, points: np.ndarray, prior: GpPrior,
                   halo_radius: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Leaf-local compressed GP prediction at arbitrary points.

    Points outside the tree (or in empty leaves) take the prior. Without
    a halo, points are grouped per leaf and solved in one batch.
    """
    k = points.shape[0]
    c2 = prior.kernel.amplitude ** 2
    mean = np.full(k, prior.mean)
    var = np.full(k, c2)
    if len(tree) == 0 or k == 0:
        return mean, var

    if halo_radius is None:
        groups: dict[int, tuple[object, list[int]]] = {}
        for idx in range(k):
            leaf = tree.leaf_for((points[idx, 0], points[idx, 1]))
            if leaf is None or not leaf.table:
                continue
            slot = groups.setdefault(id(leaf), (leaf, []))
            slot[1].append(idx)
        for leaf, idxs in groups.values():
            stats = sorted(leaf.table.values(), key=lambda s: s.key)
            post = compressed_gp_posterior(stats, points[idxs], prior)
            mean[idxs] = post.mean
            var[idxs] = post.variance
    else:
        for idx in range(k):
            stats = tree.query_leaf((points[idx, 0], points[idx, 1]), halo_radius)
            if not stats:
                continue
            post = compressed_gp_posterior(stats, points[idx:idx + 1], prior)
            mean[idx] = post.mean[0]
            var[idx] = post.variance[0]
    return mean, var


def rasterize_map(tree: QuadTree, prior: GpPrior, resolution: float,
                  bounds: tuple[float, float, float, float] | None = None,
                  halo_radius: float | None = None) -> RasterMap:
    """Evaluate the map on a regular grid; cells outside the tree get the
    prior mean and variance."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if bounds is None:
        bounds = tree.content_bounds()
        if bounds is None:
            raise ValueError("empty tree needs explicit bounds")
    xmin, ymin, xmax, ymax = bounds
    xs = np.arange(xmin, xmax + 0.5 * resolution, resolution)
    ys = np.arange(ymin, ymax + 0.5 * resolution, resolution)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    mean, var = predict_points(tree, pts, prior, halo_radius)
    return RasterMap(xs=xs, ys=ys, mean=mean.reshape(len(ys), len(xs)),
                     variance=var.reshape(len(ys), len(xs)))


def compute_rmse(robot_means: list[np.ndarray], central_mean: np.ndarray,
                 truncation: float) -> tuple[list[float], np.ndarray]:
    """Per-robot RMSE against the central map on the strict in-band mask
    {p : central(p) in (-h, h)}; NaN when the mask is empty."""
    mask = (central_mean > -truncation) & (central_mean < truncation)
    count = int(mask.sum())
    out = []
    for ym in robot_means:
        if count == 0:
            out.append(float("nan"))
        else:
            diff = ym[mask] - central_mean[mask]
            out.append(float(np.sqrt(np.mean(diff * diff))))
    return out, mask


class Simulation:
    """Drives the robots, the protocol, and the central reference.

    Scans may come from a parsed log or a synthetic world; tests can
    bypass scanning entirely with ``sample_source(t, robot) ->
    list[PseudoSample]``. A scripted graph sequence overrides proximity.
    """

    def __init__(self, config: SimConfig, scans: list[Scan] | None = None,
                 sample_source=None,
                 graph_override: list[GraphSnapshot] | None = None,
                 drop_first_forward: bool = False):
        self.config = config
        self.tsdf_params = config.tsdf_params()
        self.prior = config.prior()
        n = config.n
        self.robots = [RobotState(i, n, QuadTree(config.grid_spacing,
                                                 config.max_leaf_size))
                       for i in range(n)]
        self.central = CentralAgent(QuadTree(config.grid_spacing,
                                             config.max_leaf_size), n)
        self.trace = SimTrace()
        self.graph_override = graph_override
        self.sample_source = sample_source
        self._forward_dropped = not drop_first_forward

        self.scan_map: dict[tuple[int, int], Scan] = {}
        self.positions = [(0.0, 0.0)] * n
        if scans is not None:
            first_pose: dict[int, tuple[int, Scan]] = {}
            for scan in scans:
                if scan.robot_id >= n:
                    raise ConfigError(
                        f"scan robot id {scan.robot_id} exceeds team size {n}")
                key = (scan.t, scan.robot_id)
                if key in self.scan_map:
                    raise ConfigError(f"duplicate scan for robot "
                                      f"{scan.robot_id} at step {scan.t}")
                self.scan_map[key] = scan
                held = first_pose.get(scan.robot_id)
                if held is None or scan.t < held[0]:
                    first_pose[scan.robot_id] = (scan.t, scan)
            for rid, (_, scan) in first_pose.items():
                self.positions[rid] = scan.pose.position

    # -- stepping -----------------------------------------------------------

    def _samples_for(self, t: int, robot: int) -> list[PseudoSample]:
        if self.sample_source is not None:
            return list(self.sample_source(t, robot))
        scan = self.scan_map.get((t, robot))
        if scan is None:
            return []
        self.positions[robot] = scan.pose.position
        return compute_pseudo_points(scan, self.tsdf_params)

    def graph_at(self, t: int) -> GraphSnapshot:
        if self.graph_override is not None:
            if t < len(self.graph_override):
                return self.graph_override[t]
            return GraphSnapshot(n=self.config.n, t=t, edges=frozenset())
        return proximity_graph(self.positions, self.config.comm_range, t)

    def step(self, t: int) -> None:
        n = self.config.n
        released = []
        for i in range(n):
            samples = self._samples_for(t, i)
            if samples:
                batch = self.robots[i].release_own(
                    tuple(BatchSample(key=s.key, location=s.location,
                                      count=float(s.count), value=s.tsdf_value)
                          for s in samples), t)
                if batch is not None:
                    released.append(batch)
                    self.trace.releases[batch.id] = batch

        snap = self.graph_at(t)
        self.trace.graphs.append(snap)

        inboxes: list[list[MiniBatch]] = [[] for _ in range(n)]
        for i in range(n):
            for k in snap.neighbors(i):
                msgs = self.robots[i].make_outgoing(k)
                if not self._forward_dropped:
                    for pos, msg in enumerate(msgs):
                        if msg.id.origin != i:
                            del msgs[pos]
                            self._forward_dropped = True
                            break
                for msg in msgs:
                    self.trace.sends.append(SendRecord(
                        t=t, sender=i, receiver=k, batch_id=msg.id,
                        n_samples=len(msg.samples),
                        recipients_at_send=msg.recipients))
                inboxes[k].extend(msgs)

        for i in range(n):
            self.robots[i].receive(inboxes[i], t)
            for bid in self.robots[i].apply_batches():
                self.trace.applications.append((t, i, bid))
            if self.config.expiration == "list":
                self.robots[i].expire()
            else:
                self.robots[i].timer_expire(self.config.window_b, t)
            self.robots[i].t = t

        self.central.ingest(released)
        self.central.t = t

    def run(self, steps: int | None = None) -> list[MetricsRecord]:
        total = self.config.steps if steps is None else steps
        every = self.config.metrics_every
        records = []
        for t in range(total):
            self.step(t)
            if every and (t % every == 0 or t == total - 1):
                records.extend(self.compute_metrics(t))
        return records

    # -- evaluation -----------------------------------------------------------

    def eval_points(self) -> np.ndarray | None:
        """Shared query grid over the central tree's content bounds."""
        bounds = self.central.tree.content_bounds()
        if bounds is None:
            return None
        res = self.config.eval_resolution
        xmin, ymin, xmax, ymax = bounds
        xs = np.arange(xmin, xmax + 0.5 * res, res)
        ys = np.arange(ymin, ymax + 0.5 * res, res)
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def evaluate(self) -> EvalGrid | None:
        pts = self.eval_points()
        if pts is None:
            return None
        halo = self.config.halo_radius()
        cz, cv = predict_points(self.central.tree, pts, self.prior, halo)
        means, vars_ = [], []
        for robot in self.robots:
            ym, yv = predict_points(robot.tree, pts, self.prior, halo)
            means.append(ym)
            vars_.append(yv)
        rmse, mask = compute_rmse(means, cz, self.config.truncation)
        return EvalGrid(points=pts, central_mean=cz, central_var=cv,
                        robot_means=means, robot_vars=vars_, mask=mask,
                        rmse=rmse)

    def compute_metrics(self, t: int) -> list[MetricsRecord]:
        grid = self.evaluate()
        records = []
        for i, robot in enumerate(self.robots):
            if grid is None or not grid.mask.any():
                rmse, empty = float("nan"), True
            else:
                rmse, empty = grid.rmse[i], False
            records.append(MetricsRecord(
                t=t, robot=i, rmse=rmse,
                pseudo_points=len(robot.tree),
                leaves=robot.tree.leaf_count(),
                retained_batches=len(robot.retained),
                empty_mask=empty))
        return records

    # -- audits ---------------------------------------------------------------

    def audit_exactly_once(self) -> None:
        seen = set()
        for _, robot, bid in self.trace.applications:
            if (robot, bid) in seen:
                raise AssertionError(f"batch {bid} applied twice by robot {robot}")
            seen.add((robot, bid))

    def audit_no_echo(self) -> None:
        for rec in self.trace.sends:
            if rec.receiver in rec.recipients_at_send:
                raise AssertionError(
                    f"echo: batch {rec.batch_id} sent back to robot "
                    f"{rec.receiver} at step {rec.t}")


# -- exports ------------------------------------------------------------------

def table_of(tree: QuadTree) -> dict[GridKey, tuple[float, float]]:
    """Key -> (m, zeta) view of a statistics tree."""
    return {s.key: (s.m, s.zeta) for s in tree.entries()}


def write_metrics_csv(path, records: list[MetricsRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,robot,rmse,pseudo_points,leaves,retained_batches\n")
        for r in records:
            rmse = "nan" if math.isnan(r.rmse) else repr(r.rmse)
            fh.write(f"{r.t},{r.robot},{rmse},{r.pseudo_points},"
                     f"{r.leaves},{r.retained_batches}\n")


def write_map_csv(path, raster: RasterMap) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,mean,variance\n")
        for iy, y in enumerate(raster.ys):
            for ix, x in enumerate(raster.xs):
                fh.write(f"{float(x)!r},{float(y)!r},"
                         f"{float(raster.mean[iy, ix])!r},"
                         f"{float(raster.variance[iy, ix])!r}\n")


def write_pgm(path, raster: RasterMap, truncation: float) -> None:
    """8-bit PGM of the mean, clamped to [-h, h]; rows top-down."""
    clamped = np.clip(raster.mean, -truncation, truncation)
    scaled = np.round((clamped + truncation) / (2.0 * truncation) * 255.0)
    img = scaled.astype(np.uint8)[::-1, :]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_trace_log(path, sends: list[SendRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in sends:
            fh.write(f"SEND {rec.t} {rec.sender} {rec.receiver} "
                     f"{rec.batch_id.tau} {rec.batch_id.origin} {rec.n_samples}\n")
