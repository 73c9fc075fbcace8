"""Command-line surface.

Subcommands: simulate, check-connectivity, oracle-compare, export-map,
synth. Exit codes: 0 success, 1 failed check or comparison, 2 config
error, 3 ingestion error, 4 fixture too large for the oracle.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import oracle as oracle_mod
from .network import GraphLogError, check_b_connected, load_graph_log
from .protocol import ConfigMissing
from .quadtree import QuadTree
from .scanio import (NonMonotonicTimestamp, ParseError, load_scan_log,
                     split_streams, write_scan_log)
from .sim import (SimConfig, Simulation, rasterize_map, table_of,
                  write_map_csv, write_metrics_csv, write_pgm, write_trace_log)
from .worlds import ConfigError, WorldSpec, synth_world

SCAN_GRAMMAR = """\
scan log grammar (one scan per line, whitespace separated):
  SCAN <t> <robot_id> <x> <y> <theta> <max_range> <n> <a0> <da> <r1> ... <rn>
    t          integer step index
    x y theta  robot pose (meters, radians)
    max_range  sensor limit; a range equal to it means no return
    n          number of beams
    a0 da      first beam angle and increment (radians, da > 0)
    r1..rn     ranges (meters)
graph log grammar:
  EDGE <t> <i> <j>      undirected edge between robots i and j at step t
"""

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_INGEST = 3
EXIT_ORACLE_LIMIT = 4


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _load_records_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "ix,iy,x,y,zeta,m":
            raise ConfigError(f"{path}: expected tree-record header 'ix,iy,x,y,zeta,m'")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            rows.append((int(parts[0]), int(parts[1]), float(parts[2]),
                         float(parts[3]), float(parts[4]), float(parts[5])))
    return rows


def _write_records_csv(path, tree: QuadTree) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ix,iy,x,y,zeta,m\n")
        for ix, iy, x, y, zeta, m in tree.to_records():
            fh.write(f"{ix},{iy},{x!r},{y!r},{zeta!r},{m!r}\n")


def _gather_scans(args, config: SimConfig):
    """Build the scan list from --scan-log or --synth, applying --split."""
    if args.scan_log is not None:
        scans = load_scan_log(args.scan_log)
        if args.split is not None:
            scans = split_streams(scans, args.split)
        return scans
    with open(args.synth, "r", encoding="utf-8") as fh:
        spec = WorldSpec.from_dict(json.load(fh))
    scans, _ = synth_world(spec, seed=config.seed)
    if args.split is not None:
        scans = split_streams(scans, args.split)
    return scans


def _build_sim(args, config: SimConfig, drop_first_forward=False) -> Simulation:
    scans = _gather_scans(args, config)
    graph_override = None
    if getattr(args, "graph_log", None) is not None:
        graph_override = load_graph_log(args.graph_log, config.n, config.steps)
    return Simulation(config, scans=scans, graph_override=graph_override,
                      drop_first_forward=drop_first_forward)


# -- simulate -----------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        config = SimConfig.from_json(args.config)
    except (ConfigError, ConfigMissing) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    try:
        sim = _build_sim(args, config)
    except (ConfigError, ConfigMissing) as exc:
        # a bad synth spec or scans inconsistent with the config
        _err(str(exc))
        return EXIT_CONFIG if args.scan_log is None else EXIT_INGEST
    except (ParseError, NonMonotonicTimestamp, GraphLogError, OSError) as exc:
        _err(str(exc))
        return EXIT_INGEST

    records = sim.run()
    os.makedirs(args.out, exist_ok=True)
    write_metrics_csv(os.path.join(args.out, "metrics.csv"), records)
    write_trace_log(os.path.join(args.out, "trace.log"), sim.trace.sends)

    bounds = sim.central.tree.content_bounds()
    if bounds is not None:
        res = config.eval_resolution
        halo = config.halo_radius()
        trees = [("central", sim.central.tree)]
        trees.extend((f"robot{i}", r.tree) for i, r in enumerate(sim.robots))
        for name, tree in trees:
            raster = rasterize_map(tree, sim.prior, res, bounds=bounds,
                                   halo_radius=halo)
            write_map_csv(os.path.join(args.out, f"map_{name}.csv"), raster)
            if args.pgm:
                write_pgm(os.path.join(args.out, f"map_{name}.pgm"),
                          raster, config.truncation)
            _write_records_csv(os.path.join(args.out, f"tree_{name}.csv"), tree)
    else:
        print("no pseudo-points accumulated; skipping map export")
    print(f"simulate: {config.n} robots, {config.steps} steps, "
          f"{len(sim.trace.releases)} batches released")
    return EXIT_OK


# -- check-connectivity ---------------------------------------------------------

def cmd_check_connectivity(args) -> int:
    try:
        snaps = load_graph_log(args.graph_log, args.n)
    except (GraphLogError, OSError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if not snaps:
        # an empty log still describes a (disconnected) sequence
        from .network import GraphSnapshot
        snaps = [GraphSnapshot(n=args.n, t=t, edges=frozenset())
                 for t in range(args.b)]
    report = check_b_connected(snaps, args.b)
    if report.partial_window_skipped:
        print("warning: trailing partial window skipped")
    if report.ok:
        print(f"B-connected: {report.windows_checked} windows of length {args.b}")
        return EXIT_OK
    print(f"violation: window {report.first_violation} "
          f"(steps {report.first_violation * args.b}.."
          f"{(report.first_violation + 1) * args.b - 1}) is disconnected")
    return EXIT_FAIL


# -- oracle-compare -------------------------------------------------------------

ORACLE_MAX_N = 6
ORACLE_MAX_STEPS = 50


def cmd_oracle_compare(args) -> int:
    try:
        config = SimConfig.from_json(args.config)
    except (ConfigError, ConfigMissing) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if config.n > ORACLE_MAX_N or config.steps > ORACLE_MAX_STEPS:
        _err(f"fixture too large for the closed-form oracle "
             f"(n <= {ORACLE_MAX_N}, steps <= {ORACLE_MAX_STEPS})")
        return EXIT_ORACLE_LIMIT
    try:
        sim = _build_sim(args, config, drop_first_forward=args.inject_drop)
    except (ConfigError, ConfigMissing) as exc:
        _err(str(exc))
        return EXIT_CONFIG if args.scan_log is None else EXIT_INGEST
    except (ParseError, NonMonotonicTimestamp, GraphLogError, OSError) as exc:
        _err(str(exc))
        return EXIT_INGEST

    os.makedirs(args.out, exist_ok=True)
    diffs = []
    worst_dm = 0.0
    worst_dz = 0.0
    keys_ok = True
    for t in range(config.steps):
        sim.step(t)
        tables = oracle_mod.closed_form_tables(
            sim.trace.releases, sim.trace.graphs, config.n, t)
        for i, robot in enumerate(sim.robots):
            dm, dz, km = oracle_mod.compare_tables(tables[i], table_of(robot.tree))
            diffs.append((t, i, dm, dz, km))
            worst_dm = max(worst_dm, dm)
            worst_dz = max(worst_dz, dz)
            keys_ok = keys_ok and km

    with open(os.path.join(args.out, "oracle_diff.csv"), "w", encoding="utf-8") as fh:
        fh.write("t,robot,max_dm,max_dzeta,keys_match\n")
        for t, i, dm, dz, km in diffs:
            fh.write(f"{t},{i},{dm!r},{dz!r},{int(km)}\n")

    ok = keys_ok and worst_dm == 0.0 and worst_dz <= 1e-9
    print(f"oracle-compare: max |dm| = {worst_dm:g}, max |dzeta| = {worst_dz:g}, "
          f"key sets {'match' if keys_ok else 'DIFFER'}")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


# -- export-map -----------------------------------------------------------------

def cmd_export_map(args) -> int:
    try:
        config = SimConfig.from_json(args.config)
        records = _load_records_csv(args.records)
    except (ConfigError, ConfigMissing) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _err(str(exc))
        return EXIT_INGEST
    tree = QuadTree.from_records(records, config.grid_spacing,
                                 config.max_leaf_size)
    res = args.resolution if args.resolution is not None else config.eval_resolution
    if len(tree) == 0:
        _err("tree records are empty; nothing to rasterize")
        return EXIT_INGEST
    raster = rasterize_map(tree, config.prior(), res,
                           halo_radius=config.halo_radius())
    write_map_csv(args.out, raster)
    if args.pgm is not None:
        write_pgm(args.pgm, raster, config.truncation)
    print(f"export-map: {len(tree)} pseudo-points -> "
          f"{len(raster.ys)}x{len(raster.xs)} cells")
    return EXIT_OK


# -- synth ----------------------------------------------------------------------

def cmd_synth(args) -> int:
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = WorldSpec.from_dict(json.load(fh))
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    scans, world = synth_world(spec, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    write_scan_log(os.path.join(args.out, "scans.log"), scans)
    with open(os.path.join(args.out, "walls.csv"), "w", encoding="utf-8") as fh:
        fh.write("x1,y1,x2,y2\n")
        for (x1, y1), (x2, y2) in world.segments():
            fh.write(f"{x1!r},{y1!r},{x2!r},{y2!r}\n")
    print(f"synth: {len(scans)} scans for {len(spec.paths)} robots "
          f"over {spec.steps} steps")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gossipmap",
        description="Distributed multi-robot TSDF mapping simulator",
        epilog=SCAN_GRAMMAR,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a mapping simulation",
                       epilog=SCAN_GRAMMAR,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", required=True, help="SimConfig JSON file")
    p.add_argument("--out", required=True, help="output directory")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scan-log", help="scan log file (SCAN lines)")
    src.add_argument("--synth", help="synthetic world spec JSON")
    p.add_argument("--split", type=int,
                   help="split one log into k concurrent robot streams")
    p.add_argument("--graph-log",
                   help="EDGE-line file overriding proximity graphs")
    p.add_argument("--pgm", action="store_true",
                   help="also write 8-bit PGM images of the map means")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check-connectivity",
                       help="verify B-window connectivity of a graph log")
    p.add_argument("--graph-log", required=True)
    p.add_argument("--n", type=int, required=True, help="number of robots")
    p.add_argument("--b", type=int, required=True, help="window length B")
    p.set_defaults(func=cmd_check_connectivity)

    p = sub.add_parser("oracle-compare",
                       help="check the protocol against the closed-form expansion")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scan-log")
    src.add_argument("--synth")
    p.add_argument("--split", type=int)
    p.add_argument("--graph-log")
    p.add_argument("--inject-drop", action="store_true",
                   help="fault injection: silently drop one forwarded batch")
    p.set_defaults(func=cmd_oracle_compare)

    p = sub.add_parser("export-map",
                       help="rasterize serialized tree records to CSV/PGM")
    p.add_argument("--records", required=True,
                   help="tree record CSV (ix,iy,x,y,zeta,m)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output map CSV path")
    p.add_argument("--pgm", help="optional output PGM path")
    p.add_argument("--resolution", type=float)
    p.set_defaults(func=cmd_export_map)

    p = sub.add_parser("synth", help="generate synthetic scan logs")
    p.add_argument("--spec", required=True, help="world spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
