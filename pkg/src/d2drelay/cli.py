"""Command-line entry point: map generation, simulation, sweeps, and validation.

Exit codes: 0 success, 1 usage, 2 config validation, 3 runtime failure,
4 oracle-tolerance breach (validate).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .analytics import (
    HopOutageProfile,
    SgParams,
    a_function,
    a_function_quadrature,
    d2d_route_outage,
    validate_cc_closed_form,
)
from .config import (
    ConfigError,
    load_config,
    manhattan_from_config,
    resolved_config_dict,
    scenario_from_config,
    sweep_from_config,
)
from .env import MapError, Point, generate_manhattan_map, serialize_map
from .routing import ReachabilityGraph, RelayNode, route_br
from .sim import DeploymentError, simulate, sweep

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_VALIDATION = 4

SWEEP_HEADER = [
    "axis_value", "strategy", "band", "trials", "d2d_success", "ci_low", "ci_high",
    "mean_hops", "mean_route_len_m", "cc_outage", "cc_baseline",
]
TRIAL_HEADER = [
    "trial", "strategy", "band", "outcome", "hops", "route_len_m",
    "per_hop_success", "cc_outage", "cc_baseline",
]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit(2); the contract wants 1
        raise UsageError(message)


@dataclass(frozen=True)
class Command:
    subcommand: str
    config: str | None
    out: str | None
    seed: int | None
    workers: int
    trials: int | None


def parse_invocation(argv) -> Command:
    parser = _Parser(prog="d2drelay", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    for name, need_out in (
        ("generate-map", True),
        ("simulate", True),
        ("sweep", True),
        ("analyze", True),
        ("validate", False),
    ):
        p = sub.add_parser(name, prog=f"d2drelay {name}")
        p.add_argument("--config", default=None, help="scenario config file")
        p.add_argument("--out", default=None, required=False,
                       help="output path" + (" (required)" if need_out else ""))
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--workers", type=int, default=1, help="parallel trial workers")
        p.add_argument("--trials", type=int, default=None, help="trial count override")
    args = parser.parse_args(argv)
    if args.subcommand is None:
        raise UsageError("a subcommand is required "
                         "(generate-map | simulate | sweep | analyze | validate)")
    if args.subcommand != "validate" and args.out is None:
        raise UsageError(f"{args.subcommand} requires --out")
    return Command(
        subcommand=args.subcommand,
        config=args.config,
        out=args.out,
        seed=args.seed,
        workers=max(1, args.workers),
        trials=args.trials,
    )


def _fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.10g}"
    return str(x)


def _write_rows(path: str, header: list[str], rows) -> None:
    """Write CSV atomically: stage to a temp file, rename only on success."""
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifest(out_path: str, cmd: Command, cfg, master_seed: int) -> None:
    manifest = {
        "version": __version__,
        "subcommand": cmd.subcommand,
        "master_seed": master_seed,
        "workers": cmd.workers,
        "resolved_config": resolved_config_dict(cfg),
    }
    path = out_path + ".manifest.json"
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cmd_generate_map(cmd: Command, cfg) -> int:
    spec = manhattan_from_config(cfg)
    seed = cmd.seed if cmd.seed is not None else int(cfg.get("map", "map_seed"))
    wall = float(cfg.get("map", "wall_loss_db"))
    urban_map = generate_manhattan_map(spec, seed, default_wall_loss=wall)
    tmp = cmd.out + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(serialize_map(urban_map))
            fh.write("\n")
        os.replace(tmp, cmd.out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    print(f"wrote map with {len(urban_map.buildings)} buildings to {cmd.out}")
    return EXIT_OK


def _cmd_simulate(cmd: Command, cfg) -> int:
    scenario = scenario_from_config(cfg, seed_override=cmd.seed, trials_override=cmd.trials)
    results = simulate(scenario, workers=cmd.workers)
    rows = [
        (i, r.strategy, r.band, r.outcome, r.hops, r.route_length_m,
         ";".join(f"{p:.4g}" for p in r.per_hop_success), r.cc_outage, r.cc_baseline)
        for i, r in enumerate(results)
    ]
    _write_rows(cmd.out, TRIAL_HEADER, rows)
    _write_manifest(cmd.out, cmd, cfg, scenario.master_seed)
    n_ok = sum(1 for r in results if r.outcome == "success")
    print(f"{len(results)} trials, {n_ok} delivered ({n_ok / len(results):.1%})")
    return EXIT_OK


def _cmd_sweep(cmd: Command, cfg) -> int:
    scenario = scenario_from_config(cfg, seed_override=cmd.seed)
    spec = sweep_from_config(cfg, trials_override=cmd.trials)
    rows = sweep(spec, scenario, workers=cmd.workers)
    _write_rows(
        cmd.out,
        SWEEP_HEADER,
        [
            (r.axis_value, r.strategy, r.band, r.trials, r.d2d_success, r.ci_low, r.ci_high,
             r.mean_hops, r.mean_route_len_m, r.cc_outage, r.cc_baseline)
            for r in rows
        ],
    )
    _write_manifest(cmd.out, cmd, cfg, scenario.master_seed)
    print(f"wrote {len(rows)} sweep rows to {cmd.out}")
    return EXIT_OK


def _cmd_analyze(cmd: Command, cfg) -> int:
    """Analytic-vs-empirical tables: coverage integral and the outage closed form."""
    scenario = scenario_from_config(cfg, seed_override=cmd.seed)
    zeta = scenario.threshold_linear
    seed = scenario.master_seed
    trials = cmd.trials if cmd.trials is not None else 100_000
    rows = []
    for z in (0.01, 0.1, zeta, 1.0, 3.0, 10.0):
        cf = a_function(z, 4.0)
        qd = a_function_quadrature(z, 4.0)
        rows.append(("a_function", f"zeta={z:.6g}", cf, qd, abs(cf - qd)))
    for lam_km2 in (1.0, 3.0, 5.0):
        for r in (100.0, 200.0, 300.0):
            params = SgParams(bs_density=lam_km2 * 1e-6, alpha=4.0, threshold=zeta)
            res = validate_cc_closed_form(params, r, trials, seed)
            rows.append((
                "cc_link_success", f"lambda={lam_km2:g}/km2 r={r:g}m",
                res.analytic, res.empirical, res.abs_gap,
            ))
    _write_rows(cmd.out, ["check", "params", "analytic", "empirical", "abs_gap"], rows)
    _write_manifest(cmd.out, cmd, cfg, seed)
    print(f"wrote {len(rows)} analysis rows to {cmd.out}")
    return EXIT_OK


def _reachable_closure(graph: ReachabilityGraph, src: int) -> set[int]:
    """Independent reachability oracle: fixed-point set expansion."""
    seen = {src}
    while True:
        grew = {v for u in seen for v in graph.neighbors(u) if v not in seen}
        if not grew:
            return seen
        seen |= grew


def _cmd_validate(cmd: Command, cfg) -> int:
    scenario = scenario_from_config(cfg, seed_override=cmd.seed)
    rng = np.random.default_rng(scenario.master_seed)
    failures = 0

    def report(name: str, gap: float, tol: float):
        nonlocal failures
        ok = gap <= tol
        failures += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'}  {name}: gap={gap:.3e} tol={tol:.0e}")

    worst = 0.0
    for z in (0.01, 0.1, scenario.threshold_linear, 0.2512, 1.0, 3.0, 10.0, 100.0):
        worst = max(worst, abs(a_function(z, 4.0) - a_function_quadrature(z, 4.0)))
    report("A-function quadrature vs closed form", worst, 1e-9)

    worst = 0.0
    for _ in range(50):
        hops = int(rng.integers(1, 11))
        outages = rng.uniform(0.0, 1.0, hops)
        got = d2d_route_outage(HopOutageProfile(tuple(outages)))
        want = _route_outage_enumeration(outages)
        worst = max(worst, abs(got - want))
    report("route outage vs 2^J enumeration", worst, 1e-12)

    params = SgParams(bs_density=3e-6, alpha=4.0, threshold=scenario.threshold_linear)
    res = validate_cc_closed_form(params, 200.0, 100_000, int(rng.integers(2**31)))
    report("cc success closed form vs Poisson-field oracle", res.abs_gap, 1e-2)

    mismatches = 0
    for _ in range(200):
        n = int(rng.integers(2, 40))
        graph = _random_graph(rng, n)
        src, dst = 0, n - 1
        flood = route_br(graph, src, dst)
        if flood.reached != (dst in _reachable_closure(graph, src)):
            mismatches += 1
    report("broadcast flood vs reachability closure", float(mismatches), 0.0)

    if failures:
        print(f"{failures} check(s) failed")
        return EXIT_VALIDATION
    print("all checks passed")
    return EXIT_OK


def _route_outage_enumeration(outages) -> float:
    """Brute force: sum probability over every failing hop-outcome combination."""
    hops = len(outages)
    total = 0.0
    for mask in range(2**hops):
        p = 1.0
        any_fail = False
        for j in range(hops):
            fail = (mask >> j) & 1
            p *= outages[j] if fail else 1.0 - outages[j]
            any_fail = any_fail or bool(fail)
        if any_fail:
            total += p
    return total


def _random_graph(rng, n: int) -> ReachabilityGraph:
    nodes = {
        i: RelayNode(id=i, position=Point(float(rng.uniform(0, 100)), float(rng.uniform(0, 100))))
        for i in range(n)
    }
    adjacency: dict[int, dict[int, float]] = {i: {} for i in range(n)}
    p_edge = float(rng.uniform(0.02, 0.2))
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < p_edge:
                adjacency[u][v] = 1.0
    return ReachabilityGraph(nodes=nodes, adjacency=adjacency)


def execute(cmd: Command) -> int:
    cfg = load_config(cmd.config)
    if cmd.subcommand == "generate-map":
        return _cmd_generate_map(cmd, cfg)
    if cmd.subcommand == "simulate":
        return _cmd_simulate(cmd, cfg)
    if cmd.subcommand == "sweep":
        return _cmd_sweep(cmd, cfg)
    if cmd.subcommand == "analyze":
        return _cmd_analyze(cmd, cfg)
    if cmd.subcommand == "validate":
        return _cmd_validate(cmd, cfg)
    raise UsageError(f"unknown subcommand {cmd.subcommand!r}")


def main(argv=None) -> int:
    try:
        cmd = parse_invocation(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return execute(cmd)
    except (ConfigError, MapError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DeploymentError, OSError, RuntimeError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
