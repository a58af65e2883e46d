"""Command-line pipeline: generate, solve, evaluate, compare, sequence, run."""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

from .baselines import BaselineError
from .channel_plan import ChannelCapacityExceeded, ChannelPlan
from .evaluate import (
    DEFAULT_DURATION, DEFAULT_RUNS, EvaluationReport, SubareaResult, compare,
    comparison_csv, evaluate,
)
from .placement import dumps, to_lp
from .planner import METHODS, SLICER, SlicerPlanner, run_method
from .scenario import (
    DEFAULT_CELL_SIDE, DEFAULT_DIMS, Scenario, SliceSpec, generate_random_scenario, validate,
)

log = logging.getLogger("slicer")

OUTPUT_ENV = "SLICER_OUTPUT_DIR"
DEFAULT_OUTPUT = "slicer-out"

EXIT_OK, EXIT_INFEASIBLE, EXIT_BAD_INPUT = 0, 2, 3


class CliError(Exception):
    pass


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.debug("wrote %s", path)


def load_slices(path) -> tuple[SliceSpec, ...]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("slices", data)
    try:
        return tuple(SliceSpec(**s) for s in data)
    except TypeError as e:
        raise CliError(f"{path}: bad slice definition ({e})") from e


def make_scenario(users: int, seed: int, slices=None, snapshot_index: int = 0) -> Scenario:
    n_cells = round(DEFAULT_DIMS[0] / DEFAULT_CELL_SIDE) * round(DEFAULT_DIMS[1] / DEFAULT_CELL_SIDE)
    if not 1 <= users <= n_cells:
        raise CliError(f"--users must lie in [1, {n_cells}]")
    return generate_random_scenario(occupancy_fraction=users / n_cells, slices=slices, rng_seed=seed,
                                    snapshot_index=snapshot_index)


def load_scenario(path) -> Scenario:
    sc = Scenario.load(path)
    problems = validate(sc)
    if problems:
        raise CliError(f"{path}: invalid scenario: " + "; ".join(problems))
    return sc


# ---------------------------------------------------------------------------
# pipeline pieces

def solve_methods(scenario: Scenario, methods, out: Path, lp: bool = False) -> dict:
    """Plan with every method, writing solution and plan files; returns method -> result."""
    slicer = None
    if SLICER in methods or "kmeans" in methods:
        slicer = SlicerPlanner().fit(scenario)
        log.info("slicer solve: %.3f s, %d UAVs, status %s", slicer.solve_time_,
                 len(slicer.solution_.active_sites()), slicer.solution_.status)
        if lp:
            _write(out / "problem.lp", to_lp(slicer.problem_))
    results = {}
    for m in methods:
        try:
            res = run_method(m, scenario, slicer)
        except (BaselineError, ChannelCapacityExceeded) as e:
            log.error("%s: %s", m, e)
            res = {"method": m, "feasible": False, "plan": None,
                   "solution": {"status": "infeasible", "reason": str(e)}, "solve_time": math.nan}
        _write(out / f"solution.{m}.json", dumps(res["solution"]))
        if res["plan"] is not None:
            _write(out / f"plan.{m}.json", dumps(res["plan"].to_dict()))
        else:
            log.error("%s: no feasible plan", m)
        results[m] = res
    return results


def evaluate_methods(scenario: Scenario, plans: dict, out: Path, sim: bool, duration: float, runs: int) -> dict:
    reports = {}
    for m, plan in plans.items():
        if plan is None:
            continue
        rep = evaluate(plan, scenario, m, simulate=sim, duration=duration, runs=runs)
        _write(out / f"report.{m}.json", rep.to_json())
        for name, series in rep.distributions.items():
            _write(out / f"dist.{m}.{name}.csv", series.to_csv())
        log.info("%s: %d UAVs, %.0f MHz, %d SLA violations", m, rep.n_uavs, rep.total_bandwidth / 1e6,
                 rep.sla_violation_count)
        reports[m] = rep
    return reports


def report_from_dict(d: dict) -> EvaluationReport:
    rows = [
        SubareaResult(r["subarea_id"], r["slice_id"], r["faps"], r["achieved_capacity"],
                      math.inf if r["analytic_delay"] is None else r["analytic_delay"], r["sla_ok"], r["reason"])
        for r in d["subareas"]
    ]
    return EvaluationReport(d["method"], tuple(d["scenario_key"]), rows, d["n_uavs"], d["total_bandwidth"])


def pipeline(scenario: Scenario, methods, out: Path, sim: bool, duration: float, runs: int, lp: bool = False) -> int:
    _write(out / "scenario.json", scenario.to_json())
    results = solve_methods(scenario, methods, out, lp)
    plans = {m: r["plan"] for m, r in results.items()}
    reports = evaluate_methods(scenario, plans, out, sim, duration, runs)
    _write(out / "deployment.json", dumps({
        m: [{"fap_id": f.fap_id, "position": list(f.position),
             "channels_mhz": [c.bandwidth / 1e6 for c in f.channels]} for f in p.faps]
        for m, p in plans.items() if p is not None
    }))
    if len(reports) >= 2:
        _write(out / "comparison.csv", comparison_csv(compare(list(reports.values()))))
    return EXIT_OK if all(m in reports for m in methods) else EXIT_INFEASIBLE


# ---------------------------------------------------------------------------
# subcommands

def cmd_generate(args) -> int:
    slices = load_slices(args.slices) if args.slices else None
    sc = make_scenario(args.users, args.seed, slices)
    _write(args.out / "scenario.json", sc.to_json())
    print(args.out / "scenario.json")
    return EXIT_OK


def _scenario_arg(args) -> Scenario:
    path = args.scenario or args.out / "scenario.json"
    return load_scenario(path)


def cmd_solve(args) -> int:
    sc = _scenario_arg(args)
    results = solve_methods(sc, args.method, args.out, args.lp)
    return EXIT_OK if all(r["feasible"] for r in results.values()) else EXIT_INFEASIBLE


def cmd_evaluate(args) -> int:
    sc = _scenario_arg(args)
    plans = {}
    for m in args.method:
        path = args.out / f"plan.{m}.json"
        if not path.exists():
            log.error("%s missing; run `solve` first", path)
            return EXIT_INFEASIBLE
        plans[m] = ChannelPlan.from_dict(json.loads(path.read_text()))
    evaluate_methods(sc, plans, args.out, args.sim, args.duration, args.runs)
    return EXIT_OK


def cmd_compare(args) -> int:
    paths = []
    for p in args.reports or [args.out]:
        p = Path(p)
        paths.extend(sorted(p.rglob("report.*.json")) if p.is_dir() else [p])
    reports = [report_from_dict(json.loads(p.read_text())) for p in paths]
    if len(reports) < 2:
        raise CliError("compare needs at least two reports")
    try:
        text = comparison_csv(compare(reports))
    except ValueError as e:
        raise CliError(str(e)) from e
    _write(args.out / "comparison.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args) -> int:
    status = EXIT_OK
    seeds = args.seeds if args.seeds else [args.seed]
    if args.scenario:
        return pipeline(load_scenario(args.scenario), args.method, args.out, args.sim, args.duration, args.runs, args.lp)
    slices = load_slices(args.slices) if args.slices else None
    all_reports = []
    for s in seeds:
        out = args.out if len(seeds) == 1 else args.out / f"seed_{s}"
        status = max(status, pipeline(make_scenario(args.users, s, slices), args.method, out, args.sim,
                                      args.duration, args.runs, args.lp))
        for m in args.method:
            p = out / f"report.{m}.json"
            if p.exists():
                all_reports.append(report_from_dict(json.loads(p.read_text())))
    if len(seeds) > 1 and len(all_reports) >= 2:
        try:
            _write(args.out / "comparison.csv", comparison_csv(compare(all_reports)))
        except ValueError as e:
            log.error("comparison skipped: %s", e)
            status = max(status, EXIT_INFEASIBLE)
    return status


def cmd_sequence(args) -> int:
    if args.k_max < 1:
        raise CliError("--k-max must be >= 1")
    slices = load_slices(args.slices) if args.slices else None
    status, timing = EXIT_OK, []
    for k in range(args.k_max):
        seed = args.seed ^ k
        out = args.out / f"snapshot_{k}"
        t0 = time.perf_counter()
        status = max(status, pipeline(make_scenario(args.users, seed, slices, k), args.method, out, args.sim,
                                      args.duration, args.runs))
        wall = time.perf_counter() - t0
        timing.append({"snapshot": k, "seed": seed, "t_k": k * args.dt, "wall_time": wall,
                       "within_period": wall < args.dt})
        log.info("snapshot %d (seed %d): %.3f s of a %.1f s period", k, seed, wall, args.dt)
    _write(args.out / "sequence_timing.json", dumps({"dt": args.dt, "snapshots": timing}))
    if not all(t["within_period"] for t in timing):
        log.warning("some snapshots took longer than the reconfiguration period")
    return status


# ---------------------------------------------------------------------------
# argument parsing

def _methods(text: str) -> list[str]:
    out = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in out if m not in METHODS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"methods must be a comma list from {', '.join(METHODS)}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slicer", description="UAV access-point placement and slicing planner")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True, methods=True):
        sp.add_argument("--out", type=Path, default=None, help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
        if scenario:
            sp.add_argument("--scenario", type=Path, help="scenario JSON (default <out>/scenario.json)")
        if methods:
            sp.add_argument("--method", "--methods", type=_methods, default=list(METHODS),
                            help="comma-separated subset of " + ",".join(METHODS))

    def gen_opts(sp):
        sp.add_argument("--users", type=int, default=5, help="number of occupied subareas")
        sp.add_argument("--slices", type=Path, help="JSON list of slice definitions")
        sp.add_argument("--seed", type=int, default=0)

    def sim_opts(sp, default_sim):
        sp.add_argument("--sim", dest="sim", action="store_true", default=default_sim)
        sp.add_argument("--no-sim", dest="sim", action="store_false")
        sp.add_argument("--duration", type=float, default=DEFAULT_DURATION, help="simulated seconds per run")
        sp.add_argument("--runs", type=int, default=DEFAULT_RUNS)

    g = sub.add_parser("generate", help="write a random scenario")
    common(g, scenario=False, methods=False)
    gen_opts(g)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="plan a scenario with one or more methods")
    common(s)
    s.add_argument("--lp", action="store_true", help="also export the placement model in LP format")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("evaluate", help="check SLAs of saved plans, optionally simulating")
    common(e)
    sim_opts(e, default_sim=False)
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="mean and 95%% CI per method over saved reports")
    common(c, scenario=False, methods=False)
    c.add_argument("reports", nargs="*", help="report files or directories searched recursively")
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("run", help="generate, solve, evaluate and compare in one go")
    common(r)
    gen_opts(r)
    r.add_argument("--seeds", type=int, nargs="+", help="one scenario per seed, compared jointly")
    r.add_argument("--lp", action="store_true")
    sim_opts(r, default_sim=False)
    r.set_defaults(func=cmd_run)

    q = sub.add_parser("sequence", help="independent plans for snapshots t_k = k * dt")
    common(q, scenario=False)
    gen_opts(q)
    q.add_argument("--k-max", type=int, default=3)
    q.add_argument("--dt", type=float, default=60.0, help="reconfiguration period in seconds")
    sim_opts(q, default_sim=False)
    q.set_defaults(func=cmd_sequence)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.out is None:
        args.out = default_output_dir()
    try:
        return args.func(args)
    except (CliError, FileNotFoundError, json.JSONDecodeError) as e:
        log.error("%s", e)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
