"""Command-line front end.

Exit codes: 0 success, 1 bad input, 2 internal error. Data goes to stdout
unless ``--out`` is given; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys

from . import baseline as bl
from . import fixtures
from .config import ConfigError, load_catalog, load_experiment, parse_budgets, parse_policy, read_instance
from .harness import ExperimentSpec, compare_policies, emit, run_sweep
from .model import CostModelConfig
from .solver import (
    CapacityExceededError,
    GreedyPlan,
    PolicySet,
    Problem,
    build_viable_lists,
    enumerate_options,
    solve_exact,
)
from .traces import (
    TraceFormatError,
    build_summary,
    parse_trace,
    read_summary,
    synth_trace,
    synth_workload,
    write_summary,
    write_trace,
)


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@contextlib.contextmanager
def _sink(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _ratio(text: str) -> tuple:
    try:
        r, w = (float(x) for x in text.split(":"))
    except ValueError:
        raise InputError(f"read ratio must look like 99:1, got {text!r}") from None
    return r, w


# --------------------------------------------------------------------------
# shared problem flags


def _add_problem_flags(p, budget_flag: str):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--trace", help="request trace file")
    src.add_argument("--summary", help="workload summary file")
    if budget_flag == "budget":
        src.add_argument("--instance", help="raw MCKP instance: item_id,option,price,benefit lines")
    p.add_argument("--catalog", help="stash catalog (INI)")
    p.add_argument("--policy", default="tiering", help="tiering | optional_replication | forced_replication | custom")
    p.add_argument("--stashes", help="comma list of stash ids (default: every purchasable catalog stash)")
    p.add_argument("--options", default="", help="custom policy options, e.g. '-,Flash,Flash+DRAM'")
    p.add_argument("--hours", type=float, help="trace duration in hours (required with --trace)")
    p.add_argument("--write-mode", choices=["sequential", "concurrent"])
    p.add_argument("--baseline-mode", choices=["kvs", "host_side"])
    p.add_argument("--permanent-store")
    p.add_argument("--no-failures", action="store_true", help="leave failure costs out of service time")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    if budget_flag == "budget":
        p.add_argument("--budget", type=float, required=True)
    else:
        p.add_argument("--budgets", help="min:max:step or comma list")


def _load_workload(args):
    if args.trace:
        if args.hours is None:
            raise InputError("--trace needs --hours")
        with open(args.trace) as fh:
            return build_summary(parse_trace(fh), args.hours)
    with open(args.summary) as fh:
        return read_summary(fh)


def _model_cfg(args, base: CostModelConfig) -> CostModelConfig:
    return CostModelConfig(
        write_mode=args.write_mode or base.write_mode,
        baseline_mode=args.baseline_mode or base.baseline_mode,
        count_failures=base.count_failures and not args.no_failures,
        permanent_store=args.permanent_store or base.permanent_store,
    )


def _spec_from_flags(args, budgets, policy_kind=None, label=None) -> ExperimentSpec:
    if not (args.trace or args.summary):
        raise InputError("one of --trace / --summary is required")
    if not args.catalog:
        raise InputError("--catalog is required")
    stashes, base_cfg = load_catalog(args.catalog)
    cfg = _model_cfg(args, base_cfg)
    if args.stashes:
        ids = args.stashes
    else:
        ids = ",".join(s for s in stashes if s != cfg.permanent_store)
    policy = parse_policy(policy_kind or args.policy, ids, args.options)
    return ExperimentSpec(
        workload=_load_workload(args),
        catalog=stashes,
        policy=policy,
        cfg=cfg,
        budgets=budgets,
        label=label or policy.kind.value,
    )


# --------------------------------------------------------------------------
# subcommands


def cmd_optimize(args) -> None:
    if args.budget < 0:
        raise InputError("--budget must be >= 0")
    if args.instance:
        return _optimize_instance(args)
    spec = _spec_from_flags(args, [args.budget])
    result, (sol,) = run_sweep(spec, keep_solutions=True)
    with _sink(args.out) as out:
        if args.format == "csv":
            emit(result, "csv", out)
        else:
            doc = {
                "budget_dollars": sol.budget,
                "spent_dollars": sol.money_spent,
                "avg_service_ns": sol.expected_service_time,
                "uncached_service_ns": sol.baseline_service_time,
                "total_benefit_ns": sol.total_benefit,
                "frac_bound_ns": sol.fractional_bound,
                "upgrades": sol.upgrades,
                "stash_bytes": {s: sol.stash_bytes.get(s, 0.0) for s in result.stash_ids},
                "uncached_bytes": sol.uncached_bytes,
                "items_per_option": sol.option_counts(),
            }
            json.dump(doc, out, indent=1)
            out.write("\n")
    if args.assignments:
        with open(args.assignments, "w") as fh:
            for item, j in zip(sol.item_ids.tolist(), sol.choice.tolist()):
                fh.write(f"{item},{sol.options[j].label()}\n")


def _optimize_instance(args) -> None:
    with open(args.instance) as fh:
        ids, options, prices, benefits = read_instance(fh)
    plan = GreedyPlan(build_viable_lists(prices, benefits, ids))
    res = plan.run(args.budget)
    log = plan.upgrade_sequence(res.upgrades)
    with _sink(args.out) as out:
        if args.format == "csv":
            out.write("step,gradient,item_id,from,to,delta_price,delta_benefit\n")
            for u in log:
                out.write(
                    f"{u.step},{u.gradient!r},{u.item_id},{options[u.from_option].label()},"
                    f"{options[u.to_option].label()},{u.delta_price!r},{u.delta_benefit!r}\n"
                )
        else:
            doc = {
                "budget_dollars": res.budget,
                "spent_dollars": res.money_spent,
                "benefit": res.benefit,
                "frac_bound": res.fractional_bound,
                "upgrades": res.upgrades,
                "assignment": {str(i): options[j].label() for i, j in zip(ids, res.option.tolist())},
            }
            json.dump(doc, out, indent=1)
            out.write("\n")
    print(
        f"spent {res.money_spent!r} of {res.budget!r} in {res.upgrades} upgrades; benefit {res.benefit!r}",
        file=sys.stderr,
    )


def _threads(args) -> int:
    return args.threads if args.threads else (os.cpu_count() or 1)


def cmd_sweep(args) -> None:
    if args.experiment:
        spec = load_experiment(args.experiment)
    else:
        if not args.budgets:
            raise InputError("--budgets (or --experiment) is required")
        spec = _spec_from_flags(args, parse_budgets(args.budgets))
    result = run_sweep(spec, threads=_threads(args))
    with _sink(args.out) as out:
        emit(result, args.format, out)


def cmd_compare(args) -> None:
    if args.experiment:
        specs = [load_experiment(p) for p in args.experiment]
    else:
        if not args.budgets:
            raise InputError("--budgets (or --experiment) is required")
        budgets = parse_budgets(args.budgets)
        specs = [_spec_from_flags(args, budgets, policy_kind=k.strip()) for k in args.policies.split(",")]
    table = compare_policies(specs, threads=_threads(args))
    with _sink(args.out) as out:
        emit(table, args.format, out)


def cmd_gen_trace(args) -> None:
    summary = synth_workload(
        args.items,
        args.zipf,
        _ratio(args.read_ratio),
        args.size,
        args.comp,
        seed=args.seed,
        total_requests=args.requests,
        duration_hours=args.hours,
    )
    with _sink(args.out) as out:
        if args.emit_summary:
            write_summary(summary, out)
        else:
            write_trace(synth_trace(summary, summary.total_requests, seed=args.seed), out)


def cmd_summarize(args) -> None:
    with open(args.trace) as fh:
        summary = build_summary(parse_trace(fh), args.hours)
    with _sink(args.out) as out:
        write_summary(summary, out)


def cmd_baseline(args) -> None:
    if args.two_pages:
        devices = fixtures.page_devices()
        items = fixtures.page_items()
        capacities = dict(fixtures.PAGES_CAPACITY)
        disk_id = "Disk"
    else:
        if not (args.catalog and args.summary and args.disk and args.capacity):
            raise InputError("need --two-pages, or --catalog, --summary, --disk and --capacity")
        devices, _ = load_catalog(args.catalog)
        with open(args.summary) as fh:
            items = read_summary(fh).items
        capacities = {}
        for text in args.capacity:
            sid, _, value = text.partition("=")
            try:
                capacities[sid] = float(value)
            except ValueError:
                raise InputError(f"bad --capacity {text!r}; use STASH=BYTES") from None
        disk_id = args.disk
        for sid in [disk_id, *capacities]:
            if sid not in devices:
                raise InputError(f"stash {sid!r} not in catalog")
    disk = devices[disk_id]
    in_scope = [devices[s] for s in capacities]
    item_list = list(items)
    rows = []

    heur = bl.heuristic_place(item_list, capacities, in_scope, disk)
    rows.append(("heuristic", heur, float("nan")))

    cfg = CostModelConfig(baseline_mode="host_side", count_failures=False, permanent_store=disk_id)
    problem = Problem(items, enumerate_options(PolicySet("tiering", tuple(capacities))), devices, [], cfg)
    budget = sum(capacities[s] * devices[s].price_per_byte for s in capacities)
    greedy = problem.from_greedy(GreedyPlan(problem.viable_lists()).run(budget))
    rows.append(("greedy", _as_stash_map(greedy, disk_id), greedy.money_spent))
    try:
        exact = solve_exact(problem, budget, args.quantum)
        rows.append(("exact", _as_stash_map(exact, disk_id), exact.money_spent))
    except CapacityExceededError as exc:
        print(f"exact oracle skipped: {exc}", file=sys.stderr)

    with _sink(args.out) as out:
        out.write("method,expected_io_ns,spent_dollars,assignment\n")
        for name, assign, spent in rows:
            t = bl.expected_io_time(assign, item_list, devices)
            pairs = ";".join(f"{k}={v}" for k, v in sorted(assign.items()))
            out.write(f"{name},{t!r},{spent!r},{pairs}\n")


def _as_stash_map(sol, disk_id: str) -> dict:
    out = {}
    for item, P in sol.assignment.items():
        if len(P) > 1:
            raise InputError("replicated placements have no single-stash I/O time")
        out[str(item)] = next(iter(P)) if P else disk_id
    return out


def cmd_validate(args) -> None:
    if not (args.catalog or args.trace or args.summary or args.experiment):
        raise InputError("nothing to validate")
    if args.catalog:
        stashes, cfg = load_catalog(args.catalog)
        print(f"catalog ok: {len(stashes)} stashes", file=sys.stderr)
    if args.trace:
        with open(args.trace) as fh:
            n = sum(1 for _ in parse_trace(fh))
        print(f"trace ok: {n} records", file=sys.stderr)
    if args.summary:
        with open(args.summary) as fh:
            s = read_summary(fh)
        print(f"summary ok: {len(s.items)} items", file=sys.stderr)
    for path in args.experiment or []:
        spec = load_experiment(path)
        spec.problem()
        print(f"experiment ok: {spec.label}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stashopt", description="Budgeted multi-stash cache configuration.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("optimize", help="solve one budget")
    _add_problem_flags(p, "budget")
    p.add_argument("--assignments", help="write item_id,placement lines here")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="solve a grid of budgets")
    _add_problem_flags(p, "budgets")
    p.add_argument("--experiment", help="experiment spec file (replaces the problem flags)")
    p.add_argument("--threads", type=int, default=0, help="worker threads (default: all cores)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="compare policies over a shared budget grid")
    _add_problem_flags(p, "budgets")
    p.add_argument("--experiment", action="append", help="experiment spec file; repeat per column")
    p.add_argument("--policies", default="tiering,optional_replication,forced_replication")
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-trace", help="synthetic Zipf workload")
    p.add_argument("--items", type=int, required=True)
    p.add_argument("--zipf", type=float, default=0.99)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--requests", type=int, help="requests to sample (default 10 per item)")
    p.add_argument("--read-ratio", default="99:1")
    p.add_argument("--size", default="lognormal:4096:1.0", help="fixed:V | uniform:LO:HI | lognormal:MEDIAN:SIGMA")
    p.add_argument("--comp", default="lognormal:1000000:1.0", help="recompute time distribution, ns")
    p.add_argument("--hours", type=float, default=1.0)
    p.add_argument("--emit-summary", action="store_true", help="write the exact summary instead of sampling")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("summarize", help="trace -> workload summary")
    p.add_argument("--trace", required=True)
    p.add_argument("--hours", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("baseline", help="score heuristic vs optimizer under fixed capacities")
    p.add_argument("--two-pages", action="store_true", help="use the built-in two-page counterexample")
    p.add_argument("--catalog")
    p.add_argument("--summary")
    p.add_argument("--disk", help="permanent-store stash id")
    p.add_argument("--capacity", action="append", help="STASH=BYTES, repeat per stash")
    p.add_argument("--quantum", type=float, default=0.01, help="price grid of the exact oracle, dollars")
    p.add_argument("--out")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("validate", help="check input files")
    p.add_argument("--catalog")
    p.add_argument("--trace")
    p.add_argument("--summary")
    p.add_argument("--experiment", action="append")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except InputError as exc:
        parser.print_usage(sys.stderr)
        print(f"stashopt {args.command}: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, TraceFormatError, ValueError, KeyError, OSError) as exc:
        print(f"stashopt {args.command}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"stashopt {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
