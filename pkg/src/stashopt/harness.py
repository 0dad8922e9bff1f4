"""Budget sweeps and policy comparisons, emitted as CSV or JSON."""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence, TextIO

import numpy as np

from .model import CostModelConfig, StashSpec
from .solver import GreedyPlan, PolicySet, Problem, Solution, enumerate_options
from .traces import WorkloadSummary, failure_rates

BASE_COLUMNS = ["budget_dollars", "avg_service_ns", "spent_dollars", "frac_bound_ns"]


@dataclass
class ExperimentSpec:
    workload: WorkloadSummary
    catalog: Mapping[str, StashSpec]
    policy: PolicySet
    cfg: CostModelConfig = field(default_factory=CostModelConfig)
    budgets: Sequence[float] = (0.0,)
    label: str = "experiment"

    def __post_init__(self):
        self.budgets = tuple(float(b) for b in self.budgets)
        if not self.budgets:
            raise ValueError("budgets must be non-empty")
        if any(b < 0 for b in self.budgets):
            raise ValueError("budgets must be >= 0")
        if any(b2 <= b1 for b1, b2 in zip(self.budgets, self.budgets[1:])):
            raise ValueError("budgets must be strictly increasing")

    def problem(self) -> Problem:
        options = enumerate_options(self.policy)
        in_scope = {s for P in options for s in P}
        failures = failure_rates([self.catalog[s] for s in sorted(in_scope)], self.workload.requests_per_hour)
        return Problem(self.workload.items, options, self.catalog, failures, self.cfg)


def budget_grid(lo: float, hi: float, step: float) -> list[float]:
    if not step > 0 or hi < lo:
        raise ValueError("need step > 0 and hi >= lo")
    n = int(np.floor((hi - lo) / step + 1e-9))
    return [lo + i * step for i in range(n + 1)]


@dataclass
class SweepRow:
    budget: float
    avg_service_ns: float
    spent_dollars: float
    frac_bound_ns: float
    stash_bytes: dict
    uncached_bytes: float
    total_benefit: float = 0.0


@dataclass
class SweepResult:
    label: str
    stash_ids: list
    rows: list = field(default_factory=list)
    saturation_budget: float = 0.0

    def columns(self) -> list:
        return BASE_COLUMNS + [f"{s}_bytes" for s in self.stash_ids] + ["uncached_bytes"]

    def records(self) -> list:
        out = []
        for r in self.rows:
            rec = {
                "budget_dollars": r.budget,
                "avg_service_ns": r.avg_service_ns,
                "spent_dollars": r.spent_dollars,
                "frac_bound_ns": r.frac_bound_ns,
            }
            for s in self.stash_ids:
                rec[f"{s}_bytes"] = r.stash_bytes.get(s, 0.0)
            rec["uncached_bytes"] = r.uncached_bytes
            out.append(rec)
        return out


def _row(sol: Solution, stash_ids) -> SweepRow:
    return SweepRow(
        budget=sol.budget,
        avg_service_ns=sol.expected_service_time,
        spent_dollars=sol.money_spent,
        frac_bound_ns=sol.fractional_bound,
        stash_bytes={s: sol.stash_bytes.get(s, 0.0) for s in stash_ids},
        uncached_bytes=sol.uncached_bytes,
        total_benefit=sol.total_benefit,
    )


def run_sweep(spec: ExperimentSpec, threads: int = 1, keep_solutions: bool = False):
    """Greedy solution at each budget; viable lists are built once per sweep.

    With ``keep_solutions`` the per-budget :class:`Solution` objects are
    returned alongside the result.
    """
    problem = spec.problem()
    plan = GreedyPlan(problem.viable_lists())
    stash_ids = problem.stash_order()

    def one(budget):
        return problem.from_greedy(plan.run(budget))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            solutions = list(pool.map(one, spec.budgets))
    else:
        solutions = [one(b) for b in spec.budgets]
    result = SweepResult(spec.label, stash_ids, [_row(s, stash_ids) for s in solutions], plan.saturation_budget)
    return (result, solutions) if keep_solutions else result


@dataclass
class ComparisonTable:
    budgets: list
    labels: list
    service: dict  # label -> list of avg service times

    def columns(self) -> list:
        cols = ["budget_dollars"] + [f"{l}_avg_service_ns" for l in self.labels]
        cols += [f"{l}_over_{self.labels[0]}" for l in self.labels[1:]]
        return cols

    def records(self) -> list:
        out = []
        ref = self.labels[0]
        for i, b in enumerate(self.budgets):
            rec = {"budget_dollars": b}
            for l in self.labels:
                rec[f"{l}_avg_service_ns"] = self.service[l][i]
            for l in self.labels[1:]:
                den = self.service[ref][i]
                rec[f"{l}_over_{ref}"] = self.service[l][i] / den if den else float("nan")
            out.append(rec)
        return out


def compare_policies(specs: Sequence[ExperimentSpec], threads: int = 1) -> ComparisonTable:
    if not specs:
        raise ValueError("need at least one experiment")
    budgets = specs[0].budgets
    for s in specs[1:]:
        if s.budgets != budgets:
            raise ValueError(f"budget grid of {s.label!r} differs from {specs[0].label!r}")
    labels = [s.label for s in specs]
    if len(set(labels)) != len(labels):
        raise ValueError("experiment labels must be unique")
    service = {}
    for s in specs:
        res = run_sweep(s, threads=threads)
        service[s.label] = [r.avg_service_ns for r in res.rows]
    return ComparisonTable(list(budgets), labels, service)


def emit(result, fmt: str, sink: TextIO) -> None:
    """Write a SweepResult or ComparisonTable as ``csv`` or ``json``."""
    columns, records = result.columns(), result.records()
    if fmt == "csv":
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(columns)
        for rec in records:
            writer.writerow([_fmt(rec[c]) for c in columns])
    elif fmt == "json":
        doc = {"label": getattr(result, "label", None), "columns": columns, "rows": records}
        json.dump(doc, sink, indent=1)
        sink.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _fmt(x) -> str:
    return repr(float(x))


def json_to_csv(source: TextIO, sink: TextIO) -> None:
    doc = json.load(source)
    columns = doc["columns"]
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(columns)
    for rec in doc["rows"]:
        writer.writerow([_fmt(rec[c]) for c in columns])


def read_csv(source: TextIO) -> tuple[list, list]:
    reader = csv.reader(source)
    columns = next(reader)
    return columns, [dict(zip(columns, map(float, row))) for row in reader]
