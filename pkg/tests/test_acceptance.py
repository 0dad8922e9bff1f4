"""End-to-end acceptance criteria; a per-criterion PASS/FAIL summary is printed at the end of the run."""
import json
import math
import resource
import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from oracles import upper_hull_positive
from stashopt.baseline import expected_io_time, heuristic_place, score
from stashopt.fixtures import (
    PAGES_BUDGET,
    PAGES_CAPACITY,
    GREEDY_EXPECTED_UPGRADES,
    GREEDY_OPTIONS,
    PAGE,
    page_config,
    page_devices,
    page_items,
    greedy_example,
)
from stashopt.harness import ExperimentSpec, run_sweep
from stashopt.model import (
    BaselineMode,
    CostModelConfig,
    ItemStats,
    PlacementOption,
    StashSpec,
    WriteMode,
    benefit,
    price,
    device_catalog,
)
from stashopt.solver import (
    GreedyPlan,
    PolicySet,
    Problem,
    build_viable_lists,
    enumerate_options,
    exact_mckp,
    greedy_upgrades,
    set_viable_options,
    solve,
    solve_exact,
)
from stashopt.traces import failure_rates, synth_workload

ROOT = Path(__file__).resolve().parents[1]
N = Fraction(10, 87)  # 1 / (2.4 + 2 + 3.3 + 1)

# per-page microseconds (read, write) and raw frequencies (read, write)
US = {"PCM": (Fraction(67, 10), Fraction(1283, 10)), "Flash": (Fraction(108), Fraction(371, 10)), "Disk": (5000, 5000)}
RAW = {"1": (Fraction(24, 10), 2), "2": (Fraction(33, 10), 1)}


def hand_io_us(assignment):
    """Expected I/O time in units of N microseconds."""
    return sum(RAW[i][0] * US[s][0] + RAW[i][1] * US[s][1] for i, s in assignment.items())


def hand_score(item, sid):
    r, w = RAW[item]
    return r * (US["Disk"][0] - US[sid][0]) + w * (US["Disk"][1] - US[sid][1])


def in_n_us(ns):
    return ns / (float(N) * 1000)


# --------------------------------------------------------------------------- 1


@pytest.mark.criterion(1, "two-page counterexample: heuristic 666.18 vs optimizer, runtime < 1 s")
def test_two_page_counterexample():
    t0 = time.perf_counter()
    dev, items = page_devices(), list(page_items())
    heur = heuristic_place(items, PAGES_CAPACITY, [dev["PCM"], dev["Flash"]], dev["Disk"])
    heur_ns = expected_io_time(heur, items, dev)

    problem = Problem(
        page_items(), enumerate_options(PolicySet("tiering", ("PCM", "Flash"))), dev, [], page_config()
    )
    greedy = solve(problem, PAGES_BUDGET)
    exact = solve_exact(problem, PAGES_BUDGET, price_quantum=1.0)
    elapsed = time.perf_counter() - t0

    opt = {k: next(iter(P)) for k, P in exact.assignment.items()}
    opt_ns = expected_io_time(opt, items, dev)
    # the budget admits one page per device, same as the capacities
    assert sorted(opt.values()) == ["Flash", "PCM"]
    assert greedy.assignment == exact.assignment

    hand_heur, hand_opt = hand_io_us(heur), hand_io_us(opt)
    print(f"\nheuristic {in_n_us(heur_ns):.6f} N us (hand {float(hand_heur):.6f}, reference 666.18)")
    print(f"optimizer {in_n_us(opt_ns):.6f} N us (hand {float(hand_opt):.6f}, reference 484.81)")
    assert hand_heur == Fraction(66618, 100)
    assert math.isclose(in_n_us(heur_ns), float(hand_heur), rel_tol=1e-6)
    assert math.isclose(in_n_us(opt_ns), float(hand_opt), rel_tol=1e-6)
    assert math.isclose(in_n_us(greedy.expected_service_time), float(hand_opt), rel_tol=1e-6)
    assert opt_ns < heur_ns
    assert elapsed < 1.0


# --------------------------------------------------------------------------- 2

REFERENCE_SCORES = {("1", "PCM"): 21721, ("1", "Flash"): 21667, ("2", "PCM"): 21350, ("2", "Flash"): 21107}


@pytest.mark.criterion(2, "two-page score table {21721, 21667, 21350, 21107} within 1e-9 relative")
def test_two_page_scores():
    dev, items = page_devices(), list(page_items())
    misses = []
    for (item, sid), want in sorted(REFERENCE_SCORES.items()):
        got = in_n_us(score(items[int(item) - 1], dev[sid], dev["Disk"]))
        # the implementation agrees with exact arithmetic on the stated inputs
        assert math.isclose(got, float(hand_score(item, sid)), rel_tol=1e-12)
        if not math.isclose(got, want, rel_tol=1e-9):
            misses.append(f"{sid}({item})={got:.2f} vs {want}")
    assert not misses, "; ".join(misses)


# --------------------------------------------------------------------------- 3


@pytest.mark.criterion(3, "greedy walk-through: 7 upgrade rows; $11 -> rows 1-5 spend 10; $13 -> rows 1-6 spend 13")
def test_walkthrough_trace():
    ids, options, prices, benefits = greedy_example()
    lists = build_viable_lists(prices, benefits, ids)
    plan = GreedyPlan(lists)
    rows = [
        (u.item_id, options[u.from_option].label(), options[u.to_option].label(), u.delta_price, u.gradient)
        for u in plan.upgrade_sequence()
    ]
    assert len(rows) == 7
    for got, (slope, key, a, b, dp) in zip(rows, GREEDY_EXPECTED_UPGRADES):
        assert got[:4] == (key, a, b, dp)
        assert math.isclose(got[4], slope, rel_tol=1e-12)

    for budget, steps, spend in ((11, 5, 10.0), (13, 6, 13.0)):
        res = plan.run(budget)
        assert (res.upgrades, res.money_spent) == (steps, spend)
        accepted, _ = greedy_upgrades(lists.to_lists(), budget)
        assert [(u.item_id, u.to_option) for u in accepted] == [
            (r[0], GREEDY_OPTIONS.index(PlacementOption.parse(r[2]))) for r in rows[:steps]
        ]


# --------------------------------------------------------------------------- 4


def _random_mckp(rng):
    n = int(rng.integers(1, 21))
    p = int(rng.integers(2, 9))
    prices = rng.integers(1, 51, (n, p)).astype(float)
    bens = np.round(rng.uniform(-10, 100, (n, p)), 3)
    prices[rng.random((n, p)) < 0.2] = np.nan
    prices[:, 0] = bens[:, 0] = 0.0
    bens[np.isnan(prices)] = np.nan
    return prices, bens, float(rng.integers(0, 201))


@pytest.mark.criterion(4, "oracle sandwich GR_int <= exact <= GR_frac on 1000 random instances, < 60 s")
def test_oracle_sandwich():
    t0 = time.perf_counter()
    violations = []
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        prices, bens, budget = _random_mckp(rng)
        res = GreedyPlan(build_viable_lists(prices, bens)).run(budget)
        opt = exact_mckp(prices, bens, budget).benefit
        # slack covers float summation order only
        tol = 1e-9 * max(1.0, abs(opt))
        ok = (
            res.money_spent <= budget
            and res.benefit <= opt + tol
            and opt <= res.fractional_bound + tol
            and res.fractional_bound - res.benefit <= res.rejected_benefit + tol
        )
        if not ok:
            violations.append((seed, res.benefit, opt, res.fractional_bound))
    elapsed = time.perf_counter() - t0
    assert violations == []
    assert elapsed < 60.0


# --------------------------------------------------------------------------- 5


def _random_catalog(rng):
    out = {}
    for sid in ("A", "B", "C"):
        out[sid] = StashSpec(
            sid,
            sid,
            read_latency=float(rng.uniform(5, 3e5)),
            write_latency=float(rng.uniform(5, 3e5)),
            read_bandwidth=float(rng.uniform(0.01, 20)),
            write_bandwidth=float(rng.uniform(0.01, 20)),
            price_per_byte=float(rng.uniform(1e-11, 1e-8)),
            mtbf_or_mttf=float(rng.uniform(1e3, 1e5)),
            mttr=float(rng.uniform(0, 48)),
        )
    out["Disk"] = StashSpec("Disk", "Disk", 2e6, 2e6, 0.01, 0.01, 1e-10, 87576, 24)
    return out


@pytest.mark.criterion(5, "viable lists equal a brute-force positive-slope upper hull for 10^4 random items")
def test_hull_property():
    options = enumerate_options(PolicySet("optional_replication", ("A", "B", "C")))
    checked, violations = 0, []
    for batch in range(100):
        rng = np.random.default_rng(50_000 + batch)
        cat = _random_catalog(rng)
        cfg = CostModelConfig(
            write_mode=list(WriteMode)[int(rng.integers(2))],
            baseline_mode=BaselineMode.HOST_SIDE if batch % 2 else BaselineMode.KVS,
            count_failures=bool(batch % 3),
            permanent_store="Disk",
        )
        failures = failure_rates([cat[s] for s in "ABC"], float(rng.uniform(1, 1e4)))
        for i in range(100):
            k = ItemStats(
                f"k{i}",
                size=float(rng.integers(1, 1 << 20)),
                comp=float(rng.uniform(0, 1e7)),
                read_freq=float(rng.uniform(0, 1e-2)),
                write_freq=float(rng.uniform(0, 1e-3) * (rng.random() < 0.7)),
            )
            v = set_viable_options(k, options, cat, failures, cfg)
            pts = [(float(price(P, k, cat)), float(benefit(P, k, failures, cat, cfg))) for P in options]
            want = upper_hull_positive(pts)
            got = [(e.price, e.benefit) for e in v.entries]
            checked += 1
            if got != want:
                violations.append((batch, i, got, want))
    assert checked >= 10_000
    assert violations == []


# --------------------------------------------------------------------------- 6


@pytest.mark.criterion(6, "Zipf 10^5 items: forced >= tiering >= optional, monotone in budget, flat past saturation")
def test_policy_ordering():
    work = synth_workload(100_000, 0.99, (99, 1), seed=11, total_requests=1_100_000, duration_hours=2 / 3)
    cat = device_catalog()
    kinds = ("forced_replication", "tiering", "optional_replication")
    specs = {
        k: ExperimentSpec(work, cat, PolicySet(k, ("NVM2", "DRAM")), CostModelConfig(), [0.0], k) for k in kinds
    }
    sat = {k: run_sweep(s).saturation_budget for k, s in specs.items()}
    grid = list(np.linspace(0.0, 1.1 * max(sat.values()), 20))
    svc = {}
    for k, s in specs.items():
        s.budgets = tuple(grid)
        svc[k] = [r.avg_service_ns for r in run_sweep(s).rows]
    for i, b in enumerate(grid):
        f, t, o = (svc[k][i] for k in kinds)
        assert f >= t >= o, f"budget {b}: forced {f}, tiering {t}, optional {o}"
    for k in kinds:
        assert all(b <= a for a, b in zip(svc[k], svc[k][1:])), k
        # flat from the saturation budget on, strictly worse just below it
        spec = specs[k]
        spec.budgets = (0.999 * sat[k], sat[k], 2 * sat[k])
        below, at, above = (r.avg_service_ns for r in run_sweep(spec).rows)
        assert at == above < below
        tail = [v for b, v in zip(grid, svc[k]) if b >= sat[k]]
        assert tail and all(v == at for v in tail)


# --------------------------------------------------------------------------- 7


@pytest.mark.criterion(7, "counting failures moves low-frequency items to the more reliable stash")
def test_failure_toggle():
    cat = device_catalog()
    assert cat["NVM2"].cycle_hours == pytest.approx(2 * cat["NVM1"].cycle_hours, rel=1e-3)
    work = synth_workload(
        2000, 0.99, (99, 1), seed=3, total_requests=1000, duration_hours=1.0,
        size_distribution="fixed:4096", comp_distribution="fixed:0",
    )
    sols = {}
    for counted in (True, False):
        cfg = CostModelConfig(baseline_mode=BaselineMode.HOST_SIDE, permanent_store="Disk", count_failures=counted)
        spec = ExperimentSpec(work, cat, PolicySet("tiering", ("NVM1", "NVM2")), cfg, [0.0])
        sols[counted] = solve(spec.problem(), 1.0)
    on, off = sols[True].assignment, sols[False].assignment
    moved = [k for k in on if on[k] != off[k]]
    assert moved
    nvm1, nvm2 = PlacementOption.of("NVM1"), PlacementOption.of("NVM2")
    assert all(off[k] == nvm1 and on[k] == nvm2 for k in moved)
    freq = dict(zip(work.items.ids, work.items.read_freq + work.items.write_freq))
    stayed = [k for k in on if on[k] == nvm1]
    assert stayed, "fixture should keep the hottest items on the fast stash"
    assert max(freq[k] for k in moved) <= min(freq[k] for k in stayed)


# --------------------------------------------------------------------------- 8


@pytest.mark.criterion(8, "greedy over 10^7 items x 6 options: < 5 min and < 8 GB")
def test_scale():
    t0 = time.perf_counter()
    r = subprocess.run(
        [sys.executable, str(ROOT / "scripts" / "scale_benchmark.py"), "--items", "10000000"],
        capture_output=True,
        text=True,
        timeout=900,
    )
    wall = time.perf_counter() - t0
    assert r.returncode == 0, r.stderr
    stats = json.loads(r.stdout.strip().splitlines()[-1])
    child_rss = resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss * 1024
    print(f"\nscale: {stats} wall {wall:.1f} s")
    assert stats["items"] == 10_000_000 and stats["options"] == 6
    assert stats["greedy_total_s"] < 300 and wall < 300
    assert max(stats["peak_rss_bytes"], child_rss) < 8 * 2**30


# --------------------------------------------------------------------------- 9


@pytest.mark.criterion(9, "every CLI subcommand is bit-identical across two runs")
def test_cli_determinism(tmp_path):
    from stashopt.config import format_catalog

    def run(*args):
        return subprocess.run(
            [sys.executable, "-m", "stashopt.cli", *map(str, args)], capture_output=True, cwd=tmp_path
        )

    (tmp_path / "cat.ini").write_text(format_catalog(device_catalog()))
    assert run("gen-trace", "--items", 500, "--seed", 1, "--emit-summary", "--out", "w.txt").returncode == 0
    assert run("gen-trace", "--items", 500, "--seed", 1, "--requests", 4000, "--out", "t.trace").returncode == 0
    (tmp_path / "exp.ini").write_text(
        "[experiment]\ncatalog = cat.ini\nsummary = w.txt\npolicy = optional_replication\n"
        "stashes = NVM2, DRAM\nbudgets = 0:0.004:0.001\n"
    )
    common = ["--summary", "w.txt", "--catalog", "cat.ini", "--stashes", "NVM2,DRAM"]
    commands = [
        ["gen-trace", "--items", 500, "--seed", 1, "--requests", 4000],
        ["gen-trace", "--items", 500, "--seed", 1, "--emit-summary"],
        ["summarize", "--trace", "t.trace", "--hours", 1],
        ["optimize", *common, "--budget", 0.002, "--assignments", "/dev/stdout"],
        ["sweep", "--experiment", "exp.ini", "--threads", 4],
        ["compare", *common, "--budgets", "0:0.004:0.001", "--policies", "tiering,optional_replication"],
        ["baseline", "--two-pages"],
        ["validate", "--catalog", "cat.ini", "--summary", "w.txt", "--experiment", "exp.ini"],
    ]
    for cmd in commands:
        a, b = run(*cmd), run(*cmd)
        assert a.returncode == 0, (cmd, a.stderr)
        assert (a.stdout, a.stderr) == (b.stdout, b.stderr), cmd
