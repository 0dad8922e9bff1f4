"""Time the greedy on a large synthetic KVS workload (5-stash tiering, 6 options per item).

Prints one JSON line with item count, option count, timings and peak RSS.

    python scripts/scale_benchmark.py --items 10000000
"""
import argparse
import json
import resource
import time

import numpy as np

from stashopt.model import ItemTable, device_catalog
from stashopt.solver import GreedyPlan, PolicySet, Problem, enumerate_options
from stashopt.traces import failure_rates, zipf_weights


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--items", type=int, default=10_000_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--budget-fraction", type=float, default=0.3)
    args = ap.parse_args()

    t0 = time.perf_counter()
    rng = np.random.default_rng(args.seed)
    n = args.items
    p = zipf_weights(n, 0.99)
    items = ItemTable(
        ids=np.arange(n, dtype=np.int64),
        size=np.maximum(1.0, np.rint(4096 * np.exp(rng.standard_normal(n)))),
        comp=1e6 * np.exp(rng.standard_normal(n)),
        read_freq=p * 0.99,
        write_freq=p * 0.01,
        validate=False,
    )
    del p
    catalog = device_catalog()
    options = enumerate_options(PolicySet("tiering", ("Disk", "Flash", "NVM2", "NVM1", "DRAM")))
    failures = failure_rates(catalog, requests_per_hour=1.65e6)
    problem = Problem(items, options, catalog, failures)
    t1 = time.perf_counter()
    lists = problem.viable_lists()
    t2 = time.perf_counter()
    plan = GreedyPlan(lists)
    t3 = time.perf_counter()
    budget = args.budget_fraction * plan.saturation_budget
    res = plan.run(budget)
    t4 = time.perf_counter()
    print(
        json.dumps(
            {
                "items": n,
                "options": len(options),
                "viable_entries": int(len(lists.option)),
                "setup_s": t1 - t0,
                "viable_lists_s": t2 - t1,
                "sort_s": t3 - t2,
                "greedy_run_s": t4 - t3,
                "greedy_total_s": t4 - t1,
                "budget": budget,
                "spent": res.money_spent,
                "upgrades": res.upgrades,
                "peak_rss_bytes": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024,
            }
        )
    )


if __name__ == "__main__":
    main()
