"""One stash at a time: average service time against budget for each catalog device.

    python scripts/single_stash_sweep.py --items 50000 --points 15 > single.csv
"""
import argparse
import sys

import numpy as np

from stashopt.harness import ExperimentSpec, compare_policies, emit, run_sweep
from stashopt.model import CostModelConfig, device_catalog
from stashopt.solver import PolicySet
from stashopt.traces import synth_workload


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--items", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--stashes", default="DRAM,NVM1,NVM2,Flash,Disk")
    ap.add_argument("--points", type=int, default=15)
    ap.add_argument("--no-failures", action="store_true")
    args = ap.parse_args()

    work = synth_workload(args.items, 0.99, (99, 1), seed=args.seed, total_requests=10 * args.items)
    cat = device_catalog()
    cfg = CostModelConfig(count_failures=not args.no_failures)
    specs = [
        ExperimentSpec(work, cat, PolicySet("tiering", (s.strip(),)), cfg, [0.0], s.strip())
        for s in args.stashes.split(",")
    ]
    top = max(run_sweep(s).saturation_budget for s in specs)
    grid = tuple(np.linspace(0.0, 1.1 * top, args.points))
    for s in specs:
        s.budgets = grid
    emit(compare_policies(specs), "csv", sys.stdout)


if __name__ == "__main__":
    main()
