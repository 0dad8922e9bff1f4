"""Tiering vs optional vs forced replication on a synthetic Zipf KVS workload.

    python scripts/policy_comparison.py --items 100000 --stashes NVM2,DRAM --points 20 > policies.csv
"""
import argparse
import sys

import numpy as np

from stashopt.harness import ExperimentSpec, compare_policies, emit, run_sweep
from stashopt.model import CostModelConfig, device_catalog
from stashopt.solver import PolicySet
from stashopt.traces import synth_workload

KINDS = ("tiering", "optional_replication", "forced_replication")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--items", type=int, default=100_000)
    ap.add_argument("--zipf", type=float, default=0.99)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--stashes", default="NVM2,DRAM", help="first id is the forced-replication mirror")
    ap.add_argument("--points", type=int, default=20)
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    args = ap.parse_args()

    work = synth_workload(args.items, args.zipf, (99, 1), seed=args.seed, total_requests=11 * args.items)
    cat = device_catalog()
    stashes = tuple(s.strip() for s in args.stashes.split(","))
    specs = [ExperimentSpec(work, cat, PolicySet(k, stashes), CostModelConfig(), [0.0], k) for k in KINDS]
    top = max(run_sweep(s).saturation_budget for s in specs)
    grid = np.linspace(0.0, 1.1 * top, args.points).tolist()
    for s in specs:
        s.budgets = tuple(grid)
    emit(compare_policies(specs), args.format, sys.stdout)


if __name__ == "__main__":
    main()
