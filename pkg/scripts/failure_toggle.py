"""Host-side cache with NVM1 and NVM2: where do pages go with and without failure costs?

NVM1 is faster but fails twice as often. Prints, per budget, how many pages
each option receives in both settings.

    python scripts/failure_toggle.py --pages 2000 --requests-per-hour 1000
"""
import argparse

import numpy as np

from stashopt.harness import ExperimentSpec, run_sweep
from stashopt.model import BaselineMode, CostModelConfig, device_catalog
from stashopt.solver import PolicySet
from stashopt.traces import synth_workload


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pages", type=int, default=2000)
    ap.add_argument("--requests-per-hour", type=float, default=1000.0)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--points", type=int, default=8)
    args = ap.parse_args()

    work = synth_workload(
        args.pages, 0.99, (99, 1), seed=args.seed, total_requests=int(args.requests_per_hour),
        duration_hours=1.0, size_distribution="fixed:4096", comp_distribution="fixed:0",
    )
    cat = device_catalog()
    runs = {}
    for counted in (False, True):
        cfg = CostModelConfig(baseline_mode=BaselineMode.HOST_SIDE, permanent_store="Disk", count_failures=counted)
        runs[counted] = ExperimentSpec(work, cat, PolicySet("tiering", ("NVM1", "NVM2")), cfg, [0.0])
    top = max(run_sweep(s).saturation_budget for s in runs.values())
    grid = tuple(np.linspace(0.0, 1.2 * top, args.points))
    print("budget_dollars,failures,uncached,NVM1,NVM2,avg_service_ns")
    for counted, spec in runs.items():
        spec.budgets = grid
        _, sols = run_sweep(spec, keep_solutions=True)
        for sol in sols:
            c = sol.option_counts()
            print(f"{sol.budget!r},{'on' if counted else 'off'},{c['-']},{c['NVM1']},{c['NVM2']},{sol.expected_service_time!r}")


if __name__ == "__main__":
    main()
