"""Score heuristic vs optimizer on the two-page PCM/Flash counterexample."""
from stashopt.baseline import expected_io_time, heuristic_place
from stashopt.fixtures import (
    PAGES_BUDGET,
    PAGES_CAPACITY,
    PAGES_NORMALIZER,
    page_config,
    page_devices,
    page_items,
)
from stashopt.solver import PolicySet, Problem, enumerate_options, solve_exact


def main():
    dev, items = page_devices(), page_items()
    heur = heuristic_place(list(items), PAGES_CAPACITY, [dev["PCM"], dev["Flash"]], dev["Disk"])
    problem = Problem(items, enumerate_options(PolicySet("tiering", ("PCM", "Flash"))), dev, [], page_config())
    best = solve_exact(problem, PAGES_BUDGET, price_quantum=1.0)
    opt = {k: next(iter(P)) for k, P in best.assignment.items()}
    unit = PAGES_NORMALIZER * 1000  # results in multiples of N microseconds
    for name, a in (("heuristic", heur), ("optimizer", opt)):
        t = expected_io_time(a, list(items), dev)
        print(f"{name:9s} {a}  {t:.2f} ns = {t / unit:.2f} N us")


if __name__ == "__main__":
    main()
