"""Small worked instances with known answers, shared by tests, scripts and the CLI."""
from __future__ import annotations

import math

import numpy as np

from .model import (
    EMPTY,
    BaselineMode,
    CostModelConfig,
    ItemTable,
    PlacementOption,
    StashSpec,
)

PAGE = 4096

# --------------------------------------------------------------------------
# three-key greedy walk-through (Flash $1, DRAM $4 per item)

GREEDY_OPTIONS = [EMPTY, PlacementOption.of("Flash"), PlacementOption.of("DRAM"), PlacementOption.of("Flash", "DRAM")]
GREEDY_UNIT_PRICE = {"Flash": 1.0, "DRAM": 4.0}

# benefit per option, NaN where the option is not drawn for that key;
# values follow from the segment slopes times the segment prices
GREEDY_BENEFITS = {
    "k1": [0.0, 5.0, 5.6, math.nan],
    "k2": [0.0, 4.0, 5.2, 5.3],
    "k3": [0.0, 3.0, math.nan, 5.0],
}

# (slope, key, from, to, price) in upgrade order
GREEDY_EXPECTED_UPGRADES = [
    (5.0, "k1", "-", "Flash", 1.0),
    (4.0, "k2", "-", "Flash", 1.0),
    (3.0, "k3", "-", "Flash", 1.0),
    (0.5, "k3", "Flash", "DRAM+Flash", 4.0),
    (0.4, "k2", "Flash", "DRAM", 3.0),
    (0.2, "k1", "Flash", "DRAM", 3.0),
    (0.1, "k2", "DRAM", "DRAM+Flash", 1.0),
]


def greedy_example():
    """(item_ids, options, prices, benefits) for the three-key walk-through."""
    ids = np.array(list(GREEDY_BENEFITS), dtype=object)
    unit = np.array([sum(GREEDY_UNIT_PRICE[s] for s in P) for P in GREEDY_OPTIONS])
    prices = np.tile(unit, (len(ids), 1))
    benefits = np.array([GREEDY_BENEFITS[k] for k in ids])
    prices[np.isnan(benefits)] = np.nan
    return ids, list(GREEDY_OPTIONS), prices, benefits


# --------------------------------------------------------------------------
# score-heuristic counterexample: two 4 KiB pages, one slot on PCM and one on Flash

PAGES_RAW_FREQ = {"1": (2.4, 2.0), "2": (3.3, 1.0)}
PAGES_NORMALIZER = 1.0 / sum(r + w for r, w in PAGES_RAW_FREQ.values())


def _page_device(sid: str, read_us: float, write_us: float, price_per_page: float) -> StashSpec:
    # whole-page latencies, no separate transfer term
    return StashSpec(
        id=sid,
        name=sid,
        read_latency=read_us * 1000.0,
        write_latency=write_us * 1000.0,
        read_bandwidth=math.inf,
        write_bandwidth=math.inf,
        price_per_byte=price_per_page / PAGE,
        mtbf_or_mttf=1.0,
        mttr=0.0,
    )


def page_devices() -> dict[str, StashSpec]:
    return {
        "PCM": _page_device("PCM", 6.7, 128.3, 2.0),
        "Flash": _page_device("Flash", 108.0, 37.1, 1.0),
        "Disk": _page_device("Disk", 5000.0, 5000.0, 0.0),
    }


def page_items() -> ItemTable:
    ids = list(PAGES_RAW_FREQ)
    n = PAGES_NORMALIZER
    return ItemTable(
        ids=np.array(ids, dtype=object),
        size=[PAGE] * len(ids),
        comp=[0.0] * len(ids),
        read_freq=[PAGES_RAW_FREQ[i][0] * n for i in ids],
        write_freq=[PAGES_RAW_FREQ[i][1] * n for i in ids],
    )


def page_config() -> CostModelConfig:
    return CostModelConfig(baseline_mode=BaselineMode.HOST_SIDE, count_failures=False, permanent_store="Disk")


PAGES_CAPACITY = {"PCM": PAGE, "Flash": PAGE}
# budget equivalent of one page on each device
PAGES_BUDGET = 3.0
