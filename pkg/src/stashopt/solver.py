"""Multiple-choice knapsack solver for stash configuration.

Per item, the placement options are reduced to a *viable list*: the
vertices of the upper convex hull of its (price, benefit) points, starting
at the empty placement and stopping before the first non-positive slope.
The greedy then repeatedly applies the steepest remaining upgrade across
all items until the next one no longer fits in the budget. That greedy is
optimal for the LP relaxation; dropping the one fractional upgrade gives
the integral placement reported here.

Two equivalent greedy paths exist: :func:`greedy_upgrades` is the literal
priority-queue loop (and records every step), :class:`GreedyPlan` sorts all
hull segments once and answers any budget with a binary search. Because the
gradients along one viable list strictly decrease, the global sorted order
is exactly the order the priority queue pops them in.
"""
from __future__ import annotations

import enum
import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import (
    EMPTY,
    CostModelConfig,
    FailureEvent,
    ItemStats,
    ItemTable,
    PlacementOption,
    StashSpec,
    baseline_service_time,
    benefit as item_benefit,
    check_catalog_covers,
    price as item_price,
    service_time,
)

# Relative guard for the "gradient <= 0" termination test.
GRADIENT_REL_EPS = 1e-12


class PolicyKind(str, enum.Enum):
    TIERING = "tiering"
    OPTIONAL_REPLICATION = "optional_replication"
    FORCED_REPLICATION = "forced_replication"
    CUSTOM = "custom"


@dataclass(frozen=True)
class PolicySet:
    """Which placement options an experiment allows.

    For forced replication the *first* stash in ``stash_ids`` is the mirror:
    every copy on any other stash must also have a copy there.
    """

    kind: PolicyKind
    stash_ids: tuple = ()
    custom_options: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        object.__setattr__(self, "stash_ids", tuple(self.stash_ids))
        object.__setattr__(self, "custom_options", tuple(self.custom_options))


def _canonical_key(P: PlacementOption, position: Mapping[str, int]):
    return (len(P), sorted(position.get(s, len(position)) for s in P.stashes), P.label())


def enumerate_options(policy: PolicySet) -> list[PlacementOption]:
    """All placement options a policy allows, empty placement first."""
    ids = policy.stash_ids
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate stash ids in policy: {ids!r}")
    kind = policy.kind
    if kind is PolicyKind.TIERING:
        options = [EMPTY] + [PlacementOption.of(s) for s in ids]
    elif kind is PolicyKind.OPTIONAL_REPLICATION:
        options = [
            PlacementOption.of(*combo) for r in range(len(ids) + 1) for combo in itertools.combinations(ids, r)
        ]
    elif kind is PolicyKind.FORCED_REPLICATION:
        options = [EMPTY]
        if ids:
            mirror, rest = ids[0], ids[1:]
            options.append(PlacementOption.of(mirror))
            options.extend(PlacementOption.of(mirror, s) for s in rest)
    else:
        options = list(policy.custom_options)
        if EMPTY not in options:
            raise ValueError("custom option list must include the empty placement")
        if len(set(options)) != len(options):
            raise ValueError("custom option list has duplicates")
    position = {s: i for i, s in enumerate(ids)}
    return sorted(options, key=lambda P: _canonical_key(P, position))


# --------------------------------------------------------------------------
# viable lists


@dataclass(frozen=True)
class ViableEntry:
    option_index: int
    price: float
    benefit: float


@dataclass
class ViableList:
    item_id: object
    entries: tuple
    cursor: int = 0

    def reset(self) -> None:
        self.cursor = 0

    def is_at_end(self) -> bool:
        return self.cursor >= len(self.entries) - 1

    def current(self) -> ViableEntry:
        return self.entries[self.cursor]

    def next(self) -> ViableEntry:
        return self.entries[self.cursor + 1]

    def advance(self) -> None:
        if self.is_at_end():
            raise IndexError(f"viable list of {self.item_id!r} is already at its end")
        self.cursor += 1

    @property
    def option_indices(self) -> list[int]:
        return [e.option_index for e in self.entries]


def upgrade_gradient(v: ViableList) -> float:
    """Slope from the current entry to the next one; ``-inf`` at the end."""
    if v.is_at_end():
        return -math.inf
    nxt, cur = v.next(), v.current()
    return (nxt.benefit - cur.benefit) / (nxt.price - cur.price)


def _is_positive_step(b_next: float, b_curr: float) -> bool:
    return b_next - b_curr > GRADIENT_REL_EPS * max(abs(b_next), abs(b_curr))


def viable_from_points(item_id, prices: Sequence[float], benefits: Sequence[float]) -> ViableList:
    """Build a viable list from raw (price, benefit) points.

    Index 0 must be the empty placement at (0, 0). NaN marks an absent
    option. Non-empty options priced at zero or less are ignored; among
    options of equal price only the best-benefit one is kept. When several
    candidates tie for the steepest slope the farthest one is taken, so
    collinear points never appear as separate entries.
    """
    if prices[0] != 0 or benefits[0] != 0:
        raise ValueError("option 0 must be the empty placement with price 0 and benefit 0")
    cand = [
        j
        for j in range(1, len(prices))
        if math.isfinite(prices[j]) and math.isfinite(benefits[j]) and prices[j] > 0
    ]
    cand.sort(key=lambda j: (prices[j], -benefits[j]))
    points = [0]
    for j in cand:
        if prices[j] != prices[points[-1]]:
            points.append(j)

    entries = [ViableEntry(0, 0.0, 0.0)]
    curr = 0
    while True:
        best, nxt = -math.inf, None
        pc, bc = prices[points[curr]], benefits[points[curr]]
        for pos in range(curr + 1, len(points)):
            j = points[pos]
            g = (benefits[j] - bc) / (prices[j] - pc)
            if g >= best:
                best, nxt = g, pos
        if nxt is None or not best > 0 or not _is_positive_step(benefits[points[nxt]], bc):
            break
        curr = nxt
        j = points[curr]
        entries.append(ViableEntry(j, float(prices[j]), float(benefits[j])))
    return ViableList(item_id, tuple(entries))


def set_viable_options(
    k: ItemStats,
    options: Sequence[PlacementOption],
    stashes: Mapping[str, StashSpec],
    failures: Sequence[FailureEvent],
    cfg: CostModelConfig,
) -> ViableList:
    """Viable list for one item under the cost model."""
    if not options or options[0] != EMPTY:
        raise ValueError("options must start with the empty placement")
    prices = [float(item_price(P, k, stashes)) for P in options]
    benefits = [float(item_benefit(P, k, failures, stashes, cfg)) for P in options]
    return viable_from_points(k.id, prices, benefits)


@dataclass
class ViableLists:
    """Viable lists of many items in compressed-row form.

    Entries of item ``i`` live at ``offsets[i]:offsets[i+1]``; the first is
    always the empty placement.
    """

    item_ids: np.ndarray
    offsets: np.ndarray
    option: np.ndarray
    price: np.ndarray
    benefit: np.ndarray
    service: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.offsets) - 1

    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def __getitem__(self, i: int) -> ViableList:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        entries = tuple(
            ViableEntry(int(o), float(p), float(b))
            for o, p, b in zip(self.option[lo:hi], self.price[lo:hi], self.benefit[lo:hi])
        )
        return ViableList(self.item_ids[i], entries)

    def to_lists(self) -> list[ViableList]:
        return [self[i] for i in range(len(self))]

    @classmethod
    def concat(cls, parts: Sequence["ViableLists"]) -> "ViableLists":
        if len(parts) == 1:
            return parts[0]
        offsets = [np.zeros(1, dtype=np.int64)]
        base = 0
        for part in parts:
            offsets.append(part.offsets[1:] + base)
            base += part.offsets[-1]
        has_service = all(p.service is not None for p in parts)
        return cls(
            item_ids=np.concatenate([p.item_ids for p in parts]),
            offsets=np.concatenate(offsets),
            option=np.concatenate([p.option for p in parts]),
            price=np.concatenate([p.price for p in parts]),
            benefit=np.concatenate([p.benefit for p in parts]),
            service=np.concatenate([p.service for p in parts]) if has_service else None,
        )


def _hull_rows(prices: np.ndarray, benefits: np.ndarray):
    """Vectorised twin of :func:`viable_from_points` over rows.

    Returns the original option index of each hull vertex (padded with -1)
    and the hull length per row.
    """
    m, p = prices.shape
    if m and (np.any(prices[:, 0] != 0) or np.any(benefits[:, 0] != 0)):
        raise ValueError("column 0 must be the empty placement with price 0 and benefit 0")
    P = np.array(prices, dtype=np.float64)
    B = np.array(benefits, dtype=np.float64)
    invalid = ~(np.isfinite(P) & np.isfinite(B))
    invalid[:, 1:] |= ~(P[:, 1:] > 0)
    invalid[:, 0] = False
    P[invalid] = np.inf
    B[invalid] = -np.inf

    order = np.lexsort((-B, P), axis=1)
    P = np.take_along_axis(P, order, axis=1)
    B = np.take_along_axis(B, order, axis=1)
    dup = np.zeros((m, p), dtype=bool)
    dup[:, 1:] = P[:, 1:] == P[:, :-1]
    B[dup] = -np.inf

    rows = np.arange(m)
    cols = np.arange(p)
    curr = np.zeros(m, dtype=np.int64)
    active = np.ones(m, dtype=bool)
    hull = np.full((m, p), -1, dtype=np.int64)
    hull[:, 0] = 0
    lengths = np.ones(m, dtype=np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(p - 1):
            if not active.any():
                break
            bc = B[rows, curr]
            pc = P[rows, curr]
            g = (B - bc[:, None]) / (P - pc[:, None])
            g[(cols[None, :] <= curr[:, None]) | np.isnan(g)] = -np.inf
            nxt = p - 1 - np.argmax(g[:, ::-1], axis=1)
            gmax = g[rows, nxt]
            bn = B[rows, nxt]
            ok = (
                active
                & (gmax > 0)
                & (bn - bc > GRADIENT_REL_EPS * np.maximum(np.abs(bn), np.abs(bc)))
            )
            hull[rows[ok], lengths[ok]] = nxt[ok]
            lengths += ok
            curr = np.where(ok, nxt, curr)
            active = ok
    hull_orig = np.where(hull >= 0, np.take_along_axis(order, np.maximum(hull, 0), axis=1), -1)
    return hull_orig, lengths


def build_viable_lists(
    prices: np.ndarray,
    benefits: np.ndarray,
    item_ids=None,
    service: np.ndarray | None = None,
) -> ViableLists:
    """Viable lists for every row of a (items x options) price/benefit matrix."""
    prices = np.asarray(prices, dtype=np.float64)
    benefits = np.asarray(benefits, dtype=np.float64)
    if prices.shape != benefits.shape or prices.ndim != 2:
        raise ValueError(f"price/benefit shapes differ: {prices.shape} vs {benefits.shape}")
    m = prices.shape[0]
    if item_ids is None:
        item_ids = np.arange(m)
    hull, lengths = _hull_rows(prices, benefits)
    offsets = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    mask = hull >= 0
    option = hull[mask]
    row = np.repeat(np.arange(m), lengths)
    return ViableLists(
        item_ids=np.asarray(item_ids),
        offsets=offsets,
        option=option.astype(np.int16),
        price=prices[row, option],
        benefit=benefits[row, option],
        service=None if service is None else np.asarray(service)[row, option],
    )


# --------------------------------------------------------------------------
# greedy


@dataclass(frozen=True)
class Upgrade:
    step: int
    gradient: float
    item_id: object
    from_option: int
    to_option: int
    delta_price: float
    delta_benefit: float


def _id_rank(item_ids: np.ndarray) -> np.ndarray:
    order = np.argsort(item_ids, kind="stable")
    rank = np.empty(len(item_ids), dtype=np.int64)
    rank[order] = np.arange(len(item_ids))
    return rank


def greedy_upgrades(lists: Sequence[ViableList], budget: float):
    """Literal priority-queue greedy; returns (accepted upgrades, first rejected upgrade or None).

    Ties on gradient go to the cheaper upgrade, then to the smaller item id.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    for v in lists:
        v.reset()
    rank = _id_rank(np.array([v.item_id for v in lists], dtype=object))
    heap = []
    for i, v in enumerate(lists):
        g = upgrade_gradient(v)
        if g > -math.inf:
            heap.append((-g, v.next().price - v.current().price, rank[i], i))
    heapq.heapify(heap)
    spent = 0.0
    accepted: list[Upgrade] = []
    rejected = None
    while heap:
        neg_g, dprice, _, i = heap[0]
        v = lists[i]
        cur, nxt = v.current(), v.next()
        up = Upgrade(
            len(accepted) + 1, -neg_g, v.item_id, cur.option_index, nxt.option_index, dprice, nxt.benefit - cur.benefit
        )
        if not -neg_g > 0:
            break
        if dprice + spent <= budget:
            spent = spent + dprice
            v.advance()
            accepted.append(up)
            g = upgrade_gradient(v)
            if g > -math.inf:
                heapq.heapreplace(heap, (-g, v.next().price - v.current().price, rank[i], i))
            else:
                heapq.heappop(heap)
        else:
            rejected = up
            break
    return accepted, rejected


@dataclass
class GreedyResult:
    budget: float
    cursor: np.ndarray  # position in each item's viable list
    option: np.ndarray  # chosen option index per item
    money_spent: float
    benefit: float  # integral greedy benefit
    fractional_bound: float  # LP optimum: benefit plus the affordable share of the rejected upgrade
    upgrades: int
    rejected_benefit: float  # full benefit delta of the rejected upgrade (0 if none)


class GreedyPlan:
    """All hull segments sorted in greedy order; answers many budgets cheaply."""

    def __init__(self, lists: ViableLists):
        self.lists = lists
        n = len(lists)
        lengths = lists.lengths()
        first = np.zeros(len(lists.option), dtype=bool)
        first[lists.offsets[:-1]] = True
        seg = np.flatnonzero(~first)
        item = np.repeat(np.arange(n, dtype=np.int64), lengths - 1)
        dprice = lists.price[seg] - lists.price[seg - 1]
        dben = lists.benefit[seg] - lists.benefit[seg - 1]
        gradient = dben / dprice
        rank = _id_rank(lists.item_ids)[item]
        order = np.lexsort((rank, dprice, -gradient))
        del rank, seg
        self.item = item[order]
        self.dprice = dprice[order]
        self.dben = dben[order]
        self.gradient = gradient[order]
        del item, dprice, dben, gradient, order
        self.spent = np.cumsum(self.dprice)

    def __len__(self) -> int:
        return len(self.item)

    @property
    def saturation_budget(self) -> float:
        """Smallest budget at which every viable upgrade is applied."""
        return float(self.spent[-1]) if len(self.spent) else 0.0

    def run(self, budget: float) -> GreedyResult:
        if budget < 0:
            raise ValueError("budget must be >= 0")
        t = int(np.searchsorted(self.spent, budget, side="right"))
        lists = self.lists
        cursor = np.bincount(self.item[:t], minlength=len(lists))
        entry = lists.offsets[:-1] + cursor
        benefit = float(np.sum(lists.benefit[entry]))
        spent = float(self.spent[t - 1]) if t else 0.0
        frac, rejected = benefit, 0.0
        if t < len(self.item):
            rejected = float(self.dben[t])
            frac = benefit + (budget - spent) / float(self.dprice[t]) * rejected
        return GreedyResult(
            budget=float(budget),
            cursor=cursor,
            option=lists.option[entry].astype(np.int64),
            money_spent=spent,
            benefit=benefit,
            fractional_bound=frac,
            upgrades=t,
            rejected_benefit=rejected,
        )

    def upgrade_sequence(self, limit: int | None = None) -> list[Upgrade]:
        """The first ``limit`` upgrades in the order the greedy applies them."""
        lists = self.lists
        count = len(self.item) if limit is None else min(limit, len(self.item))
        cursor = np.zeros(len(lists), dtype=np.int64)
        out = []
        for step in range(count):
            i = int(self.item[step])
            lo = lists.offsets[i] + cursor[i]
            out.append(
                Upgrade(
                    step + 1,
                    float(self.gradient[step]),
                    lists.item_ids[i],
                    int(lists.option[lo]),
                    int(lists.option[lo + 1]),
                    float(self.dprice[step]),
                    float(self.dben[step]),
                )
            )
            cursor[i] += 1
        return out


def greedy_placement(lists: ViableLists, budget: float) -> GreedyResult:
    return GreedyPlan(lists).run(budget)


# --------------------------------------------------------------------------
# exact oracle


class CapacityExceededError(MemoryError):
    pass


@dataclass
class ExactResult:
    option: np.ndarray
    benefit: float
    money_spent: float


def exact_mckp(
    prices: np.ndarray,
    benefits: np.ndarray,
    budget: float,
    price_quantum: float = 1.0,
    memory_cap: int = 256 * 2**20,
) -> ExactResult:
    """Optimal integral MCKP by dynamic programming over quantised prices.

    Column 0 is the empty placement; NaN marks an absent option. Prices are
    rounded down to multiples of ``price_quantum``, so the answer is exact
    whenever every price is such a multiple.
    """
    prices = np.asarray(prices, dtype=np.float64)
    benefits = np.asarray(benefits, dtype=np.float64)
    n, p = prices.shape
    if p > 127:
        raise ValueError("at most 127 options per item")
    cap = int(math.floor(budget / price_quantum))
    if cap < 0:
        raise ValueError("budget must be >= 0")
    if n * (cap + 1) > memory_cap:
        raise CapacityExceededError(f"DP table of {n} x {cap + 1} exceeds memory cap {memory_cap}")
    valid = np.isfinite(prices) & np.isfinite(benefits)
    valid[:, 0] = False
    weight = np.zeros((n, p), dtype=np.int64)
    weight[valid] = np.floor(prices[valid] / price_quantum).astype(np.int64)
    valid &= weight <= cap

    dp = np.zeros(cap + 1)
    table = np.zeros((n, cap + 1), dtype=np.int8)
    for i in range(n):
        best = dp.copy()
        arg = table[i]
        for j in np.flatnonzero(valid[i]):
            w = weight[i, j]
            cand = dp[: cap + 1 - w] + benefits[i, j]
            upd = cand > best[w:]
            best[w:][upd] = cand[upd]
            arg[w:][upd] = j
        dp = best
    choice = np.zeros(n, dtype=np.int64)
    c = cap
    for i in range(n - 1, -1, -1):
        j = int(table[i, c])
        choice[i] = j
        if j:
            c -= weight[i, j]
    rows = np.arange(n)
    chosen = choice > 0
    return ExactResult(
        option=choice,
        benefit=float(np.sum(benefits[rows[chosen], choice[chosen]])),
        money_spent=float(np.sum(prices[rows[chosen], choice[chosen]])),
    )


# --------------------------------------------------------------------------
# cost-model problems


@dataclass
class Solution:
    item_ids: np.ndarray
    options: tuple
    choice: np.ndarray  # option index per item
    budget: float
    money_spent: float
    total_benefit: float
    expected_service_time: float
    baseline_service_time: float
    stash_bytes: dict
    fractional_bound: float
    uncached_bytes: float
    upgrades: int = 0

    @property
    def assignment(self) -> dict:
        return {item: self.options[j] for item, j in zip(self.item_ids.tolist(), self.choice.tolist())}

    def option_counts(self) -> dict:
        counts = np.bincount(self.choice, minlength=len(self.options))
        return {P.label(): int(c) for P, c in zip(self.options, counts)}


def stash_sizes(choice: np.ndarray, options: Sequence[PlacementOption], items: ItemTable) -> dict:
    """Bytes to purchase per stash for a given assignment."""
    per_option = np.bincount(choice, weights=items.size, minlength=len(options))
    sizes: dict = {}
    for P, b in zip(options, per_option):
        for s in P:
            sizes[s] = sizes.get(s, 0.0) + float(b)
    return sizes


@dataclass
class Problem:
    """One cache-configuration instance: a workload, allowed options, and a cost model."""

    items: ItemTable
    options: list
    stashes: Mapping[str, StashSpec]
    failures: list = field(default_factory=list)
    cfg: CostModelConfig = field(default_factory=CostModelConfig)
    chunk_size: int = 1 << 18

    def __post_init__(self):
        self.options = list(self.options)
        if not self.options or self.options[0] != EMPTY:
            raise ValueError("options must start with the empty placement")
        check_catalog_covers(self.options, self.stashes)
        self.cfg.check(self.stashes)

    def stash_order(self) -> list:
        seen = []
        for P in self.options:
            for s in P:
                if s not in seen:
                    seen.append(s)
        return seen

    def matrices(self, start: int = 0, stop: int | None = None):
        """(prices, benefits, service) matrices for items[start:stop]."""
        chunk = self.items.slice(start, len(self.items) if stop is None else stop)
        m, p = len(chunk), len(self.options)
        prices = np.empty((m, p))
        benefits = np.empty((m, p))
        service = np.empty((m, p))
        base = baseline_service_time(chunk, self.stashes, self.cfg)
        for j, P in enumerate(self.options):
            prices[:, j] = item_price(P, chunk, self.stashes)
            service[:, j] = service_time(P, chunk, self.failures, self.stashes, self.cfg)
            benefits[:, j] = base - service[:, j]
        return prices, benefits, service

    def viable_lists(self) -> ViableLists:
        parts = []
        n = len(self.items)
        for start in range(0, max(n, 1), self.chunk_size):
            stop = min(start + self.chunk_size, n)
            prices, benefits, service = self.matrices(start, stop)
            parts.append(build_viable_lists(prices, benefits, self.items.ids[start:stop], service))
        return ViableLists.concat(parts)

    def chosen_service(self, choice: np.ndarray) -> np.ndarray:
        out = np.empty(len(self.items))
        for j, P in enumerate(self.options):
            idx = np.flatnonzero(choice == j)
            if len(idx):
                sub = ItemTable(
                    self.items.ids[idx],
                    self.items.size[idx],
                    self.items.comp[idx],
                    self.items.read_freq[idx],
                    self.items.write_freq[idx],
                    validate=False,
                )
                out[idx] = service_time(P, sub, self.failures, self.stashes, self.cfg)
        return out

    def solution(self, choice, budget, money_spent, fractional_bound, upgrades=0) -> Solution:
        choice = np.asarray(choice, dtype=np.int64)
        base = float(np.sum(baseline_service_time(self.items, self.stashes, self.cfg)))
        expected = float(np.sum(self.chosen_service(choice)))
        return Solution(
            item_ids=self.items.ids,
            options=tuple(self.options),
            choice=choice,
            budget=float(budget),
            money_spent=float(money_spent),
            total_benefit=base - expected,
            expected_service_time=expected,
            baseline_service_time=base,
            stash_bytes=stash_sizes(choice, self.options, self.items),
            fractional_bound=float(fractional_bound),
            uncached_bytes=float(np.sum(self.items.size[choice == 0])),
            upgrades=upgrades,
        )

    def from_greedy(self, result: GreedyResult) -> Solution:
        return self.solution(
            result.option, result.budget, result.money_spent, result.fractional_bound, result.upgrades
        )


def solve(problem: Problem, budget: float) -> Solution:
    """Greedy placement for one budget."""
    return problem.from_greedy(greedy_placement(problem.viable_lists(), budget))


def solve_exact(problem: Problem, budget: float, price_quantum: float, memory_cap: int = 256 * 2**20) -> Solution:
    """Exact optimum over all allowed options (small instances only)."""
    prices, benefits, _ = problem.matrices()
    res = exact_mckp(prices, benefits, budget, price_quantum, memory_cap)
    return problem.solution(res.option, budget, res.money_spent, math.nan)
