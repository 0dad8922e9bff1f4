"""Cost model for a multi-stash cache.

Every formula here is elementwise: the ``k`` argument may be a single
:class:`ItemStats` or an :class:`ItemTable` whose fields are numpy arrays,
in which case the functions return arrays of per-item values.

Units: time in nanoseconds, bandwidth in bytes per nanosecond, money in
dollars, sizes in bytes, MTBF/MTTR in hours.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

# Unit conventions. Change here to reinterpret catalog inputs.
MB = 2**20
GB = 2**30
NS_PER_S = 1e9
HOURS_PER_YEAR = 8760


def mbps_to_bytes_per_ns(mbps: float) -> float:
    return mbps * MB / NS_PER_S


def bytes_per_ns_to_mbps(bpns: float) -> float:
    return bpns * NS_PER_S / MB


def per_gb_to_per_byte(dollars_per_gb: float) -> float:
    return dollars_per_gb / GB


class EmptyPlacementError(ValueError):
    """Raised when a read/write time is requested for the empty placement."""


@dataclass(frozen=True)
class StashSpec:
    """One candidate storage medium."""

    id: str
    name: str
    read_latency: float  # ns
    write_latency: float  # ns
    read_bandwidth: float  # bytes/ns
    write_bandwidth: float  # bytes/ns
    price_per_byte: float  # $/byte
    mtbf_or_mttf: float  # hours
    mttr: float  # hours

    def __post_init__(self):
        for field in ("read_latency", "write_latency", "price_per_byte", "mttr"):
            value = getattr(self, field)
            if not value >= 0:
                raise ValueError(f"stash {self.id}: {field} must be >= 0, got {value!r}")
        for field in ("read_bandwidth", "write_bandwidth", "mtbf_or_mttf"):
            value = getattr(self, field)
            if not value > 0:
                raise ValueError(f"stash {self.id}: {field} must be > 0, got {value!r}")

    @classmethod
    def from_datasheet(
        cls,
        id: str,
        *,
        read_latency_ns: float,
        write_latency_ns: float,
        read_mbps: float,
        write_mbps: float,
        price_per_gb: float,
        mtbf_hours: float,
        mttr_hours: float,
        name: str | None = None,
    ) -> "StashSpec":
        """Build a spec from datasheet units (ns, MB/s, $/GB, hours)."""
        return cls(
            id=id,
            name=name or id,
            read_latency=float(read_latency_ns),
            write_latency=float(write_latency_ns),
            read_bandwidth=mbps_to_bytes_per_ns(read_mbps),
            write_bandwidth=mbps_to_bytes_per_ns(write_mbps),
            price_per_byte=per_gb_to_per_byte(price_per_gb),
            mtbf_or_mttf=float(mtbf_hours),
            mttr=float(mttr_hours),
        )

    @property
    def cycle_hours(self) -> float:
        return self.mtbf_or_mttf + self.mttr


def device_catalog() -> dict[str, StashSpec]:
    """The five device types used throughout the evaluation (NVM1, NVM2, DRAM, Flash, Disk)."""
    rows = {
        # read ns, write ns, read MB/s, write MB/s, $/GB, MTTF/MTBF h, MTTR h
        "NVM1": (30, 95, 10 * 1024, 5 * 1024, 4, 21875, 24),
        "NVM2": (70, 500, 7 * 1024, 1 * 1024, 2, 43776, 24),
        "DRAM": (10, 10, 10 * 1024, 10 * 1024, 8, 8750, 10),
        "Flash": (25000, 2e5, 200, 100, 1, 87576, 24),
        "Disk": (2e6, 2e6, 10, 10, 0.1, 87576, 24),
    }
    return {
        sid: StashSpec.from_datasheet(
            sid,
            read_latency_ns=r,
            write_latency_ns=w,
            read_mbps=rb,
            write_mbps=wb,
            price_per_gb=p,
            mtbf_hours=f,
            mttr_hours=m,
        )
        for sid, (r, w, rb, wb, p, f, m) in rows.items()
    }


@dataclass(frozen=True)
class ItemStats:
    """One data item: a key-value pair or a disk page."""

    id: str
    size: float  # bytes
    comp: float  # ns
    read_freq: float
    write_freq: float

    def __post_init__(self):
        if not self.size > 0:
            raise ValueError(f"item {self.id}: size must be > 0, got {self.size!r}")
        for field in ("comp", "read_freq", "write_freq"):
            value = getattr(self, field)
            if not value >= 0:
                raise ValueError(f"item {self.id}: {field} must be >= 0, got {value!r}")


class ItemTable:
    """Column-oriented collection of items.

    Exposes the same attribute names as :class:`ItemStats` so the cost
    functions below evaluate a whole workload in one call.
    """

    def __init__(self, ids, size, comp, read_freq, write_freq, validate: bool = True):
        self.ids = np.asarray(ids)
        self.size = np.asarray(size, dtype=np.float64)
        self.comp = np.asarray(comp, dtype=np.float64)
        self.read_freq = np.asarray(read_freq, dtype=np.float64)
        self.write_freq = np.asarray(write_freq, dtype=np.float64)
        n = len(self.ids)
        for name in ("size", "comp", "read_freq", "write_freq"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"column {name} has shape {getattr(self, name).shape}, expected ({n},)")
        if validate:
            if n and not np.all(self.size > 0):
                raise ValueError("size must be > 0 for every item")
            for name in ("comp", "read_freq", "write_freq"):
                if n and not np.all(getattr(self, name) >= 0):
                    raise ValueError(f"{name} must be >= 0 for every item")

    @classmethod
    def from_items(cls, items: Iterable[ItemStats]) -> "ItemTable":
        items = list(items)
        return cls(
            ids=np.array([k.id for k in items], dtype=object),
            size=[k.size for k in items],
            comp=[k.comp for k in items],
            read_freq=[k.read_freq for k in items],
            write_freq=[k.write_freq for k in items],
        )

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, i: int) -> ItemStats:
        return ItemStats(
            id=str(self.ids[i]),
            size=float(self.size[i]),
            comp=float(self.comp[i]),
            read_freq=float(self.read_freq[i]),
            write_freq=float(self.write_freq[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def slice(self, start: int, stop: int) -> "ItemTable":
        return ItemTable(
            self.ids[start:stop],
            self.size[start:stop],
            self.comp[start:stop],
            self.read_freq[start:stop],
            self.write_freq[start:stop],
            validate=False,
        )

    def total_frequency(self) -> float:
        return float(np.sum(self.read_freq) + np.sum(self.write_freq))


@dataclass(frozen=True)
class PlacementOption:
    """A set of stashes holding copies of an item. The empty set means uncached."""

    stashes: frozenset = frozenset()

    @classmethod
    def of(cls, *stash_ids: str) -> "PlacementOption":
        if len(set(stash_ids)) != len(stash_ids):
            raise ValueError(f"duplicate stash in placement {stash_ids!r}")
        return cls(frozenset(stash_ids))

    def __bool__(self) -> bool:
        return bool(self.stashes)

    def __len__(self) -> int:
        return len(self.stashes)

    def __iter__(self):
        return iter(sorted(self.stashes))

    def __contains__(self, stash_id) -> bool:
        return stash_id in self.stashes

    def label(self) -> str:
        return "+".join(sorted(self.stashes)) if self.stashes else "-"

    @classmethod
    def parse(cls, text: str) -> "PlacementOption":
        text = text.strip()
        if text in ("-", "", "{}", "none"):
            return EMPTY
        return cls.of(*(part.strip() for part in text.split("+")))

    def __str__(self) -> str:
        return self.label()


EMPTY = PlacementOption()


@dataclass(frozen=True)
class FailureEvent:
    """A set of stashes that fail together, with a per-request rate."""

    failed: frozenset
    rate: float

    def __post_init__(self):
        if not self.failed:
            raise ValueError("failure event must name at least one stash")
        if not self.rate >= 0:
            raise ValueError(f"failure rate must be >= 0, got {self.rate!r}")


class WriteMode(str, enum.Enum):
    SEQUENTIAL = "sequential"
    CONCURRENT = "concurrent"


class BaselineMode(str, enum.Enum):
    KVS = "kvs"
    HOST_SIDE = "host_side"


@dataclass(frozen=True)
class CostModelConfig:
    write_mode: WriteMode = WriteMode.SEQUENTIAL
    baseline_mode: BaselineMode = BaselineMode.KVS
    count_failures: bool = True
    permanent_store: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "write_mode", WriteMode(self.write_mode))
        object.__setattr__(self, "baseline_mode", BaselineMode(self.baseline_mode))
        if self.baseline_mode is BaselineMode.HOST_SIDE and not self.permanent_store:
            raise ValueError("host_side baseline requires permanent_store")

    def check(self, stashes: Mapping[str, StashSpec]) -> None:
        if self.baseline_mode is BaselineMode.HOST_SIDE and self.permanent_store not in stashes:
            raise ValueError(f"permanent_store {self.permanent_store!r} not in catalog")


def _zero(k):
    # 0.0 for a scalar item, zeros(n) for an ItemTable
    return 0.0 * k.size


def read_time(s: StashSpec, k):
    return s.read_latency + k.size / s.read_bandwidth


def write_time(s: StashSpec, k):
    return s.write_latency + k.size / s.write_bandwidth


def placement_read_time(P: PlacementOption, k, stashes: Mapping[str, StashSpec]):
    if not P:
        raise EmptyPlacementError("read time of the empty placement is undefined")
    return reduce(np.minimum, (read_time(stashes[s], k) for s in P))


def placement_write_time(P: PlacementOption, k, stashes: Mapping[str, StashSpec], mode=WriteMode.SEQUENTIAL):
    if not P:
        raise EmptyPlacementError("write time of the empty placement is undefined")
    times = (write_time(stashes[s], k) for s in P)
    if WriteMode(mode) is WriteMode.CONCURRENT:
        return reduce(np.maximum, times)
    return reduce(lambda a, b: a + b, times)


def price(P: PlacementOption, k, stashes: Mapping[str, StashSpec]):
    total = _zero(k)
    for s in P:
        total = total + k.size * stashes[s].price_per_byte
    return total


def retrieval_cost(F: FailureEvent, P: PlacementOption, k, stashes, cfg: CostModelConfig):
    if not P or not (P.stashes & F.failed):
        return _zero(k)
    survivors = P.stashes - F.failed
    if not survivors:
        if cfg.baseline_mode is BaselineMode.KVS:
            return k.comp + _zero(k)
        return read_time(stashes[cfg.permanent_store], k)
    return reduce(np.minimum, (read_time(stashes[s], k) for s in sorted(survivors)))


def restore_cost(F: FailureEvent, P: PlacementOption, k, stashes):
    total = _zero(k)
    for s in sorted(P.stashes & F.failed):
        total = total + write_time(stashes[s], k)
    return total


def baseline_service_time(k, stashes, cfg: CostModelConfig):
    """Expected service time of an uncached item."""
    if cfg.baseline_mode is BaselineMode.KVS:
        # uncached items are not refilled on writes
        return k.read_freq * k.comp
    store = stashes[cfg.permanent_store]
    return k.read_freq * read_time(store, k) + k.write_freq * write_time(store, k)


def service_time(P: PlacementOption, k, failures: Sequence[FailureEvent], stashes, cfg: CostModelConfig):
    if not P:
        return baseline_service_time(k, stashes, cfg)
    t = k.read_freq * placement_read_time(P, k, stashes) + k.write_freq * placement_write_time(
        P, k, stashes, cfg.write_mode
    )
    if cfg.count_failures:
        for F in failures:
            if P.stashes & F.failed:
                t = t + F.rate * restore_cost(F, P, k, stashes)
        for F in failures:
            if P.stashes & F.failed:
                t = t + F.rate * retrieval_cost(F, P, k, stashes, cfg)
    return t


def benefit(P: PlacementOption, k, failures, stashes, cfg: CostModelConfig):
    base = baseline_service_time(k, stashes, cfg)
    if not P:
        return base - base
    return base - service_time(P, k, failures, stashes, cfg)


def check_catalog_covers(options: Iterable[PlacementOption], stashes: Mapping[str, StashSpec]) -> None:
    for P in options:
        missing = P.stashes - set(stashes)
        if missing:
            raise KeyError(f"placement {P.label()} names unknown stash(es) {sorted(missing)}")
