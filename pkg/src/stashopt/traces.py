"""Request traces, workload summaries, failure rates and synthetic workloads.

Trace grammar, one record per line::

    <op>,<item_id>,<size_bytes>,<comp_ns>

with ``op`` in ``{R, W}``. Lines starting with ``#`` are comments. A
summary file uses the same layout plus a fifth field holding the item's
read (``R`` line) or write (``W`` line) frequency, under a header line
``#requests=<N> #hours=<H>``.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, TextIO

import numpy as np

from .model import FailureEvent, ItemStats, ItemTable, StashSpec

FREQ_TOLERANCE = 1e-9


class TraceFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class Op(str, enum.Enum):
    READ = "R"
    WRITE = "W"


@dataclass(frozen=True)
class TraceRecord:
    op: Op
    item_id: str
    size: int
    comp: float

    def __post_init__(self):
        if not self.size > 0:
            raise ValueError(f"record for {self.item_id}: size must be > 0")


def format_number(x) -> str:
    """Shortest text that parses back to the same value."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def _parse_fields(line: str, lineno: int, nfields: int):
    parts = line.split(",")
    if len(parts) != nfields:
        raise TraceFormatError(lineno, f"expected {nfields} comma-separated fields, got {len(parts)}")
    op_text, item_id = parts[0].strip(), parts[1].strip()
    try:
        op = Op(op_text)
    except ValueError:
        raise TraceFormatError(lineno, f"unknown op code {op_text!r}") from None
    if not item_id:
        raise TraceFormatError(lineno, "empty item id")
    try:
        size = int(parts[2])
        comp = float(parts[3])
    except ValueError as exc:
        raise TraceFormatError(lineno, str(exc)) from None
    if size <= 0:
        raise TraceFormatError(lineno, f"size must be > 0, got {size}")
    if not (comp >= 0 and math.isfinite(comp)):
        raise TraceFormatError(lineno, f"comp must be a finite value >= 0, got {parts[3]!r}")
    return op, item_id, size, comp, parts[4:]


def parse_trace(source: Iterable[str]) -> Iterator[TraceRecord]:
    """Stream records from lines of text, in file order."""
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        op, item_id, size, comp, _ = _parse_fields(line, lineno, 4)
        yield TraceRecord(op, item_id, size, comp)


def write_trace(records: Iterable[TraceRecord], sink: TextIO) -> int:
    n = 0
    for r in records:
        sink.write(f"{Op(r.op).value},{r.item_id},{r.size},{format_number(r.comp)}\n")
        n += 1
    return n


@dataclass
class WorkloadSummary:
    items: ItemTable
    total_requests: int
    duration_hours: float

    def __post_init__(self):
        if not self.duration_hours > 0:
            raise ValueError("duration_hours must be > 0")
        total = self.items.total_frequency()
        if len(self.items) and abs(total - 1.0) > FREQ_TOLERANCE:
            raise ValueError(f"frequencies sum to {total!r}, expected 1")

    @property
    def requests_per_hour(self) -> float:
        return self.total_requests / self.duration_hours

    def item_list(self) -> list[ItemStats]:
        return list(self.items)

    @property
    def total_bytes(self) -> float:
        return float(np.sum(self.items.size))


def build_summary(records: Iterable[TraceRecord], duration_hours: float) -> WorkloadSummary:
    """Per-item statistics from a trace. Conflicting sizes/comps resolve to the maximum."""
    if not duration_hours > 0:
        raise ValueError("duration_hours must be > 0")
    stats: dict[str, list] = {}
    total = 0
    for r in records:
        s = stats.get(r.item_id)
        if s is None:
            s = stats[r.item_id] = [0, 0, 0, 0.0]
        if r.op == Op.READ:
            s[0] += 1
        else:
            s[1] += 1
        s[2] = max(s[2], r.size)
        s[3] = max(s[3], r.comp)
        total += 1
    if total == 0:
        raise ValueError("trace has no requests")
    ids = sorted(stats)
    reads = np.array([stats[i][0] for i in ids], dtype=np.float64)
    writes = np.array([stats[i][1] for i in ids], dtype=np.float64)
    items = ItemTable(
        ids=np.array(ids, dtype=object),
        size=[stats[i][2] for i in ids],
        comp=[stats[i][3] for i in ids],
        read_freq=reads / total,
        write_freq=writes / total,
    )
    return WorkloadSummary(items, total, float(duration_hours))


_HEADER = re.compile(r"#requests=(\S+)\s+#hours=(\S+)")


def write_summary(summary: WorkloadSummary, sink: TextIO) -> None:
    sink.write(f"#requests={summary.total_requests} #hours={format_number(summary.duration_hours)}\n")
    it = summary.items
    for i in range(len(it)):
        size, comp = format_number(it.size[i]), format_number(it.comp[i])
        if it.read_freq[i] > 0 or it.write_freq[i] == 0:
            sink.write(f"R,{it.ids[i]},{size},{comp},{float(it.read_freq[i])!r}\n")
        if it.write_freq[i] > 0:
            sink.write(f"W,{it.ids[i]},{size},{comp},{float(it.write_freq[i])!r}\n")


def read_summary(source: Iterable[str]) -> WorkloadSummary:
    header = None
    stats: dict[str, list] = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            m = _HEADER.match(line)
            if m and header is None:
                try:
                    header = (int(m.group(1)), float(m.group(2)))
                except ValueError as exc:
                    raise TraceFormatError(lineno, f"bad header: {exc}") from None
            continue
        op, item_id, size, comp, rest = _parse_fields(line, lineno, 5)
        try:
            freq = float(rest[0])
        except ValueError as exc:
            raise TraceFormatError(lineno, str(exc)) from None
        if not freq >= 0:
            raise TraceFormatError(lineno, f"frequency must be >= 0, got {rest[0]!r}")
        s = stats.setdefault(item_id, [size, comp, 0.0, 0.0])
        s[0], s[1] = max(s[0], size), max(s[1], comp)
        s[2 if op == Op.READ else 3] = freq
    if header is None:
        raise TraceFormatError(1, "missing '#requests=<N> #hours=<H>' header")
    ids = list(stats)
    items = ItemTable(
        ids=np.array(ids, dtype=object),
        size=[stats[i][0] for i in ids],
        comp=[stats[i][1] for i in ids],
        read_freq=[stats[i][2] for i in ids],
        write_freq=[stats[i][3] for i in ids],
    )
    return WorkloadSummary(items, header[0], header[1])


def failure_rates(stashes: Mapping[str, StashSpec] | Iterable[StashSpec], requests_per_hour: float) -> list[FailureEvent]:
    """One single-stash failure event per stash.

    The rate is per request: the expected number of requests between two
    failures of ``s`` is ``requests_per_hour * (MTBF_or_MTTF + MTTR)``.
    """
    if not requests_per_hour > 0:
        raise ValueError("requests_per_hour must be > 0")
    specs = stashes.values() if isinstance(stashes, Mapping) else stashes
    return [FailureEvent(frozenset([s.id]), 1.0 / (requests_per_hour * s.cycle_hours)) for s in specs]


# --------------------------------------------------------------------------
# synthetic workloads


def _parse_dist(text: str):
    parts = str(text).split(":")
    kind = parts[0]
    try:
        args = [float(a) for a in parts[1:]]
    except ValueError:
        raise ValueError(f"invalid distribution parameters: {text!r}") from None
    expected = {"fixed": 1, "uniform": 2, "lognormal": 2}
    if kind not in expected or len(args) != expected[kind]:
        raise ValueError(f"invalid distribution {text!r}; use fixed:V, uniform:LO:HI or lognormal:MEDIAN:SIGMA")
    if kind == "fixed" and not args[0] >= 0:
        raise ValueError(f"invalid distribution parameters: {text!r}")
    if kind == "uniform" and not 0 <= args[0] <= args[1]:
        raise ValueError(f"invalid distribution parameters: {text!r}")
    if kind == "lognormal" and not (args[0] > 0 and args[1] >= 0):
        raise ValueError(f"invalid distribution parameters: {text!r}")
    return kind, args


def _draw(text: str, n: int, rng: np.random.Generator) -> np.ndarray:
    kind, args = _parse_dist(text)
    if kind == "fixed":
        return np.full(n, args[0])
    if kind == "uniform":
        return rng.uniform(args[0], args[1], size=n)
    return args[0] * np.exp(args[1] * rng.standard_normal(n))


def zipf_weights(n_items: int, exponent: float) -> np.ndarray:
    w = np.arange(1, n_items + 1, dtype=np.float64) ** -exponent
    return w / w.sum()


def synth_workload(
    n_items: int,
    zipf_exponent: float = 0.99,
    read_write_ratio: tuple = (99, 1),
    size_distribution: str = "lognormal:4096:1.0",
    comp_distribution: str = "lognormal:1000000:1.0",
    seed: int = 0,
    total_requests: int | None = None,
    duration_hours: float = 1.0,
) -> WorkloadSummary:
    """Zipf-popular items with a fixed read:write split.

    Item ``k0000001`` is the most popular. Sizes are rounded to whole bytes.
    """
    if n_items < 1:
        raise ValueError("n_items must be >= 1")
    if not zipf_exponent >= 0:
        raise ValueError("zipf_exponent must be >= 0")
    r, w = (float(x) for x in read_write_ratio)
    if r < 0 or w < 0 or r + w <= 0:
        raise ValueError(f"invalid read_write_ratio {read_write_ratio!r}")
    rng = np.random.default_rng(seed)
    p = zipf_weights(n_items, zipf_exponent)
    size = np.maximum(1.0, np.rint(_draw(size_distribution, n_items, rng)))
    comp = _draw(comp_distribution, n_items, rng)
    width = max(7, len(str(n_items)))
    ids = np.array([f"k{i:0{width}d}" for i in range(1, n_items + 1)], dtype=object)
    items = ItemTable(ids, size, comp, p * (r / (r + w)), p * (w / (r + w)))
    if total_requests is None:
        total_requests = 10 * n_items
    return WorkloadSummary(items, int(total_requests), float(duration_hours))


def synth_trace(summary: WorkloadSummary, n_requests: int, seed: int = 0) -> Iterator[TraceRecord]:
    """Sample independent requests from a summary's frequencies."""
    rng = np.random.default_rng(seed)
    it = summary.items
    f = np.concatenate([it.read_freq, it.write_freq])
    f = f / f.sum()
    draws = rng.choice(len(f), size=n_requests, p=f)
    n = len(it)
    for d in draws.tolist():
        i = d % n
        op = Op.READ if d < n else Op.WRITE
        comp = float(it.comp[i])
        yield TraceRecord(op, str(it.ids[i]), int(it.size[i]), comp)
