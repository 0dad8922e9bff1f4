"""Score-ordered placement heuristic used as a comparison point.

Each item gets a score per stash: the time saved against the permanent
store, weighted by read and write frequency. Items are placed in
descending score order, each into its best-scoring stash that still has
room, falling back to the permanent store.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import ItemStats, StashSpec, read_time, write_time


@dataclass(frozen=True)
class ScoredItem:
    item_id: str
    score_per_stash: dict
    best_stash: str
    score: float


def score(k: ItemStats, s: StashSpec, disk: StashSpec) -> float:
    return k.read_freq * (read_time(disk, k) - read_time(s, k)) + k.write_freq * (
        write_time(disk, k) - write_time(s, k)
    )


def score_item(k: ItemStats, stashes: Sequence[StashSpec], disk: StashSpec) -> ScoredItem:
    per = {s.id: score(k, s, disk) for s in stashes}
    # first listed stash wins ties
    best = max(per, key=lambda sid: (per[sid], -list(per).index(sid)))
    return ScoredItem(k.id, per, best, per[best])


def heuristic_place(
    items: Sequence[ItemStats],
    capacities: Mapping[str, float],
    stashes: Sequence[StashSpec],
    disk: StashSpec,
) -> dict:
    """Map item id -> stash id (``disk.id`` for items left on permanent store)."""
    missing = [s.id for s in stashes if s.id not in capacities]
    if missing:
        raise ValueError(f"no capacity given for {missing}")
    remaining = {s.id: float(capacities[s.id]) for s in stashes}
    by_id = {k.id: k for k in items}
    scored = [score_item(k, stashes, disk) for k in items]
    scored.sort(key=lambda si: (-si.score, si.item_id))
    placement = {}
    for si in scored:
        k = by_id[si.item_id]
        prefs = sorted(si.score_per_stash, key=lambda sid: -si.score_per_stash[sid])
        for sid in prefs:
            if remaining[sid] >= k.size:
                remaining[sid] -= k.size
                placement[k.id] = sid
                break
        else:
            placement[k.id] = disk.id
    return placement


def expected_io_time(assignment: Mapping[str, str], items: Sequence[ItemStats], stashes: Mapping[str, StashSpec]) -> float:
    """Frequency-weighted read and write time of an assignment."""
    total = 0.0
    for k in items:
        if k.id not in assignment:
            continue
        s = stashes[assignment[k.id]]
        total += k.read_freq * read_time(s, k) + k.write_freq * write_time(s, k)
    return total
