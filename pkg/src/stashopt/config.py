"""Keyed-text (INI) files for stash catalogs and experiment specs.

Catalog::

    [model]
    write_mode = sequential        ; or concurrent
    baseline_mode = kvs            ; or host_side
    count_failures = true
    permanent_store = Disk         ; required for host_side

    [stash DRAM]
    name = DRAM
    read_latency_ns = 10
    write_latency_ns = 10
    read_bandwidth_mbps = 10240
    write_bandwidth_mbps = 10240
    price_per_gb = 8
    mtbf_hours = 8750
    mttr_hours = 10

Experiment::

    [experiment]
    label = tiering
    catalog = catalog.ini          ; relative to this file
    summary = workload.txt         ; or: trace = requests.trace + hours = 168
    policy = tiering               ; optional_replication, forced_replication, custom
    stashes = Flash, NVM1, NVM2
    options = -, Flash, Flash+NVM1 ; custom policy only
    budgets = 0:200:10             ; min:max:step, or a comma list

Any ``[model]`` key may also appear in ``[experiment]`` to override the catalog.
"""
from __future__ import annotations

import configparser
import math
from pathlib import Path
from typing import Mapping

from .model import (
    CostModelConfig,
    PlacementOption,
    StashSpec,
    bytes_per_ns_to_mbps,
    GB,
)
from .solver import PolicyKind, PolicySet

STASH_FIELDS = (
    "name",
    "read_latency_ns",
    "write_latency_ns",
    "read_bandwidth_mbps",
    "write_bandwidth_mbps",
    "price_per_gb",
    "mtbf_hours",
    "mttr_hours",
)
MODEL_KEYS = ("write_mode", "baseline_mode", "count_failures", "permanent_store")


class ConfigError(ValueError):
    pass


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";",), interpolation=None)
    cp.optionxform = str
    return cp


def _number(section: str, key: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number: {text!r}") from None
    if math.isnan(value):
        raise ConfigError(f"[{section}] {key}: NaN is not allowed")
    return value


def _stash_from_section(sid: str, sec: Mapping[str, str], section: str) -> StashSpec:
    missing = [f for f in STASH_FIELDS[1:] if f not in sec]
    if missing:
        raise ConfigError(f"[{section}] missing field(s): {', '.join(missing)}")
    unknown = sorted(set(sec) - set(STASH_FIELDS))
    if unknown:
        raise ConfigError(f"[{section}] unknown field(s): {', '.join(unknown)}")
    values = {f: _number(section, f, sec[f]) for f in STASH_FIELDS[1:]}
    checks = [
        ("read_latency_ns", ">= 0"),
        ("write_latency_ns", ">= 0"),
        ("price_per_gb", ">= 0"),
        ("mttr_hours", ">= 0"),
        ("read_bandwidth_mbps", "> 0"),
        ("write_bandwidth_mbps", "> 0"),
        ("mtbf_hours", "> 0"),
    ]
    for f, rule in checks:
        v = values[f]
        if (rule == ">= 0" and not v >= 0) or (rule == "> 0" and not v > 0):
            raise ConfigError(f"[{section}] {f} must be {rule}, got {sec[f]}")
    return StashSpec.from_datasheet(
        sid,
        name=sec.get("name", sid),
        read_latency_ns=values["read_latency_ns"],
        write_latency_ns=values["write_latency_ns"],
        read_mbps=values["read_bandwidth_mbps"],
        write_mbps=values["write_bandwidth_mbps"],
        price_per_gb=values["price_per_gb"],
        mtbf_hours=values["mtbf_hours"],
        mttr_hours=values["mttr_hours"],
    )


def _model_from(sec: Mapping[str, str], base: CostModelConfig | None = None, where: str = "model") -> CostModelConfig:
    kw = {}
    if base is not None:
        kw = dict(
            write_mode=base.write_mode,
            baseline_mode=base.baseline_mode,
            count_failures=base.count_failures,
            permanent_store=base.permanent_store,
        )
    for key in MODEL_KEYS:
        if key not in sec:
            continue
        value = sec[key].strip()
        if key == "count_failures":
            if value.lower() not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ConfigError(f"[{where}] count_failures: expected a boolean, got {value!r}")
            kw[key] = value.lower() in ("true", "yes", "1", "on")
        elif key == "permanent_store":
            kw[key] = value or None
        else:
            kw[key] = value
    try:
        return CostModelConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"[{where}] {exc}") from None


def parse_catalog(text: str, source: str = "<catalog>"):
    """Return (stashes, cost-model config) from catalog text."""
    cp = _parser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    stashes: dict[str, StashSpec] = {}
    cfg = CostModelConfig()
    for section in cp.sections():
        if section == "model":
            unknown = sorted(set(cp[section]) - set(MODEL_KEYS))
            if unknown:
                raise ConfigError(f"[model] unknown key(s): {', '.join(unknown)}")
            cfg = _model_from(cp[section])
        elif section.startswith("stash "):
            sid = section[len("stash ") :].strip()
            if not sid:
                raise ConfigError(f"[{section}] empty stash id")
            stashes[sid] = _stash_from_section(sid, cp[section], section)
        else:
            raise ConfigError(f"unknown section [{section}]")
    if not stashes:
        raise ConfigError("catalog defines no stashes")
    try:
        cfg.check(stashes)
    except ValueError as exc:
        raise ConfigError(f"[model] {exc}") from None
    return stashes, cfg


def load_catalog(path):
    path = Path(path)
    return parse_catalog(path.read_text(), str(path))


def format_catalog(stashes: Mapping[str, StashSpec], cfg: CostModelConfig | None = None) -> str:
    lines = []
    if cfg is not None:
        lines += [
            "[model]",
            f"write_mode = {cfg.write_mode.value}",
            f"baseline_mode = {cfg.baseline_mode.value}",
            f"count_failures = {'true' if cfg.count_failures else 'false'}",
        ]
        if cfg.permanent_store:
            lines.append(f"permanent_store = {cfg.permanent_store}")
        lines.append("")
    for sid, s in stashes.items():
        lines += [
            f"[stash {sid}]",
            f"name = {s.name}",
            f"read_latency_ns = {s.read_latency!r}",
            f"write_latency_ns = {s.write_latency!r}",
            f"read_bandwidth_mbps = {bytes_per_ns_to_mbps(s.read_bandwidth)!r}",
            f"write_bandwidth_mbps = {bytes_per_ns_to_mbps(s.write_bandwidth)!r}",
            f"price_per_gb = {s.price_per_byte * GB!r}",
            f"mtbf_hours = {s.mtbf_or_mttf!r}",
            f"mttr_hours = {s.mttr!r}",
            "",
        ]
    return "\n".join(lines)


def parse_budgets(text: str) -> list[float]:
    from .harness import budget_grid

    text = text.strip()
    try:
        if ":" in text:
            lo, hi, step = (float(x) for x in text.split(":"))
            return budget_grid(lo, hi, step)
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad budget list {text!r}: {exc}") from None


def parse_policy(kind: str, stashes: str = "", options: str = "") -> PolicySet:
    try:
        pk = PolicyKind(kind.strip())
    except ValueError:
        raise ConfigError(f"unknown policy {kind!r}; choose from {[k.value for k in PolicyKind]}") from None
    ids = tuple(s.strip() for s in stashes.split(",") if s.strip())
    custom = ()
    if pk is PolicyKind.CUSTOM:
        custom = tuple(PlacementOption.parse(o) for o in options.split(","))
        ids = ids or tuple(sorted({s for P in custom for s in P}))
    return PolicySet(pk, ids, custom)


def load_experiment(path):
    """Parse an experiment file into an :class:`~stashopt.harness.ExperimentSpec`."""
    from .harness import ExperimentSpec
    from .traces import build_summary, parse_trace, read_summary

    path = Path(path)
    cp = _parser()
    try:
        cp.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    if "experiment" not in cp:
        raise ConfigError(f"{path}: missing [experiment] section")
    sec = cp["experiment"]
    for key in ("catalog", "policy", "budgets"):
        if key not in sec:
            raise ConfigError(f"{path}: [experiment] missing {key}")
    base = path.parent
    stashes, cfg = load_catalog(base / sec["catalog"])
    cfg = _model_from(sec, cfg, where="experiment")
    if ("summary" in sec) == ("trace" in sec):
        raise ConfigError(f"{path}: give exactly one of summary / trace")
    if "summary" in sec:
        with open(base / sec["summary"]) as fh:
            workload = read_summary(fh)
    else:
        if "hours" not in sec:
            raise ConfigError(f"{path}: trace input needs hours")
        with open(base / sec["trace"]) as fh:
            workload = build_summary(parse_trace(fh), _number("experiment", "hours", sec["hours"]))
    policy = parse_policy(sec["policy"], sec.get("stashes", ""), sec.get("options", ""))
    try:
        cfg.check(stashes)
        return ExperimentSpec(
            workload=workload,
            catalog=stashes,
            policy=policy,
            cfg=cfg,
            budgets=parse_budgets(sec["budgets"]),
            label=sec.get("label", path.stem),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def read_instance(source):
    """Raw MCKP instance: lines ``<item_id>,<option>,<price>,<benefit>``.

    Options use the placement syntax (``-`` for uncached, ``A+B`` for two
    copies). The uncached option at (0, 0) is implied for every item.
    Returns (item_ids, options, prices, benefits) with NaN for options an
    item does not list.
    """
    import numpy as np

    from .model import EMPTY

    points: dict = {}
    option_set = {EMPTY}
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise ConfigError(f"line {lineno}: expected item_id,option,price,benefit")
        try:
            P = PlacementOption.parse(parts[1])
            price, ben = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
        if not P:
            if price != 0 or ben != 0:
                raise ConfigError(f"line {lineno}: the uncached option must have price 0 and benefit 0")
        elif not (math.isfinite(price) and math.isfinite(ben)):
            raise ConfigError(f"line {lineno}: price and benefit must be finite")
        item = points.setdefault(parts[0], {})
        if P in item:
            raise ConfigError(f"line {lineno}: duplicate option {P.label()} for {parts[0]}")
        item[P] = (price, ben)
        option_set.add(P)
    options = sorted(option_set, key=lambda P: (len(P), P.label()))
    ids = list(points)
    col = {P: j for j, P in enumerate(options)}
    prices = np.full((len(ids), len(options)), np.nan)
    benefits = np.full((len(ids), len(options)), np.nan)
    prices[:, 0] = 0.0
    benefits[:, 0] = 0.0
    for i, item in enumerate(ids):
        for P, (pr, be) in points[item].items():
            prices[i, col[P]] = pr
            benefits[i, col[P]] = be
    return np.array(ids, dtype=object), options, prices, benefits
