import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stashopt.model import StashSpec, device_catalog
from stashopt.traces import (
    Op,
    TraceFormatError,
    TraceRecord,
    build_summary,
    failure_rates,
    parse_trace,
    read_summary,
    synth_trace,
    synth_workload,
    write_summary,
    write_trace,
    zipf_weights,
)

CAT = device_catalog()


def test_parse_skips_comments_and_blanks():
    text = "# header\n\nR,a,4096,100\nW,b,10,0\n"
    recs = list(parse_trace(io.StringIO(text)))
    assert recs == [TraceRecord(Op.READ, "a", 4096, 100.0), TraceRecord(Op.WRITE, "b", 10, 0.0)]


@pytest.mark.parametrize(
    "line, lineno",
    [("X,a,1,0", 2), ("R,a,1", 2), ("R,a,0,0", 2), ("R,a,4,-1", 2), ("R,,4,0", 2), ("R,a,4.5,0", 2)],
)
def test_parse_errors_carry_line_number(line, lineno):
    with pytest.raises(TraceFormatError) as err:
        list(parse_trace(["R,ok,1,0", line]))
    assert err.value.lineno == lineno


def test_summary_counts_and_max_resolution():
    recs = [
        TraceRecord(Op.READ, "b", 10, 5),
        TraceRecord(Op.READ, "a", 20, 1),
        TraceRecord(Op.WRITE, "a", 30, 0),
        TraceRecord(Op.READ, "a", 20, 7),
    ]
    s = build_summary(recs, 2.0)
    assert list(s.items.ids) == ["a", "b"]
    assert s.items.read_freq.tolist() == [0.5, 0.25]
    assert s.items.write_freq.tolist() == [0.25, 0.0]
    assert s.items.size.tolist() == [30, 10]
    assert s.items.comp.tolist() == [7, 5]
    assert s.requests_per_hour == 2.0


def test_empty_trace_rejected():
    with pytest.raises(ValueError):
        build_summary([], 1.0)


records = st.lists(
    st.builds(
        TraceRecord,
        op=st.sampled_from(list(Op)),
        item_id=st.sampled_from(["a", "b", "c", "d"]),
        size=st.integers(1, 10_000),
        comp=st.floats(0, 1e7),
    ),
    min_size=1,
    max_size=60,
)


@given(records, st.randoms(use_true_random=False))
def test_summary_ignores_record_order(recs, rnd):
    shuffled = list(recs)
    rnd.shuffle(shuffled)
    a, b = build_summary(recs, 1.0), build_summary(shuffled, 1.0)
    for f in ("ids", "size", "comp", "read_freq", "write_freq"):
        assert getattr(a.items, f).tolist() == getattr(b.items, f).tolist()
    assert a.items.total_frequency() == pytest.approx(1.0, abs=1e-12)


@given(records)
def test_trace_round_trip(recs):
    buf = io.StringIO()
    assert write_trace(recs, buf) == len(recs)
    assert list(parse_trace(io.StringIO(buf.getvalue()))) == recs


@given(records, st.floats(0.01, 1e4))
def test_summary_round_trip(recs, hours):
    s = build_summary(recs, hours)
    buf = io.StringIO()
    write_summary(s, buf)
    t = read_summary(io.StringIO(buf.getvalue()))
    assert t.total_requests == s.total_requests and t.duration_hours == s.duration_hours
    for f in ("ids", "size", "comp", "read_freq", "write_freq"):
        assert getattr(t.items, f).tolist() == getattr(s.items, f).tolist()


def test_summary_needs_header():
    with pytest.raises(TraceFormatError):
        read_summary(["R,a,1,0,1.0"])


def test_summary_frequencies_must_sum_to_one():
    with pytest.raises(ValueError):
        read_summary(["#requests=4 #hours=1", "R,a,1,0,0.5"])


# ---------------------------------------------------------------- failure rates


def _stash(cycle_hours, mttr=0.0):
    return StashSpec("s", "s", 1, 1, 1, 1, 0, cycle_hours - mttr, mttr)


def test_failure_rate_simple():
    (ev,) = failure_rates([_stash(1000.0)], 1000.0)
    assert ev.rate == pytest.approx(1e-6, rel=1e-15)
    assert ev.failed == frozenset({"s"})


def test_failure_rate_mail_scale_flash():
    rph = 438e6 / 168
    (ev,) = failure_rates([CAT["Flash"]], rph)
    assert ev.rate == pytest.approx(1 / (rph * 87600), rel=1e-15)
    assert ev.rate == pytest.approx(4.38e-12, rel=2e-3)


def test_dram_fails_ten_times_as_often_as_flash():
    rates = {e.failed: e.rate for e in failure_rates(CAT, 1234.5)}
    ratio = rates[frozenset({"DRAM"})] / rates[frozenset({"Flash"})]
    assert ratio == pytest.approx(10.0, rel=1e-12)


def test_failure_rate_needs_positive_request_rate():
    with pytest.raises(ValueError):
        failure_rates(CAT, 0)


@given(st.floats(1e-3, 1e12), st.floats(1.0, 1e6))
def test_failure_rate_is_reciprocal(rph, cycle):
    (ev,) = failure_rates([_stash(cycle)], rph)
    assert 0 < ev.rate
    assert ev.rate * rph * cycle == pytest.approx(1.0, rel=1e-12)


# ---------------------------------------------------------------- synthetic


def test_synth_is_seeded():
    a = synth_workload(500, seed=3)
    b = synth_workload(500, seed=3)
    c = synth_workload(500, seed=4)
    assert a.items.size.tolist() == b.items.size.tolist()
    assert a.items.size.tolist() != c.items.size.tolist()


@settings(deadline=None, max_examples=30)
@given(
    st.integers(1, 2000),
    st.floats(0, 2),
    st.tuples(st.integers(0, 100), st.integers(1, 100)),
    st.integers(0, 1000),
)
def test_synth_properties(n, alpha, rw, seed):
    s = synth_workload(n, alpha, rw, seed=seed)
    it = s.items
    assert len(it) == n
    assert it.total_frequency() == pytest.approx(1.0, abs=1e-9)
    total = it.read_freq + it.write_freq
    assert np.all(np.diff(total) <= 1e-18)
    r, w = rw
    assert it.write_freq.sum() == pytest.approx(w / (r + w), rel=1e-9, abs=1e-12)
    assert np.all(it.size >= 1)


def test_zipf_weights_shape():
    w = zipf_weights(10, 1.0)
    assert w.sum() == pytest.approx(1.0)
    assert w[0] / w[1] == pytest.approx(2.0)
    assert np.allclose(zipf_weights(5, 0.0), 0.2)


@pytest.mark.parametrize("bad", ["fixed", "uniform:5:1", "lognormal:0:1", "gauss:1:1", "fixed:x"])
def test_bad_distributions(bad):
    with pytest.raises(ValueError):
        synth_workload(10, size_distribution=bad)


def test_synth_trace_recovers_frequencies():
    s = synth_workload(20, 1.0, (9, 1), seed=1)
    recs = list(synth_trace(s, 200_000, seed=2))
    est = build_summary(recs, 1.0)
    got = dict(zip(est.items.ids, est.items.read_freq))
    for i in range(5):
        assert got[s.items.ids[i]] == pytest.approx(s.items.read_freq[i], rel=0.05)
    assert list(synth_trace(s, 50, seed=9)) == list(synth_trace(s, 50, seed=9))
