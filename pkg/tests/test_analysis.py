import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsrv import analysis, harness
from dsrv.analysis import UNBOUNDED, FixedArrivals, TraceArrivals
from dsrv.monitor import run
from dsrv.netsim import DelayTrace, constant, constant_peak, normal_peak
from dsrv.specdsl import parse
from dsrv.terms import iv

ACC_ROOT = parse("""
@node1{ input int y
  define int acc = y + root[-1|0] }
@node2{ input bool reset
  output int root = if reset then 0 else acc }
""")
AB = parse("@1{output num a eval = b[-1|0]} @2{output num b eval = a[-1|0]}")


def test_acc_root_hand_formula_under_a_peak():
    trace = DelayTrace(constant_peak(1, 1, 5, 1))
    arr = trace.arrival
    table = analysis.mtr_exact(ACC_ROOT, 3, trace)
    root0 = arr("node1", "node2", 0)
    acc1 = max(1, arr("node2", "node1", root0))
    assert table[iv("root", 0)] == root0
    assert table[iv("acc", 1)] == acc1
    assert table[iv("root", 1)] == arr("node1", "node2", acc1)


def test_acc_root_constant_delay_grows_linearly():
    table = analysis.mtr_aeternal(ACC_ROOT, 10, 3)
    assert [table[iv("root", k)] for k in range(10)] == [(2 * k + 1) * 3 for k in range(10)]


def test_colocated_past_references_resolve_on_time():
    solo = parse("@n{ input int i\n input bool reset\n define int acc = i + root[-1|0]\n"
                 " output int root = if reset then 0 else acc }")
    table = analysis.mtr_aeternal(solo, 50, 7)
    assert all(table[iv(s, k)] == k for s in solo.monitored for k in range(50))
    # with the inputs one hop away everything is one hop late
    spec = harness.load_fixture("acc_root_colocated")
    table = analysis.mtr_aeternal(spec, 50, 7)
    assert all(table[iv(s, k)] == k + 7 for s in ("acc", "root") for k in range(50))


def test_ab_resolution_grows_with_position():
    table = analysis.mtr_aeternal(AB, 20, 2)
    assert [table[iv("a", n)] for n in range(20)] == [2 * n for n in range(20)]
    assert analysis.ttr_sync(AB, 2) == {"a": UNBOUNDED, "b": UNBOUNDED}


def test_split_acc_root_is_unbounded_when_synchronous():
    sync = analysis.ttr_sync(ACC_ROOT, 1)
    assert sync["root"] == UNBOUNDED and sync["acc"] == UNBOUNDED


def test_tree_ttr_sync():
    spec = harness.load_fixture("depth2")
    assert analysis.ttr_sync(spec, 1) == {"root": 2, "m1": 1, "m2": 1, "s3": 0, "s4": 0, "s5": 0, "s6": 0,
                                          "x3": 0, "x4": 0, "x5": 0, "x6": 0}
    assert analysis.ttr_sync(spec, 4)["root"] == 8


def test_lazy_request_round_trip():
    spec = parse("@a{ output int r = x }\n@b{ input int i\n define int x lazy = i }")
    table = analysis.mtr(spec, 10, FixedArrivals(3))
    assert all(table[iv("r", t)] == t + 6 for t in range(10))
    assert analysis.ttr_sync(spec, 3, mode="declared")["r"] == 6


def test_lazy_value_that_resolves_late_answers_on_resolution():
    spec = parse("""
    @a{ output int r = x }
    @b{ define int x lazy = i }
    @c{ input int i }
    """)
    d = {("a", "b"): 1, ("b", "a"): 2, ("c", "b"): 10}
    table = analysis.mtr(spec, 5, FixedArrivals(d))
    # the request is waiting when x[t] resolves at t + 10
    assert all(table[iv("x", t)] == t + 10 for t in range(5))
    assert all(table[iv("r", t)] == t + 12 for t in range(5))


def test_future_reference_takes_default_at_the_end():
    spec = parse("@n{ input int a\n output int b = a[2|0] + b[-1|0] }")
    table = analysis.mtr_aeternal(spec, 3, 1)
    assert [table[iv("b", k)] for k in range(3)] == [2, 3, 3]


def test_constant_delays_make_all_bounds_equal():
    spec = harness.load_fixture("depth2")
    trace = DelayTrace(constant(3))
    exact = analysis.mtr_exact(spec, 40, trace)
    d, _, aeternal = analysis.aeternal_from_trace(spec, 40, trace)
    assert d == 3
    assert analysis.mtr_temporary(spec, 40, trace) == exact == aeternal


def test_prune_horizon_without_backward_reads():
    spec = parse("@a{ input int x\n output int y = x + 1 }")
    assert analysis.prune_horizon(spec, 10, FixedArrivals(1), "y") == list(range(10))


def test_prune_horizon_keeps_values_for_backward_reads():
    spec = parse("@n{ input int a\n output int b = a[2|0] + b[-1|0] }")
    table = analysis.mtr_aeternal(spec, 8, 1)
    got = analysis.prune_horizon(spec, 8, FixedArrivals(1), "b")
    assert got == [max(k + 1, table[iv("b", k)]) for k in range(8)]
    assert analysis.prune_horizon(spec, 8, FixedArrivals(1), "a") == [max(k, table[iv("a", k)]) for k in range(8)]


def test_lazy_values_wait_for_release():
    spec = harness.load_fixture("needed_always")
    h = analysis.prune_horizon(spec, 20, FixedArrivals(2), "rem")
    table = analysis.mtr_aeternal(spec, 20, 2)
    assert all(x > table[iv("rem", k)] for k, x in enumerate(h[:-1]))


def test_unknown_mode():
    with pytest.raises(ValueError):
        analysis.mtr(ACC_ROOT, 3, FixedArrivals(1), mode="sometimes")


def test_ill_formed_spec_is_rejected():
    spec = parse("@a{ output int x = x[0|0] }", check=True)
    with pytest.raises(ValueError):
        analysis.mtr_aeternal(spec, 3, 1)
    with pytest.raises(ValueError):
        analysis.ttr_sync(spec, 1)


class _Slower:
    """Same arrivals as ``base`` up to tick ``cut``, later afterwards."""

    def __init__(self, base, cut, extra):
        self.base, self.cut, self.extra = base, cut, extra

    def arrival(self, src, dst, t):
        a = self.base.arrival(src, dst, t)
        return a + self.extra if t > self.cut else a


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 60), st.integers(1, 30),
       st.sampled_from([None, "eager", "lazy"]))
def test_bounds_depend_only_on_earlier_delays(seed, cut, extra, mode):
    rng = random.Random(seed)
    spec, trace = harness.random_case(rng, max_length=60)
    base = TraceArrivals(DelayTrace(harness.random_delay_model(rng, spec.nodes)))
    M = trace.length
    before = analysis.mtr(spec, M, base, mode)
    after = analysis.mtr(spec, M, _Slower(base, cut, extra), mode)
    for x, t in before.items():
        if t <= cut:
            assert after[x] == t
        assert after[x] >= t


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["eager", "lazy", "mixed"]))
def test_runs_stay_within_bounds(seed, comm):
    rng = random.Random(seed)
    spec, trace = harness.random_case(rng, max_length=80, comm=comm)
    r = run(spec, trace, harness.random_delay_model(rng, spec.nodes), use_simplifier=False)
    M = trace.length
    delays = r.network.trace
    exact = analysis.mtr_exact(spec, M, delays)
    d, horizon, aeternal = analysis.aeternal_from_trace(spec, M, delays, horizon=r.ticks)
    temporary = analysis.mtr_temporary(spec, M, delays, horizon=horizon)
    for s in spec.monitored:
        for k in range(M):
            x = iv(s, k)
            assert r.resolved_at(s, k) <= exact[x] <= temporary[x] <= aeternal[x]
    bound = analysis.memory_bound(spec, M, TraceArrivals(delays))
    for n, m in r.metrics.items():
        assert max(m.mem) <= bound.get(n, 0)


def test_memory_bound_is_flat_in_trace_length():
    spec = harness.load_fixture("tree3")
    short = analysis.memory_bound(spec, 200, FixedArrivals(3))
    long = analysis.memory_bound(spec, 2000, FixedArrivals(3))
    assert short == long


def test_peak_delays_show_up_in_temporary_window():
    spec = harness.load_fixture("depth2")
    trace = DelayTrace(normal_peak(3, 1, 4, 100, 30))
    windows = {}
    temporary = analysis.mtr_temporary(spec, 300, trace, windows=windows)
    _, _, aeternal = analysis.aeternal_from_trace(spec, 300, trace)
    calm, peak = iv("root", 20), iv("root", 100)
    assert temporary[calm] < aeternal[calm]
    assert temporary[peak] - 100 > temporary[calm] - 20
    lo, hi = windows[peak]
    assert lo <= 100 <= hi
