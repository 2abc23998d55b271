import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsrv import harness
from dsrv.oracle import OracleError, Valuation, eval_term, evaluate, first_mismatch, verify
from dsrv.specdsl import INT, Const, Offset, parse

ACC_ROOT = """
@n1{ input int y
  define int acc = y + root[-1|0] }
@n2{ input bool reset
  output int root = if reset then 0 else acc }
"""


def test_offset_lookup_and_default():
    sigma = Valuation(5, {"root": [5, 6, 7, 8, 9]})
    t = Offset("root", -1, Const(0, INT))
    assert eval_term(t, sigma, 0) == 0
    assert eval_term(t, sigma, 3) == 7


def test_ite_ignores_the_other_branch():
    spec = parse("@a{ input bool reset\n input int acc\n output int root = if reset then 0 else acc / 0 }")
    sigma = Valuation(1, {"reset": [True], "acc": [4]})
    assert eval_term(spec.equations["root"], sigma, 0) == 0


def test_acc_root_sum():
    out = evaluate(parse(ACC_ROOT), {"y": [1, 1, 1, 1], "reset": [False] * 4})
    assert out["root"] == [1, 2, 3, 4]


def test_acc_root_reset():
    out = evaluate(parse(ACC_ROOT), {"y": [1, 1, 1, 1], "reset": [False, True, False, False]})
    assert out["root"] == [1, 0, 1, 2]


def test_ab_defaults():
    out = evaluate(parse("@1{output num a eval = b[-1|0]} @2{output num b eval = a[-1|0]}"), Valuation(3, {}))
    assert out["a"] == [0.0, 0.0, 0.0] and out["b"] == [0.0, 0.0, 0.0]


def test_future_reference_defaults():
    out = evaluate(parse("@a{ input int a\n output int b = a[2|0] + b[-1|0] }"), {"a": [1, 2, 3]})
    assert out["b"] == [3, 3, 3]


def test_input_checks():
    spec = parse(ACC_ROOT)
    with pytest.raises(ValueError):
        evaluate(spec, {"y": [1]})
    with pytest.raises(ValueError):
        evaluate(spec, {"y": [1, 2], "reset": [True]})


def test_ill_formed_is_rejected():
    with pytest.raises(ValueError):
        evaluate(parse("@a{ input int i\n output int x = x + i }"), {"i": [1]})


def test_evaluation_error_names_the_position():
    spec = parse("@a{ input int i\n output int x = 10 / i }")
    with pytest.raises(OracleError) as exc:
        evaluate(spec, {"i": [1, 0]})
    assert (exc.value.stream, exc.value.index) == ("x", 1)


def test_first_mismatch():
    spec = parse(ACC_ROOT)
    good = evaluate(spec, {"y": [1, 1], "reset": [False, False]})
    bad = Valuation(2, {**good.streams, "root": [1, 3]})
    assert first_mismatch(spec, good, good) is None
    assert first_mismatch(spec, good, bad, ["root"]) == ("root", 1, 2, 3)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_output_satisfies_every_equation(seed):
    spec, trace = harness.random_case(random.Random(seed), max_length=40)
    out = evaluate(spec, trace)
    assert verify(spec, out)
    # changing any defined value breaks some equation
    name = sorted(spec.defined)[0]
    k = len(out[name]) - 1
    v = out[name][k]
    if isinstance(v, bool):
        out.streams[name][k] = not v
    else:
        out.streams[name][k] = v + 1 if v + 1 != v else v * 2
    assert not verify(spec, out)
