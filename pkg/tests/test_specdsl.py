import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsrv import harness
from dsrv.specdsl import (
    BOOL,
    INT,
    NUM,
    Apply,
    Const,
    EvaluationError,
    Offset,
    SpecError,
    Var,
    apply_op,
    coerce,
    format_spec,
    parse,
    typecheck,
)

ACC_ROOT = """
@n1{
  input bool reset
  input int y
  define int acc = y + root[-1|0]
  output int root = if reset then 0 else acc
}
"""


def diagnostics(src):
    with pytest.raises(SpecError) as exc:
        parse(src)
    return [(d.kind, d.line, d.col) for d in exc.value.diagnostics]


def test_acc_root_structure():
    spec = parse(ACC_ROOT)
    assert set(spec.inputs) == {"reset", "y"}
    assert set(spec.defined) == {"acc", "root"}
    assert spec.equations["acc"] == Apply("+", (Var("y"), Offset("root", -1, Const(0, INT))), INT)
    assert typecheck(spec) == []


def test_ite_with_bool_guard_is_int():
    spec = parse(ACC_ROOT)
    assert spec.equations["root"].op == "ite"
    assert spec.equations["root"].dtype == INT


def test_two_node_appendix_spec():
    spec = parse("@1{output num a eval = b[-1|0]} @2{output num b eval = a[-1|0]}")
    assert spec.node_of("a") == "1" and spec.node_of("b") == "2"
    assert spec.streams["a"].comm == spec.streams["b"].comm == "eager"
    assert spec.equations["a"] == Offset("b", -1, Const(0.0, NUM))


def test_lazy_and_const_declarations():
    spec = parse("@a{ const int k = 3\n input int x\n output int y lazy = x * k }")
    assert spec.streams["y"].comm == "lazy"
    # constants are inlined
    assert spec.equations["y"] == Apply("*", (Var("x"), Const(3, INT)), INT)
    assert "k" not in spec.monitored


@pytest.mark.parametrize(
    "src, expected",
    [
        ("", [("empty", 1, 1)]),
        ("input int x", [("syntax", 1, 1)]),
        ("@a{ input int x\n input int x }", [("duplicate", 2, 2)]),
        ("@a{ output bool x = 1 + 2 }", [("type-mismatch", 1, 5)]),
        ("@a{ output int x = y }", [("unknown-identifier", 1, 20)]),
        ("@a{ output int x = MAX() }", [("arity", 1, 20)]),
        ("@a{ output int x = ite(true, 1) }", [("arity", 1, 20)]),
        ("@a{ output int x = 3 $ 4 }", [("lexical", 1, 22)]),
        ("@a{ output int x = }", [("syntax", 1, 20)]),
    ],
)
def test_rejections(src, expected):
    assert diagnostics(src) == expected


def test_empty_message():
    with pytest.raises(SpecError, match="no streams declared"):
        parse("   \n")


def test_int_and_num_are_mutually_assignable():
    spec = parse("@a{ input num x\n output int y = x + 1 }")
    assert spec.streams["y"].dtype == INT
    assert typecheck(spec) == []


def test_int_arithmetic_overflow_raises():
    with pytest.raises(EvaluationError):
        apply_op("*", (2**62, 4), INT)
    assert apply_op("+", (1, 2), INT) == 3


def test_coerce_truncates_towards_zero():
    assert coerce(2.7, INT) == 2
    assert coerce(-2.7, INT) == -2
    assert coerce(3, NUM) == 3.0 and isinstance(coerce(3, NUM), float)
    assert coerce(1, BOOL) is True
    with pytest.raises(EvaluationError):
        coerce(float("inf"), INT)


def test_format_keeps_precedence():
    src = "@a{ input int x\n output int y = (x + 1) * 2 - (x - (1 - x)) }"
    spec = parse(src)
    assert parse(format_spec(spec)).equations == spec.equations


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_print_parse_round_trip(seed):
    src = harness.random_spec_source(random.Random(seed))
    try:
        spec = parse(src)
    except SpecError:
        return
    again = parse(format_spec(spec))
    assert again.equations == spec.equations
    assert again.streams == spec.streams
    assert format_spec(again) == format_spec(spec)
