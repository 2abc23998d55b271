"""Centralized reference evaluator.

Computes the unique output streams of a well-formed specification for a
finite input trace by walking the evaluation graph in dependency order.
Every decentralized run is checked against this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .graphs import EvaluationGraph, build_dependency_graph, classify
from .specdsl import Apply, Const, EvaluationError, NUM, Offset, Var, apply_op, coerce

ATOL = 1e-9


@dataclass
class Valuation:
    """One sequence of ``length`` values per stream."""

    length: int
    streams: dict

    def __getitem__(self, name):
        return self.streams[name]

    def __contains__(self, name):
        return name in self.streams

    def value(self, stream, index):
        return self.streams[stream][index]


class OracleError(EvaluationError):
    def __init__(self, stream, index, cause):
        self.stream, self.index = stream, index
        super().__init__(f"{stream}[{index}]: {cause}")


def eval_term(t, sigma: Valuation, j: int):
    """Value of term ``t`` at position ``j`` under ``sigma``."""
    tt = type(t)
    if tt is Const:
        return t.value
    if tt is Var:
        return sigma.streams[t.name][j]
    if tt is Offset:
        k = j + t.offset
        if 0 <= k < sigma.length:
            return sigma.streams[t.name][k]
        return t.default.value
    op = t.op
    if op == "ite":
        c = eval_term(t.args[0], sigma, j)
        v = eval_term(t.args[1] if c else t.args[2], sigma, j)
        return apply_op("ite", (c, v, v), t.dtype)
    if op == "and":
        return eval_term(t.args[0], sigma, j) and eval_term(t.args[1], sigma, j)
    if op == "or":
        return eval_term(t.args[0], sigma, j) or eval_term(t.args[1], sigma, j)
    if op == "AND":
        return all(eval_term(a, sigma, j) for a in t.args)
    if op == "OR":
        return any(eval_term(a, sigma, j) for a in t.args)
    return apply_op(op, [eval_term(a, sigma, j) for a in t.args], t.dtype)


def evaluate(spec, inputs, M: int | None = None) -> Valuation:
    """Outputs (and inputs) for the given input trace.

    ``inputs`` is a Valuation or a plain mapping stream -> sequence.
    """
    streams = inputs.streams if isinstance(inputs, Valuation) else inputs
    if M is None:
        M = inputs.length if isinstance(inputs, Valuation) else len(next(iter(streams.values())))
    if set(streams) != set(spec.inputs):
        raise ValueError(f"inputs must cover exactly {sorted(spec.inputs)}, got {sorted(streams)}")
    g = build_dependency_graph(spec)
    if not classify(g).well_formed:
        raise ValueError("specification is not well-formed")
    values = {}
    for name in spec.inputs:
        seq = list(streams[name])
        if len(seq) != M:
            raise ValueError(f"input {name!r} has length {len(seq)}, expected {M}")
        values[name] = [coerce(v, spec.streams[name].dtype) for v in seq]
    for name in spec.defined:
        values[name] = [None] * M
    sigma = Valuation(M, values)
    defined = set(spec.defined)
    for x in EvaluationGraph(g, M).order():
        if x.stream not in defined:
            continue
        s = spec.streams[x.stream]
        try:
            values[x.stream][x.index] = coerce(eval_term(spec.equations[x.stream], sigma, x.index), s.dtype)
        except EvaluationError as exc:
            raise OracleError(x.stream, x.index, exc) from exc
    return sigma


def values_equal(a, b, dtype) -> bool:
    if dtype == NUM:
        if math.isnan(a) or math.isnan(b):
            return math.isnan(a) and math.isnan(b)
        return a == b or abs(a - b) <= ATOL
    return a == b and type(a) is type(b)


def first_mismatch(spec, expected: Valuation, actual: Valuation, streams=None):
    """First (stream, index, expected, actual) where the two valuations differ."""
    for name in streams or spec.monitored:
        dtype = spec.streams[name].dtype
        exp, act = expected.streams[name], actual.streams.get(name)
        if act is None or len(act) != len(exp):
            return name, None, exp, act
        for k, (a, b) in enumerate(zip(exp, act)):
            if b is None or not values_equal(a, b, dtype):
                return name, k, a, b
    return None


def verify(spec, sigma: Valuation) -> bool:
    """Check pointwise that ``sigma`` satisfies every equation."""
    for name in spec.defined:
        s = spec.streams[name]
        for j in range(sigma.length):
            try:
                want = coerce(eval_term(spec.equations[name], sigma, j), s.dtype)
            except EvaluationError:
                return False
            if not values_equal(want, sigma.streams[name][j], s.dtype):
                return False
    return True
