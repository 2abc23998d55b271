"""Instantiated terms, substitution and the admissible simplifier."""

from __future__ import annotations

from dataclasses import dataclass

from .specdsl import (
    BOOL,
    INT,
    Apply,
    Const,
    EvaluationError,
    Offset,
    Var,
    apply_op,
)


@dataclass(frozen=True, slots=True, order=True)
class InstantVariable:
    """The value of ``stream`` at trace position ``index``."""

    index: int
    stream: str

    def __repr__(self):
        return f"{self.stream}[{self.index}]"


def iv(stream: str, index: int) -> InstantVariable:
    return InstantVariable(index, stream)


@dataclass(frozen=True, slots=True)
class Leaf:
    """An instant variable inside a term.

    ``default`` is the value to use if the index turns out to lie past the
    end of the trace (only set for future references).
    """

    var: InstantVariable
    dtype: str
    default: object = None


def instantiate(spec, stream: str, k: int, M: int | None = None):
    """Shift the equation of ``stream`` to position ``k``.

    Out-of-range past references become their default.  Future references
    past ``M`` become their default when ``M`` is known and stay symbolic
    otherwise (resolved later by :func:`finalize_leaves`).
    """
    s = spec.streams[stream]
    if s.is_input:
        return Leaf(InstantVariable(k, stream), s.dtype)
    return _shift(spec.equations[stream], spec, k, M)


def _shift(t, spec, k, M):
    tt = type(t)
    if tt is Const:
        return t
    if tt is Var:
        return Leaf(InstantVariable(k, t.name), spec.streams[t.name].dtype)
    if tt is Offset:
        j = k + t.offset
        if j < 0 or (M is not None and j >= M):
            return t.default
        dtype = spec.streams[t.name].dtype
        if t.offset > 0:
            return Leaf(InstantVariable(j, t.name), dtype, t.default.value)
        return Leaf(InstantVariable(j, t.name), dtype)
    return Apply(t.op, tuple(_shift(a, spec, k, M) for a in t.args), t.dtype)


def variables(t) -> set:
    out = set()
    stack = [t]
    while stack:
        x = stack.pop()
        tx = type(x)
        if tx is Leaf:
            out.add(x.var)
        elif tx is Apply:
            stack.extend(x.args)
    return out


def is_ground(t) -> bool:
    tx = type(t)
    if tx is Const:
        return True
    if tx is Leaf:
        return False
    return all(is_ground(a) for a in t.args)


def substitute(t, theta):
    """Replace every leaf whose variable is in ``theta`` by a constant."""
    tt = type(t)
    if tt is Leaf:
        if t.var in theta:
            return Const(theta[t.var], t.dtype)
        return t
    if tt is Const:
        return t
    args = tuple(substitute(a, theta) for a in t.args)
    if all(a is b for a, b in zip(args, t.args)):
        return t
    return Apply(t.op, args, t.dtype)


def finalize_leaves(t, M: int):
    """Replace future references at or past ``M`` by their defaults."""
    tt = type(t)
    if tt is Leaf:
        if t.var.index >= M:
            return Const(t.default, t.dtype)
        return t
    if tt is Const:
        return t
    args = tuple(finalize_leaves(a, M) for a in t.args)
    if all(a is b for a, b in zip(args, t.args)):
        return t
    return Apply(t.op, args, t.dtype)


def eval_ground(t):
    """Value of a ground term.  If-then-else and the boolean connectives only
    evaluate the arguments they need."""
    tt = type(t)
    if tt is Const:
        return t.value
    if tt is Leaf:
        raise ValueError(f"term is not ground: {t.var!r}")
    op = t.op
    if op == "ite":
        c = eval_ground(t.args[0])
        v = eval_ground(t.args[1] if c else t.args[2])
        return apply_op("ite", (c, v, v), t.dtype)
    if op == "and":
        return eval_ground(t.args[0]) and eval_ground(t.args[1])
    if op == "or":
        return eval_ground(t.args[0]) or eval_ground(t.args[1])
    if op == "AND":
        return all(eval_ground(a) for a in t.args)
    if op == "OR":
        return any(eval_ground(a) for a in t.args)
    return apply_op(op, [eval_ground(a) for a in t.args], t.dtype)


# ---------------------------------------------------------------------------
# Simplification
# ---------------------------------------------------------------------------

TRUE = Const(True, BOOL)
FALSE = Const(False, BOOL)


def _is(t, value, dtype) -> bool:
    return type(t) is Const and t.dtype == dtype and t.value == value


def simplify(t):
    """Rewrite ``t`` bottom-up with the closed rule set below.

    * if-then-else with a constant guard selects a branch
    * ``or``/``and`` and the variadic ``OR``/``AND`` drop neutral constants
      and collapse on an absorbing one
    * ``0*x -> 0``, ``x+0 -> x`` for ints and ``1*x -> x`` when the type is kept
    * ground sub-terms are folded to constants

    A ground sub-term whose evaluation fails is left in place; the failure
    surfaces only if the whole term is ground.
    """
    out = _simp(t)
    if type(out) is Apply and is_ground(out):
        return Const(eval_ground(out), out.dtype)
    return out


def _simp(t):
    if type(t) is not Apply:
        return t
    op = t.op
    args = t.args
    if op == "ite":
        c = _simp(args[0])
        if type(c) is Const:
            branch = _simp(args[1] if c.value else args[2])
            return _retype(branch, t.dtype)
        new = (c, _simp(args[1]), _simp(args[2]))
        if any(a is not b for a, b in zip(new, args)):
            args = new
    else:
        new = tuple(_simp(a) for a in args)
        if any(a is not b for a, b in zip(new, args)):
            args = new

    if all(type(a) is Const for a in args):
        folded = Apply(op, args, t.dtype)
        try:
            return Const(eval_ground(folded), t.dtype)
        except EvaluationError:
            return folded

    if op == "or" or op == "and":
        absorbing = op == "or"
        a, b = args
        for x, y in ((a, b), (b, a)):
            if type(x) is Const:
                return Const(absorbing, BOOL) if x.value == absorbing else y
    elif op == "OR" or op == "AND":
        absorbing = op == "OR"
        rest = []
        for a in args:
            if type(a) is Const:
                if a.value == absorbing:
                    return Const(absorbing, BOOL)
                continue
            rest.append(a)
        if len(rest) == 1:
            return rest[0]
        if len(rest) != len(args):
            args = tuple(rest)
    elif op == "*":
        a, b = args
        for x, y in ((a, b), (b, a)):
            if _is(x, 0, INT) and y.dtype == INT:
                return x
            if type(x) is Const and x.dtype != BOOL and x.value == 1 and y.dtype == t.dtype:
                return y
    elif op == "+":
        a, b = args
        for x, y in ((a, b), (b, a)):
            if _is(x, 0, INT) and y.dtype == INT:
                return y
    if args is t.args:
        return t
    return Apply(op, args, t.dtype)


def _retype(t, dtype):
    """A branch of a numeric if-then-else may be int while the whole is num."""
    if t.dtype == dtype:
        return t
    if type(t) is Const:
        return Const(float(t.value), dtype)
    # keep the promotion explicit so the value stays a float
    return Apply("MAX", (t,), dtype)


def strict_simplify(t):
    """Identity until ground, then evaluate."""
    if type(t) is Const:
        return t
    if is_ground(t):
        return Const(eval_ground(t), t.dtype)
    return t


def size(t) -> int:
    if type(t) is Apply:
        return 1 + sum(size(a) for a in t.args)
    return 1
