"""Parser, type checker and canonical printer for the Lola-style specification language.

A specification is a sequence of node blocks::

    @1 {
      input num y
      input bool reset
      define int acc = y + root[-1|0]
    }
    @2 {
      output int root lazy = if reset then 0 else acc
    }

Each stream lives on the node of its enclosing block.  ``eval`` marks a
stream as eager (the default), ``lazy`` as lazy.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

BOOL, INT, NUM = "bool", "int", "num"
DATATYPES = (BOOL, INT, NUM)
INT_MIN, INT_MAX = -(2**63), 2**63 - 1

EAGER, LAZY = "eager", "lazy"
INPUT_KINDS = ("input",)
DEFINED_KINDS = ("define", "output")


class EvaluationError(ArithmeticError):
    """Division by zero, int overflow or a non-finite value forced into an int."""


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Const:
    value: object
    dtype: str
    pos: tuple | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Var:
    name: str
    pos: tuple | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Offset:
    name: str
    offset: int
    default: Const
    pos: tuple | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Apply:
    op: str
    args: tuple
    dtype: str | None = None
    pos: tuple | None = field(default=None, compare=False, repr=False)


def const(value) -> Const:
    """Build a constant, inferring the datatype from the Python value."""
    if isinstance(value, bool):
        return Const(value, BOOL)
    if isinstance(value, int):
        return Const(value, INT)
    return Const(float(value), NUM)


def walk(term):
    stack = [term]
    while stack:
        t = stack.pop()
        yield t
        if type(t) is Apply:
            stack.extend(reversed(t.args))


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

ARITH = {"+", "-", "*"}
COMPARE = {"<", "<=", ">", ">="}
EQUALITY = {"==", "!="}
BINARY_BOOL = {"and", "or"}
VARIADIC = {"AND", "OR", "AVG", "MAX", "MIN", "SUM"}
FIXED_ARITY = {
    **{op: 2 for op in ARITH | COMPARE | EQUALITY | BINARY_BOOL | {"/"}},
    "not": 1,
    "neg": 1,
    "ite": 3,
}


def is_numeric(dtype) -> bool:
    return dtype in (INT, NUM)


def check_int(v: int) -> int:
    if v < INT_MIN or v > INT_MAX:
        raise EvaluationError(f"int overflow: {v}")
    return v


def coerce(value, dtype):
    """Convert a computed value to the representation of ``dtype``."""
    if dtype == NUM:
        return float(value)
    if dtype == INT:
        if isinstance(value, float):
            if not math.isfinite(value):
                raise EvaluationError(f"cannot store {value} in an int stream")
            value = int(value)
        return check_int(int(value))
    return bool(value)


def apply_op(op: str, vals, dtype: str):
    """Evaluate a function symbol on already evaluated arguments."""
    if op in ARITH:
        a, b = vals
        if dtype == INT:
            if op == "+":
                return check_int(a + b)
            if op == "-":
                return check_int(a - b)
            return check_int(a * b)
        a, b = float(a), float(b)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        return a * b
    if op == "/":
        a, b = vals
        if b == 0:
            raise EvaluationError("division by zero")
        return float(a) / float(b)
    if op == "neg":
        return check_int(-vals[0]) if dtype == INT else -float(vals[0])
    if op == "<":
        return vals[0] < vals[1]
    if op == "<=":
        return vals[0] <= vals[1]
    if op == ">":
        return vals[0] > vals[1]
    if op == ">=":
        return vals[0] >= vals[1]
    if op == "==":
        return vals[0] == vals[1]
    if op == "!=":
        return vals[0] != vals[1]
    if op == "and":
        return vals[0] and vals[1]
    if op == "or":
        return vals[0] or vals[1]
    if op == "not":
        return not vals[0]
    if op == "ite":
        v = vals[1] if vals[0] else vals[2]
        return float(v) if dtype == NUM else v
    if op == "AND":
        return all(vals)
    if op == "OR":
        return any(vals)
    if op == "AVG":
        total = 0.0
        for v in vals:
            total += float(v)
        return total / len(vals)
    if op in ("MAX", "MIN"):
        v = max(vals) if op == "MAX" else min(vals)
        return float(v) if dtype == NUM else v
    if op == "SUM":
        if dtype == INT:
            return check_int(sum(vals))
        total = 0.0
        for v in vals:
            total += float(v)
        return total
    raise ValueError(f"unknown operator {op!r}")


def result_type(op: str, arg_types):
    """Result datatype of ``op`` applied to ``arg_types``; None if ill-typed."""
    if op in ARITH or op in ("MAX", "MIN", "SUM"):
        if all(is_numeric(t) for t in arg_types):
            return INT if all(t == INT for t in arg_types) else NUM
        return None
    if op in ("/", "AVG"):
        return NUM if all(is_numeric(t) for t in arg_types) else None
    if op == "neg":
        return arg_types[0] if is_numeric(arg_types[0]) else None
    if op in COMPARE:
        return BOOL if all(is_numeric(t) for t in arg_types) else None
    if op in EQUALITY:
        a, b = arg_types
        if (is_numeric(a) and is_numeric(b)) or (a == b == BOOL):
            return BOOL
        return None
    if op in BINARY_BOOL or op in ("not", "AND", "OR"):
        return BOOL if all(t == BOOL for t in arg_types) else None
    if op == "ite":
        c, a, b = arg_types
        if c != BOOL:
            return None
        if a == b:
            return a
        if is_numeric(a) and is_numeric(b):
            return NUM
        return None
    return None


# ---------------------------------------------------------------------------
# Specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StreamVariable:
    name: str
    kind: str
    dtype: str
    node: str
    comm: str = EAGER
    value: object = None
    pos: tuple | None = field(default=None, compare=False, repr=False)

    @property
    def is_input(self) -> bool:
        return self.kind == "input"

    @property
    def is_const(self) -> bool:
        return self.kind == "const"

    @property
    def is_defined(self) -> bool:
        return self.kind in DEFINED_KINDS


@dataclass
class Specification:
    streams: dict  # name -> StreamVariable, in declaration order
    equations: dict  # name -> Term
    nodes: frozenset

    def stream(self, name: str) -> StreamVariable:
        return self.streams[name]

    @property
    def inputs(self) -> list[str]:
        return [s.name for s in self.streams.values() if s.is_input]

    @property
    def defined(self) -> list[str]:
        return [s.name for s in self.streams.values() if s.is_defined]

    @property
    def outputs(self) -> list[str]:
        """Streams declared with ``output``; falls back to all defined streams."""
        outs = [s.name for s in self.streams.values() if s.kind == "output"]
        return outs or self.defined

    @property
    def monitored(self) -> list[str]:
        """Every stream that has a value per instant (inputs and defined)."""
        return [s.name for s in self.streams.values() if not s.is_const]

    def node_of(self, name: str) -> str:
        return self.streams[name].node

    def placed(self, placement: dict) -> "Specification":
        """Copy with some streams moved to other nodes."""
        streams = {
            n: _replace(s, node=placement.get(n, s.node)) for n, s in self.streams.items()
        }
        return Specification(streams, dict(self.equations), frozenset(s.node for s in streams.values()))

    def with_comm(self, comm: dict | str) -> "Specification":
        """Copy with communication strategies overridden (one value or a per-stream map)."""
        streams = {}
        for n, s in self.streams.items():
            c = comm if isinstance(comm, str) else comm.get(n, s.comm)
            streams[n] = s if s.is_const else _replace(s, comm=c)
        return Specification(streams, dict(self.equations), self.nodes)


def _replace(s: StreamVariable, **changes) -> StreamVariable:
    fields = dict(name=s.name, kind=s.kind, dtype=s.dtype, node=s.node, comm=s.comm, value=s.value, pos=s.pos)
    fields.update(changes)
    return StreamVariable(**fields)


def node_sort_key(node: str):
    return (0, int(node), "") if node.isdigit() else (1, 0, node)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # lexical | syntax | unknown-identifier | duplicate | type-mismatch | arity | empty | ill-formed
    message: str
    line: int = 0
    col: int = 0

    def __str__(self):
        return f"{self.line}:{self.col}: {self.kind}: {self.message}"


class SpecError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

KEYWORDS = {
    "input", "define", "output", "const", "bool", "num", "int", "eval", "lazy",
    "if", "then", "else", "and", "or", "not", "true", "false",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>(//|\#)[^\n]*)
  | (?P<number>\d+\.\d*([eE][+-]?\d+)?|\d+[eE][+-]?\d+|\.\d+([eE][+-]?\d+)?|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|!=|[@{}\[\]|(),+\-*/<>=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number | ident | keyword | op | eof
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    line, line_start, i = 1, 0, 0
    while i < len(source):
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise SpecError([Diagnostic("lexical", f"unexpected character {source[i]!r}", line, i - line_start + 1)])
        kind = m.lastgroup
        text = m.group()
        col = i - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            tokens.append(Token("keyword" if text in KEYWORDS else "ident", text, line, col))
        elif kind in ("number", "op"):
            tokens.append(Token(kind, text, line, col))
        i = m.end()
    tokens.append(Token("eof", "", line, i - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        found = tok.text or "end of input"
        raise SpecError([Diagnostic("syntax", f"{msg}, found {found!r}", tok.line, tok.col)])

    def accept(self, text):
        if self.tok.text == text and self.tok.kind in ("op", "keyword"):
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            self.error(f"expected {text!r}")
        return self.tokens[self.i - 1]

    def ident(self):
        if self.tok.kind != "ident":
            self.error("expected an identifier")
        tok = self.tok
        self.i += 1
        return tok

    # declarations ---------------------------------------------------------

    def spec(self):
        decls = []  # (kind, dtype, name, node, comm, body, pos)
        while self.tok.kind != "eof":
            if self.tok.text in ("input", "define", "output", "const"):
                self.error("stream declared outside of a node block")
            self.expect("@")
            if self.tok.kind not in ("ident", "number") or not re.fullmatch(r"[A-Za-z0-9_]+", self.tok.text):
                self.error("expected a node identifier")
            node = self.tok.text
            self.i += 1
            self.expect("{")
            while not self.accept("}"):
                if self.tok.kind == "eof":
                    self.error("unterminated node block")
                decls.append(self.decl(node))
        return decls

    def decl(self, node):
        start = self.tok
        kind = self.tok.text
        if kind not in ("input", "define", "output", "const"):
            self.error("expected a declaration")
        self.i += 1
        if self.tok.text not in DATATYPES:
            self.error("expected a datatype (bool, num, int)")
        dtype = self.tok.text
        self.i += 1
        name = self.ident().text
        comm = EAGER
        if kind != "const" and self.tok.text in ("eval", "lazy"):
            comm = EAGER if self.tok.text == "eval" else LAZY
            self.i += 1
        body = None
        if kind == "const":
            self.expect("=")
            body = self.literal()
        elif kind != "input":
            self.expect("=")
            body = self.expr()
        return kind, dtype, name, node, comm, body, (start.line, start.col)

    # expressions ----------------------------------------------------------

    def expr(self):
        if self.tok.text == "if" and self.tok.kind == "keyword":
            pos = self._pos()
            self.i += 1
            c = self.expr()
            self.expect("then")
            a = self.expr()
            self.expect("else")
            b = self.expr()
            return Apply("ite", (c, a, b), pos=pos)
        return self.or_expr()

    def _pos(self):
        return (self.tok.line, self.tok.col)

    def _binary(self, sub, ops):
        left = sub()
        while self.tok.kind in ("op", "keyword") and self.tok.text in ops:
            pos = self._pos()
            op = self.tok.text
            self.i += 1
            left = Apply(op, (left, sub()), pos=pos)
        return left

    def or_expr(self):
        return self._binary(self.and_expr, ("or",))

    def and_expr(self):
        return self._binary(self.not_expr, ("and",))

    def not_expr(self):
        if self.tok.text == "not" and self.tok.kind == "keyword":
            pos = self._pos()
            self.i += 1
            return Apply("not", (self.not_expr(),), pos=pos)
        return self.comparison()

    def comparison(self):
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in COMPARE | EQUALITY:
            pos = self._pos()
            op = self.tok.text
            self.i += 1
            left = Apply(op, (left, self.additive()), pos=pos)
        return left

    def additive(self):
        return self._binary(self.multiplicative, ("+", "-"))

    def multiplicative(self):
        return self._binary(self.unary, ("*", "/"))

    def unary(self):
        if self.tok.text == "-" and self.tok.kind == "op":
            pos = self._pos()
            self.i += 1
            if self.tok.kind == "number":
                c = self.number()
                return Const(-c.value, c.dtype, pos=pos)
            return Apply("neg", (self.unary(),), pos=pos)
        return self.primary()

    def number(self):
        tok = self.tok
        self.i += 1
        if re.fullmatch(r"\d+", tok.text):
            return Const(int(tok.text), INT, pos=(tok.line, tok.col))
        return Const(float(tok.text), NUM, pos=(tok.line, tok.col))

    def literal(self):
        tok = self.tok
        if tok.text in ("true", "false") and tok.kind == "keyword":
            self.i += 1
            return Const(tok.text == "true", BOOL, pos=(tok.line, tok.col))
        neg = self.accept("-")
        if not neg:
            self.accept("+")
        if self.tok.kind != "number":
            self.error("expected a literal")
        c = self.number()
        return Const(-c.value, c.dtype, pos=c.pos) if neg else c

    def primary(self):
        tok = self.tok
        if tok.kind == "number":
            return self.number()
        if tok.kind == "keyword" and tok.text in ("true", "false"):
            return self.literal()
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "ident":
            self.i += 1
            pos = (tok.line, tok.col)
            if self.accept("("):
                args = []
                if not self.accept(")"):
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                    self.expect(")")
                return Apply(tok.text, tuple(args), pos=pos)
            if self.accept("["):
                neg = self.accept("-")
                if not neg:
                    self.accept("+")
                if self.tok.kind != "number" or not self.tok.text.isdigit():
                    self.error("expected an integer offset")
                off = int(self.tok.text)
                self.i += 1
                self.expect("|")
                default = self.literal()
                self.expect("]")
                return Offset(tok.text, -off if neg else off, default, pos=pos)
            return Var(tok.text, pos=pos)
        self.error("expected an expression")


def parse(source: str, check: bool = True) -> Specification:
    """Parse ``source`` into a typed specification.

    With ``check=False`` name resolution and type checking are skipped and
    the raw, untyped tree is returned (useful for feeding :func:`typecheck`).
    """
    decls = _Parser(tokenize(source)).spec()
    if not decls:
        raise SpecError([Diagnostic("empty", "no streams declared", 1, 1)])
    streams, equations, diags = {}, {}, []
    for kind, dtype, name, node, comm, body, pos in decls:
        if name in streams:
            diags.append(Diagnostic("duplicate", f"duplicate declaration of {name!r}", *pos))
            continue
        value = None
        if kind == "const":
            value = body.value
            if dtype == NUM and body.dtype == INT:
                value = float(value)
            elif body.dtype != dtype:
                diags.append(Diagnostic("type-mismatch", f"constant {name!r} is {dtype} but literal is {body.dtype}", *pos))
        streams[name] = StreamVariable(name, kind, dtype, node, EAGER if kind == "const" else comm, value, pos)
        if kind in DEFINED_KINDS:
            equations[name] = body
    spec = Specification(streams, equations, frozenset(s.node for s in streams.values()))
    if diags:
        raise SpecError(diags)
    if not check:
        return spec
    typed, diags = _resolve(spec)
    if diags:
        raise SpecError(diags)
    return typed


def typecheck(spec: Specification) -> list[Diagnostic]:
    """Return type and name diagnostics; empty when the specification is well typed."""
    return _resolve(spec)[1]


def _resolve(spec: Specification):
    diags = []
    equations = {}
    for name, term in spec.equations.items():
        want = spec.streams[name].dtype
        typed, got = _annotate(term, spec, diags)
        if got is not None and not _assignable(got, want):
            line, col = spec.streams[name].pos or (0, 0)
            diags.append(Diagnostic("type-mismatch", f"stream {name!r} is {want} but its equation is {got}", line, col))
        equations[name] = typed
    return Specification(dict(spec.streams), equations, spec.nodes), diags


def _assignable(got, want) -> bool:
    return got == want or (is_numeric(got) and is_numeric(want))


def _annotate(term, spec, diags):
    """Return (typed term, datatype or None on error)."""
    pos = term.pos or (0, 0)
    if type(term) is Const:
        return term, term.dtype
    if type(term) is Var:
        s = spec.streams.get(term.name)
        if s is None:
            diags.append(Diagnostic("unknown-identifier", f"unknown stream {term.name!r}", *pos))
            return term, None
        if s.is_const:
            return Const(s.value, s.dtype, pos=term.pos), s.dtype
        return term, s.dtype
    if type(term) is Offset:
        s = spec.streams.get(term.name)
        if s is None:
            diags.append(Diagnostic("unknown-identifier", f"unknown stream {term.name!r}", *pos))
            return term, None
        if s.is_const:
            diags.append(Diagnostic("type-mismatch", f"cannot offset constant {term.name!r}", *pos))
            return term, None
        d = term.default
        if d.dtype == INT and s.dtype == NUM:
            d = Const(float(d.value), NUM, pos=d.pos)
        elif d.dtype != s.dtype:
            diags.append(Diagnostic("type-mismatch", f"default of {term.name!r} must be {s.dtype}", *pos))
            return term, None
        return Offset(term.name, term.offset, d, pos=term.pos), s.dtype
    op = term.op
    if op in VARIADIC:
        if not term.args:
            diags.append(Diagnostic("arity", f"{op} needs at least one argument", *pos))
            return term, None
    elif op in FIXED_ARITY:
        if len(term.args) != FIXED_ARITY[op]:
            diags.append(Diagnostic("arity", f"{op} takes {FIXED_ARITY[op]} arguments, got {len(term.args)}", *pos))
            return term, None
    else:
        diags.append(Diagnostic("unknown-identifier", f"unknown function {op!r}", *pos))
        return term, None
    args, types = [], []
    for a in term.args:
        ta, t = _annotate(a, spec, diags)
        args.append(ta)
        types.append(t)
    if any(t is None for t in types):
        return Apply(op, tuple(args), None, pos=term.pos), None
    rt = result_type(op, types)
    if rt is None:
        diags.append(Diagnostic("type-mismatch", f"{op} cannot be applied to ({', '.join(types)})", *pos))
        return Apply(op, tuple(args), None, pos=term.pos), None
    return Apply(op, tuple(args), rt, pos=term.pos), rt


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_LEVEL = {"ite": 0, "or": 1, "and": 2, "not": 3, "+": 5, "-": 5, "*": 6, "/": 6, "neg": 7}
for _op in COMPARE | EQUALITY:
    _LEVEL[_op] = 4
_PRIMARY = 8


def format_literal(value, dtype) -> str:
    if dtype == BOOL:
        return "true" if value else "false"
    if dtype == INT:
        return str(value)
    text = repr(float(value))
    return text if any(ch in text for ch in ".en") else text + ".0"


def _level(t) -> int:
    if type(t) is Apply:
        return _LEVEL.get(t.op, _PRIMARY)
    if type(t) is Const and t.dtype != BOOL and t.value < 0:
        return 7
    return _PRIMARY


def format_term(t) -> str:
    def wrap(child, min_level):
        text = format_term(child)
        return f"({text})" if _level(child) < min_level else text

    if type(t) is Const:
        return format_literal(t.value, t.dtype)
    if type(t) is Var:
        return t.name
    if type(t) is Offset:
        return f"{t.name}[{t.offset}|{format_literal(t.default.value, t.default.dtype)}]"
    op, args = t.op, t.args
    if op == "ite":
        return f"if {wrap(args[0], 1)} then {wrap(args[1], 1)} else {format_term(args[2])}"
    if op == "not":
        return f"not {wrap(args[0], 3)}"
    if op == "neg":
        inner = format_term(args[0])
        return f"-({inner})" if _level(args[0]) < _PRIMARY or type(args[0]) is Const else f"-{inner}"
    if op in _LEVEL:
        lvl = _LEVEL[op]
        left_min = lvl + 1 if lvl == 4 else lvl
        return f"{wrap(args[0], left_min)} {op} {wrap(args[1], lvl + 1)}"
    return f"{op}({', '.join(format_term(a) for a in args)})"


def format_spec(spec: Specification) -> str:
    """Canonical text: blocks sorted by node id, one declaration per line."""
    lines = []
    by_node = {}
    for s in spec.streams.values():
        by_node.setdefault(s.node, []).append(s)
    for node in sorted(by_node, key=node_sort_key):
        lines.append(f"@{node} {{")
        for s in by_node[node]:
            if s.is_const:
                lines.append(f"  const {s.dtype} {s.name} = {format_literal(s.value, s.dtype)}")
                continue
            head = f"  {s.kind} {s.dtype} {s.name}" + (" lazy" if s.comm == LAZY else "")
            if s.is_input:
                lines.append(head)
            else:
                lines.append(f"{head} = {format_term(spec.equations[s.name])}")
        lines.append("}")
    return "\n".join(lines) + "\n"


def load(path) -> Specification:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())
