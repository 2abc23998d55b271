"""Experiment runner: traces, random specifications, metric files, regression suite."""

from __future__ import annotations

import csv
import json
import math
import random
import statistics
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import analysis
from .graphs import classify_spec
from .monitor import run
from .netsim import (
    DelayModel,
    DelayTrace,
    constant,
    constant_peak,
    model_from_dict,
    model_to_dict,
    normal,
    normal_peak,
)
from .oracle import Valuation, evaluate, first_mismatch
from .specdsl import (
    BOOL,
    INT,
    NUM,
    Apply,
    Const,
    Diagnostic,
    EvaluationError,
    SpecError,
    format_literal,
    load,
    parse,
)
from .terms import InstantVariable, Leaf

OUTPUT_KINDS = ("output",)


class OracleMismatch(Exception):
    def __init__(self, stream, index, expected, actual):
        self.stream, self.index, self.expected, self.actual = stream, index, expected, actual
        super().__init__(f"{stream}[{index}]: oracle {expected!r}, monitors {actual!r}")


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("dsrv") / "fixtures" / name))


def load_fixture(name: str):
    return load(fixture_path(name if "." in name else name + ".lola"))


def reported_streams(spec) -> list:
    """Streams declared ``output``, or every defined stream if there are none."""
    out = [n for n in spec.defined if spec.streams[n].kind in OUTPUT_KINDS]
    return sorted(out or spec.defined)


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


def _parse_cell(text, dtype, where):
    text = text.strip()
    try:
        if dtype == BOOL:
            low = text.lower()
            if low in ("true", "1", "t", "yes"):
                return True
            if low in ("false", "0", "f", "no"):
                return False
            raise ValueError(text)
        if dtype == INT:
            return int(text)
        v = float(text)
        if not math.isfinite(v):
            raise ValueError(text)
        return v
    except ValueError:
        raise ValueError(f"{where}: cannot read {text!r} as {dtype}") from None


def ingest_trace(path, spec, extend: int = 1) -> Valuation:
    """Read one row per tick; the header names the input streams.

    Empty cells are gaps: num columns are interpolated linearly between the
    nearest known rows, bool and int columns repeat the previous value.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    # a blank line is not a tick, a line of empty cells is a tick of gaps
    rows = [r for r in rows if r]
    if not rows:
        raise ValueError(f"{path}: empty trace file")
    header = [h.strip() for h in rows[0]]
    inputs = set(spec.inputs)
    unknown = [h for h in header if h not in inputs]
    if unknown:
        raise ValueError(f"{path}: unknown column(s) {unknown}")
    missing = sorted(inputs - set(header))
    if missing:
        raise ValueError(f"{path}: no column for input(s) {missing}")
    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: trace has no rows")
    columns = {}
    for c, name in enumerate(header):
        dtype = spec.streams[name].dtype
        cells = []
        for r, row in enumerate(body, start=2):
            text = row[c] if c < len(row) else ""
            cells.append(None if not text.strip() else _parse_cell(text, dtype, f"{path}:{r}:{name}"))
        columns[name] = _fill_gaps(cells, dtype, name)
    return extend_trace(Valuation(len(body), columns), extend)


def _fill_gaps(cells, dtype, name):
    known = [i for i, v in enumerate(cells) if v is not None]
    if not known:
        raise ValueError(f"column {name!r} has no values")
    out = list(cells)
    if dtype == NUM:
        for i, v in enumerate(cells):
            if v is not None:
                continue
            before = [k for k in known if k < i]
            after = [k for k in known if k > i]
            if before and after:
                a, b = before[-1], after[0]
                out[i] = cells[a] + (cells[b] - cells[a]) * (i - a) / (b - a)
            else:
                out[i] = cells[(before or after)[-1 if before else 0]]
        return out
    last = cells[known[0]]
    for i, v in enumerate(cells):
        if v is None:
            out[i] = last
        else:
            last = v
    return out


def extend_trace(trace: Valuation, factor: int) -> Valuation:
    """Repeat the rows cyclically ``factor`` times."""
    if factor < 1:
        raise ValueError("extension factor must be at least 1")
    if factor == 1:
        return trace
    return Valuation(trace.length * factor, {n: list(v) * factor for n, v in trace.streams.items()})


def synthetic_trace(spec, length: int, seed: int = 0, dists: dict | None = None) -> Valuation:
    """Seeded random inputs.

    ``dists`` maps an input to ``{"p": ...}`` (bool), ``{"lo": ..., "hi": ...}``
    (int) or ``{"mean": ..., "stddev": ...}`` (num).
    """
    if length < 1:
        raise ValueError("trace length must be at least 1")
    dists = dists or {}
    out = {}
    for name in sorted(spec.inputs):
        dtype = spec.streams[name].dtype
        cfg = dists.get(name, {})
        rng = random.Random(f"{seed}:{name}")
        if dtype == BOOL:
            p = cfg.get("p", 0.5)
            out[name] = [rng.random() < p for _ in range(length)]
        elif dtype == INT:
            lo, hi = cfg.get("lo", -10), cfg.get("hi", 10)
            out[name] = [rng.randint(lo, hi) for _ in range(length)]
        else:
            mu, sd = cfg.get("mean", 0.0), cfg.get("stddev", 10.0)
            out[name] = [round(rng.gauss(mu, sd), 3) for _ in range(length)]
    return Valuation(length, out)


def write_trace_csv(trace: Valuation, path):
    names = sorted(trace.streams)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for k in range(trace.length):
            w.writerow([_cell(trace.streams[n][k]) for n in names])


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


# ---------------------------------------------------------------------------
# Random specifications and terms
# ---------------------------------------------------------------------------


class _SpecWriter:
    def __init__(self, rng, streams, max_offset=(-3, 2), depth=3):
        self.rng = rng
        self.streams = streams  # name -> dtype of streams that may be referenced
        self.lo, self.hi = max_offset
        self.depth = depth

    def literal(self, dtype):
        r = self.rng
        if dtype == BOOL:
            return format_literal(r.random() < 0.5, BOOL)
        if dtype == INT:
            return str(r.randint(-4, 4))
        return format_literal(float(r.randint(-8, 8)) / 2, NUM)

    def ref(self, dtype):
        ok = [n for n, t in self.streams.items() if t == dtype or (dtype == NUM and t == INT)]
        if not ok:
            return None
        name = self.rng.choice(sorted(ok))
        w = self.rng.randint(self.lo, self.hi)
        if w == 0 and self.rng.random() < 0.6:
            return name
        return f"{name}[{w}|{self.literal(self.streams[name])}]"

    def term(self, dtype, depth=None):
        depth = self.depth if depth is None else depth
        r = self.rng
        if depth == 0 or r.random() < 0.25:
            ref = self.ref(dtype) if r.random() < 0.8 else None
            return ref or self.literal(dtype)
        d = depth - 1
        if r.random() < 0.15:
            return f"(if {self.term(BOOL, d)} then {self.term(dtype, d)} else {self.term(dtype, d)})"
        if dtype == BOOL:
            pick = r.randrange(5)
            if pick == 0:
                t = r.choice((INT, NUM))
                op = r.choice(("<", "<=", ">", ">=", "==", "!="))
                return f"({self.term(t, d)} {op} {self.term(t, d)})"
            if pick == 1:
                return f"(not {self.term(BOOL, d)})"
            if pick == 2:
                op = r.choice(("AND", "OR"))
                return f"{op}({', '.join(self.term(BOOL, d) for _ in range(r.randint(1, 3)))})"
            return f"({self.term(BOOL, d)} {r.choice(('and', 'or'))} {self.term(BOOL, d)})"
        pick = r.randrange(4)
        if pick == 0:
            op = r.choice(("MAX", "MIN", "SUM") + (("AVG",) if dtype == NUM else ()))
            return f"{op}({', '.join(self.term(dtype, d) for _ in range(r.randint(1, 3)))})"
        if pick == 1 and r.random() < 0.3:
            return f"(- {self.term(dtype, d)})"
        op = r.choice(("+", "-", "*", "+"))
        return f"({self.term(dtype, d)} {op} {self.term(dtype, d)})"


def random_spec_source(rng: random.Random, max_streams=6, max_nodes=4, comm="mixed", offsets=(-3, 2)) -> str:
    """Source text of a random specification (not necessarily well-formed)."""
    n_in = rng.randint(1, 2)
    n_def = rng.randint(1, max_streams - n_in)
    types = (BOOL, INT, NUM)
    streams = {f"i{k}": rng.choice(types) for k in range(n_in)}
    defined = {f"s{k}": rng.choice(types) for k in range(n_def)}
    writer = _SpecWriter(rng, {**streams, **defined}, offsets)
    nodes = [f"n{k}" for k in range(rng.randint(1, max_nodes))]
    blocks = {n: [] for n in nodes}
    for name, t in streams.items():
        blocks[rng.choice(nodes)].append(f"input {t} {name}")
    for name, t in defined.items():
        how = comm if comm != "mixed" else rng.choice(("eager", "lazy"))
        strat = " lazy" if how == "lazy" else ""
        kind = rng.choice(("output", "define"))
        blocks[rng.choice(nodes)].append(f"{kind} {t} {name}{strat} = {writer.term(t)}")
    return "\n".join("@%s{\n  %s\n}" % (n, "\n  ".join(lines)) for n, lines in blocks.items() if lines)


def random_case(rng: random.Random, max_length=200, **kw):
    """A well-formed random specification with an input trace on which the
    oracle succeeds with finite values.  Returns (spec, trace)."""
    while True:
        source = random_spec_source(rng, **kw)
        try:
            spec = parse(source)
        except SpecError:
            continue
        if not classify_spec(spec).well_formed:
            continue
        M = rng.randint(1, max_length)
        trace = synthetic_trace(spec, M, seed=rng.randrange(2**31))
        try:
            out = evaluate(spec, trace)
        except EvaluationError:
            continue
        if any(
            spec.streams[n].dtype == NUM and not all(math.isfinite(v) for v in out.streams[n])
            for n in spec.defined
        ):
            continue
        return spec, trace


def random_delay_model(rng: random.Random, nodes=()) -> DelayModel:
    """One of the four delay kinds with random parameters, sometimes per pair."""

    def one():
        kind = rng.choice(("constant", "constantPeak", "normal", "normalPeak"))
        if kind == "constant":
            return constant(rng.randint(1, 4))
        if kind == "constantPeak":
            return constant_peak(rng.randint(1, 3), rng.randint(0, 60), rng.randint(0, 20), rng.randint(1, 3))
        if kind == "normal":
            return normal(rng.uniform(1, 5), rng.uniform(0, 3), rng.randrange(1000))
        return normal_peak(rng.uniform(1, 4), rng.uniform(0, 2), rng.randrange(1000),
                           rng.randint(0, 60), rng.randint(0, 20), rng.randint(1, 3))

    model = one()
    nodes = sorted(nodes)
    if len(nodes) > 1 and rng.random() < 0.3:
        a, b = rng.sample(nodes, 2)
        model.perPair[(a, b)] = one().default
    return model


def random_term(rng: random.Random, variables, depth=4):
    """A random typed instantiated term over the given (InstantVariable, dtype) pairs."""

    def lit(dtype):
        if dtype == BOOL:
            return Const(rng.random() < 0.5, BOOL)
        if dtype == INT:
            return Const(rng.choice((0, 0, 1, 1, -1, 2, 3, -5)), INT)
        return Const(rng.choice((0.0, 1.0, -1.0, 2.5, 0.5)), NUM)

    def leaf(dtype):
        ok = [(v, t) for v, t in variables if t == dtype]
        if ok and rng.random() < 0.7:
            v, t = rng.choice(ok)
            return Leaf(v, t)
        return lit(dtype)

    def go(dtype, d):
        if d == 0 or rng.random() < 0.2:
            return leaf(dtype)
        if rng.random() < 0.2:
            return Apply("ite", (go(BOOL, d - 1), go(dtype, d - 1), go(dtype, d - 1)), dtype)
        if dtype == BOOL:
            pick = rng.randrange(4)
            if pick == 0:
                t = rng.choice((INT, NUM))
                return Apply(rng.choice(("<", "<=", "==", "!=")), (go(t, d - 1), go(t, d - 1)), BOOL)
            if pick == 1:
                return Apply("not", (go(BOOL, d - 1),), BOOL)
            if pick == 2:
                return Apply(rng.choice(("AND", "OR")), tuple(go(BOOL, d - 1) for _ in range(rng.randint(1, 3))), BOOL)
            return Apply(rng.choice(("and", "or")), (go(BOOL, d - 1), go(BOOL, d - 1)), BOOL)
        if rng.random() < 0.25:
            op = rng.choice(("MAX", "MIN", "SUM"))
            return Apply(op, tuple(go(dtype, d - 1) for _ in range(rng.randint(1, 3))), dtype)
        op = rng.choice(("+", "-", "*"))
        return Apply(op, (go(dtype, d - 1), go(dtype, d - 1)), dtype)

    return go(rng.choice((BOOL, INT, NUM)), depth)


def random_variables(rng: random.Random, n=4):
    types = (BOOL, INT, NUM)
    return [(InstantVariable(rng.randint(0, 3), f"v{k}"), types[k % 3]) for k in range(n)]


def random_value(rng: random.Random, dtype):
    if dtype == BOOL:
        return rng.random() < 0.5
    if dtype == INT:
        return rng.randint(-3, 3)
    return float(rng.randint(-6, 6)) / 2


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    spec: object  # Specification or path
    trace: object = None  # Valuation, CSV path, or None for a synthetic trace
    length: int = 100
    seed: int = 0
    delays: DelayModel = field(default_factory=lambda: constant(1))
    mode: str = "declared"
    extend: int = 1
    out: object = None
    use_simplifier: bool = True
    input_dists: dict | None = None

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("trace length must be at least 1")
        if self.extend < 1:
            raise ValueError("extension factor must be at least 1")
        if self.mode not in ("declared", "eager", "lazy"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def load_spec(self):
        return load(self.spec) if isinstance(self.spec, (str, Path)) else self.spec

    def load_trace(self, spec) -> Valuation:
        if isinstance(self.trace, Valuation):
            return extend_trace(self.trace, self.extend)
        if self.trace is not None:
            return ingest_trace(self.trace, spec, self.extend)
        return extend_trace(synthetic_trace(spec, self.length, self.seed, self.input_dists), self.extend)


def _comm(mode):
    return None if mode == "declared" else mode


def _summary(values):
    return {"min": min(values), "median": statistics.median(values), "max": max(values)}


def checked_run(spec, trace, delays, mode="declared", use_simplifier=True):
    """Run the monitors and compare every value with the oracle."""
    expected = evaluate(spec, trace)
    result = run(spec, trace, delays, comm=_comm(mode), use_simplifier=use_simplifier)
    diff = first_mismatch(spec, expected, result.outputs)
    if diff:
        raise OracleMismatch(*diff)
    return result


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run, verify against the oracle, then write the metric files to ``cfg.out``."""
    spec = cfg.load_spec()
    report = classify_spec(spec)
    if not report.well_formed:
        raise SpecError([Diagnostic("ill-formed", "specification has a zero-weight dependency cycle")])
    trace = cfg.load_trace(spec)
    result = checked_run(spec, trace, cfg.delays, cfg.mode, cfg.use_simplifier)
    spec = result.spec
    M = trace.length
    warnings = []
    if not report.decentralized_efficiently_monitorable:
        warnings.append("not decentralized efficiently monitorable: memory and TTR may grow with the trace")
    shown = reported_streams(spec)
    summary = {
        "length": M,
        "ticks": result.ticks,
        "mode": cfg.mode,
        "simplifier": cfg.use_simplifier,
        "delays": model_to_dict(cfg.delays),
        "classification": report.as_dict(),
        "trace_length_independent": report.decentralized_efficiently_monitorable,
        "ttr": {s: _summary(result.ttr(s)) for s in shown},
        "peak_memory": {n: max(m.mem) for n, m in sorted(result.metrics.items())},
        "messages": {k: result.messages(k) for k in ("resp", "req", "confirm")},
        "max_recorded_delay": result.network.max_recorded_delay(),
        "warnings": warnings,
    }
    if cfg.out is not None:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_outputs_csv(spec, result.outputs, out / "outputs.csv", shown)
        write_ttr_csv(result, out / "ttr.csv", shown)
        write_memory_csv(result, out / "memory.csv")
        write_messages_csv(result, out / "messages.csv")
        write_bounds_csv(result, out / "bounds.csv", shown)
        (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    summary["result"] = result
    return summary


def write_outputs(spec, values: Valuation, fh, streams=None):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["stream", "index", "value"])
    for s in streams or reported_streams(spec):
        for k, v in enumerate(values.streams[s]):
            w.writerow([s, k, _cell(v)])


def write_outputs_csv(spec, values: Valuation, path, streams=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_outputs(spec, values, fh, streams)


def write_ttr_csv(result, path, streams):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["stream", "index", "instantiatedAt", "resolvedAt", "ttr"])
        for s in streams:
            for k in range(result.length):
                _, inst, res = result.log[InstantVariable(k, s)]
                w.writerow([s, k, inst, res, res - k])


def write_memory_csv(result, path):
    result.write_metrics_csv(path)


def write_messages_csv(result, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["tick", "src", "dst", "type", "stream", "index"])
        for m in result.network.sent:
            w.writerow([m.sentAt, m.src, m.dst, m.type, m.stream.stream, m.stream.index])


def bounds_rows(result, streams=None):
    """(stream, index, exact, temporary, aeternal, observed TTR) per instant variable."""
    spec, M = result.spec, result.length
    trace = result.network.trace
    exact = analysis.mtr_exact(spec, M, trace)
    _, horizon, aeternal = analysis.aeternal_from_trace(spec, M, trace, horizon=result.ticks)
    temporary = analysis.mtr_temporary(spec, M, trace, horizon=horizon)
    rows = []
    for s in streams or reported_streams(spec):
        for k in range(M):
            x = InstantVariable(k, s)
            rows.append((s, k, exact[x], temporary[x], aeternal[x], result.log[x][2] - k))
    return rows


def write_bounds_csv(result, path, streams=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["stream", "index", "mtr_exact", "mtr_temporary", "mtr_aeternal", "ttr_observed"])
        w.writerows(bounds_rows(result, streams))


def compare_sync_simulation(cfg: ExperimentConfig) -> dict:
    """Run once over the asynchronous network and once with every message
    taking the largest delay seen in that run, then compare."""
    spec = cfg.load_spec()
    trace = cfg.load_trace(spec)
    fast = checked_run(spec, trace, cfg.delays, cfg.mode, cfg.use_simplifier)
    d = max(1, fast.network.max_recorded_delay())
    slow = checked_run(spec, trace, constant(d), cfg.mode, cfg.use_simplifier)
    streams = reported_streams(fast.spec)
    per_stream = {}
    dominated = True
    for s in streams:
        a, b = fast.ttr(s), slow.ttr(s)
        dominated &= all(x <= y for x, y in zip(a, b))
        per_stream[s] = {
            "async": _summary(a),
            "sync": _summary(b),
            "ttr_ratio": (statistics.fmean(b) / statistics.fmean(a)) if statistics.fmean(a) else (1.0 if a == b else math.inf),
            "identical": a == b,
        }
    mem_async = {n: max(m.mem) for n, m in sorted(fast.metrics.items())}
    mem_sync = {n: max(m.mem) for n, m in sorted(slow.metrics.items())}
    report = {
        "sync_delay": d,
        "streams": per_stream,
        "async_ttr_dominated": dominated,
        "peak_memory_async": mem_async,
        "peak_memory_sync": mem_sync,
        "memory_ratio": max(mem_sync.values()) / max(1, max(mem_async.values())),
    }
    if cfg.out is not None:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "compare_ttr.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["stream", "index", "ttr_async", "ttr_sync"])
            for s in streams:
                for k, (a, b) in enumerate(zip(fast.ttr(s), slow.ttr(s))):
                    w.writerow([s, k, a, b])
        (out / "compare.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    report["async"], report["sync"] = fast, slow
    return report


# ---------------------------------------------------------------------------
# Regression suite
# ---------------------------------------------------------------------------


def tree_spec(depth: int, extra_leaves: int = 0):
    """A chain of ``depth`` hops into n0 plus ``extra_leaves`` one-hop sensors
    attached to n0."""
    blocks = [f"@c{depth}{{\n  input num x\n  define num c{depth}v = x + 1.0\n}}"]
    for k in range(depth - 1, 0, -1):
        blocks.append(f"@c{k}{{\n  define num c{k}v = c{k + 1}v * 0.5\n}}")
    leaves = [f"e{j}v" for j in range(extra_leaves)]
    for j in range(extra_leaves):
        blocks.append(f"@e{j}{{\n  input num y{j}\n  define num e{j}v = y{j} - 1.0\n}}")
    root = " + ".join(["c1v", *leaves])
    blocks.append(f"@n0{{\n  output num root = {root}\n}}")
    return parse("\n".join(blocks))


def _check(name, passed, **detail):
    return {"check": name, "passed": bool(passed), **detail}


def _sync_subsumption(seed):
    details = []
    ok = True
    for fixture in ("acc_root_colocated", "tree3"):
        spec = load_fixture(fixture)
        for d in (1, 3):
            trace = synthetic_trace(spec, 200, seed)
            r = checked_run(spec, trace, constant(d))
            want = analysis.ttr_sync(spec, d)
            for s in reported_streams(spec):
                got = set(r.ttr(s))
                ok &= got == {want[s]}
                details.append(f"{fixture} d={d} {s}: ttr {sorted(got)} predicted {want[s]}")
    return _check("sync_subsumption", ok, details=details)


def _counter_example():
    spec = load_fixture("ab")
    r = run(spec, Valuation(100, {}), constant(2))
    rep = classify_spec(spec)
    ok = all(r.resolved_at(s, n) == 2 * n for s in ("a", "b") for n in range(100))
    ok &= rep.efficiently_monitorable and not rep.decentralized_efficiently_monitorable
    bounds = {s: ("unbounded" if v == analysis.UNBOUNDED else v) for s, v in analysis.ttr_sync(spec, 2).items()}
    return _check("unbounded_counter_example", ok, ttr_sync=bounds)


def _sync_emulation(seed):
    cfg = ExperimentConfig(load_fixture("depth2"), length=300, seed=seed,
                           delays=normal_peak(3, 1, seed, peakStart=100, peakHeight=20))
    rep = compare_sync_simulation(cfg)
    mem_ok = max(rep["peak_memory_sync"].values()) >= max(rep["peak_memory_async"].values())
    return _check("sync_emulation_cost", rep["async_ttr_dominated"] and mem_ok,
                  sync_delay=rep["sync_delay"], memory_ratio=rep["memory_ratio"],
                  ttr_ratio={s: v["ttr_ratio"] for s, v in rep["streams"].items()})


def _bounds_hold(seed):
    spec = load_fixture("depth2")
    trace = synthetic_trace(spec, 200, seed)
    r = checked_run(spec, trace, constant_peak(2, 50, 30))
    rows = bounds_rows(r, sorted(spec.monitored))
    bad = [row for row in rows if not (row[5] + row[1] <= row[2] <= row[3] <= row[4])]
    return _check("bounds_hold", not bad, violations=len(bad))


def _bounded_memory(seed, length=5000):
    spec = load_fixture("tree3")
    trace = synthetic_trace(spec, length, seed)
    r = checked_run(spec, trace, normal_peak(3, 1, seed, peakStart=length // 2, peakHeight=15))
    bound = analysis.memory_bound(spec, length, analysis.TraceArrivals(r.network.trace))
    ok = True
    detail = {}
    for n, m in sorted(r.metrics.items()):
        late = max(m.mem[length - length // 10:length])
        early = max(m.mem[length // 10:length // 5])
        ok &= abs(late - early) <= 2 and max(m.mem) <= bound[n]
        detail[n] = {"early": early, "late": late, "peak": max(m.mem), "bound": bound[n]}
    return _check("bounded_memory", ok, nodes=detail)


def _scaling(seed):
    peaks = {}
    for extra in (0, 2, 6):
        spec = tree_spec(3, extra)
        trace = synthetic_trace(spec, 200, seed)
        r = checked_run(spec, trace, constant(2))
        peaks[len(spec.nodes)] = max(r.metrics["n0"].mem)
    return _check("root_memory_vs_monitor_count", len(set(peaks.values())) == 1, root_peak_by_nodes=peaks)


def _redundancy(seed):
    spec = load_fixture("redundancy")
    with open(fixture_path("redundancy_delays.json"), encoding="utf-8") as fh:
        model = model_from_dict(json.load(fh))
    trace = synthetic_trace(spec, 150, seed, {"temp": {"mean": 30.0, "stddev": 5.0},
                                              "co2": {"mean": 800.0, "stddev": 50.0}})
    r = checked_run(spec, trace, model)
    fast, slow = redundancy_branch_bounds(spec, trace.length, r.network.trace)
    ok = True
    for k, v in enumerate(r.outputs.streams["alarm"]):
        want = fast[k] if v else max(fast[k], slow[k])
        ok &= r.resolved_at("alarm", k) == want
    ttr_true = [r.ttr("alarm")[k] for k, v in enumerate(r.outputs.streams["alarm"]) if v]
    ttr_false = [r.ttr("alarm")[k] for k, v in enumerate(r.outputs.streams["alarm"]) if not v]
    return _check("redundancy", ok, max_ttr_true=max(ttr_true, default=None), max_ttr_false=max(ttr_false, default=None))


def redundancy_branch_bounds(spec, M, trace: DelayTrace):
    """Arrival tick at the alarm node of each redundant branch, per position."""
    table = analysis.mtr_exact(spec, M, trace)
    home = spec.node_of("alarm")
    out = []
    for s in ("risk_red", "risk"):
        n = spec.node_of(s)
        out.append([trace.arrival(n, home, table[InstantVariable(k, s)]) for k in range(M)])
    return out


SUITE = {
    "sync_subsumption": _sync_subsumption,
    "unbounded_counter_example": lambda seed: _counter_example(),
    "sync_emulation_cost": _sync_emulation,
    "bounds_hold": _bounds_hold,
    "bounded_memory": _bounded_memory,
    "root_memory_vs_monitor_count": _scaling,
    "redundancy": _redundancy,
}


def suite(out=None, seed: int = 0) -> list:
    results = [check(seed) for check in SUITE.values()]
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "suite.json").write_text(json.dumps(results, indent=2, sort_keys=True, default=str) + "\n",
                                        encoding="utf-8")
    return results
