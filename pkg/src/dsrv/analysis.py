"""Resolution-time bounds (MTR/TTR), pruning horizons and memory bounds.

An MTR table maps every instant variable of a length-M run to the latest
tick at which a monitor is guaranteed to have resolved it, given how
messages travel between nodes.  Arrival behaviour is supplied as an object
with ``arrival(src, dst, t)``:

* :class:`TraceArrivals` replays the exact per-link delays of a run,
* :class:`FixedArrivals` adds a constant (global or per pair) to every send.

The end of the trace is handled as in the monitor: references past the last
position get their default at tick ``M``.
"""

from __future__ import annotations

import math
from collections import defaultdict

from .graphs import EvaluationGraph, build_dependency_graph, classify
from .specdsl import LAZY
from .terms import InstantVariable

UNBOUNDED = math.inf


class TraceArrivals:
    def __init__(self, trace):
        self.trace = trace

    def arrival(self, src, dst, t):
        return self.trace.arrival(src, dst, t)

    def delay(self, src, dst, t):
        return self.trace.arrival(src, dst, t) - t


class FixedArrivals:
    """``t + d`` where d is one number, a dict keyed by (src, dst), or a callable."""

    def __init__(self, d):
        self.d = d

    def delay(self, src, dst, t=0):
        if callable(self.d):
            return self.d(src, dst)
        if isinstance(self.d, dict):
            return self.d[(src, dst)]
        return self.d

    def arrival(self, src, dst, t):
        return t + self.delay(src, dst, t)


def _lazy_streams(spec, mode):
    if mode is None:
        return {n for n, s in spec.streams.items() if s.comm == LAZY}
    if mode == "lazy":
        return set(spec.monitored)
    if mode == "eager":
        return set()
    raise ValueError(f"unknown mode {mode!r}")


class _Context:
    def __init__(self, spec, M, mode):
        self.spec = spec
        self.M = M
        self.graph = build_dependency_graph(spec)
        if not classify(self.graph).well_formed:
            raise ValueError("specification is not well-formed")
        self.order = EvaluationGraph(self.graph, M).order()
        self.node = {n: s.node for n, s in spec.streams.items()}
        self.lazy = _lazy_streams(spec, mode)
        self.out = defaultdict(list)
        for e in self.graph.edges:
            self.out[e.src].append(e)
        self.inputs = set(spec.inputs)


_CONTEXTS = {}


def _context(spec, M, mode):
    key = (id(spec), M, mode)
    ctx = _CONTEXTS.get(key)
    if ctx is None or ctx.spec is not spec:
        if len(_CONTEXTS) > 32:
            _CONTEXTS.clear()
        ctx = _CONTEXTS[key] = _Context(spec, M, mode)
    return ctx


def mtr(spec, M, arrivals, mode=None) -> dict:
    """MTR of every instant variable under an arrival function.

    ``mode`` is None for the declared strategies, or "eager"/"lazy" for all.
    A lazy value travels only after a request: it leaves its owner at
    max(request arrival, its own resolution) and then takes one more hop.
    """
    ctx = _context(spec, M, mode)
    node, lazy, out = ctx.node, ctx.lazy, ctx.out
    arr = arrivals.arrival
    table = {}
    for x in ctx.order:
        t = x.index
        s = x.stream
        if s in ctx.inputs:
            table[x] = t
            continue
        ns = node[s]
        v = t
        for e in out[s]:
            j = t + e.weight
            if j < 0:
                continue
            if j >= M:
                if M > v:
                    v = M
                continue
            r = e.dst
            m = table[InstantVariable(j, r)]
            nr = node[r]
            if nr != ns:
                if r in lazy:
                    m = arr(nr, ns, max(arr(ns, nr, t), m))
                else:
                    m = arr(nr, ns, m)
            if m > v:
                v = m
        table[x] = v
    return table


def mtr_exact(spec, M, trace, mode=None) -> dict:
    return mtr(spec, M, TraceArrivals(trace), mode)


def mtr_aeternal(spec, M, d, mode=None) -> dict:
    """Every message takes at most ``d`` ticks."""
    if d < 1:
        raise ValueError("delay bound must be at least 1")
    return mtr(spec, M, FixedArrivals(d), mode)


def mtr_synchronous(spec, M, dist, mode=None) -> dict:
    return mtr(spec, M, FixedArrivals(dist), mode)


def mtr_lazy(spec, M, arrivals) -> dict:
    return mtr(spec, M, arrivals, "lazy")


def remote_influences(spec, s, graph=None, lazy=frozenset()):
    """Remote streams that reach ``s`` through a path of co-located streams.

    Returns (remote stream, summed offset, (owner node, node of s)) triples,
    one per simple path in the dependency graph that stays on the node of
    ``s`` and ends with one hop to another node.
    """
    graph = graph or build_dependency_graph(spec)
    out = defaultdict(list)
    for e in graph.edges:
        out[e.src].append(e)
    home = spec.node_of(s)
    found = []
    stack = [(s, 0, (s,))]
    while stack:
        u, w, path = stack.pop()
        for e in out[u]:
            if spec.node_of(e.dst) != home:
                found.append((e.dst, w + e.weight, (spec.node_of(e.dst), home)))
            elif e.dst not in path:
                stack.append((e.dst, w + e.weight, path + (e.dst,)))
    return found


class _RangeMax:
    """Largest effective delay per link over tick ranges."""

    def __init__(self, trace, horizon):
        self.trace = trace
        self.horizon = horizon
        self._cache = {}

    def delays(self, pair):
        d = self._cache.get(pair)
        if d is None:
            a, b = pair
            d = self._cache[pair] = [self.trace.arrival(a, b, t) - t for t in range(self.horizon + 1)]
        return d

    def __call__(self, pairs, lo, hi):
        lo = max(0, lo)
        hi = min(self.horizon, hi)
        best = 0
        for p in pairs:
            d = self.delays(p)
            if lo <= hi:
                best = max(best, max(d[lo:hi + 1]))
        return best


def trace_max_delay(spec, trace, horizon) -> int:
    """Largest effective delay over every link between distinct nodes of
    ``spec`` for send ticks 0..horizon."""
    nodes = sorted(spec.nodes)
    pairs = [(a, b) for a in nodes for b in nodes if a != b]
    rm = _RangeMax(trace, horizon)
    return rm(pairs, 0, horizon) if pairs else 1


def aeternal_from_trace(spec, M, trace, mode=None, horizon=0):
    """Smallest global bound d read off the trace that covers every tick an
    aeternal analysis can reach.  Returns (d, horizon, table)."""
    horizon = max(horizon, M)
    d = max(1, trace_max_delay(spec, trace, horizon))
    while True:
        table = mtr_aeternal(spec, M, d, mode)
        top = max(table.values(), default=0)
        if top <= horizon:
            return d, horizon, table
        horizon = top
        d2 = max(1, trace_max_delay(spec, trace, horizon))
        if d2 == d:
            return d, horizon, table
        d = d2


def mtr_temporary(spec, M, trace, mode=None, horizon=None, windows=None) -> dict:
    """Per-target bound using only delays inside the target's window of interest.

    The window of ``s[t]`` spans ``t`` and the send-time bounds of every remote
    value that reaches ``s`` through co-located streams.  Each remote hop is
    charged the worst effective delay on the involved links inside that
    window.  For lazy hops the window also covers the request send and the
    response send.  Pass a dict as ``windows`` to receive each target's
    (first, last) tick.
    """
    ctx = _context(spec, M, mode)
    if horizon is None:
        _, horizon, _ = aeternal_from_trace(spec, M, trace, mode)
    worst = _RangeMax(trace, horizon)
    node, lazy, out = ctx.node, ctx.lazy, ctx.out
    influences = {s: remote_influences(spec, s, ctx.graph) for s in spec.defined}
    links = {}
    for s, infl in influences.items():
        pairs = {p for _, _, p in infl}
        for e in out[s]:
            if e.dst in lazy and node[e.dst] != node[s]:
                pairs.add((node[s], node[e.dst]))
        links[s] = sorted(pairs)
    table = {}
    for x in ctx.order:
        t = x.index
        s = x.stream
        if s in ctx.inputs:
            table[x] = t
            continue
        ns = node[s]
        lo = hi = t
        for r, w, _ in influences[s]:
            j = t + w
            # paths through positions outside the trace are not real dependencies
            m = table.get(InstantVariable(j, r)) if 0 <= j < M else None
            if m is not None:
                lo, hi = min(lo, m), max(hi, m)
        dw = worst(links[s], lo, hi) if links[s] else 0
        lazy_deps = [e for e in out[s] if e.dst in lazy and node[e.dst] != ns and 0 <= t + e.weight < M]
        while lazy_deps:
            top = max(max(t + dw, table[InstantVariable(t + e.weight, e.dst)]) for e in lazy_deps)
            if top <= hi:
                break
            hi = top
            dw = worst(links[s], lo, hi)
        if windows is not None:
            windows[x] = (lo, hi)
        v = t
        for e in out[s]:
            j = t + e.weight
            if j < 0:
                continue
            if j >= M:
                v = max(v, M)
                continue
            m = table[InstantVariable(j, e.dst)]
            if node[e.dst] != ns:
                m = (max(t + dw, m) if e.dst in lazy else m) + dw
            v = max(v, m)
        table[x] = v
    return table


def ttr(table: dict, stream: str, M: int) -> list:
    return [table[InstantVariable(k, stream)] - k for k in range(M)]


def ttr_sync(spec, dist, mode="eager") -> dict:
    """Constant time-to-resolve per stream when every hop between two nodes
    takes exactly ``dist`` ticks (a number, a (src, dst) dict or a callable).

    Streams whose bound grows with the trace position map to UNBOUNDED.
    """
    g = build_dependency_graph(spec)
    report = classify(g, spec)
    if not report.well_formed:
        raise ValueError("specification is not well-formed")
    lazy = _lazy_streams(spec, None if mode == "declared" else mode)
    hop = FixedArrivals(dist)
    node = {n: s.node for n, s in spec.streams.items()}
    value = {s: 0 for s in spec.monitored}
    edges = [e for e in g.edges if e.src not in spec.inputs]

    def relax():
        changed = set()
        for e in edges:
            ns, nr = node[e.src], node[e.dst]
            base = value[e.dst] + e.weight
            if ns == nr:
                cand = base
            elif e.dst in lazy:
                d_req, d_resp = hop.delay(ns, nr), hop.delay(nr, ns)
                cand = max(d_req, base) + d_resp
            else:
                cand = base + hop.delay(nr, ns)
            if cand > value[e.src]:
                value[e.src] = cand
                changed.add(e.src)
        return changed

    for _ in range(len(value) + 1):
        if not relax():
            return value
    # keep relaxing to find everything a growing cycle feeds into
    growing = set()
    for _ in range(len(value) + 1):
        growing |= relax()
    succ = defaultdict(set)
    for e in g.edges:
        succ[e.dst].add(e.src)
    frontier = list(growing)
    while frontier:
        u = frontier.pop()
        for v in succ[u]:
            if v not in growing:
                growing.add(v)
                frontier.append(v)
    return {s: (UNBOUNDED if s in growing else v) for s, v in value.items()}


# ---------------------------------------------------------------------------
# Pruning horizons and memory
# ---------------------------------------------------------------------------


def _consumers(spec, graph):
    """stream -> node -> list of (consumer stream, offset)."""
    out = defaultdict(lambda: defaultdict(list))
    for e in graph.edges:
        out[e.dst][spec.node_of(e.src)].append((e.src, e.weight))
    return out


def prune_horizon(spec, M, arrivals, stream, mode=None, table=None) -> list:
    """Per position k, a tick after which ``stream[k]`` is gone from its
    owner's storages.

    Eager: the later of its resolution and the last local instantiation that
    reads it (k plus the largest backward offset used on that node).
    Lazy with remote readers: additionally until every reader's confirmation
    that it no longer needs position k has arrived.
    """
    ctx = _context(spec, M, mode)
    table = table if table is not None else mtr(spec, M, arrivals, mode)
    consumers = _consumers(spec, ctx.graph)[stream]
    home = ctx.node[stream]
    back = max([0] + [-w for _, w in consumers.get(home, ())])
    readers = [n for n in consumers if n != home] if stream in ctx.lazy else []
    release = {n: _release_ticks(consumers[n], M) for n in readers}
    out = []
    for k in range(M):
        h = max(table[InstantVariable(k, stream)], k + back)
        for n in readers:
            h = max(h, arrivals.arrival(n, home, release[n][k]))
        out.append(h)
    return out


def _release_ticks(uses, M):
    """Per position k, the tick at which a node reading a lazy stream through
    ``uses`` confirms it will not request positions up to k."""
    w_min = min(w for _, w in uses)
    return [max(0, min(k - w_min, M)) for k in range(M)]


def memory_bound(spec, M, arrivals, mode=None, table=None) -> dict:
    """Upper bound on |U|+|R|+|P|+|W| per node at any tick.

    Every stored entry of a given kind lives inside a window of positions
    relative to the current tick; the bound adds up the window widths.
    """
    ctx = _context(spec, M, mode)
    table = table if table is not None else mtr(spec, M, arrivals, mode)
    node, lazy = ctx.node, ctx.lazy
    arr = arrivals.arrival
    consumers = _consumers(spec, ctx.graph)
    bound = defaultdict(int)
    for v in spec.monitored:
        home = node[v]
        uses = consumers.get(v, {})
        horizon = prune_horizon(spec, M, arrivals, v, mode, table)
        bound[home] += max(h - k for k, h in enumerate(horizon)) + 1
        for n, use in uses.items():
            if n == home:
                continue
            back = max([0] + [-w for _, w in use])
            w_max = max(w for _, w in use)
            w_min = min(w for _, w in use)
            arrive = []
            reply = []
            for j in range(M):
                m = table[InstantVariable(j, v)]
                if v in lazy:
                    sent = max(arr(n, home, max(0, j - w_min)), m)
                    reply.append(sent - j)
                    arrive.append(arr(home, n, sent) - j)
                else:
                    arrive.append(arr(home, n, m) - j)
            width = max(max(a, back) for a in arrive)
            bound[n] += width  # R copies, positions t-width .. t-1
            if v in lazy:
                bound[n] += max(arrive) + w_max + 1  # W
                bound[home] += max(reply) + w_max  # P, one entry per reader
    return dict(bound)
