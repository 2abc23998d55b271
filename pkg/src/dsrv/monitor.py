"""Per-node monitors and the lockstep driver that runs them over a network.

Each node keeps

* ``U``: unresolved instant variables and their partially evaluated terms,
* ``R``: resolved values (local results, inputs and values received),
* ``P``: pending requests from other nodes for local lazy streams,
* ``W``: instant variables this node requested and is still waiting for.

Eager streams push every value to the nodes that use them.  Lazy streams are
sent only on request; requesters confirm progress so the owner can release
values nobody will ask for again.
"""

from __future__ import annotations

import csv
import heapq
from collections import defaultdict
from dataclasses import dataclass, field, replace

from .graphs import build_dependency_graph, classify
from .netsim import CONFIRM, REQ, RESP, Message, Network
from .oracle import Valuation
from .specdsl import LAZY, Const, coerce, node_sort_key
from .terms import (
    InstantVariable,
    finalize_leaves,
    instantiate,
    simplify,
    strict_simplify,
    substitute,
    variables,
)


class SimulationStalled(RuntimeError):
    pass


class Plan:
    """Static per-specification data shared by all monitors of a run."""

    def __init__(self, spec):
        self.spec = spec
        self.graph = build_dependency_graph(spec)
        self.nodes = sorted(spec.nodes, key=node_sort_key)
        self.node_of = {n: s.node for n, s in spec.streams.items()}
        self.lazy = {n for n, s in spec.streams.items() if s.comm == LAZY and not s.is_const}
        self.local_inputs = defaultdict(list)
        self.local_defined = defaultdict(list)
        for name in spec.inputs:
            self.local_inputs[self.node_of[name]].append(name)
        for name in sorted(spec.defined):
            self.local_defined[self.node_of[name]].append(name)
        consumers = defaultdict(set)  # stream -> nodes that use it
        self.back = defaultdict(dict)  # node -> stream -> largest backward offset used there
        self.w_min = defaultdict(dict)  # node -> stream -> smallest offset used there
        for e in self.graph.edges:
            n = self.node_of[e.src]
            consumers[e.dst].add(n)
            self.back[n][e.dst] = max(self.back[n].get(e.dst, 0), -e.weight)
            self.w_min[n][e.dst] = min(self.w_min[n].get(e.dst, e.weight), e.weight)
        self.targets = {}  # eager fan-out
        self.requesters = {}  # lazy: remote nodes that may ask
        for name in spec.monitored:
            remote = sorted((n for n in consumers[name] if n != self.node_of[name]), key=node_sort_key)
            if name in self.lazy:
                self.requesters[name] = remote
            else:
                self.targets[name] = remote
        # lazy streams owned elsewhere that each node consumes
        self.lazy_remote = {
            n: sorted(v for v in self.back[n] if v in self.lazy and self.node_of[v] != n) for n in self.nodes
        }


@dataclass
class NodeMetrics:
    mem: list = field(default_factory=list)  # |U|+|R|+|P|+|W| at the end of each tick
    sent: list = field(default_factory=list)  # per tick (resp, req, confirm)
    maxUR: int = 0
    msgs: dict = field(default_factory=lambda: {RESP: 0, REQ: 0, CONFIRM: 0})


class LocalMonitor:
    def __init__(self, node, plan: Plan, use_simplifier=True):
        self.node = node
        self.plan = plan
        self.spec = plan.spec
        self.simp = simplify if use_simplifier else strict_simplify
        self.U = {}
        self._uvars = {}
        self.waiting = {}  # variable -> U keys whose term mentions it
        self.R = {}  # variable -> value
        self.resolved_at = {}  # variable -> tick it entered R here
        self.P = {}  # variable -> set of requesting nodes
        self.W = set()
        self.log = {}  # local variable -> (value, instantiatedAt, resolvedAt)
        self.metrics = NodeMetrics()
        self.M = None  # known after finalize
        self.last_tick = -1
        self._dirty = []
        self._dirty_set = set()
        self._newly = []
        self._candidates = []
        self._drop_at = defaultdict(list)
        self._retained = defaultdict(list)  # lazy stream -> heap of indices awaiting confirms
        self._confirmed = {}  # (stream, requester) -> upTo
        self._confirm_sent = {}  # remote lazy stream -> upTo
        self._out = []
        self._back = plan.back[node]

    # -- storage -----------------------------------------------------------

    def memory(self) -> int:
        return len(self.U) + len(self.R) + sum(len(v) for v in self.P.values()) + len(self.W)

    def _store(self, x, value, now):
        self.R[x] = value
        self.resolved_at[x] = now
        drop = max(now, x.index + self._back.get(x.stream, 0))
        self._drop_at[drop].append(x)
        for y in self.waiting.pop(x, ()):
            if y not in self._dirty_set:
                self._dirty_set.add(y)
                heapq.heappush(self._dirty, y)

    def _resolve(self, x, value, now):
        value = coerce(value, self.spec.streams[x.stream].dtype)
        self.log[x] = (value, x.index, now)
        self._newly.append(x)
        self._store(x, value, now)

    def _set_term(self, key, term, now):
        if type(term) is Const:
            old = self._uvars.pop(key, ())
            self.U.pop(key, None)
            for v in old:
                ws = self.waiting.get(v)
                if ws is not None:
                    ws.discard(key)
                    if not ws:
                        del self.waiting[v]
            self._resolve(key, term.value, now)
            return
        new = variables(term)
        old = self._uvars.get(key, set())
        for v in old - new:
            ws = self.waiting.get(v)
            if ws is not None:
                ws.discard(key)
                if not ws:
                    del self.waiting[v]
        for v in new - old:
            self.waiting.setdefault(v, set()).add(key)
        self.U[key] = term
        self._uvars[key] = new

    def _instantiate(self, name, now):
        x = InstantVariable(now, name)
        term = self.simp(substitute(instantiate(self.spec, name, now), self.R))
        self._set_term(x, term, now)
        if type(term) is not Const:
            lazy_remote = self.plan.lazy_remote[self.node]
            if lazy_remote:
                self._candidates.extend(v for v in self._uvars[x] if v.stream in lazy_remote)

    def _evaluate(self, now):
        while self._dirty:
            key = heapq.heappop(self._dirty)
            self._dirty_set.discard(key)
            term = self.U.get(key)
            if term is None:
                continue
            new = self.simp(substitute(term, self.R))
            if new is not term:
                self._set_term(key, new, now)

    # -- protocol ----------------------------------------------------------

    def _send(self, kind, x, dst, value=None, upTo=None):
        self._out.append(Message(kind, x, self.node, dst, value, upTo))

    def _process(self, inbox, now):
        for m in inbox:
            if m.type == RESP:
                self.W.discard(m.stream)
                if m.stream not in self.R:
                    self._store(m.stream, m.value, now)
            else:
                if m.type == REQ and (self.M is None or m.stream.index < self.M):
                    self.P.setdefault(m.stream, set()).add(m.src)
                if m.upTo is not None:
                    key = (m.stream.stream, m.src)
                    self._confirmed[key] = max(self._confirmed.get(key, -1), m.upTo)

    def _respond(self):
        targets = self.plan.targets
        for x in self._newly:
            for dst in targets.get(x.stream, ()):
                self._send(RESP, x, dst, self.R[x])
        self._newly = []
        if self.P:
            for x in sorted(self.P):
                if x in self.R:
                    for dst in sorted(self.P.pop(x), key=node_sort_key):
                        self._send(RESP, x, dst, self.R[x])

    def _request(self):
        if not self._candidates:
            return
        for x in sorted(set(self._candidates)):
            if x in self.waiting and x not in self.W and x not in self.R:
                self.W.add(x)
                self._send(REQ, x, self.plan.node_of[x.stream])
        self._candidates = []

    def _confirm(self, now):
        """Tell owners of lazy streams which positions will never be requested.

        Requests go out at instantiation, so anything at or below
        ``now + w_min`` is either already requested or not needed.  The
        frontier rides on a request to the same owner when there is one.
        """
        lazy_remote = self.plan.lazy_remote[self.node]
        if not lazy_remote:
            return
        for v in lazy_remote:
            up_to = self.M - 1 if self.M is not None else now + self.plan.w_min[self.node][v]
            if up_to < 0 or up_to <= self._confirm_sent.get(v, -1):
                continue
            self._confirm_sent[v] = up_to
            for i in range(len(self._out) - 1, -1, -1):
                m = self._out[i]
                if m.type == REQ and m.stream.stream == v:
                    self._out[i] = replace(m, upTo=up_to)
                    break
            else:
                self._send(CONFIRM, InstantVariable(up_to, v), self.plan.node_of[v], upTo=up_to)

    def _prune(self, now):
        requesters = self.plan.requesters
        for x in self._drop_at.pop(now, ()):
            if requesters.get(x.stream) and self.plan.node_of[x.stream] == self.node:
                heapq.heappush(self._retained[x.stream], x.index)
            else:
                self._forget(x)
        for v, heap in self._retained.items():
            if not heap:
                continue
            done = min(self._confirmed.get((v, r), -1) for r in requesters[v])
            while heap and heap[0] <= done:
                self._forget(InstantVariable(heapq.heappop(heap), v))

    def _forget(self, x):
        self.R.pop(x, None)
        self.resolved_at.pop(x, None)

    def _finish_tick(self, now):
        self._evaluate(now)
        self._respond()
        self._request()
        self._confirm(now)
        self._prune(now)
        out, self._out = self._out, []
        counts = {RESP: 0, REQ: 0, CONFIRM: 0}
        for m in out:
            counts[m.type] += 1
            self.metrics.msgs[m.type] += 1
        mx = self.metrics
        mx.sent.append((counts[RESP], counts[REQ], counts[CONFIRM]))
        mx.mem.append(self.memory())
        mx.maxUR = max(mx.maxUR, len(self.U) + len(self.R))
        return out

    def _check_tick(self, now):
        if now <= self.last_tick:
            raise ValueError(f"node {self.node}: tick {now} is not after {self.last_tick}")
        self.last_tick = now

    def step(self, now, inputs=None, inbox=()):
        """One tick: messages, inputs, instantiation, evaluation, sends, pruning."""
        self._check_tick(now)
        self._process(inbox, now)
        if self.M is None:
            for name, value in (inputs or {}).items():
                if self.plan.node_of.get(name) != self.node or not self.spec.streams[name].is_input:
                    raise KeyError(f"node {self.node} does not read input {name!r}")
                self._resolve(InstantVariable(now, name), value, now)
            for name in self.plan.local_defined[self.node]:
                self._instantiate(name, now)
        return self._finish_tick(now)

    def finalize(self, M, now, inbox=()):
        """End of trace: future references past ``M`` take their defaults."""
        self._check_tick(now)
        self.M = M
        self._process(inbox, now)
        for key, term in list(self.U.items()):
            new = finalize_leaves(term, M)
            if new is not term:
                self._set_term(key, self.simp(substitute(new, self.R)), now)
        self.W = {x for x in self.W if x.index < M}
        self.P = {x: r for x, r in self.P.items() if x.index < M}
        return self._finish_tick(now)

    def idle(self) -> bool:
        return not self.U and not self.P and not self.W


@dataclass
class RunResult:
    spec: object
    length: int
    outputs: Valuation
    log: dict  # InstantVariable -> (value, instantiatedAt, resolvedAt)
    metrics: dict  # node -> NodeMetrics
    network: Network
    ticks: int

    def resolved_at(self, stream, index) -> int:
        return self.log[InstantVariable(index, stream)][2]

    def ttr(self, stream) -> list:
        return [self.log[InstantVariable(k, stream)][2] - k for k in range(self.length)]

    def messages(self, kind=None, stream=None) -> int:
        return sum(
            1 for m in self.network.sent
            if (kind is None or m.type == kind) and (stream is None or m.stream.stream == stream)
        )

    def write_log_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["stream", "index", "instantiatedAt", "resolvedAt"])
            for x in sorted(self.log, key=lambda x: (x.stream, x.index)):
                _, inst, res = self.log[x]
                w.writerow([x.stream, x.index, inst, res])

    def write_metrics_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["tick", "node", "mem", "msgsResp", "msgsReq", "msgsConfirm"])
            for t in range(self.ticks + 1):
                for node, mx in sorted(self.metrics.items()):
                    w.writerow([t, node, mx.mem[t], *mx.sent[t]])


def run(spec, inputs, model, *, use_simplifier=True, comm=None, max_ticks=None) -> RunResult:
    """Run every node in lockstep until the whole network is quiescent.

    ``inputs`` maps input stream -> sequence of M values.  ``comm`` optionally
    overrides the declared strategies ("eager", "lazy", or a per-stream map).
    """
    if comm is not None:
        spec = spec.with_comm(comm)
    report = classify(build_dependency_graph(spec))
    if not report.well_formed:
        raise ValueError("specification is not well-formed")
    streams = inputs.streams if isinstance(inputs, Valuation) else inputs
    if set(streams) != set(spec.inputs):
        raise ValueError(f"inputs must cover exactly {sorted(spec.inputs)}")
    lengths = {len(v) for v in streams.values()}
    if len(lengths) > 1:
        raise ValueError("input sequences differ in length")
    M = lengths.pop() if lengths else (inputs.length if isinstance(inputs, Valuation) else None)
    if not M:
        raise ValueError("need a trace length of at least 1")
    typed = {n: [coerce(v, spec.streams[n].dtype) for v in seq] for n, seq in streams.items()}

    plan = Plan(spec)
    network = Network(model)
    monitors = {n: LocalMonitor(n, plan, use_simplifier) for n in plan.nodes}
    per_node_inputs = {n: plan.local_inputs[n] for n in plan.nodes}
    depth = len(spec.monitored) + 1
    t = 0
    last_progress = 0
    while True:
        inbox = network.deliver(t)
        outgoing = []
        for n in plan.nodes:
            mon = monitors[n]
            if t < M:
                readings = {name: typed[name][t] for name in per_node_inputs[n]}
                outgoing.extend(mon.step(t, readings, inbox.get(n, ())))
            elif t == M:
                outgoing.extend(mon.finalize(M, t, inbox.get(n, ())))
            else:
                outgoing.extend(mon.step(t, None, inbox.get(n, ())))
        for m in outgoing:
            network.send(m, t)
        if inbox or outgoing:
            last_progress = t
        if t >= M and network.in_flight == 0:
            if all(m.idle() for m in monitors.values()):
                break
            raise SimulationStalled(_stall_report(monitors, t))
        limit = max_ticks
        if limit is None:
            limit = (network.max_recorded_delay() + 1) * depth * (M + 1) + 100
        if t - last_progress > limit:
            raise SimulationStalled(_stall_report(monitors, t))
        t += 1

    values = {name: [None] * M for name in spec.monitored}
    log = {}
    for mon in monitors.values():
        for x, entry in mon.log.items():
            if x.index < M:
                values[x.stream][x.index] = entry[0]
                log[x] = entry
    return RunResult(spec, M, Valuation(M, values), log, {n: m.metrics for n, m in monitors.items()}, network, t)


def _stall_report(monitors, t) -> str:
    parts = [f"no progress possible at tick {t}"]
    for n, m in monitors.items():
        if not m.idle():
            pending = sorted(m.U)[:5]
            parts.append(f"node {n}: U={pending} W={sorted(m.W)[:5]} P={sorted(m.P)[:5]}")
    return "; ".join(parts)
