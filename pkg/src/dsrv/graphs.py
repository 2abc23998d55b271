"""Dependency graphs, evaluation graphs and monitorability classification."""

from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, field

from .specdsl import Apply, Offset, Var, walk
from .terms import InstantVariable


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    weight: int


@dataclass
class DependencyGraph:
    vertices: list
    edges: list

    def out_edges(self, u):
        return [e for e in self.edges if e.src == u]

    def in_edges(self, v):
        return [e for e in self.edges if e.dst == v]

    def edge_set(self) -> set:
        return {(e.src, e.dst, e.weight) for e in self.edges}


def build_dependency_graph(spec) -> DependencyGraph:
    """One edge per stream occurrence in an equation; weight is the offset."""
    vertices = spec.monitored
    edges = []
    for name, term in spec.equations.items():
        for t in walk(term):
            if type(t) is Var:
                edges.append(Edge(name, t.name, 0))
            elif type(t) is Offset:
                edges.append(Edge(name, t.name, t.offset))
    return DependencyGraph(vertices, edges)


def max_future_ref(g: DependencyGraph) -> int:
    return max([e.weight for e in g.edges if e.weight > 0], default=0)


def strongly_connected_components(vertices, successors) -> list[list]:
    """Tarjan's algorithm without recursion; components come out in reverse
    topological order."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    result = []
    counter = 0
    for root in vertices:
        if root in index:
            continue
        work = [(root, iter(successors(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                result.append(comp)
    return result


@dataclass
class Cycle:
    vertices: list
    weight: int
    kind: str  # zero | positive | negative | mixed


@dataclass
class MonitorabilityReport:
    well_formed: bool
    efficiently_monitorable: bool
    decentralized_efficiently_monitorable: bool | None
    max_future_ref: int
    offending_cycles: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def components(g: DependencyGraph) -> list[list]:
    succ = defaultdict(list)
    for e in g.edges:
        succ[e.src].append(e.dst)
    return strongly_connected_components(g.vertices, lambda v: succ[v])


def nontrivial_components(g: DependencyGraph) -> list[list]:
    loops = {e.src for e in g.edges if e.src == e.dst}
    return [c for c in components(g) if len(c) > 1 or c[0] in loops]


def _negative_cycle(vertices, edges):
    """Bellman-Ford from a virtual source.  Returns (cycle, potentials)."""
    dist = {v: 0 for v in vertices}
    pred = {}
    changed = None
    for _ in range(len(vertices)):
        changed = None
        for e in edges:
            if dist[e.src] + e.weight < dist[e.dst]:
                dist[e.dst] = dist[e.src] + e.weight
                pred[e.dst] = e
                changed = e.dst
        if changed is None:
            return None, dist
    v = changed
    for _ in range(len(vertices)):
        v = pred[v].src
    cycle_edges = []
    u = v
    while True:
        e = pred[u]
        cycle_edges.append(e)
        u = e.src
        if u == v:
            break
    cycle_edges.reverse()
    return cycle_edges, dist


def _cycle_in(vertices, edges):
    """Any directed cycle, as a list of edges, or None."""
    succ = defaultdict(list)
    for e in edges:
        succ[e.src].append(e)
    color = {v: 0 for v in vertices}
    for root in vertices:
        if color[root]:
            continue
        path = []
        work = [(root, iter(succ[root]))]
        color[root] = 1
        while work:
            v, it = work[-1]
            nxt = next(it, None)
            if nxt is None:
                color[v] = 2
                work.pop()
                if path:
                    path.pop()
                continue
            if color[nxt.dst] == 1:
                cyc = [nxt]
                for e in reversed(path):
                    if cyc[0].src == nxt.dst:
                        break
                    cyc.insert(0, e)
                return cyc
            if color[nxt.dst] == 0:
                color[nxt.dst] = 1
                path.append(nxt)
                work.append((nxt.dst, iter(succ[nxt.dst])))
    return None


def _as_cycle(edges, kind) -> Cycle:
    return Cycle([e.src for e in edges], sum(e.weight for e in edges), kind)


def _analyse_component(comp, edges):
    """Return (zero-weight closed walk witness, positive cycle witness)."""
    inside = set(comp)
    sub = [e for e in edges if e.src in inside and e.dst in inside]
    neg, pot = _negative_cycle(comp, sub)
    flipped = [Edge(e.src, e.dst, -e.weight) for e in sub]
    pos, pot_flipped = _negative_cycle(comp, flipped)
    if pos is not None:
        pos = [Edge(e.src, e.dst, -e.weight) for e in pos]
    if neg is not None and pos is not None:
        # both signs in one component: repeating them yields a zero-weight walk
        return [_as_cycle(pos, "mixed"), _as_cycle(neg, "mixed")], _as_cycle(pos, "positive")
    if neg is None:
        tight = [e for e in sub if e.weight + pot[e.src] - pot[e.dst] == 0]
    else:
        tight = [e for e in flipped if e.weight + pot_flipped[e.src] - pot_flipped[e.dst] == 0]
        tight = [Edge(e.src, e.dst, -e.weight) for e in tight]
    zero = _cycle_in(comp, tight)
    return ([_as_cycle(zero, "zero")] if zero else None), (_as_cycle(pos, "positive") if pos else None)


def check_well_formed(g: DependencyGraph) -> MonitorabilityReport:
    """Well-formed iff no closed walk has total weight zero."""
    return classify(g, None)


def classify(g: DependencyGraph, placement=None) -> MonitorabilityReport:
    """``placement`` maps stream -> node (or is a Specification); None skips the
    decentralized check."""
    if placement is not None and hasattr(placement, "streams"):
        placement = {n: s.node for n, s in placement.streams.items()}
    well_formed = True
    em = True
    offending = []
    split = False
    for comp in nontrivial_components(g):
        zero, pos = _analyse_component(comp, g.edges)
        if zero:
            well_formed = False
            offending.extend(zero)
        if pos:
            em = False
            if not zero:
                offending.append(pos)
        if placement is not None and len({placement[v] for v in comp}) > 1:
            split = True
    em = em and well_formed
    dem = None if placement is None else (em and not split)
    return MonitorabilityReport(well_formed, em, dem, max_future_ref(g), offending)


def classify_spec(spec) -> MonitorabilityReport:
    return classify(build_dependency_graph(spec), spec)


# ---------------------------------------------------------------------------
# Evaluation graph
# ---------------------------------------------------------------------------


class EvaluationGraph:
    """The unrolling of a dependency graph over positions ``0..M-1``."""

    def __init__(self, g: DependencyGraph, M: int):
        if M < 1:
            raise ValueError("M must be positive")
        self.graph = g
        self.length = M
        self._out = defaultdict(list)
        for e in g.edges:
            self._out[e.src].append(e)

    def vertices(self):
        for k in range(self.length):
            for s in self.graph.vertices:
                yield InstantVariable(k, s)

    def dependencies(self, x: InstantVariable):
        out = []
        for e in self._out[x.stream]:
            j = x.index + e.weight
            if 0 <= j < self.length:
                out.append(InstantVariable(j, e.dst))
        return out

    def edges(self):
        for x in self.vertices():
            for y in self.dependencies(x):
                yield x, y

    def has_edge(self, x, y) -> bool:
        return y in self.dependencies(x)

    def order(self) -> list:
        """Vertices with every dependency listed before its dependents.

        Raises ValueError if the unrolling is cyclic.
        """
        g = self.graph
        M = self.length
        if all(e.weight <= 0 for e in g.edges):
            per_index = _zero_edge_order(g)
            if per_index is not None:
                return [InstantVariable(k, s) for k in range(M) for s in per_index]
        names = list(g.vertices)
        pos = {s: i for i, s in enumerate(names)}
        n = len(names)
        deps_count = [0] * (n * M)
        dependents = defaultdict(list)
        for k in range(M):
            for s in names:
                x = k * n + pos[s]
                for e in self._out[s]:
                    j = k + e.weight
                    if 0 <= j < M:
                        deps_count[x] += 1
                        dependents[j * n + pos[e.dst]].append(x)
        ready = deque(i for i, c in enumerate(deps_count) if c == 0)
        out = []
        while ready:
            x = ready.popleft()
            out.append(InstantVariable(x // n, names[x % n]))
            for y in dependents.get(x, ()):
                deps_count[y] -= 1
                if deps_count[y] == 0:
                    ready.append(y)
        if len(out) != n * M:
            raise ValueError("evaluation graph is cyclic")
        return out


def _zero_edge_order(g: DependencyGraph):
    """Topological order of the weight-0 edges (dependencies first), or None."""
    zero = [e for e in g.edges if e.weight == 0]
    count = {v: 0 for v in g.vertices}
    dependents = defaultdict(list)
    for e in zero:
        count[e.src] += 1
        dependents[e.dst].append(e.src)
    ready = deque(v for v in g.vertices if count[v] == 0)
    out = []
    while ready:
        v = ready.popleft()
        out.append(v)
        for u in dependents[v]:
            count[u] -= 1
            if count[u] == 0:
                ready.append(u)
    return out if len(out) == len(g.vertices) else None


def build_evaluation_graph(g: DependencyGraph, M: int) -> EvaluationGraph:
    return EvaluationGraph(g, M)


def bref(spec, s: str, distance) -> int:
    """Horizon after the resolution of ``s[t]`` beyond which no request for it
    can arrive: the largest backward offset onto ``s`` plus the distance from
    the requesting node."""
    g = build_dependency_graph(spec)
    node_s = spec.node_of(s)
    best = 0
    for e in g.in_edges(s):
        node_r = spec.node_of(e.src)
        d = 0 if node_r == node_s else distance(node_r, node_s)
        best = max(best, -e.weight + d)
    return best
