"""Call graph, per-function cost metrics and the bottom-up analysis order."""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from typing import Iterable, Mapping

from ecpart.ir.model import Module


class CallCycleError(ValueError):
    """The call graph has a cycle; ``cycle`` lists it starting and ending at the same function."""

    def __init__(self, cycle: list[str]) -> None:
        self.cycle = cycle
        super().__init__("recursion is not supported: " + " -> ".join(cycle))


@dataclass(frozen=True)
class CallGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    external: tuple[str, ...]

    def callees(self, name: str) -> list[str]:
        return sorted({b for a, b in self.edges if a == name})


def _module_edges(m: Module) -> tuple[list[str], list[tuple[str, str]], set[str]]:
    nodes = [f.name for f in m.functions if not f.external]
    ext = {f.name for f in m.functions if f.external}
    edges = []
    for f in m.functions:
        if f.external:
            continue
        for b in f.blocks:
            for ins in b.instrs:
                if ins.op == "call":
                    edges.append((f.name, ins.target))
    return nodes, edges, ext


def build_call_graph(source) -> CallGraph:
    """Call graph of a :class:`Module`, or of cross-references exposing
    ``functions`` (defined names) and ``call_edges()``.

    Callees that are not defined are kept in ``external`` and get no node.
    """
    if isinstance(source, Module):
        nodes, raw, ext = _module_edges(source)
    else:
        nodes = sorted(source.functions)
        raw = list(source.call_edges())
        ext = set()
    defined = set(nodes)
    edges = set()
    for a, b in raw:
        if a not in defined:
            continue
        if b in defined:
            edges.add((a, b))
        else:
            ext.add(b)
    g = CallGraph(tuple(sorted(defined)), tuple(sorted(edges)), tuple(sorted(ext)))
    _check_acyclic(g)
    return g


def _check_acyclic(g: CallGraph) -> None:
    succ: dict[str, list[str]] = {n: [] for n in g.nodes}
    for a, b in g.edges:
        succ[a].append(b)
    state: dict[str, int] = {}
    for root in g.nodes:
        if state.get(root):
            continue
        stack = [(root, iter(sorted(succ[root])))]
        path = [root]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            for nxt in it:
                s = state.get(nxt, 0)
                if s == 1:
                    i = path.index(nxt)
                    raise CallCycleError(path[i:] + [nxt])
                if s == 0:
                    state[nxt] = 1
                    path.append(nxt)
                    stack.append((nxt, iter(sorted(succ[nxt]))))
                    break
            else:
                state[node] = 2
                path.pop()
                stack.pop()


@dataclass(frozen=True)
class FunctionMetrics:
    name: str
    call_depth: int
    globals_count: int


def direct_globals(m: Module) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {}
    for f in m.functions:
        s: set[str] = set()
        for b in f.blocks:
            for ins in b.instrs:
                if ins.op in ("load_global", "store_global"):
                    s.add(ins.target)
        out[f.name] = s
    return out


def compute_metrics(g: CallGraph, accesses: Module | Mapping[str, Iterable[str]]) -> list[FunctionMetrics]:
    """Depth (0 for leaves) and the number of distinct globals each function touches directly."""
    acc = direct_globals(accesses) if isinstance(accesses, Module) else {k: set(v) for k, v in accesses.items()}
    depth: dict[str, int] = {}

    def d(n: str) -> int:
        if n not in depth:
            cs = g.callees(n)
            depth[n] = 0 if not cs else 1 + max(d(c) for c in cs)
        return depth[n]

    # iterative warm-up keeps recursion shallow on long chains
    for n in _postorder(g):
        d(n)
    return [FunctionMetrics(n, depth[n], len(acc.get(n, ()))) for n in g.nodes]


def _postorder(g: CallGraph) -> list[str]:
    out: list[str] = []
    seen: set[str] = set()
    for root in g.nodes:
        if root in seen:
            continue
        seen.add(root)
        stack = [(root, iter(g.callees(root)))]
        while stack:
            node, it = stack[-1]
            for c in it:
                if c not in seen:
                    seen.add(c)
                    stack.append((c, iter(g.callees(c))))
                    break
            else:
                out.append(node)
                stack.pop()
    return out


@dataclass(frozen=True)
class Cluster:
    id: int
    members: tuple[str, ...]
    depth_bucket: int
    globals_bucket: int


@dataclass(frozen=True)
class ClusterPlan:
    clusters: tuple[Cluster, ...]
    schedule: tuple[str, ...]

    def to_json(self) -> str:
        return json.dumps({
            "clusters": [
                {"id": c.id, "members": list(c.members), "depth_bucket": c.depth_bucket,
                 "globals_bucket": c.globals_bucket}
                for c in self.clusters
            ],
            "schedule": list(self.schedule),
        }, indent=2, sort_keys=True)


def plan(metrics: Iterable[FunctionMetrics], bucket_width: int = 1, graph: CallGraph | None = None) -> ClusterPlan:
    """Clusters by (depth, globals) bucket, visited in ascending order; names break ties.

    With ``bucket_width`` 1 the cluster order alone puts callees first.  For
    wider buckets pass ``graph``: the schedule is then the topological order
    that follows cluster order wherever dependencies allow.
    """
    if bucket_width < 1:
        raise ValueError("bucket_width must be positive")
    ms = sorted(metrics, key=lambda m: (m.call_depth // bucket_width, m.globals_count // bucket_width,
                                        m.call_depth, m.globals_count, m.name))
    groups: dict[tuple[int, int], list[str]] = {}
    for m in ms:
        groups.setdefault((m.call_depth // bucket_width, m.globals_count // bucket_width), []).append(m.name)
    clusters = tuple(Cluster(i, tuple(names), k[0], k[1]) for i, (k, names) in enumerate(sorted(groups.items())))
    schedule = [n for c in clusters for n in c.members]
    if graph is not None:
        schedule = _constrained_order(schedule, graph)
    return ClusterPlan(clusters, tuple(schedule))


def _constrained_order(preferred: list[str], g: CallGraph) -> list[str]:
    rank = {n: i for i, n in enumerate(preferred)}
    pending = {n: set(g.callees(n)) & set(rank) for n in preferred}
    callers: dict[str, list[str]] = {n: [] for n in preferred}
    for a, b in g.edges:
        if a in rank and b in rank:
            callers[b].append(a)
    ready = sorted((rank[n], n) for n, cs in pending.items() if not cs)
    out: list[str] = []
    heapq.heapify(ready)
    while ready:
        _, n = heapq.heappop(ready)
        out.append(n)
        for c in callers[n]:
            pending[c].discard(n)
            if not pending[c]:
                heapq.heappush(ready, (rank[c], c))
    return out
