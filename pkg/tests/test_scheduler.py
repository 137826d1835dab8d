import random
from dataclasses import dataclass

import pytest
from hypothesis import given, strategies as st

from ecpart.ir.parser import parse_module
from ecpart.scheduler import CallCycleError, FunctionMetrics, build_call_graph, compute_metrics, plan


@dataclass
class Refs:
    """Minimal cross-reference source: defined functions plus call edges."""

    functions: list
    edges: list

    def call_edges(self):
        return sorted(self.edges)


def _module(calls: dict, externals=()):
    parts = [f"extern func {e}() -> void" for e in externals]
    for name, callees in calls.items():
        body = "".join(f"  call {c}()\n" for c in callees)
        parts.append(f"func {name}() -> void {{\nentry:\n{body}  ret\n}}")
    return parse_module("\n".join(parts))


def test_chain():
    g = build_call_graph(_module({"a": ["b"], "b": ["c"], "c": []}))
    assert set(g.edges) == {("a", "b"), ("b", "c")}
    depth = {m.name: m.call_depth for m in compute_metrics(g, {})}
    assert depth == {"a": 2, "b": 1, "c": 0}


def test_self_call_rejected():
    with pytest.raises(CallCycleError) as err:
        build_call_graph(_module({"f": ["f"]}))
    assert err.value.cycle == ["f", "f"]
    assert "f -> f" in str(err.value)


def test_longer_cycle_named():
    with pytest.raises(CallCycleError) as err:
        build_call_graph(Refs(["a", "b", "c", "d"], [("a", "b"), ("b", "c"), ("c", "a"), ("d", "a")]))
    cyc = err.value.cycle
    assert cyc[0] == cyc[-1] and set(cyc) == {"a", "b", "c"}


def test_external_callee():
    g = build_call_graph(_module({"f": ["memcpy"]}, externals=["memcpy"]))
    assert "memcpy" in g.external and "memcpy" not in g.nodes
    assert compute_metrics(g, {})[0].call_depth == 0


def test_globals_counted_once():
    m = parse_module("global @g: u8 = 0\nglobal @h: u8 = 0\n"
                     "func f() -> void {\nentry:\n  %v = load @g\n  store @g, %v\n  %w = load @h\n  ret\n}")
    (fm,) = compute_metrics(build_call_graph(m), m)
    assert (fm.call_depth, fm.globals_count) == (0, 2)


def test_plan_orders_by_depth_then_globals():
    p = plan([FunctionMetrics("g", 0, 5), FunctionMetrics("h", 1, 0), FunctionMetrics("f", 1, 2)])
    assert p.schedule == ("g", "h", "f")


def test_plan_ties_by_name():
    p = plan([FunctionMetrics(n, 0, 0) for n in "dcab"])
    assert len(p.clusters) == 1 and p.schedule == ("a", "b", "c", "d")


def test_plan_depth_buckets():
    p = plan([FunctionMetrics("x", 0, 0), FunctionMetrics("y", 1, 0)], bucket_width=1)
    assert [c.members for c in p.clusters] == [("x",), ("y",)]


@st.composite
def dags(draw):
    n = draw(st.integers(1, 20))
    names = [f"f{i:02d}" for i in range(n)]
    order = draw(st.permutations(names))
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if draw(st.integers(0, 5)) == 0:
                edges.add((order[i], order[j]))
    globs = {nm: [f"g{k}" for k in range(draw(st.integers(0, 4)))] for nm in names}
    return names, sorted(edges), globs


def _brute_depth(names, edges):
    callees = {n: [b for a, b in edges if a == n] for n in names}

    def longest(n):
        return 0 if not callees[n] else 1 + max(longest(c) for c in callees[n])

    return {n: longest(n) for n in names}


@given(dags(), st.integers(1, 3))
def test_schedule_properties(dag, width):
    names, edges, globs = dag
    g = build_call_graph(Refs(names, edges))
    ms = compute_metrics(g, globs)
    assert {m.name: m.call_depth for m in ms} == _brute_depth(names, edges)
    p = plan(ms, width, g)
    pos = {n: i for i, n in enumerate(p.schedule)}
    assert sorted(p.schedule) == sorted(names)
    for a, b in edges:
        assert pos[b] < pos[a]
    keys = [(c.depth_bucket, c.globals_bucket) for c in p.clusters]
    assert keys == sorted(keys)
    if width == 1:
        by = {m.name: m for m in ms}
        ranks = [(by[n].call_depth, by[n].globals_count, n) for n in p.schedule]
        assert ranks == sorted(ranks)
    assert plan(ms, width, g).to_json() == p.to_json()
