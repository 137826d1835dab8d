from hypothesis import given, strategies as st

from ecpart.ir.cfg import build_cfg
from ecpart.ir.parser import parse_module


def test_straight_line():
    m = parse_module("func k(in %x: u8) -> u8 {\nentry:\n  %y = add %x, 1\n  ret %y\n}")
    cfg = build_cfg(m.functions[0])
    assert len(cfg.nodes) == 1 and not cfg.edges and not cfg.loop_headers


def test_f2_single_loop(f2_module):
    cfg = build_cfg(f2_module.function("f2"))
    assert cfg.loop_headers == ("head",)
    assert len(cfg.back_edges) == 1
    assert cfg.back_edges[0].dst == "head"
    assert set(cfg.exits) == {"found", "none"}


def test_f1_loop_free(f1_module):
    cfg = build_cfg(f1_module.function("f1"))
    assert not cfg.loop_headers and not cfg.back_edges
    # at least two distinct routes to a return
    assert len([e for e in cfg.edges if e.kind == "taken"]) >= 2


def _function(n, succ):
    lines = ["func r(in %x: u8) -> u8 {"]
    for i in range(n):
        lines.append(f"b{i}:")
        s = succ[i]
        if not s:
            lines.append(f"  ret {i}")
        elif len(s) == 1:
            lines.append(f"  jmp b{s[0]}")
        else:
            lines.append(f"  %c{i} = cmp eq %x, {i}")
            lines.append(f"  br %c{i}, b{s[0]}, b{s[1]}")
    lines.append("}")
    return parse_module("\n".join(lines)).functions[0]


def _reach(n, succ, removed):
    seen, todo = set(), [0]
    while todo:
        v = todo.pop()
        if v in seen or v == removed:
            continue
        seen.add(v)
        todo.extend(succ[v])
    return seen


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 10))
    succ = []
    for i in range(n):
        k = draw(st.sampled_from([0, 1, 2, 2]))
        targets = [draw(st.integers(0, n - 1)) for _ in range(k)]
        if k == 2 and targets[0] == targets[1]:
            targets = targets[:1]
        succ.append(targets)
    return n, succ


@given(graphs())
def test_loop_headers_match_brute_force(g):
    n, succ = g
    cfg = build_cfg(_function(n, succ))
    reach = _reach(n, succ, None)

    def dominates(h, v):
        return h == v or v not in _reach(n, succ, h)

    expected = {f"b{h}" for v in reach for h in succ[v] if dominates(h, v)}
    assert set(cfg.loop_headers) == expected
    for e in cfg.back_edges:
        assert e in cfg.edges
        assert e.dst in cfg.loop_headers
    assert set(cfg.unreachable) == {f"b{i}" for i in range(n)} - {f"b{i}" for i in reach}


@given(graphs())
def test_edges_follow_terminators(g):
    n, succ = g
    f = _function(n, succ)
    cfg = build_cfg(f)
    for b in f.blocks:
        out = sorted(e.dst for e in cfg.successors(b.label))
        assert out == sorted(b.successors())
