import random

import pytest
from hypothesis import given, settings, strategies as st

from ecpart.analysis import AnalysisOptions, analyze_module, partition_differences
from ecpart.ecp import interface_of, outcome_of, snapshot
from ecpart.executor import (ExplorationConfig, Executor, explore, fork_overflow, make_symbolic_inputs,
                             merge_loop_paths)
from ecpart.gen import random_function
from ecpart.ir.parser import parse_module
from ecpart.oracle import interpret
from ecpart.smt import expr as E
from ecpart.smt.solver import check_equiv, is_sat, is_valid, models
from ecpart.summaries import SummaryStore, build_summary


def _complete(rep):
    return [p for p in rep.paths if p.status == "complete"]


# -- symbolic inputs ----------------------------------------------------------------

def test_domain_constraints():
    m = parse_module("enum colour : u8 { RED = 0, GREEN = 2, BLUE = 5 }\n"
                     "func f(in %b: bool, in %e: colour, in %x: u8) -> u8 {\nentry:\n  ret %x\n}")
    st0 = make_symbolic_inputs(m, "f")
    b, e = E.var("b", 8), E.var("e", 8)
    allowed_b = E.or_(E.eq(b, E.const(0, 8)), E.eq(b, E.const(1, 8)))
    allowed_e = E.or_(*[E.eq(e, E.const(k, 8)) for k in (0, 2, 5)])
    assert check_equiv(st0.domain, E.and_(allowed_b, allowed_e))
    assert "x" not in E.free_vars(st0.domain)


# -- exploration ------------------------------------------------------------------------

def test_f1_paths(f1_module):
    rep = explore(f1_module, "f1")
    paths = _complete(rep)
    assert len(paths) >= 3 and rep.complete
    consts = {n.value for p in paths for n in E.postorder(p.path_condition) if n.op == "const" and n.width == 16}
    assert {0x21C, 0x2B0, 0x540} <= consts | {c + 1 for c in consts} | {c - 1 for c in consts}


def test_f2_raw_and_merged(f2_module):
    rep = explore(f2_module, "f2")
    assert len(_complete(rep)) == 9
    merged = merge_loop_paths(rep.paths)
    assert len(merged) == 2
    assert sorted(len(p.guarded) for p in merged) == [0, 8]


def test_infeasible_branch_dropped():
    m = parse_module("func f(in %x: u8) -> u8 {\nentry:\n  %a = cmp ugt %x, 5\n  br %a, more, other\n"
                     "more:\n  %b = cmp ult %x, 3\n  br %b, dead, live\ndead:\n  ret 1\nlive:\n  ret 2\n"
                     "other:\n  ret 3\n}")
    rep = explore(m, "f")
    labels = {lbl for p in rep.paths for lbl, _ in p.trace}
    assert "dead" not in labels
    assert len(rep.paths) == 2


def test_overflow_fork_on_add():
    m = parse_module("func add8(in %a: u8, in %b: u8) -> u8 {\nentry:\n  %s = add %a, %b\n  ret %s\n}")
    paths = _complete(explore(m, "add8"))
    assert len(paths) == 2
    a9, b9 = E.zext(E.var("a", 8), 9), E.zext(E.var("b", 8), 9)
    carry = E.ugt(E.add(a9, b9), E.const(0xFF, 9))
    assert any(check_equiv(p.path_condition, carry) for p in paths)


def test_no_fork_on_and():
    m = parse_module("func and8(in %a: u8, in %b: u8) -> u8 {\nentry:\n  %s = and %a, %b\n  ret %s\n}")
    assert len(explore(m, "and8").paths) == 1


def test_fork_overflow_direct():
    m = parse_module("func z() -> u8 {\nentry:\n  ret 0\n}")
    st0 = make_symbolic_inputs(m, "z")
    a9, b9 = E.zext(E.var("a", 8), 9), E.zext(E.var("b", 8), 9)
    out = fork_overflow(E.add(a9, b9), 0xFF, st0, 8)
    assert sorted(flag for _, flag, _ in out) == [False, True]
    for s, _, stored in out:
        assert stored.width == 8
    # a value that cannot exceed the maximum is not forked
    assert len(fork_overflow(E.zext(E.var("a", 8), 9), 0xFF, st0, 8)) == 1


def test_loops_with_different_exits_not_merged():
    m = parse_module("""func two(in %x: u8) -> u8 {
  local %i: u8
  local %bit: u8
entry:
  %i = const u8 0
  jmp head
head:
  %more = cmp ult %i, 3
  br %more, body, done
body:
  %v = lshr %x, %i
  %bit = and %v, 1
  %one = cmp eq %bit, 1
  br %one, exit_a, step
step:
  %w = add %i, 4
  %u = lshr %x, %w
  %ub = and %u, 1
  %hi = cmp eq %ub, 1
  br %hi, exit_b, latch
latch:
  %i = add %i, 1
  jmp head
exit_a:
  ret %i
exit_b:
  ret 0x10
done:
  ret 0xff
}""")
    merged = merge_loop_paths(explore(m, "two").paths)
    exits = [p.exit[0] for p in merged if p.guarded]
    assert sorted(exits) == ["exit_a", "exit_b"]


def test_loop_free_paths_unchanged(f1_module):
    paths = explore(f1_module, "f1").paths
    assert merge_loop_paths(paths) == paths


def test_truncation_reported(f2_module):
    rep = explore(f2_module, "f2", ExplorationConfig(loop_bound=3))
    assert rep.truncated > 0 and not rep.complete
    assert any(p.status == "truncated" for p in rep.paths)


def test_path_budget(f2_module):
    rep = explore(f2_module, "f2", ExplorationConfig(max_paths=3))
    assert rep.budget_exhausted and not rep.complete
    assert len(rep.paths) <= 3


def test_loop_bound_monotone(f2_module):
    prev: set = set()
    for bound in range(1, 10):
        rep = explore(f2_module, "f2", ExplorationConfig(loop_bound=bound))
        cur = {p.trace for p in rep.paths if p.status == "complete"}
        assert prev <= cur
        prev = cur
    assert len(prev) == 9


def test_loop_bound_validated():
    with pytest.raises(ValueError):
        ExplorationConfig(loop_bound=0)


# -- summaries at call sites -------------------------------------------------------------

CALLS = """func g(in %x: u8) -> u8 {
entry:
  %pos = cmp ugt %x, 0
  %r = zext %pos to u8
  ret %r
}
func f(in %y: u8) -> u8 {
entry:
  %z = add %y, 1
  %r = call g(%z)
  ret %r
}
"""


def test_apply_summary_instantiates_cases():
    m = parse_module(CALLS)
    ga = analyze_module(m, ["g"]).functions["g"]
    s = build_summary(m.function("g"), ga.classes, domain=ga.domain)
    assert len(s.cases) == 2 and s.complete
    rep = Executor(m, ExplorationConfig(), {"g": s}).explore("f")
    paths = _complete(rep)
    assert all(any(lbl.startswith("summary g") for _, lbl in p.trace) for p in paths)
    y = E.var("y", 8)
    z = E.add(y, E.const(1, 8))
    want = [E.ugt(z, E.const(0, 8)), E.not_(E.ugt(z, E.const(0, 8)))]
    assert len(paths) == 2
    for w in want:
        assert any(check_equiv(p.path_condition, w) for p in paths)


def test_summary_equals_inlining():
    m = parse_module(CALLS)
    with_s = analyze_module(m).functions["f"]
    assert "g" in with_s.used_summaries
    cfg = ExplorationConfig(use_summaries=False)
    no_s = analyze_module(m, options=AnalysisOptions(config=cfg)).functions["f"]
    assert not no_s.used_summaries
    assert partition_differences(with_s, no_s) == []


# -- properties on generated functions ------------------------------------------------------

LOOP_FREE = ["two_bytes", "signed_byte", "halfword", "flags", "buffer", "global", "out", "byte"]


def _loop_free(seed, profile):
    rng = random.Random(seed)
    for _ in range(20):
        g = random_function(rng, "h", profile)
        if "head" not in g.text:
            return parse_module(g.text)
    return None


@given(st.integers(0, 2**32 - 1), st.sampled_from(LOOP_FREE))
@settings(max_examples=40)
def test_paths_disjoint_and_total(seed, profile):
    m = _loop_free(seed, profile)
    if m is None:
        return
    rep = explore(m, "h")
    conds = [p.path_condition for p in rep.paths]
    for i, a in enumerate(conds):
        for b in conds[i + 1:]:
            assert not is_sat(E.and_(a, b)).sat
    if rep.complete:
        st0 = make_symbolic_inputs(m, "h")
        assert is_valid(E.or_(*conds) if len(conds) > 1 else conds[0], [st0.domain])


@given(st.integers(0, 2**32 - 1), st.sampled_from(LOOP_FREE + ["inout"]))
@settings(max_examples=40)
def test_models_reproduce_outputs(seed, profile):
    g = random_function(random.Random(seed), "h", profile)
    m = parse_module(g.text)
    st0 = make_symbolic_inputs(m, "h")
    iface = interface_of(m.function("h"))
    for p in merge_loop_paths(explore(m, "h").paths):
        if p.status != "complete":
            continue
        snap = snapshot(p)
        for a in models(p.path_condition, 2, [st0.domain], over={v: w for v, w in _inputs(m).items()}):
            plain = snap.select(a)
            assert plain is not None
            got = interpret(m, "h", a)
            want = outcome_of(plain, iface, a)
            assert got == want


def _inputs(m):
    from ecpart.ir.inputs import input_vars

    return {v.name: v.width for v in input_vars(m, "h")}
