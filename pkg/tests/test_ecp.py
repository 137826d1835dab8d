import pytest

from ecpart.analysis import analyze_module, verify_against_oracle
from ecpart.ecp import EquivalenceClass, OutputSnapshot, group, representatives, snapshot
from ecpart.executor import Outputs, PathResult, Write, explore, merge_loop_paths
from ecpart.golden import load_fixture
from ecpart.smt import expr as E
from ecpart.smt.solver import is_sat, is_valid

x = E.var("x", 8)


def _path(cond, ret=None, writes=()):
    return PathResult(cond, Outputs(ret, False, tuple(writes)), ("exit", "", "entry"), frozenset(), (("entry", "entry"),))


def test_last_write_wins():
    s = snapshot(_path(E.TRUE, writes=[Write("@g", E.const(1, 8)), Write("@g", E.const(2, 8))]))
    assert s.globals == (("@g", E.const(2, 8)),)


def test_cells_and_return_ordered():
    s = snapshot(_path(E.TRUE, E.const(0, 8), [Write("p[10]", x), Write("*pout", x), Write("p[2]", x)]))
    assert [k for k, _ in s.cells] == ["p[2]", "p[10]", "*pout"]
    assert s.ret is E.const(0, 8)


def test_return_only():
    s = snapshot(_path(E.TRUE, E.const(0, 8)))
    assert s == OutputSnapshot(ret=E.const(0, 8))


def test_canonical_key_tracks_structure():
    a = snapshot(_path(E.TRUE, E.add(x, E.const(1, 8))))
    b = snapshot(_path(E.FALSE, E.add(E.const(1, 8), x)))
    c = snapshot(_path(E.TRUE, E.add(x, E.const(2, 8))))
    assert a.canonical_key == b.canonical_key != c.canonical_key


def test_identical_snapshots_grouped():
    p1 = _path(E.ult(x, E.const(3, 8)), E.const(7, 8))
    p2 = _path(E.ugt(x, E.const(200, 8)), E.const(7, 8))
    (ec,) = group([p1, p2])
    assert is_valid(E.eq(ec.condition, E.or_(p1.path_condition, p2.path_condition)))


def test_f1_classes(f1_module):
    classes = group(explore(f1_module, "f1").paths, f1_module.function("f1"))
    outs = sorted(ec.snapshot.cells[0][1].value for ec in classes)
    assert outs == [1, 2, 3]


def test_f2_classes(f2_module):
    paths = merge_loop_paths(explore(f2_module, "f2").paths)
    classes = group(paths, f2_module.function("f2"))
    assert len(classes) == 2
    assert sorted(ec.snapshot.is_guarded for ec in classes) == [False, True]


def test_representatives_satisfy(f1_module):
    fa = analyze_module(f1_module).functions["f1"]
    for ec in fa.classes:
        reps = representatives(ec, 3)
        assert reps and all(E.evaluate(ec.condition, r) for r in reps)
        assert len({tuple(sorted(r.items())) for r in reps}) == len(reps)


def test_representatives_small_space():
    b = E.var("b", 1)
    ec = EquivalenceClass(1, E.or_(E.eq(b, E.const(0, 1)), E.eq(b, E.const(1, 1))), OutputSnapshot())
    assert len(representatives(ec, 3)) == 2
    ec = EquivalenceClass(1, E.and_(ec.condition, E.eq(b, E.const(1, 1))), OutputSnapshot())
    assert representatives(ec, 3) == [{"b": 1}]


def test_ids_deterministic(f1_module):
    a = analyze_module(f1_module).functions["f1"].classes
    b = analyze_module(f1_module).functions["f1"].classes
    assert [(c.id, c.condition, c.snapshot.canonical_key) for c in a] == \
        [(c.id, c.condition, c.snapshot.canonical_key) for c in b]
    keys = [c.snapshot.canonical_key for c in a]
    assert keys == sorted(keys)


@pytest.mark.parametrize("fixture, fn", [("f1.mir", "f1"), ("f2.mir", "f2"), ("add8.mir", "add8"),
                                         ("calls/clamp.mir", "scale"), ("calls/signed.mir", "pick")])
def test_disjoint_and_total(fixture, fn):
    fa = analyze_module(load_fixture(fixture), [fn]).functions[fn]
    cs = fa.classes
    assert len(cs) <= 6
    for i, a in enumerate(cs):
        assert is_sat(a.condition, [fa.domain]).sat
        for b in cs[i + 1:]:
            assert not is_sat(E.and_(a.condition, b.condition), [fa.domain]).sat
    assert is_valid(E.or_(*[c.condition for c in cs]) if len(cs) > 1 else cs[0].condition, [fa.domain])


@pytest.mark.parametrize("fixture, fn", [("f1.mir", "f1"), ("f2.mir", "f2"), ("calls/outparam.mir", "wrap_split"),
                                         ("calls/state.mir", "update"), ("calls/signed.mir", "max8")])
def test_oracle_equivalence(fixture, fn):
    m = load_fixture(fixture)
    fa = analyze_module(m, [fn]).functions[fn]
    rep = verify_against_oracle(m, fa)
    assert rep.ok, rep.to_dict()
