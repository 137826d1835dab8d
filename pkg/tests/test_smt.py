import random

import pytest
from hypothesis import given, settings, strategies as st

from ecpart.simplify import random_expr
from ecpart.smt import expr as E
from ecpart.smt.normalize import normalize
from ecpart.smt.solver import check_equiv, is_sat, models
from ecpart.smt.text import parse_sexpr, to_sexpr, to_smtlib
from ecpart.smt.vector import equal_everywhere, evaluate_grid, grid, satisfiable

x8 = E.var("x", 8)
b1 = E.var("b", 1)


# -- construction ---------------------------------------------------------------

def test_hash_consing_shares_nodes():
    a = E.add(E.var("x", 8), E.const(3, 8))
    b = E.add(E.var("x", 8), E.const(3, 8))
    assert a is b and a.id == b.id


def test_width_bookkeeping():
    assert E.concat(E.var("h", 5), E.var("l", 3)).width == 8
    assert E.extract(E.var("w", 32), 28, 20).width == 9
    with pytest.raises(E.ExprError):
        E.add(E.var("x", 8), E.var("y", 16))
    with pytest.raises(E.ExprError):
        E.and_(E.var("x", 8), b1)


# -- normalize --------------------------------------------------------------------

def test_normalize_examples():
    assert normalize(E.add(x8, E.const(0, 8))) is x8
    assert normalize(E.add(E.const(2, 8), E.const(3, 8))) is E.const(5, 8)
    assert normalize(E.and_(b1, b1)) is b1


@given(st.integers(0, 2**32 - 1), st.sampled_from([4, 8]), st.booleans())
@settings(max_examples=300)
def test_normalize_preserves_value(seed, width, boolean):
    rng = random.Random(seed)
    e = random_expr(rng, width, 3, 2, boolean)
    n = normalize(e)
    assert normalize(n) is n
    names = E.free_vars(e, n)
    cols = grid(names)
    assert (evaluate_grid(e, cols) == evaluate_grid(n, cols)).all()


# -- satisfiability ----------------------------------------------------------------

def test_contradiction_unsat():
    assert not is_sat(E.and_(E.ugt(x8, E.const(5, 8)), E.ult(x8, E.const(3, 8)))).sat


def test_model_satisfies():
    pin = E.var("pin", 16)
    cond = E.ugt(pin, E.const(0x540, 16))
    r = is_sat(cond)
    assert r.sat and E.evaluate(cond, r.model) == 1


def test_bit7_model():
    cond = E.ne(E.and_(x8, E.const(0x80, 8)), E.const(0, 8))
    r = is_sat(cond)
    assert r.sat and r.model["x"] & 0x80


def test_check_equiv_examples():
    # appending three zero bits equals a shift at the widened width; confirmed on all 256 x too
    cat = E.concat(x8, E.const(0, 3))
    shifted = E.shl(E.zext(x8, 11), E.const(3, 11))
    assert check_equiv(cat, shifted)
    assert all(E.evaluate(cat, {"x": v}) == E.evaluate(shifted, {"x": v}) for v in range(256))
    assert not check_equiv(x8, E.add(x8, E.const(1, 8)))
    assert check_equiv(E.not_(E.not_(b1)), b1)


def test_models_distinct():
    # a 2-element space: b ∈ {0, 1}
    got = models(E.TRUE, 3, over={"b": 1})
    assert sorted(m["b"] for m in got) == [0, 1]
    got = models(E.and_(E.or_(E.eq(b1, E.const(0, 1)), E.eq(b1, E.const(1, 1))), b1), 5)
    assert got == [{"b": 1}]


# -- eval ----------------------------------------------------------------------------

def test_eval_examples():
    assert E.evaluate(E.extract(E.const(0x1234, 16), 15, 8), {}) == 0x12
    assert E.evaluate(E.ite(E.TRUE, E.const(7, 8), E.const(9, 8)), {}) == 7
    assert E.evaluate(E.lshr(E.const(0x80, 8), E.const(7, 8)), {}) == 1
    with pytest.raises(Exception):
        E.evaluate(x8, {})


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=200)
def test_scalar_and_vector_evaluation_agree(seed):
    rng = random.Random(seed)
    e = random_expr(rng, 6, 3, 2, rng.random() < 0.5)
    names = E.free_vars(e)
    cols = grid(names)
    vec = evaluate_grid(e, cols)
    for i in rng.sample(range(len(vec)), min(20, len(vec))):
        a = {n: int(c[i]) for n, c in cols.items()}
        assert E.evaluate(e, a) == int(vec[i])


# -- solver against enumeration -------------------------------------------------------

@given(st.integers(0, 2**32 - 1), st.integers(1, 2))
@settings(max_examples=400)
def test_solver_matches_enumeration(seed, nvars):
    rng = random.Random(seed)
    width = rng.randint(1, 12 // nvars)
    cond = random_expr(rng, width, 3, nvars, boolean=True)
    r = is_sat(cond)
    assert r.sat == satisfiable(cond)
    if r.sat:
        assert E.evaluate(cond, r.model) == 1


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=150)
def test_backends_agree(seed):
    rng = random.Random(seed)
    cond = random_expr(rng, 5, 3, 2, boolean=True)
    assert is_sat(cond, backend="builtin").sat == is_sat(cond, backend="pysat").sat


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=150)
def test_equiv_matches_enumeration(seed):
    rng = random.Random(seed)
    a = random_expr(rng, 5, 2, 2)
    b = normalize(random_expr(rng, 5, 1, 2)) if rng.random() < 0.5 else normalize(a)
    assert check_equiv(a, b) == equal_everywhere(a, b)


# -- text forms ----------------------------------------------------------------------------

@given(st.integers(0, 2**32 - 1))
@settings(max_examples=200)
def test_sexpr_round_trip(seed):
    e = random_expr(random.Random(seed), 8, 3, 2, boolean=True)
    assert parse_sexpr(to_sexpr(e)) is e


def test_smtlib_dump():
    text = to_smtlib(E.ugt(x8, E.const(5, 8)))
    assert "(declare-const |x| (_ BitVec 8))" in text
    assert "(check-sat)" in text
