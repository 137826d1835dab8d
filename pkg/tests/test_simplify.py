import random

import pytest
from hypothesis import given, settings, strategies as st

import ecpart.simplify as S
from ecpart.ecp import EquivalenceClass, OutputSnapshot
from ecpart.simplify import (Context, RewriteRule, SimplificationError, parse_rule_spec, random_expr, rule_corpus,
                             simplify, split_ite_cases, verify_rules, verify_split)
from ecpart.smt import expr as E
from ecpart.smt.solver import check_equiv, is_sat
from ecpart.smt.text import to_infix

x16 = E.var("x", 16)
a, b = E.var("a", 8), E.var("b", 8)
c = E.var("c", 1)
k8 = lambda v: E.const(v, 8)  # noqa: E731


def _s(e, rules=None):
    out, rep = simplify(e, rules)
    assert check_equiv(e, out)
    return out, rep


def test_r1_slices_combine():
    e = E.and_(E.eq(E.extract(x16, 15, 8), k8(0x12)), E.eq(E.extract(x16, 7, 0), k8(0x34)))
    out, rep = _s(e, {1})
    assert out is E.eq(x16, E.const(0x1234, 16))
    assert rep.counts[1] == 1


def test_r2_redundant_bounds():
    out, rep = _s(E.and_(E.ule(a, k8(5)), E.ule(a, k8(3))), {2})
    assert out is E.ule(a, k8(3))
    assert _s(E.not_(E.not_(c)), {2})[0] is c


def test_r3_factor():
    out, rep = _s(E.add(E.mul(k8(2), a), E.mul(k8(2), b)), {3})
    assert out.op == "mul" and k8(2) in out.args
    assert rep.counts[3] == 1


def test_r4_standard_comparison():
    out, rep = _s(E.ule(a, b), {4})
    assert rep.counts[4] == 1
    assert to_infix(out) == "a <= b"


def test_r5_any_bit():
    e = E.or_(*[E.eq(E.extract(a, i, i), E.const(1, 1)) for i in range(8)])
    out, _ = _s(e, {5})
    assert to_infix(out) == "a != 0x0"


def test_r6_zero_padding():
    out, _ = _s(E.concat(a, E.const(0, 4)), {6})
    assert out is E.shl(E.zext(a, 12), E.const(4, 12))


def test_r7_unshifted_compare():
    e = E.ugt(E.shl(x16, E.const(4, 16)), E.const(0x540, 16))
    out, rep = _s(e)
    assert rep.counts[7] >= 1
    assert "0x54" in to_infix(out) and "<<" not in to_infix(out)


@pytest.mark.parametrize("width", [8, 12])
def test_r7_enumerated(width):
    # every constant, both directions, all x of the stated width
    x = E.var("x", width)
    rng = random.Random(width)
    for _ in range(60):
        k = rng.randrange(1, width)
        cst = E.const(rng.randrange(1 << width), width)
        op = rng.choice(["ult", "ule", "ugt", "uge", "eq"])
        e = E.make(op, (E.shl(x, E.const(k, width)), cst))
        out, _ = simplify(e, {7}, verify=False)
        assert all(E.evaluate(e, {"x": v}) == E.evaluate(out, {"x": v}) for v in range(1 << width))


def test_rule_spec():
    assert parse_rule_spec("1,2,5-8") == {1, 2, 5, 6, 7, 8}
    with pytest.raises(ValueError):
        parse_rule_spec("0-3")
    with pytest.raises(ValueError):
        parse_rule_spec("9")


# -- rule 8 ----------------------------------------------------------------------

def _ec(cond, ret=None):
    return EquivalenceClass(1, cond, OutputSnapshot(ret=ret))


def test_r8_split_condition():
    e = _ec(E.ite(c, E.ugt(a, k8(1)), E.ugt(a, k8(2))))
    parts = split_ite_cases(e)
    assert len(parts) == 2
    want = [E.and_(c, E.ugt(a, k8(1))), E.and_(E.not_(c), E.ugt(a, k8(2)))]
    for w in want:
        assert any(check_equiv(p.condition, w) for p in parts)
    assert verify_split(e)


def test_r8_ite_free_unchanged():
    e = _ec(E.ugt(a, k8(1)))
    assert split_ite_cases(e) == [e]


def test_r8_split_outputs():
    e = _ec(E.TRUE, E.ite(E.ult(a, k8(9)), a, k8(9)))
    parts = split_ite_cases(e)
    assert len(parts) == 2
    assert all(not E.contains_op(p.snapshot.ret, "ite") for p in parts)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60)
def test_r8_nested_random(seed):
    rng = random.Random(seed)
    cond = random_expr(rng, 4, 4, 2, boolean=True)
    ret = random_expr(rng, 4, 3, 2)
    if not is_sat(cond).sat:
        return
    ec = _ec(cond, ret)
    parts = split_ite_cases(ec)
    for p in parts:
        assert not E.contains_op(p.condition, "ite")
        assert p.snapshot.ret is None or not E.contains_op(p.snapshot.ret, "ite")
    assert verify_split(ec)


# -- harness ----------------------------------------------------------------------

def test_verify_rules_catches_bad_rule():
    def plus_to_minus(e, ctx):
        if e.op == "add" and len(e.args) == 2 and all(x.op == "var" for x in e.args):
            return E.sub(*e.args)
        return None

    bad = RewriteRule(3, "plus to minus", plus_to_minus)
    rep = verify_rules([E.eq(E.add(a, b), k8(4))], {3}, custom=[bad])
    assert not rep.ok and rep.violations[0].rule == 3
    with pytest.raises(SimplificationError):
        simplify(E.eq(E.add(a, b), k8(4)), {3}, custom=[bad])


def test_verify_rules_empty_corpus():
    rep = verify_rules([])
    assert rep.ok and rep.checked == 0


@given(st.integers(0, 2**32 - 1), st.integers(1, 7))
@settings(max_examples=150)
def test_rules_sound_on_shaped_corpus(seed, rule):
    e = rule_corpus(rule, random.Random(seed))
    assert verify_rules([e], {rule}).ok


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=100)
def test_size_does_not_explode(seed):
    e = random_expr(random.Random(seed), 8, 3, 2, boolean=True)
    out, rep = simplify(e)
    assert rep.size_after <= rep.size_before + 8


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 5, 7]))
@settings(max_examples=60)
def test_order_permutations_agree(seed, rule):
    e = rule_corpus(rule, random.Random(seed))
    first, _ = simplify(e)
    saved = S._ORDER
    try:
        S._ORDER = (2, 1, 3, 5, 7, 6)
        second, _ = simplify(e)
    finally:
        S._ORDER = saved
    assert check_equiv(first, second)


def test_context_uses_enum_domain():
    m = E.var("m", 8)
    ctx = Context.from_constraint(E.or_(*[E.eq(m, k8(v)) for v in (0, 1, 2)]), {"m": (0, 1, 2)})
    out, _ = simplify(E.and_(E.ne(m, k8(0)), E.ne(m, k8(1))), {2}, ctx)
    assert check_equiv(out, E.eq(m, k8(2)), [ctx.assumption])
