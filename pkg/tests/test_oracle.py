import pytest

from ecpart.golden import golden_case
from ecpart.ir.parser import parse_module
from ecpart.oracle import (CapExceeded, ExternalCall, LoopFuelExhausted, OutOfBounds, compare_partition, interpret,
                           partition_by_output)
from ecpart.smt import expr as E
from ecpart.analysis import analyze_module


def test_f2_zero_returns_sentinel(f2_module):
    assert interpret(f2_module, "f2", {"p1": 0}).return_value == 0xFF


@pytest.mark.parametrize("p1, idx", [(1, 0), (0x80, 7), (0x0C, 2), (0xFF, 0)])
def test_f2_first_set_bit(f2_module, p1, idx):
    assert interpret(f2_module, "f2", {"p1": p1}).return_value == idx


def test_f1_above_limit(f1_module):
    out = interpret(f1_module, "f1", {"pin": 0x600})
    assert dict(out.out_params) == {"pout": 1}
    assert out.return_value is None


def test_f1_partition_has_three_cells(f1_module):
    p = partition_by_output(f1_module, "f1", {"pin": range(0x600)})
    outs = sorted(dict(o.out_params)["pout"] for o, _ in p.cells)
    assert outs == [1, 2, 3]
    assert p.size == 0x600
    members = [a["pin"] for _, ms in p.cells for a in ms]
    assert sorted(members) == list(range(0x600))


def test_constant_function_one_cell():
    m = parse_module("func k(in %x: u8, in %y: bool) -> u8 {\nentry:\n  ret 7\n}")
    assert len(partition_by_output(m, "k").cells) == 1


def test_two_bit_identity_singletons():
    # scalar widths start at 8, so the 2-bit space is a restricted domain
    m = parse_module("func id(in %x: u8) -> u8 {\nentry:\n  ret %x\n}")
    p = partition_by_output(m, "id", {"x": range(4)})
    assert sorted(len(ms) for _, ms in p.cells) == [1, 1, 1, 1]


def test_wrapped_flag_recorded():
    m = parse_module("func add8(in %a: u8, in %b: u8) -> u8 {\nentry:\n  %s = add %a, %b\n  ret %s\n}")
    assert interpret(m, "add8", {"a": 0xFF, "b": 1}).wrapped
    assert interpret(m, "add8", {"a": 0xFE, "b": 1}).return_value == 0xFF
    assert not interpret(m, "add8", {"a": 0xFE, "b": 1}).wrapped


def test_deterministic(f2_module):
    a = partition_by_output(f2_module, "f2")
    b = partition_by_output(f2_module, "f2")
    assert [o.encode() for o, _ in a.cells] == [o.encode() for o, _ in b.cells]


def test_loop_fuel():
    m = parse_module("func spin(in %x: u8) -> u8 {\nentry:\n  jmp top\ntop:\n  jmp top\n}")
    with pytest.raises(LoopFuelExhausted):
        interpret(m, "spin", {"x": 0}, loop_fuel=10)


def test_out_of_bounds_index():
    m = parse_module("func idx(in %b: ptr u8[2], in %i: u8) -> u8 {\nentry:\n  %v = load %b[%i]\n  ret %v\n}")
    assert interpret(m, "idx", {"b[0]": 5, "b[1]": 6, "i": 1}).return_value == 6
    with pytest.raises(OutOfBounds):
        interpret(m, "idx", {"b[0]": 5, "b[1]": 6, "i": 2})


def test_external_call():
    m = parse_module("extern func rng() -> u8\nfunc f() -> u8 {\nentry:\n  %r = call rng()\n  ret %r\n}")
    with pytest.raises(ExternalCall):
        interpret(m, "f", {})


def test_cap(f1_module):
    with pytest.raises(CapExceeded):
        partition_by_output(f1_module, "f1", cap=100)


def test_compare_empty_for_f1(f1_module):
    fa = analyze_module(f1_module).functions["f1"]
    p = partition_by_output(f1_module, "f1", {"pin": range(0x600)})
    rep = compare_partition(p, fa.classes)
    assert rep.ok and rep.checked == 0x600


def test_shifted_boundary_has_witness(f1_module):
    """Moving the 0x2B0 bound up by one is caught at that bound."""
    fa = analyze_module(f1_module).functions["f1"]
    mutated = []
    for ec in fa.classes:
        cond = E.rebuild(ec.condition, lambda n, args: E.const(0x2B1, 16) if n.op == "const" and n.width == 16
                         and n.value == 0x2B0 else None)
        mutated.append(type(ec)(**{**ec.__dict__, "condition": cond}))
    p = partition_by_output(f1_module, "f1", {"pin": range(0x600)})
    rep = compare_partition(p, mutated)
    assert not rep.ok
    witnesses = [a["pin"] for a in rep.uncovered] + [a["pin"] for a, _ in rep.overlapping] \
        + [w[0]["pin"] for w in rep.mispredicted]
    assert 0x2B1 in witnesses


def test_empty_domain_empty_report(f1_module):
    fa = analyze_module(f1_module).functions["f1"]
    p = partition_by_output(f1_module, "f1", {"pin": []})
    rep = compare_partition(p, fa.classes)
    assert rep.ok and rep.checked == 0


def test_golden_domains_are_stated():
    assert list(golden_case("f1").domain["pin"]) == list(range(0x600))
    assert golden_case("f3").samples == 100_000
