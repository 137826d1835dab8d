import random

import pytest
from hypothesis import given, strategies as st

from ecpart.gen import _PROFILES, random_function
from ecpart.ir.parser import IrParseError, parse_module
from ecpart.ir.printer import print_module
from ecpart.golden import load_fixture


def test_minimal_function():
    m = parse_module("func k() -> u8 {\nentry:\n  ret 0\n}\n")
    assert len(m.functions) == 1
    assert len(m.functions[0].blocks) == 1


def test_empty_module_prints_header_only():
    text = print_module(parse_module(""))
    assert "func" not in text
    assert parse_module(text).functions == ()


@pytest.mark.parametrize("name", ["f1.mir", "f2.mir", "f3.mir", "add8.mir", "firmware.mir",
                                  "calls/clamp.mir", "calls/state.mir", "calls/array.mir"])
def test_fixture_round_trip(name):
    m = load_fixture(name)
    text = print_module(m)
    assert parse_module(text) == m
    assert print_module(parse_module(text)) == text


@given(st.integers(0, 2**32 - 1), st.sampled_from([p[0] for p in _PROFILES]))
def test_generated_round_trip(seed, profile):
    g = random_function(random.Random(seed), "h", profile)
    m = parse_module(g.text)
    assert parse_module(print_module(m)) == m


@pytest.mark.parametrize("text, needle", [
    ("func f() -> u8 {\nentry:\n  jmp nowhere\n}", "nowhere"),
    ("func f(in %x: u8) -> u8 {\nentry:\n  %c = cmp eq %x, 0\n  br %c, yes, no\nyes:\n  ret 1\n}", "no"),
    ("func f(in %x: u8) -> u8 {\nentry:\n  %y = shl %x, 8\n  ret %y\n}", "shift amount"),
    ("func f() -> u8 {\nentry:\n  %y = call h()\n  ret %y\n}", "unknown callee h"),
    ("func f() -> u8 {\nentry:\n  ret 0\n}\nfunc f() -> u8 {\nentry:\n  ret 0\n}", "duplicate function f"),
    ("func f() -> u8 {\nentry:\n  %y = udiv 1, 2\n  ret 0\n}", "udiv"),
])
def test_rejects_malformed(text, needle):
    with pytest.raises(IrParseError) as err:
        parse_module(text)
    assert needle in str(err.value)
    assert err.value.line > 0


def test_error_carries_line_and_column():
    with pytest.raises(IrParseError) as err:
        parse_module("func f() -> u8 {\nentry:\n  %y = udiv 1, 2\n  ret 0\n}")
    assert (err.value.line, err.value.col) == (3, 8)


def test_width_mismatch_rejected():
    with pytest.raises(IrParseError):
        parse_module("func f(in %a: u8, in %b: u16) -> u8 {\nentry:\n  %s = add %a, %b\n  ret %s\n}")


def test_ret_type_checked():
    with pytest.raises(IrParseError):
        parse_module("func f(in %a: u16) -> u8 {\nentry:\n  ret %a\n}")


def test_branch_condition_must_be_bool():
    with pytest.raises(IrParseError):
        parse_module("func f(in %a: u8) -> u8 {\nentry:\n  br %a, x, y\nx:\n  ret 1\ny:\n  ret 2\n}")


def test_printing_is_deterministic(f1_module):
    assert print_module(f1_module) == print_module(f1_module)
