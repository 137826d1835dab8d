import json

import pytest

from ecpart.analysis import AnalysisOptions, analyze_module
from ecpart.ecp import interface_of, outcome_of
from ecpart.executor import ExplorationConfig
from ecpart.golden import load_fixture
from ecpart.ir.parser import parse_module
from ecpart.oracle import interpret
from ecpart.smt import expr as E
from ecpart.smt.solver import models
from ecpart.summaries import (SummaryError, SummaryStore, build_summary, deserialize_summary, havoc_summary,
                              serialize_summary)


def _summary(m, name, options=None):
    fa = analyze_module(m, [name], options).functions[name]
    return build_summary(m.function(name), fa.classes, exploration_complete=not fa.incomplete,
                         domain=fa.domain), fa


def test_f1_summary(f1_module):
    s, _ = _summary(f1_module, "f1")
    assert len(s.cases) == 3 and s.complete
    assert all(c.outputs.cells[0][0] == "*pout" for c in s.cases)


def test_constant_function():
    m = parse_module("func k(in %x: u8) -> u8 {\nentry:\n  ret 4\n}")
    s, _ = _summary(m, "k")
    assert len(s.cases) == 1 and s.complete
    assert s.cases[0].condition is E.TRUE


def test_truncated_is_incomplete(f2_module):
    s, fa = _summary(f2_module, "f2", AnalysisOptions(config=ExplorationConfig(loop_bound=2)))
    assert fa.truncated and not s.complete


def test_round_trip(f1_module, f2_module):
    for m, n in ((f1_module, "f1"), (f2_module, "f2")):
        s, _ = _summary(m, n)
        data = serialize_summary(s)
        assert deserialize_summary(data) == s
        assert serialize_summary(deserialize_summary(data)) == data


def test_unknown_version(f1_module):
    s, _ = _summary(f1_module, "f1")
    doc = json.loads(serialize_summary(s))
    doc["version"] = 99
    with pytest.raises(SummaryError, match="version"):
        deserialize_summary(json.dumps(doc))


def test_unbound_variable_named(f1_module):
    s, _ = _summary(f1_module, "f1")
    doc = json.loads(serialize_summary(s))
    doc["cases"][0]["condition"] = "(ult (var q 16) (const 5 16))"
    with pytest.raises(SummaryError, match="'q'"):
        deserialize_summary(json.dumps(doc))


def test_malformed():
    with pytest.raises(SummaryError):
        deserialize_summary(b"{not json")
    with pytest.raises(SummaryError):
        deserialize_summary(b'{"format": "other"}')


def test_havoc_summaries():
    m = parse_module("extern func rng() -> u8\nextern func fill(out %o: ptr u8[2]) -> void\n"
                     "extern func sink(in %x: u8) -> void\n")
    s = havoc_summary(m.function("rng"))
    (case,) = s.cases
    assert s.havoc and s.complete
    assert case.outputs.ret.op == "var" and case.outputs.ret.width == 8 and not case.outputs.cells
    s = havoc_summary(m.function("fill"))
    cells = dict(s.cases[0].outputs.cells)
    assert sorted(cells) == ["o[0]", "o[1]"] and all(v.op == "var" for v in cells.values())
    s = havoc_summary(m.function("sink"))
    out = s.cases[0].outputs
    assert out.ret is None and not out.cells and not out.globals


def test_publish_once(f1_module, tmp_path):
    s, _ = _summary(f1_module, "f1")
    store = SummaryStore()
    store.publish(s)
    with pytest.raises(SummaryError):
        store.publish(s)
    store.save(tmp_path)
    again = SummaryStore.load(tmp_path)
    assert again.get("f1") == s


@pytest.mark.parametrize("fixture, fn", [("f1.mir", "f1"), ("calls/clamp.mir", "clamp"),
                                         ("calls/outparam.mir", "split"), ("calls/state.mir", "raise"),
                                         ("calls/array.mir", "sum2"), ("calls/signed.mir", "mag")])
def test_cases_sound(fixture, fn):
    m = load_fixture(fixture)
    s, fa = _summary(m, fn)
    iface = interface_of(m.function(fn))
    for case in s.cases:
        for a in models(case.condition, 8, [fa.domain], over=fa.inputs):
            snap = case.outputs.select(a)
            assert interpret(m, fn, a) == outcome_of(snap, iface, a)
