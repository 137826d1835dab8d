import json

import jsonschema
import pytest

from ecpart.analysis import analyze_module
from ecpart.golden import load_fixture
from ecpart.ir.parser import parse_module
from ecpart.report import (DatasetError, analyses_from_doc, emit_json, llm_render, load_dataset, load_name_map,
                           render_human, schema)
from ecpart.smt.solver import check_equiv
from ecpart.smt.text import parse_sexpr


@pytest.fixture(scope="module")
def datasets():
    out = {}
    for name in ("f1", "f2", "add8", "firmware"):
        result = analyze_module(load_fixture(f"{name}.mir"))
        out[name] = emit_json(result, {"kind": "microir", "path": f"{name}.mir"})
    return out


def test_schema_valid(datasets):
    validator = jsonschema.Draft202012Validator(schema())
    for data in datasets.values():
        validator.validate(json.loads(data))


def test_empty_module_dataset():
    data = emit_json(analyze_module(parse_module("")))
    doc = load_dataset(data)
    jsonschema.validate(doc, schema())
    assert doc["functions"] == []
    assert render_human(doc) == ""


def test_emit_is_deterministic(datasets):
    again = emit_json(analyze_module(load_fixture("f1.mir")), {"kind": "microir", "path": "f1.mir"})
    assert again == datasets["f1"]


def test_dataset_round_trips_to_analyses(datasets):
    doc = load_dataset(datasets["f2"])
    module, analyses = analyses_from_doc(doc)
    fa = analyses["f2"]
    assert len(fa.classes) == 2
    assert module.function("f2") is not None


def test_f1_conditions_carry_boundaries(datasets):
    doc = load_dataset(datasets["f1"])
    texts = " ".join(c["condition_text"] for c in doc["functions"][0]["classes"])
    for boundary in ("0x540", "0x21c", "0x2b0"):
        assert boundary in texts.lower()


def test_display_condition_is_equivalent(datasets):
    for data in datasets.values():
        for fd in load_dataset(data)["functions"]:
            for cd in fd["classes"]:
                assert check_equiv(parse_sexpr(cd["condition"]), parse_sexpr(cd["display_condition"]),
                                   max_conflicts=None)


def test_f2_rendering(datasets):
    text = render_human(load_dataset(datasets["f2"]))
    assert "return 0xFF when p1 = 0" in text
    assert "return in [0,8) when p1 ≠ 0" in text


def test_name_map_substitutes_literals(datasets):
    doc = load_dataset(datasets["f1"])
    names = load_name_map('{"0x540": "LIMIT_HI"}')
    text = render_human(doc, names)
    assert "pin > LIMIT_HI" in text
    assert "0x540" not in text
    assert render_human(doc, names) == text


@pytest.mark.parametrize("blob,needle", [
    (b"not json", "not JSON"),
    (b'{"format": "other"}', "not an ecpart dataset"),
    (b'{"format": "ecpart-dataset", "schema_version": 7}', "schema version"),
])
def test_load_dataset_rejects(blob, needle):
    with pytest.raises(DatasetError, match=needle):
        load_dataset(blob)


def test_name_map_rejects_non_integer_keys():
    with pytest.raises(DatasetError):
        load_name_map('{"LIMIT": "x"}')


def test_llm_unreachable_endpoint_gives_warning(datasets):
    res = llm_render(load_dataset(datasets["f2"]), "http://127.0.0.1:9/", timeout=1.0)
    assert res.text is None and "skipped" in res.warning
