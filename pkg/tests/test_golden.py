from ecpart.golden import golden_case, golden_cases, golden_check, random_assignments
from ecpart.smt import expr as E


def test_cases_listed():
    assert [c.name for c in golden_cases()] == ["f1", "f2", "f3"]


def test_f1_and_f2_pass_without_oracle():
    for name in ("f1", "f2"):
        rep = golden_check(golden_case(name), oracle=False)
        assert rep.passed, rep.problems
        assert rep.line().startswith("PASS golden " + name)


def test_wrong_expectation_is_reported():
    case = golden_case("f1")
    pin = E.var("pin", 16)
    wrong = case.expected[0].__class__("pin above 0x541", E.ult(E.const(0x541, 16), pin),
                                       case.expected[0].outputs, "*pout = 1")
    bad = case.__class__(case.name, case.fixture, case.function, case.class_counts,
                         (wrong,) + case.expected[1:], case.domain)
    rep = golden_check(bad, oracle=False)
    assert not rep.passed
    assert "pin above 0x541" in rep.problems[0]


def test_random_assignments_respect_domains():
    rows = random_assignments({"a": 8, "m": 32}, 50, seed=1, domains={"m": [0, 1, 2]})
    assert all(r["m"] in (0, 1, 2) and 0 <= r["a"] < 256 for r in rows)
    assert rows == random_assignments({"a": 8, "m": 32}, 50, seed=1, domains={"m": [0, 1, 2]})
