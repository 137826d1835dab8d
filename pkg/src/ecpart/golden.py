"""Golden expectations for the worked example functions and their checker.

Each expected class pairs a condition (checked for solver equivalence
against the produced condition, under the function's input domain) with a
predicate on the produced output snapshot.  ``golden_check`` also asks the
concrete oracle to confirm the produced classes over a stated domain.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations
from typing import Callable, Mapping, Sequence

from ecpart.analysis import (AnalysisOptions, FunctionAnalysis, analyze_module, membership_test,
                             verify_against_oracle)
from ecpart.ecp import OutputSnapshot
from ecpart.ir.model import Module
from ecpart.ir.parser import parse_module
from ecpart.oracle import CompareReport, compare_partition, partition_of_samples
from ecpart.smt import expr as E
from ecpart.smt.expr import Expr
from ecpart.smt.solver import check_equiv, is_sat


@dataclass(frozen=True)
class ExpectedClass:
    label: str
    condition: Expr
    outputs: Callable[[OutputSnapshot], bool]
    outputs_text: str


@dataclass(frozen=True)
class GoldenCase:
    name: str
    fixture: str
    function: str
    class_counts: tuple[int, ...]
    expected: tuple[ExpectedClass, ...]
    # enumerated oracle domain (inputs absent range over their type) ...
    domain: Mapping[str, Sequence[int]] | None = None
    # ... or this many random assignments when the space is too large
    samples: int = 0
    seed: int = 0


@dataclass
class GoldenReport:
    case: str
    passed: bool
    class_count: int
    matched: dict[str, int] = field(default_factory=dict)
    problems: list[str] = field(default_factory=list)
    oracle: CompareReport | None = None
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        detail = "; ".join(self.problems) if self.problems else f"{self.class_count} classes"
        return f"{status} golden {self.case}: {detail} ({self.seconds:.1f}s)"


def load_fixture(name: str) -> Module:
    return parse_module((resources.files("ecpart") / "fixtures" / name).read_text())


# --------------------------------------------------------------------------
# output predicates


def _plain(s: OutputSnapshot) -> bool:
    return not s.guarded


def writes_cell(loc: str, value: int, width: int) -> Callable[[OutputSnapshot], bool]:
    def check(s: OutputSnapshot) -> bool:
        return _plain(s) and s.ret is None and s.cells == ((loc, E.const(value, width)),) and not s.globals
    return check


def returns_const(value: int, width: int) -> Callable[[OutputSnapshot], bool]:
    def check(s: OutputSnapshot) -> bool:
        return _plain(s) and s.ret is E.const(value, width) and not s.cells and not s.globals
    return check


def returns_expr(expected: Expr) -> Callable[[OutputSnapshot], bool]:
    def check(s: OutputSnapshot) -> bool:
        return _plain(s) and s.ret is not None and s.ret.width == expected.width \
            and check_equiv(s.ret, expected, max_conflicts=None) and not s.cells and not s.globals
    return check


def guarded_returns_range(lo: int, hi: int, width: int, merged_paths: int) -> Callable[[OutputSnapshot], bool]:
    """Merged loop exits returning every constant in ``[lo, hi)`` under pairwise disjoint guards."""
    def check(s: OutputSnapshot) -> bool:
        if len(s.guarded) != merged_paths:
            return False
        vals = []
        for _, part in s.guarded:
            if part.ret is None or part.ret.op != "const" or part.ret.width != width or part.cells or part.globals:
                return False
            vals.append(part.ret.params[0])
        if sorted(vals) != list(range(lo, hi)):
            return False
        guards = [g for g, _ in s.guarded]
        return all(not is_sat(E.and_(a, b), max_conflicts=None).sat for a, b in combinations(guards, 2))
    return check


# --------------------------------------------------------------------------
# the three worked examples


def _f1() -> GoldenCase:
    pin = E.var("pin", 16)
    c = lambda v: E.const(v, 16)  # noqa: E731
    return GoldenCase(
        name="f1", fixture="f1.mir", function="f1", class_counts=(3,),
        expected=(
            ExpectedClass("pin above 0x540", E.ult(c(0x540), pin), writes_cell("*pout", 1, 8), "*pout = 1"),
            ExpectedClass("pin in [0x21C, 0x2B0]", E.and_(E.ule(c(0x21C), pin), E.ule(pin, c(0x2B0))),
                          writes_cell("*pout", 2, 8), "*pout = 2"),
            ExpectedClass("otherwise",
                          E.or_(E.ult(pin, c(0x21C)), E.and_(E.ult(c(0x2B0), pin), E.ule(pin, c(0x540)))),
                          writes_cell("*pout", 3, 8), "*pout = 3"),
        ),
        domain={"pin": range(0, 0x600)},
    )


def _f2() -> GoldenCase:
    p1 = E.var("p1", 8)
    zero = E.const(0, 8)
    return GoldenCase(
        name="f2", fixture="f2.mir", function="f2", class_counts=(2,),
        expected=(
            ExpectedClass("p1 zero", E.eq(p1, zero), returns_const(0xFF, 8), "ret = 0xFF"),
            ExpectedClass("p1 nonzero", E.ne(p1, zero), guarded_returns_range(0, 8, 8, 8), "0 <= ret < 8"),
        ),
        domain={"p1": range(256)},
    )


def f3_parts() -> tuple[Expr, Expr, Expr, Expr, Expr]:
    """``p1``'s low field, its re-attached high field, ``p2`` and the flag tests."""
    p1, p2, p3 = E.var("p1", 32), E.var("p2", 32), E.var("p3", 8)
    low = E.zext(E.extract(p1, 19, 0), 32)
    high = E.zext(E.concat(E.extract(p1, 28, 20), E.const(0, 4)), 32)
    return low, high, p2, E.eq(p3, E.const(1, 8)), E.eq(p3, E.const(0, 8))


def _f3() -> GoldenCase:
    low, high, p2, plus, minus = f3_parts()
    w33 = lambda x: E.zext(x, 33)  # noqa: E731
    limit = E.const(0xFFFFFFFF, 33)
    sum_plus = E.add(E.add(w33(p2), w33(low)), w33(high))
    sum_minus = E.add(E.sub(w33(low), w33(p2)), w33(high))
    ret_plus = E.add(E.add(p2, low), high)
    ret_minus = E.add(E.sub(low, p2), high)
    return GoldenCase(
        name="f3", fixture="f3.mir", function="f3", class_counts=(3, 4),
        expected=(
            ExpectedClass("p3 set, no overflow", E.and_(plus, E.ule(sum_plus, limit)), returns_expr(ret_plus),
                          "ret = p2 + p1[19:0] + (p1[28:20]..0x0)"),
            ExpectedClass("p3 clear, no overflow", E.and_(minus, E.ule(sum_minus, limit)), returns_expr(ret_minus),
                          "ret = p1[19:0] - p2 + (p1[28:20]..0x0)"),
            ExpectedClass("p3 clear, overflow", E.and_(minus, E.ugt(sum_minus, limit)), returns_expr(ret_minus),
                          "ret = p1[19:0] - p2 + (p1[28:20]..0x0)"),
        ),
        samples=100_000,
        seed=3,
    )


def golden_cases() -> list[GoldenCase]:
    return [_f1(), _f2(), _f3()]


def golden_case(name: str) -> GoldenCase:
    for c in golden_cases():
        if c.name == name:
            return c
    raise KeyError(name)


# --------------------------------------------------------------------------
# checking


def random_assignments(inputs: Mapping[str, int], n: int, seed: int,
                       domains: Mapping[str, Sequence[int]] | None = None) -> list[dict[str, int]]:
    rng = random.Random(seed)
    domains = domains or {}
    out = []
    for _ in range(n):
        a = {}
        for name in sorted(inputs):
            allowed = domains.get(name)
            a[name] = rng.choice(allowed) if allowed else rng.getrandbits(inputs[name])
        out.append(a)
    return out


def sampled_oracle_check(module: Module, fa: FunctionAnalysis, samples: Sequence[Mapping[str, int]]) -> CompareReport:
    """Oracle comparison on explicit assignments instead of a full enumeration."""
    part = partition_of_samples(module, fa.name, samples)
    return compare_partition(part, fa.classes, membership_test(part, fa.classes))


def _input_domains(module: Module, fname: str) -> dict[str, list[int]]:
    from ecpart.ir.inputs import input_vars

    return {v.name: list(v.type.domain_values()) for v in input_vars(module, fname)
            if v.type.domain_values() is not None}


def golden_check(case: GoldenCase, options: AnalysisOptions | None = None, oracle: bool = True) -> GoldenReport:
    t0 = time.perf_counter()
    module = load_fixture(case.fixture)
    fa = analyze_module(module, [case.function], options).functions[case.function]
    rep = GoldenReport(case.name, False, len(fa.classes))
    if len(fa.classes) not in case.class_counts:
        rep.problems.append(f"{len(fa.classes)} classes, expected {' or '.join(map(str, case.class_counts))}")
    used: set[int] = set()
    for exp in case.expected:
        hit = None
        for ec in fa.classes:
            if ec.id in used:
                continue
            if check_equiv(ec.condition, exp.condition, [fa.domain], max_conflicts=None) and exp.outputs(ec.snapshot):
                hit = ec
                break
        if hit is None:
            rep.problems.append(f"no class matches '{exp.label}' ({exp.outputs_text})")
        else:
            used.add(hit.id)
            rep.matched[exp.label] = hit.id
    if oracle:
        if case.samples:
            samples = random_assignments(fa.inputs, case.samples, case.seed, _input_domains(module, case.function))
            rep.oracle = sampled_oracle_check(module, fa, samples)
        else:
            rep.oracle = verify_against_oracle(module, fa, case.domain)
        if not rep.oracle.ok:
            rep.problems.append(f"oracle disagrees: {rep.oracle.counts}")
    rep.passed = not rep.problems
    rep.seconds = time.perf_counter() - t0
    return rep
