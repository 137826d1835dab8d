"""Acceptance suite: one test per criterion, each reporting PASS/FAIL with its time budget.

The per-criterion lines are printed as they finish and repeated in the
terminal summary (see ``conftest.py``), so they show up under plain
``pytest`` as well as ``pytest -s``.
"""

import random
import time
from contextlib import contextmanager
from importlib import import_module, resources

import pytest

from ecpart.analysis import (AnalysisOptions, analyze_module, oracle_partition, partition_differences,
                             verify_against_oracle)
from ecpart.ecp import EquivalenceClass, OutputSnapshot
from ecpart.executor import ExplorationConfig
from ecpart.frontend.dwarf import extract_debug_bundle
from ecpart.frontend.elf import read_elf
from ecpart.frontend.mapfile import parse_map_file
from ecpart.frontend.rv32i import lift_module
from ecpart.gen import random_corpus
from ecpart.golden import golden_case, golden_check, load_fixture
from ecpart.ir.parser import parse_module
from ecpart.report import emit_json, load_dataset, render_human
from ecpart.scheduler import CallCycleError, build_call_graph, compute_metrics, plan
from ecpart.simplify import random_expr, rule_corpus, verify_rules, verify_split
from ecpart.smt import expr as E
from ecpart.smt import vector
from ecpart.smt.solver import check_equiv, is_sat

RESULTS: list[str] = []

FIXTURES = resources.files("ecpart") / "fixtures"


@contextmanager
def criterion(number, title, budget):
    """Time the block, record a PASS/FAIL line and fail on errors or an exceeded budget."""
    t0 = time.perf_counter()
    detail = {"text": ""}
    try:
        yield detail
    except BaseException as exc:
        line = f"FAIL criterion {number:2d} {title}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        RESULTS.append(line + f" ({time.perf_counter() - t0:.1f}s / {budget}s)")
        print(RESULTS[-1])
        raise
    took = time.perf_counter() - t0
    ok = took < budget
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail['text']} ({took:.1f}s / {budget}s)"
    RESULTS.append(line)
    print(line)
    assert ok, f"over budget: {took:.1f}s >= {budget}s"


def _golden(number, name, budget):
    with criterion(number, f"golden {name}", budget) as d:
        rep = golden_check(golden_case(name))
        d["text"] = f"{rep.class_count} classes, oracle checked {rep.oracle.checked} inputs"
        assert rep.passed, rep.problems


def test_criterion_01_golden_f1():
    _golden(1, "f1", 10)


def test_criterion_02_golden_f2():
    _golden(2, "f2", 10)


def test_criterion_03_golden_f3():
    _golden(3, "f3", 30)


def test_criterion_04_oracle_equivalence():
    with criterion(4, "oracle equivalence on generated functions", 300) as d:
        corpus = random_corpus(1, 30, large=6)
        assert len(corpus) >= 25
        checked = 0
        for g in corpus:
            assert g.domain_size <= 1 << 16
            module = parse_module(g.text)
            fa = analyze_module(module).functions[g.name]
            assert not fa.truncated, g.name
            rep = verify_against_oracle(module, fa)
            assert rep.ok, f"{g.name} ({g.profile}): {rep.counts}"
            checked += rep.checked
        d["text"] = f"{len(corpus)} functions, {checked} assignments, 0 mismatches"


def _ite_class(rng):
    cond = random_expr(rng, 4, 4, 2, boolean=True)
    ret = random_expr(rng, 4, 3, 2)
    return EquivalenceClass(1, cond, OutputSnapshot(ret=ret))


def test_criterion_05_simplifier_soundness():
    with criterion(5, "simplifier soundness", 300) as d:
        rng = random.Random(5)
        fired = {}
        for rule in range(1, 8):
            rep = verify_rules([rule_corpus(rule, rng) for _ in range(1000)], {rule})
            assert rep.ok, f"rule {rule}: {rep.violations[:1]}"
            fired[rule] = rep.applied.get(rule, 0)
            assert fired[rule] > 0, f"rule {rule} never fired"
        split = 0
        for _ in range(1000):
            ec = _ite_class(rng)
            if not is_sat(ec.condition).sat:
                ec = EquivalenceClass(1, E.TRUE, ec.snapshot)
            assert verify_split(ec)
            split += 1
        d["text"] = f"rules 1-7 x 1000 (fired {fired}), rule 8 x {split}, 0 violations"


def test_criterion_06_solver_exactness():
    with criterion(6, "solver exactness", 300) as d:
        rng = random.Random(6)
        sat_count = 0
        for _ in range(10_000):
            nvars = rng.choice((1, 2))
            width = rng.randint(1, 12 // nvars)
            f = random_expr(rng, width, 3, nvars, boolean=True)
            res = is_sat(f, max_conflicts=None)
            assert res.sat == vector.satisfiable(f), f
            if res.sat:
                sat_count += 1
                model = {n: res.model.get(n, 0) for n in E.free_vars(f)}
                assert E.evaluate(f, model) == 1, (f, model)
        d["text"] = f"10000 formulas ({sat_count} sat), 0 disagreements"


CALL_FIXTURES = ["array", "clamp", "outparam", "signed", "state"]


def test_criterion_07_summary_equivalence():
    with criterion(7, "summaries vs inlining vs oracle", 120) as d:
        inline_cfg = AnalysisOptions(config=ExplorationConfig(use_summaries=False))
        callers = 0
        for name in CALL_FIXTURES:
            module = load_fixture(f"calls/{name}.mir")
            with_s = analyze_module(module).functions
            inline = analyze_module(module, options=inline_cfg).functions
            for fname, fa in with_s.items():
                if not fa.used_summaries:
                    continue
                callers += 1
                assert not inline[fname].used_summaries
                assert partition_differences(fa, inline[fname]) == [], (name, fname)
                part = oracle_partition(module, fname)
                for res in (fa, inline[fname]):
                    rep = verify_against_oracle(module, res, partition=part)
                    assert rep.ok, (name, fname, rep.counts)
        assert callers >= len(CALL_FIXTURES)
        d["text"] = f"{len(CALL_FIXTURES)} fixtures, {callers} callers equal three ways"


def test_criterion_08_overflow_forking():
    with criterion(8, "overflow forking on add8", 30) as d:
        module = load_fixture("add8.mir")
        fa = analyze_module(module).functions["add8"]
        assert len(fa.classes) == 2
        a9, b9 = E.zext(E.var("a", 8), 9), E.zext(E.var("b", 8), 9)
        carry = E.ugt(E.add(a9, b9), E.const(0xFF, 9))
        assert sum(check_equiv(ec.condition, carry, max_conflicts=None) for ec in fa.classes) == 1
        assert sum(check_equiv(ec.condition, E.not_(carry), max_conflicts=None) for ec in fa.classes) == 1
        rep = verify_against_oracle(module, fa)
        assert rep.ok and rep.checked == 65_536, rep.counts
        d["text"] = "2 classes split at carry, 65536 inputs confirmed"


class _Refs:
    def __init__(self, names, edges):
        self.functions = names
        self.edges = edges

    def call_edges(self):
        return sorted(self.edges)


def _random_dag(rng):
    n = rng.randint(1, 20)
    names = [f"f{i:02d}" for i in range(n)]
    order = names[:]
    rng.shuffle(order)
    p = rng.choice((0.1, 0.2, 0.4))
    edges = {(order[i], order[j]) for i in range(n) for j in range(i + 1, n) if rng.random() < p}
    globs = {nm: [f"g{k}" for k in range(rng.randrange(5))] for nm in names}
    return names, sorted(edges), globs


def _depths(names, edges):
    memo = {}

    def depth(n):
        if n not in memo:
            memo[n] = max((1 + depth(b) for a, b in edges if a == n), default=0)
        return memo[n]

    return {n: depth(n) for n in names}


def test_criterion_09_scheduling():
    with criterion(9, "scheduling", 30) as d:
        rng = random.Random(9)
        for _ in range(500):
            names, edges, globs = _random_dag(rng)
            g = build_call_graph(_Refs(names, edges))
            ms = compute_metrics(g, globs)
            by = {m.name: m for m in ms}
            assert {m.name: m.call_depth for m in ms} == _depths(names, edges)
            for width in (1, 2):
                schedule = plan(ms, width, g).schedule
                pos = {n: i for i, n in enumerate(schedule)}
                assert sorted(schedule) == sorted(names)
                assert all(pos[b] < pos[a] for a, b in edges)
                if width == 1:
                    ranks = [(by[n].call_depth, by[n].globals_count, n) for n in schedule]
                    assert ranks == sorted(ranks)
        cycles = 0
        for _ in range(200):
            names, edges, _ = _random_dag(rng)
            k = rng.randint(1, min(4, len(names)))
            loop = rng.sample(names, k)
            cyc_edges = set(edges) | {(loop[i], loop[(i + 1) % k]) for i in range(k)}
            with pytest.raises(CallCycleError) as err:
                build_call_graph(_Refs(names, sorted(cyc_edges)))
            cyc = err.value.cycle
            assert cyc[0] == cyc[-1] and all((cyc[i], cyc[i + 1]) in cyc_edges for i in range(len(cyc) - 1))
            assert " -> ".join(cyc) in str(err.value)
            cycles += 1
        d["text"] = f"500 DAGs ordered, {cycles} cyclic graphs rejected with the cycle named"


def _stride(step, extra):
    return sorted(set(range(0, 0x10000, step)) | set(extra))


# Domains for the lifted versus hand-written cross-check.  Inputs not listed
# are enumerated in full.
FIRMWARE_DOMAINS = {
    "classify": {"pin": _stride(61, [0x21B, 0x21C, 0x21D, 0x2AF, 0x2B0, 0x2B1, 0x53F, 0x540, 0x541, 0xFFFF]),
                 "*pout": [0, 0xFF]},
    "g": {"a": _stride(97, [0xFF, 0x100, 0xFFFF])},
    "dispatch": {"a": _stride(97, [0xFF, 0x100, 0x3FFF, 0x4000, 0x4001, 0xFFFF]), "@limit": [0, 0x40, 0x7F, 0xFF]},
    "level": {},
    "over_limit": {"@limit": [0, 1, 0x40, 0x7F, 0x80, 0xFE, 0xFF]},
    "_start": {},
}


def test_criterion_10_frontend():
    with criterion(10, "front-end", 60) as d:
        fw = FIXTURES / "firmware"
        img = read_elf((fw / "fw.elf").read_bytes())
        bundle = extract_debug_bundle(img)
        sig = {f.name: ([(p.name, p.type.kind, p.type.width, p.direction) for p in f.params],
                        None if f.ret is None else (f.ret.kind, f.ret.width)) for f in bundle.functions}
        assert sig == {
            "_start": ([], None),
            "classify": ([("pin", "uint", 16, "in"), ("pout", "ptr", 0, "inout")], None),
            "g": ([("a", "uint", 16, "in"), ("b", "bool", 1, "in")], ("uint", 8)),
            "level": ([("m", "enum", 32, "in"), ("x", "uint", 8, "in")], ("uint", 8)),
            "over_limit": ([("x", "uint", 8, "in")], ("uint", 8)),
            "dispatch": ([("a", "uint", 16, "in"), ("b", "bool", 1, "in")], ("uint", 8)),
        }
        assert bundle.enums[0].constants == (("MODE_OFF", 0), ("MODE_LOW", 1), ("MODE_HIGH", 2))
        refs = parse_map_file((fw / "fw.map").read_text())
        assert refs.call_edges() == [("_start", "dispatch"), ("_start", "level"),
                                     ("dispatch", "g"), ("dispatch", "over_limit")]
        lifted = lift_module(img, bundle)
        assert not lifted.errors
        hand = load_fixture("firmware.mir")
        la = analyze_module(lifted.module).functions
        ha = analyze_module(hand).functions
        assert set(la) == set(ha) == set(FIRMWARE_DOMAINS)
        classes = 0
        for name, dom in FIRMWARE_DOMAINS.items():
            assert partition_differences(la[name], ha[name]) == [], name
            assert verify_against_oracle(hand, la[name], dom).ok, name
            assert verify_against_oracle(lifted.module, ha[name], dom).ok, name
            classes += len(la[name].classes)
        d["text"] = f"6 functions, {classes} classes match the hand-written module; signatures and 4 edges exact"


def _full_pass():
    # cold caches, so each pass really recomputes every query
    for name in ("ecpart.smt.solver", "ecpart.smt.normalize"):
        import_module(name).clear_cache()
    out = []
    modules = [(n, load_fixture(n)) for n in ("f1.mir", "f2.mir", "f3.mir", "add8.mir", "firmware.mir")]
    modules += [(f"calls/{n}.mir", load_fixture(f"calls/{n}.mir")) for n in CALL_FIXTURES]
    img = read_elf((FIXTURES / "firmware" / "fw.elf").read_bytes())
    modules.append(("fw.elf", lift_module(img, extract_debug_bundle(img)).module))
    for name, module in modules:
        data = emit_json(analyze_module(module), {"kind": "fixture", "path": name})
        out.append((data, render_human(load_dataset(data)).encode()))
    return out


def test_criterion_11_determinism():
    t0 = time.perf_counter()
    first = _full_pass()
    one_pass = time.perf_counter() - t0
    with criterion(11, "determinism", max(one_pass, 1.0) * 1.5) as d:
        second = _full_pass()
        assert second == first
        d["text"] = f"{len(first)} fixtures byte-identical (first pass {one_pass:.1f}s)"
