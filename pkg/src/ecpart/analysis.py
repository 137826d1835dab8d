"""End-to-end analysis of a module: exploration, grouping, presentation and summaries."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from ecpart.ecp import EquivalenceClass, OutputSnapshot, group, renumber
from ecpart.executor import ExplorationConfig, Executor, make_symbolic_inputs, merge_loop_paths
from ecpart.ir.inputs import input_vars
from ecpart.ir.model import Module
from ecpart.oracle import CompareReport, Partition, compare_partition, partition_by_output
from ecpart.scheduler import ClusterPlan, FunctionMetrics, build_call_graph, compute_metrics, plan
from ecpart.simplify import ALL_RULES, Context, SimplificationReport, simplify, split_ite_cases
from ecpart.smt import expr as E
from ecpart.smt.expr import Expr
from ecpart.smt.normalize import normalize
from ecpart.smt.solver import check_equiv, models
from ecpart.smt.vector import evaluate_grid
from ecpart.smt.text import to_sexpr
from ecpart.summaries import SummaryStore, build_summary

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnalysisOptions:
    config: ExplorationConfig = field(default_factory=ExplorationConfig)
    rules: frozenset[int] = ALL_RULES
    representatives: int = 3
    verify_simplification: bool = True


@dataclass(frozen=True)
class Failure:
    """An explored path that produced no outputs (runtime error or loop bound)."""

    status: str
    condition: Expr
    note: str
    trace: tuple[tuple[str, str], ...]


@dataclass
class FunctionAnalysis:
    name: str
    classes: list[EquivalenceClass]
    failures: list[Failure]
    metrics: FunctionMetrics | None = None
    truncated: bool = False
    incomplete: bool = False
    used_summaries: tuple[str, ...] = ()
    notes: list[str] = field(default_factory=list)
    simplification: SimplificationReport = field(default_factory=SimplificationReport)
    inputs: dict[str, int] = field(default_factory=dict)
    domain: Expr = E.TRUE


@dataclass
class ModuleAnalysis:
    module: Module
    options: AnalysisOptions
    plan: ClusterPlan
    functions: dict[str, FunctionAnalysis]
    store: SummaryStore


def _regroup(classes: Sequence[EquivalenceClass]) -> list[EquivalenceClass]:
    merged: dict[bytes, EquivalenceClass] = {}
    for ec in classes:
        key = ec.snapshot.canonical_key
        prev = merged.get(key)
        if prev is None:
            merged[key] = replace(ec, cases=tuple(ec.cases), source_paths=list(ec.source_paths), notes=list(ec.notes))
            continue
        prev.condition = normalize(E.or_(prev.condition, ec.condition))
        prev.cases = prev.cases + ec.cases
        prev.source_paths.extend(p for p in ec.source_paths if p not in prev.source_paths)
    return list(merged.values())


def _representatives(ec: EquivalenceClass, inputs: Mapping[str, int], k: int,
                     max_conflicts: int | None) -> list[dict[str, int]]:
    over = dict(inputs)
    over.update(E.free_vars(ec.condition))
    out: list[dict[str, int]] = []
    for m in models(ec.condition, k, over=over, max_conflicts=max_conflicts):
        if not E.evaluate(ec.condition, m):
            raise AssertionError(f"model {m} does not satisfy class {ec.id}")
        proj = {n: m[n] for n in sorted(inputs)}
        if proj not in out:
            out.append(proj)
    return out


def _display(ec: EquivalenceClass, rules: frozenset[int], ctx: Context, verify: bool,
             report: SimplificationReport) -> None:
    if not rules & frozenset(range(1, 8)):
        ec.display_condition, ec.display_snapshot = ec.condition, ec.snapshot
        return

    def simp(e: Expr) -> Expr:
        out, rep = simplify(e, rules, ctx, verify=verify)
        report.merge(rep)
        return out

    ec.display_condition = simp(ec.condition)
    ec.display_snapshot = ec.snapshot.map_exprs(simp)


def analyze_function(module: Module, fname: str, options: AnalysisOptions | None = None,
                     store: SummaryStore | None = None) -> FunctionAnalysis:
    """Classes of one function; calls use summaries from ``store`` when present."""
    options = options or AnalysisOptions()
    cfg = options.config
    f = module.function(fname)
    st0 = make_symbolic_inputs(module, fname, cfg)
    summaries = store.summaries if (store is not None and cfg.use_summaries) else None
    report = Executor(module, cfg, summaries).explore(fname, st0)
    paths = merge_loop_paths(report.paths)
    classes = group(paths, f, k=0)
    if 8 in options.rules:
        split: list[EquivalenceClass] = []
        for ec in classes:
            split.extend(split_ite_cases(ec))
        classes = _regroup(split)
    classes = renumber(classes)
    ivars = {v.name: v.width for v in input_vars(module, fname, cfg.globals_init_mode)}
    domains = {v.name: tuple(v.type.domain_values()) for v in input_vars(module, fname, cfg.globals_init_mode)
               if v.type.domain_values() is not None}
    ctx = Context.from_constraint(st0.domain, domains)
    simp_report = SimplificationReport()
    for ec in classes:
        if options.representatives > 0:
            ec.representatives = _representatives(ec, ivars, options.representatives, cfg.max_conflicts)
        _display(ec, options.rules, ctx, options.verify_simplification, simp_report)
    failures = [Failure(p.status, normalize(p.path_condition), p.note, p.trace)
                for p in report.paths if p.status != "complete"]
    failures.sort(key=lambda x: (x.status, x.trace))
    used = sorted({lbl.split(" ", 2)[1] for p in report.paths for _, lbl in p.trace
                   if lbl.startswith("summary ")})
    return FunctionAnalysis(
        name=fname,
        classes=classes,
        failures=failures,
        truncated=report.truncated > 0,
        incomplete=not report.complete,
        used_summaries=tuple(used),
        notes=list(report.notes),
        simplification=simp_report,
        inputs=ivars,
        domain=st0.domain,
    )


def _with_callees(module: Module, names: Iterable[str]) -> set[str]:
    graph = build_call_graph(module)
    todo = list(names)
    seen: set[str] = set()
    while todo:
        n = todo.pop()
        if n in seen:
            continue
        seen.add(n)
        todo.extend(graph.callees(n))
    return seen


def analyze_module(module: Module, functions: Iterable[str] | None = None,
                   options: AnalysisOptions | None = None, store: SummaryStore | None = None) -> ModuleAnalysis:
    """Analyze functions in scheduled order, publishing a summary after each.

    Summaries are only built and used with symbolic globals: a summary
    closed over concrete initial values would be wrong at call sites that
    run after the caller changed a global.  Requested functions are
    analyzed together with everything they call; only requested ones are
    returned.
    """
    options = options or AnalysisOptions()
    graph = build_call_graph(module)
    metrics = compute_metrics(graph, module)
    cplan = plan(metrics, graph=graph)
    wanted = set(graph.nodes) if functions is None else set(functions)
    unknown = wanted - set(graph.nodes)
    if unknown:
        raise KeyError(f"unknown or external functions: {', '.join(sorted(unknown))}")
    needed = _with_callees(module, wanted)
    store = store if store is not None else SummaryStore()
    summarize = options.config.use_summaries and options.config.globals_init_mode == "symbolic"
    by_name = {m.name: m for m in metrics}
    results: dict[str, FunctionAnalysis] = {}
    for name in cplan.schedule:
        if name not in needed:
            continue
        res = analyze_function(module, name, options, store if summarize else None)
        res.metrics = by_name[name]
        if summarize and name not in store:
            s = build_summary(module.function(name), res.classes,
                              exploration_complete=not res.incomplete, domain=res.domain)
            store.publish(s)
            if not s.complete:
                log.info("summary of %s is incomplete; callers will inline it", name)
        if name in wanted:
            results[name] = res
    return ModuleAnalysis(module, options, cplan, results, store)


# --------------------------------------------------------------------------
# checking against the concrete oracle


def oracle_partition(module: Module, fname: str, domain: Mapping[str, Iterable[int]] | None = None,
                     config: ExplorationConfig | None = None) -> Partition:
    cfg = config or ExplorationConfig()
    globals_init = cfg.globals_init if cfg.globals_init_mode == "concrete" else None
    return partition_by_output(module, fname, domain, globals_init, loop_fuel=cfg.loop_bound,
                               overflow_everywhere=cfg.overflow_everywhere,
                               globals_mode=cfg.globals_init_mode)


def membership_test(part: Partition, classes: Sequence[EquivalenceClass]):
    """Class membership for every oracle input, evaluated column-wise up front.

    Returns a callable suitable for ``compare_partition``.  Falls back to
    per-input evaluation for expressions wider than 64 bits.
    """
    flat = [a for _, members in part.cells for a in members]
    row = {id(a): i for i, a in enumerate(flat)}
    cols = {n: np.array([a[n] for a in flat], dtype=np.uint64) for n in part.inputs}
    member: dict[int, np.ndarray] = {}
    for ec in classes:
        try:
            member[ec.id] = evaluate_grid(ec.condition, cols, len(flat)) != 0
        except ValueError:
            pass

    def test(ec: EquivalenceClass, a: Mapping[str, int]) -> bool:
        got = member.get(ec.id)
        i = row.get(id(a))
        if got is None or i is None:
            return bool(E.evaluate(ec.condition, a))
        return bool(got[i])

    return test


def verify_against_oracle(module: Module, res: FunctionAnalysis, domain: Mapping[str, Iterable[int]] | None = None,
                          config: ExplorationConfig | None = None, partition: Partition | None = None) -> CompareReport:
    """Compare inferred classes with the brute-force partition.

    Oracle failures are not counted against the classes when an explored
    failure path covers the failing input.  Pass ``partition`` to reuse an
    oracle run across several analyses of the same function.
    """
    part = partition if partition is not None else oracle_partition(module, res.name, domain, config)
    rep = compare_partition(part, res.classes, membership_test(part, res.classes))
    unexplained = 0
    for a, _msg in part.errors:
        if not any(E.evaluate(fl.condition, a) for fl in res.failures):
            unexplained += 1
    rep.counts["errors"] = unexplained
    return rep


def _snapshots_agree(a: OutputSnapshot, b: OutputSnapshot, assume: Expr) -> bool:
    if a.guarded or b.guarded:
        return a.canonical_key == b.canonical_key
    if a.wrapped_at != b.wrapped_at or (a.ret is None) != (b.ret is None):
        return False
    if [k for k, _ in a.cells] != [k for k, _ in b.cells] or [k for k, _ in a.globals] != [k for k, _ in b.globals]:
        return False
    pairs = list(zip(a.expressions(), b.expressions()))
    return all(x.width == y.width and check_equiv(x, y, [assume], max_conflicts=None) for x, y in pairs)


def partition_differences(a: FunctionAnalysis, b: FunctionAnalysis) -> list[str]:
    """Ways in which two analyses of the same function disagree; empty when
    there is a one-to-one pairing of classes with equivalent conditions and
    equivalent outputs under those conditions."""
    problems: list[str] = []
    if len(a.classes) != len(b.classes):
        problems.append(f"{len(a.classes)} classes vs {len(b.classes)}")
    free = list(b.classes)
    for ea in a.classes:
        hit = None
        for eb in free:
            if check_equiv(ea.condition, eb.condition, [a.domain], max_conflicts=None) \
                    and _snapshots_agree(ea.snapshot, eb.snapshot, E.and_(a.domain, ea.condition)):
                hit = eb
                break
        if hit is None:
            problems.append(f"class {ea.id} ({condition_text(ea.condition)}) has no counterpart")
        else:
            free.remove(hit)
    return problems


def condition_text(e: Expr) -> str:
    return to_sexpr(e)
