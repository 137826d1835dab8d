"""Exact satisfiability, model extraction and equivalence for expressions."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from ecpart.smt import expr as E
from ecpart.smt.bitblast import BitBlaster
from ecpart.smt.expr import Expr
from ecpart.smt.normalize import normalize
from ecpart.smt.sat import BudgetExceeded, make_solver
from ecpart.smt.text import to_smtlib

DEFAULT_MAX_CONFLICTS = 200_000


class SolverBudgetExceeded(BudgetExceeded):
    pass


@dataclass(frozen=True)
class SatResult:
    status: str  # "sat" | "unsat"
    model: dict[str, int] = field(default_factory=dict)

    @property
    def sat(self) -> bool:
        return self.status == "sat"

    def __bool__(self) -> bool:
        return self.sat


_cache: OrderedDict[int, SatResult] = OrderedDict()
_CACHE_SIZE = 50_000
stats = {"queries": 0, "cache_hits": 0, "sat_calls": 0}


def _conjoin(cond: Expr, assume: Iterable[Expr]) -> Expr:
    parts = [cond, *assume]
    for p in parts:
        if p.width != 1:
            raise E.ExprError("satisfiability queries take boolean (width-1) expressions")
    return E.and_(*parts) if len(parts) > 1 else cond


def is_sat(cond: Expr, assume: Iterable[Expr] = (), max_conflicts: int | None = DEFAULT_MAX_CONFLICTS,
           backend: str | None = None) -> SatResult:
    """Decide ``cond ∧ assume`` exactly.  The model covers every free variable."""
    query = _conjoin(cond, assume)
    stats["queries"] += 1
    hit = _cache.get(query.id) if backend is None else None
    if hit is not None:
        stats["cache_hits"] += 1
        _cache.move_to_end(query.id)
        return hit
    names = E.free_vars(query)
    norm = normalize(query)
    if norm.op == "const":
        result = SatResult("sat", {n: 0 for n in sorted(names)}) if norm.params[0] else SatResult("unsat")
    else:
        stats["sat_calls"] += 1
        solver = make_solver(max_conflicts, backend)
        bb = BitBlaster(solver)
        (root,) = bb.blast(norm)
        solver.add_clause([root])
        try:
            ok = solver.solve()
        except BudgetExceeded as exc:
            raise SolverBudgetExceeded(str(exc)) from None
        if ok:
            model = {}
            for n in sorted(names):
                bits = bb.var_bits.get(n)
                model[n] = sum(1 << i for i, b in enumerate(bits) if _lit_true(solver, b)) if bits else 0
            result = SatResult("sat", model)
        else:
            result = SatResult("unsat")
    if _dump["dir"] is not None and norm.op != "const":
        _write_query(norm, result)
    _cache[query.id] = result
    if len(_cache) > _CACHE_SIZE:
        _cache.popitem(last=False)
    return result


def _lit_true(solver, lit: int) -> bool:
    return solver.lit_value(lit) == 1


def check_equiv(a: Expr, b: Expr, assume: Iterable[Expr] = (), max_conflicts: int | None = DEFAULT_MAX_CONFLICTS,
                backend: str | None = None) -> bool:
    """True iff ``a`` and ``b`` agree on every assignment satisfying ``assume``."""
    if a.width != b.width:
        raise E.ExprError(f"check_equiv width mismatch {a.width} vs {b.width}")
    if a is b:
        return True
    return not is_sat(E.ne(a, b), assume, max_conflicts, backend).sat


def is_valid(cond: Expr, assume: Iterable[Expr] = ()) -> bool:
    return not is_sat(E.not_(cond), assume).sat


def models(cond: Expr, k: int, assume: Iterable[Expr] = (), over: Mapping[str, int] | None = None,
           max_conflicts: int | None = DEFAULT_MAX_CONFLICTS, backend: str | None = None) -> list[dict[str, int]]:
    """Up to ``k`` distinct models of ``cond ∧ assume``.

    Distinctness is over the variables in ``over`` (default: all free vars).
    """
    query = _conjoin(cond, list(assume))
    names = dict(over) if over is not None else E.free_vars(query)
    norm = normalize(query)
    if norm.op == "const" and not norm.params[0]:
        return []
    solver = make_solver(max_conflicts, backend)
    bb = BitBlaster(solver)
    (root,) = bb.blast(norm)
    solver.add_clause([root])
    for n, w in names.items():
        if n not in bb.var_bits:
            bb.var_bits[n] = [solver.new_var() for _ in range(w)]
    out: list[dict[str, int]] = []
    while len(out) < k:
        try:
            ok = solver.solve()
        except BudgetExceeded as exc:
            raise SolverBudgetExceeded(str(exc)) from None
        if not ok:
            break
        model = {}
        for n in sorted(names):
            model[n] = sum(1 << i for i, b in enumerate(bb.var_bits[n]) if _lit_true(solver, b))
        out.append(model)
        block = []
        for n in names:
            for i, b in enumerate(bb.var_bits[n]):
                block.append(-b if (model[n] >> i) & 1 else b)
        if not block:
            break
        solver.add_clause(block)
    return out


def clear_cache() -> None:
    _cache.clear()


_dump: dict = {"dir": None, "count": 0}


def dump_queries(directory: str | Path | None) -> None:
    """Write every solver query from now on as an SMT-LIB file under ``directory``
    (``None`` stops).  Cached answers are not re-dumped."""
    if directory is not None:
        Path(directory).mkdir(parents=True, exist_ok=True)
        clear_cache()
    _dump["dir"] = Path(directory) if directory is not None else None
    _dump["count"] = 0


def _write_query(norm: Expr, result: SatResult) -> None:
    _dump["count"] += 1
    path = _dump["dir"] / f"q{_dump['count']:06d}.smt2"
    path.write_text(f"; expected: {result.status}\n" + to_smtlib(norm))
