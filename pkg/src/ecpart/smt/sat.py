"""A compact CDCL SAT solver.

Two-watched-literal propagation, first-UIP clause learning, activity-based
branching with phase saving and Luby restarts.  Literals are non-zero ints in
DIMACS convention.
"""

from __future__ import annotations

import heapq
import os
from typing import Iterable


class BudgetExceeded(RuntimeError):
    """The conflict budget ran out before an answer was found."""


def luby(i: int) -> int:
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while (1 << k) - 1 != i:
        i -= (1 << (k - 1)) - 1
        k = 1
        while (1 << k) - 1 < i:
            k += 1
    return 1 << (k - 1)


class SatSolver:
    def __init__(self, max_conflicts: int | None = 2_000_000) -> None:
        self.nvars = 0
        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[list[int]]] = {}
        self.value: list[int] = [0]
        self.level: list[int] = [0]
        self.reason: list[list[int] | None] = [None]
        self.activity: list[float] = [0.0]
        self.phase: list[int] = [-1]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.heap: list[tuple[float, int]] = []
        self.inc = 1.0
        self.unsat = False
        self.max_conflicts = max_conflicts
        self.conflicts = 0

    def new_var(self) -> int:
        self.nvars += 1
        v = self.nvars
        self.value.append(0)
        self.level.append(0)
        self.reason.append(None)
        self.activity.append(0.0)
        self.phase.append(-1)
        self.watches[v] = []
        self.watches[-v] = []
        heapq.heappush(self.heap, (0.0, v))
        return v

    def _ensure(self, lit: int) -> None:
        while abs(lit) > self.nvars:
            self.new_var()

    def lit_value(self, lit: int) -> int:
        v = self.value[abs(lit)]
        return v if lit > 0 else -v

    def add_clause(self, lits: Iterable[int]) -> None:
        if self.unsat:
            return
        if self.trail_lim:
            self._backtrack(0)
        seen: set[int] = set()
        clause: list[int] = []
        for lit in lits:
            if lit == 0:
                raise ValueError("literal 0")
            self._ensure(lit)
            if -lit in seen:
                return
            if lit in seen:
                continue
            val = self.lit_value(lit)
            if val == 1:
                return
            if val == -1:
                continue
            seen.add(lit)
            clause.append(lit)
        if not clause:
            self.unsat = True
            return
        if len(clause) == 1:
            self._assign(clause[0], None)
            if self._propagate() is not None:
                self.unsat = True
            return
        self.clauses.append(clause)
        self.watches[-clause[0]].append(clause)
        self.watches[-clause[1]].append(clause)

    # watches[-l] holds clauses watching l: visited when l becomes false

    def _assign(self, lit: int, reason: list[int] | None) -> None:
        v = abs(lit)
        self.value[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self) -> list[int] | None:
        value = self.value
        watches = self.watches
        trail = self.trail
        while self.qhead < len(trail):
            lit = trail[self.qhead]
            self.qhead += 1
            false_lit = -lit
            ws = watches[lit]
            i = 0
            j = 0
            n = len(ws)
            while i < n:
                clause = ws[i]
                i += 1
                if clause[0] == false_lit:
                    clause[0], clause[1] = clause[1], false_lit
                first = clause[0]
                fv = value[first] if first > 0 else -value[-first]
                if fv == 1:
                    ws[j] = clause
                    j += 1
                    continue
                found = False
                for k in range(2, len(clause)):
                    cand = clause[k]
                    cv = value[cand] if cand > 0 else -value[-cand]
                    if cv != -1:
                        clause[1], clause[k] = cand, false_lit
                        watches[-cand].append(clause)
                        found = True
                        break
                if found:
                    continue
                ws[j] = clause
                j += 1
                if fv == -1:
                    while i < n:
                        ws[j] = ws[i]
                        j += 1
                        i += 1
                    del ws[j:]
                    return clause
                self._assign(first, clause)
            del ws[j:]
        return None

    def _bump(self, v: int) -> None:
        self.activity[v] += self.inc
        if self.activity[v] > 1e100:
            for u in range(1, self.nvars + 1):
                self.activity[u] *= 1e-100
            self.inc *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, self.nvars + 1) if self.value[u] == 0]
            heapq.heapify(self.heap)
        elif self.value[v] == 0:
            heapq.heappush(self.heap, (-self.activity[v], v))

    def _analyze(self, conflict: list[int]) -> tuple[list[int], int]:
        seen = set()
        learnt: list[int] = [0]
        counter = 0
        lit = 0
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        clause = conflict
        while True:
            for q in clause:
                if lit != 0 and q == lit:
                    continue
                v = abs(q)
                if v in seen or self.level[v] == 0:
                    continue
                seen.add(v)
                self._bump(v)
                if self.level[v] >= cur_level:
                    counter += 1
                else:
                    learnt.append(q)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            lit = self.trail[idx]
            idx -= 1
            v = abs(lit)
            seen.discard(v)
            counter -= 1
            if counter == 0:
                break
            clause = self.reason[v]  # type: ignore[assignment]
        learnt[0] = -lit
        # cheap minimization: drop literals whose reason is subsumed by the clause
        in_clause = {abs(q) for q in learnt}
        kept = [learnt[0]]
        for q in learnt[1:]:
            r = self.reason[abs(q)]
            if r is None or any(abs(x) not in in_clause and self.level[abs(x)] > 0 for x in r if abs(x) != abs(q)):
                kept.append(q)
        learnt = kept
        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda k: self.level[abs(learnt[k])])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, self.level[abs(learnt[1])]

    def _backtrack(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        start = self.trail_lim[lvl]
        for lit in self.trail[start:]:
            v = abs(lit)
            self.phase[v] = self.value[v]
            self.value[v] = 0
            self.reason[v] = None
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[start:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def _decide(self) -> int:
        heap = self.heap
        while heap:
            _, v = heapq.heappop(heap)
            if self.value[v] == 0:
                return v if self.phase[v] == 1 else -v
        for v in range(1, self.nvars + 1):
            if self.value[v] == 0:
                return v if self.phase[v] == 1 else -v
        return 0

    def solve(self, assumptions: Iterable[int] = ()) -> bool:
        """Return True iff satisfiable under ``assumptions``."""
        if self.unsat:
            return False
        assumptions = list(assumptions)
        for a in assumptions:
            self._ensure(a)
        self._backtrack(0)
        if self._propagate() is not None:
            self.unsat = True
            return False
        restart_no = 1
        budget = 100 * luby(restart_no)
        local = 0
        while True:
            conflict = self._propagate()
            if conflict is not None:
                self.conflicts += 1
                local += 1
                if self.max_conflicts is not None and self.conflicts > self.max_conflicts:
                    self._backtrack(0)
                    raise BudgetExceeded(f"conflict budget {self.max_conflicts} exhausted")
                if not self.trail_lim:
                    self.unsat = True
                    return False
                learnt, back = self._analyze(conflict)
                self._backtrack(back)
                if len(learnt) == 1:
                    self._assign(learnt[0], None)
                else:
                    self.clauses.append(learnt)
                    self.watches[-learnt[0]].append(learnt)
                    self.watches[-learnt[1]].append(learnt)
                    self._assign(learnt[0], learnt)
                self.inc *= 1.05
                continue
            if local >= budget:
                restart_no += 1
                budget = 100 * luby(restart_no)
                local = 0
                self._backtrack(0)
                continue
            # assumptions occupy the first decision levels
            lit = 0
            while len(self.trail_lim) < len(assumptions):
                a = assumptions[len(self.trail_lim)]
                val = self.lit_value(a)
                if val == 1:
                    self.trail_lim.append(len(self.trail))
                    continue
                if val == -1:
                    self._backtrack(0)
                    return False
                lit = a
                break
            if lit == 0:
                lit = self._decide()
                if lit == 0:
                    return True
            self.trail_lim.append(len(self.trail))
            self._assign(lit, None)

    def model_value(self, v: int) -> bool:
        return self.value[v] == 1


class PysatSolver:
    """Same surface as :class:`SatSolver`, backed by MiniSat through python-sat."""

    def __init__(self, max_conflicts: int | None = 2_000_000, engine: str = "minisat22") -> None:
        from pysat.solvers import Solver

        self._solver = Solver(name=engine)
        self.nvars = 0
        self.max_conflicts = max_conflicts
        self._model: list[int] | None = None

    def new_var(self) -> int:
        self.nvars += 1
        return self.nvars

    def add_clause(self, lits: Iterable[int]) -> None:
        lits = list(lits)
        for lit in lits:
            if abs(lit) > self.nvars:
                self.nvars = abs(lit)
        self._solver.add_clause(lits)

    def solve(self, assumptions: Iterable[int] = ()) -> bool:
        if self.max_conflicts is not None:
            self._solver.conf_budget(self.max_conflicts)
            ok = self._solver.solve_limited(assumptions=list(assumptions))
            if ok is None:
                raise BudgetExceeded(f"conflict budget {self.max_conflicts} exhausted")
        else:
            ok = self._solver.solve(assumptions=list(assumptions))
        self._model = self._solver.get_model() if ok else None
        return bool(ok)

    def lit_value(self, lit: int) -> int:
        if self._model is None or abs(lit) > len(self._model):
            return 0
        val = self._model[abs(lit) - 1] > 0
        return 1 if val == (lit > 0) else -1

    def __del__(self) -> None:
        solver = getattr(self, "_solver", None)
        if solver is not None:
            solver.delete()


def _pysat_available() -> bool:
    try:
        import pysat.solvers  # noqa: F401
    except ImportError:
        return False
    return True


def default_backend() -> str:
    choice = os.environ.get("ECPART_SAT_BACKEND", "auto")
    if choice == "auto":
        return "pysat" if _pysat_available() else "builtin"
    if choice not in ("pysat", "builtin"):
        raise ValueError(f"unknown SAT backend {choice!r}")
    return choice


def make_solver(max_conflicts: int | None = 2_000_000, backend: str | None = None):
    backend = backend or default_backend()
    if backend == "pysat":
        return PysatSolver(max_conflicts)
    return SatSolver(max_conflicts)
