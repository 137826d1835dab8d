"""Equivalence classes: output snapshots grouped by their canonical key."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from ecpart.executor import Outputs, PathResult
from ecpart.ir.inputs import cell_name, global_name
from ecpart.ir.model import Function
from ecpart.oracle import ConcreteOutcome
from ecpart.smt import expr as E
from ecpart.smt.expr import Expr
from ecpart.smt.normalize import normalize
from ecpart.smt.solver import DEFAULT_MAX_CONFLICTS, models
from ecpart.smt.text import parse_sexpr, to_sexpr

_CELL = re.compile(r"^(\*)?([^\[]+)(?:\[(\d+)\])?$")


def location_order(loc: str) -> tuple:
    """Sort key placing ``p[2]`` before ``p[10]``."""
    m = _CELL.match(loc)
    if not m:
        return (loc, -1)
    return (m.group(2), int(m.group(3)) if m.group(3) is not None else -1)


@dataclass(frozen=True)
class OutPort:
    """One pointer parameter whose cells are observable after the call."""

    name: str
    direction: str  # out | inout
    length: int | None  # None for a scalar pointee

    def cells(self) -> list[str]:
        if self.length is None:
            return [cell_name(self.name, None)]
        return [cell_name(self.name, i) for i in range(self.length)]


def interface_of(f: Function) -> tuple[OutPort, ...]:
    ports = [OutPort(p.name, p.direction, p.type.length if p.type.is_array else None)
             for p in f.params if p.type.is_ptr and p.direction != "in"]
    return tuple(sorted(ports, key=lambda p: p.name))


@dataclass(frozen=True)
class OutputSnapshot:
    ret: Expr | None = None
    cells: tuple[tuple[str, Expr], ...] = ()
    globals: tuple[tuple[str, Expr], ...] = ()
    wrapped_at: frozenset[str] = frozenset()
    # merged loop paths: (guard, plain snapshot) pairs plus the shared exit
    guarded: tuple[tuple[Expr, "OutputSnapshot"], ...] = ()
    exit: tuple[str, str, str] | None = None

    @property
    def is_guarded(self) -> bool:
        return bool(self.guarded)

    def as_json(self) -> dict:
        if self.guarded:
            return {
                "exit": list(self.exit) if self.exit else None,
                "guarded": [{"guard": to_sexpr(g), "outputs": s.as_json()} for g, s in self.guarded],
            }
        return {
            "ret": to_sexpr(self.ret) if self.ret is not None else None,
            "cells": [[k, to_sexpr(v)] for k, v in self.cells],
            "globals": [[k, to_sexpr(v)] for k, v in self.globals],
            "wrapped": sorted(self.wrapped_at),
        }

    @staticmethod
    def from_json(d: dict) -> "OutputSnapshot":
        """Inverse of :meth:`as_json`."""
        if "guarded" in d:
            return OutputSnapshot(
                guarded=tuple((parse_sexpr(g["guard"]), OutputSnapshot.from_json(g["outputs"])) for g in d["guarded"]),
                exit=tuple(d["exit"]) if d.get("exit") else None,
            )
        return OutputSnapshot(
            ret=parse_sexpr(d["ret"]) if d.get("ret") is not None else None,
            cells=tuple((k, parse_sexpr(v)) for k, v in d.get("cells", [])),
            globals=tuple((k, parse_sexpr(v)) for k, v in d.get("globals", [])),
            wrapped_at=frozenset(d.get("wrapped", [])),
        )

    @property
    def canonical_key(self) -> bytes:
        return json.dumps(self.as_json(), sort_keys=True, separators=(",", ":")).encode()

    def expressions(self) -> list[Expr]:
        if self.guarded:
            out: list[Expr] = []
            for g, s in self.guarded:
                out.append(g)
                out.extend(s.expressions())
            return out
        out = [v for _, v in self.cells] + [v for _, v in self.globals]
        if self.ret is not None:
            out.append(self.ret)
        return out

    def select(self, a: Mapping[str, int]) -> "OutputSnapshot | None":
        """The plain snapshot that applies to assignment ``a``."""
        if not self.guarded:
            return self
        for g, s in self.guarded:
            if E.evaluate(g, a):
                return s
        return None

    def map_exprs(self, fn) -> "OutputSnapshot":
        if self.guarded:
            return replace(self, guarded=tuple((fn(g), s.map_exprs(fn)) for g, s in self.guarded))
        return replace(
            self,
            ret=fn(self.ret) if self.ret is not None else None,
            cells=tuple((k, fn(v)) for k, v in self.cells),
            globals=tuple((k, fn(v)) for k, v in self.globals),
        )


def plain_snapshot(o: Outputs) -> OutputSnapshot:
    last: dict[str, Expr] = {}
    wrapped: dict[str, bool] = {}
    for w in o.writes:
        last[w.location] = w.value
        wrapped[w.location] = w.wrapped
    flags = {loc for loc, f in wrapped.items() if f}
    if o.ret_wrapped:
        flags.add("ret")
    if o.internal_wrap:
        flags.add("*")
    cells = sorted(((k, normalize(v)) for k, v in last.items() if not k.startswith("@")),
                   key=lambda kv: location_order(kv[0]))
    globs = sorted((k, normalize(v)) for k, v in last.items() if k.startswith("@"))
    return OutputSnapshot(
        ret=normalize(o.ret) if o.ret is not None else None,
        cells=tuple(cells),
        globals=tuple(globs),
        wrapped_at=frozenset(flags),
    )


def snapshot(p: PathResult) -> OutputSnapshot:
    """Last-write-wins view of a path's effects in canonical order."""
    if p.guarded:
        parts = [(normalize(c), plain_snapshot(o)) for c, o in p.guarded]
        parts.sort(key=lambda gs: (to_sexpr(gs[0]), gs[1].canonical_key))
        return OutputSnapshot(guarded=tuple(parts), exit=p.exit)
    if p.outputs is None:
        raise ValueError(f"path ended with status {p.status}; it has no outputs")
    return plain_snapshot(p.outputs)


@dataclass
class EquivalenceClass:
    id: int
    condition: Expr
    snapshot: OutputSnapshot
    representatives: list[dict[str, int]] = field(default_factory=list)
    source_paths: list[tuple[tuple[str, str], ...]] = field(default_factory=list)
    cases: tuple[Expr, ...] = ()
    interface: tuple[OutPort, ...] = ()
    notes: list[str] = field(default_factory=list)
    # presentation forms; condition and snapshot stay the checked originals
    display_condition: Expr | None = None
    display_snapshot: OutputSnapshot | None = None

    @property
    def constant(self) -> bool:
        """True when every member input yields the same outcome."""
        if self.snapshot.guarded:
            return False
        if any(port.direction == "inout" for port in self.interface):
            written = {k for k, _ in self.snapshot.cells}
            for port in self.interface:
                if port.direction == "inout" and any(c not in written for c in port.cells()):
                    return False
        return all(e.op == "const" for e in self.snapshot.expressions())

    def predict(self, a: Mapping[str, int]) -> ConcreteOutcome | None:
        snap = self.snapshot.select(a)
        if snap is None:
            return None
        return outcome_of(snap, self.interface, a)


def outcome_of(snap: OutputSnapshot, interface: Sequence[OutPort], a: Mapping[str, int]) -> ConcreteOutcome:
    """Concrete outcome that a plain snapshot denotes under ``a``."""
    written = dict(snap.cells)
    out_params = []
    for port in interface:
        vals = []
        for c in port.cells():
            if c in written:
                vals.append(E.evaluate(written[c], a))
            elif port.direction == "inout":
                vals.append(a[c])
            else:
                vals.append(None)
        out_params.append((port.name, tuple(vals) if port.length is not None else vals[0]))
    return ConcreteOutcome(
        return_value=E.evaluate(snap.ret, a) if snap.ret is not None else None,
        out_params=tuple(sorted(out_params)),
        globals_after=tuple(sorted((k, E.evaluate(v, a)) for k, v in snap.globals)),
        wrapped_at=snap.wrapped_at,
    )


def representatives(ec: EquivalenceClass, k: int = 1, domain: Expr | None = None,
                    over: Mapping[str, int] | None = None,
                    max_conflicts: int | None = DEFAULT_MAX_CONFLICTS) -> list[dict[str, int]]:
    """Up to ``k`` distinct solver models of the class condition."""
    assume = [domain] if domain is not None else []
    found = models(ec.condition, k, assume, over=over, max_conflicts=max_conflicts)
    for m in found:
        if not E.evaluate(ec.condition, m):
            raise AssertionError(f"model {m} does not satisfy class {ec.id}")
    return found


def group(paths: Iterable[PathResult], func: Function | None = None, *, k: int = 1,
          inputs: Mapping[str, int] | None = None, domain: Expr | None = None) -> list[EquivalenceClass]:
    """One class per distinct snapshot; ids follow canonical-key order.

    Paths that did not complete (errors, truncation) carry no outputs and are
    skipped here; callers report them separately.
    """
    buckets: dict[bytes, tuple[OutputSnapshot, list[PathResult]]] = {}
    for p in paths:
        if p.status != "complete":
            continue
        s = snapshot(p)
        key = s.canonical_key
        if key not in buckets:
            buckets[key] = (s, [])
        buckets[key][1].append(p)
    interface = interface_of(func) if func is not None else ()
    classes: list[EquivalenceClass] = []
    for i, key in enumerate(sorted(buckets), start=1):
        snap, members = buckets[key]
        conds = [m.path_condition for m in members]
        cond = normalize(E.or_(*conds)) if len(conds) > 1 else normalize(conds[0])
        ec = EquivalenceClass(
            id=i,
            condition=cond,
            snapshot=snap,
            source_paths=[m.trace for m in members],
            cases=tuple(normalize(c) for c in conds),
            interface=interface,
        )
        if k > 0:
            ec.representatives = representatives(ec, k, domain, over=inputs)
        classes.append(ec)
    return classes


def renumber(classes: list[EquivalenceClass]) -> list[EquivalenceClass]:
    """Reassign ids in canonical order (key, then condition text)."""
    ordered = sorted(classes, key=lambda c: (c.snapshot.canonical_key, to_sexpr(c.condition)))
    for i, c in enumerate(ordered, start=1):
        c.id = i
    return ordered
