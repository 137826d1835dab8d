"""Method summaries: a function's classes reused at its call sites."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ecpart.ecp import EquivalenceClass, OutputSnapshot
from ecpart.ir.inputs import cell_name
from ecpart.ir.model import Function
from ecpart.ir.types import type_text
from ecpart.smt import expr as E
from ecpart.smt.expr import Expr, ExprError
from ecpart.smt.solver import is_sat
from ecpart.smt.text import parse_sexpr, to_sexpr

FORMAT = "ecpart-summary"
VERSION = 1
HAVOC_PREFIX = "$"


class SummaryError(ValueError):
    pass


@dataclass(frozen=True)
class SummaryParam:
    name: str
    direction: str
    type: str


@dataclass(frozen=True)
class SummaryCase:
    condition: Expr
    outputs: OutputSnapshot


@dataclass(frozen=True)
class MethodSummary:
    name: str
    params: tuple[SummaryParam, ...]
    ret: str | None
    cases: tuple[SummaryCase, ...]
    complete: bool
    havoc: bool = False

    def matches(self, f: Function) -> bool:
        return self.params == signature_of(f)[0] and self.ret == signature_of(f)[1]


def signature_of(f: Function) -> tuple[tuple[SummaryParam, ...], str | None]:
    params = tuple(SummaryParam(p.name, p.direction, type_text(p.type)) for p in f.params)
    return params, (type_text(f.ret) if f.ret is not None else None)


def build_summary(f: Function, ecs: Sequence[EquivalenceClass], *, exploration_complete: bool = True,
                  domain: Expr | None = None) -> MethodSummary:
    """One case per class.

    The summary is complete when exploration finished without truncation or
    errors and the case conditions cover the constrained input domain.
    """
    params, ret = signature_of(f)
    cases = tuple(SummaryCase(ec.condition, ec.snapshot) for ec in ecs)
    complete = exploration_complete and bool(cases)
    if complete:
        cover = E.or_(*[c.condition for c in cases]) if len(cases) > 1 else cases[0].condition
        assume = [domain] if domain is not None else []
        complete = not is_sat(E.not_(cover), assume).sat
    return MethodSummary(f.name, params, ret, cases, complete)


def havoc_summary(f: Function) -> MethodSummary:
    """Stand-in for a function without a body: a fresh return value and fresh out cells."""
    params, ret = signature_of(f)
    cells: list[tuple[str, Expr]] = []
    constraints: list[Expr] = []
    for p in f.params:
        t = p.type
        if not t.is_ptr or p.direction == "in":
            continue
        idxs = range(t.length) if t.is_array else [None]
        for i in idxs:
            loc = cell_name(p.name, i)
            v = E.var(HAVOC_PREFIX + loc, t.pointee.storage_bits)
            cells.append((loc, v))
            constraints.extend(_domain(v, t.pointee))
    ret_e = None
    if f.ret is not None:
        ret_e = E.var(HAVOC_PREFIX + "ret", f.ret.storage_bits)
        constraints.extend(_domain(ret_e, f.ret))
    cond = E.and_(*constraints) if constraints else E.TRUE
    snap = OutputSnapshot(ret=ret_e, cells=tuple(cells))
    return MethodSummary(f.name, params, ret, (SummaryCase(cond, snap),), complete=True, havoc=True)


def _domain(v: Expr, ty) -> list[Expr]:
    allowed = ty.domain_values()
    if allowed is None:
        return []
    return [E.or_(*[E.eq(v, E.const(x, v.width)) for x in allowed]) if len(allowed) > 1
            else E.eq(v, E.const(allowed[0], v.width))]


# --------------------------------------------------------------------------
# JSON documents


def summary_to_dict(s: MethodSummary) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "function": s.name,
        "params": [{"name": p.name, "direction": p.direction, "type": p.type} for p in s.params],
        "ret": s.ret,
        "complete": s.complete,
        "havoc": s.havoc,
        "cases": [{"condition": to_sexpr(c.condition), "outputs": c.outputs.as_json()} for c in s.cases],
    }


def serialize_summary(s: MethodSummary) -> bytes:
    return json.dumps(summary_to_dict(s), sort_keys=True, indent=1).encode() + b"\n"


def _allowed(params: Iterable[SummaryParam], havoc: bool):
    names: set[str] = set()
    for p in params:
        if not p.type.startswith("ptr "):
            names.add(p.name)
            continue
        if p.direction == "out":
            continue
        if p.type.endswith("]"):
            n = int(p.type[p.type.rindex("[") + 1:-1])
            names.update(cell_name(p.name, i) for i in range(n))
        else:
            names.add(cell_name(p.name, None))

    def ok(v: str) -> bool:
        return v in names or v.startswith("@") or (havoc and v.startswith(HAVOC_PREFIX))

    return ok


def deserialize_summary(data: bytes | str) -> MethodSummary:
    try:
        d = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SummaryError(f"malformed summary document: {exc}") from None
    if not isinstance(d, dict) or d.get("format") != FORMAT:
        raise SummaryError("not a summary document")
    if d.get("version") != VERSION:
        raise SummaryError(f"unsupported summary version {d.get('version')!r} (expected {VERSION})")
    try:
        params = tuple(SummaryParam(p["name"], p["direction"], p["type"]) for p in d["params"])
        havoc = bool(d.get("havoc", False))
        cases = []
        for c in d["cases"]:
            cases.append(SummaryCase(parse_sexpr(c["condition"]), OutputSnapshot.from_json(c["outputs"])))
        s = MethodSummary(d["function"], params, d.get("ret"), tuple(cases), bool(d["complete"]), havoc)
    except (KeyError, TypeError, ExprError) as exc:
        raise SummaryError(f"malformed summary document: {exc}") from None
    ok = _allowed(params, havoc)
    for c in s.cases:
        for v in sorted(E.free_vars(c.condition, *c.outputs.expressions())):
            if not ok(v):
                raise SummaryError(f"summary of {s.name} uses unbound variable {v!r}")
    return s


# --------------------------------------------------------------------------


@dataclass
class SummaryStore:
    """Published summaries.  Each function is published at most once."""

    summaries: dict[str, MethodSummary] = field(default_factory=dict)
    log: list[str] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def publish(self, s: MethodSummary) -> None:
        with self._lock:
            if s.name in self.summaries:
                raise SummaryError(f"summary for {s.name} already published")
            self.summaries[s.name] = s
            self.log.append(s.name)

    def get(self, name: str) -> MethodSummary | None:
        return self.summaries.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self.summaries

    def save(self, directory: str | Path) -> list[Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        out = []
        for name in sorted(self.summaries):
            p = d / f"{name}.summary.json"
            p.write_bytes(serialize_summary(self.summaries[name]))
            out.append(p)
        return out

    @classmethod
    def load(cls, directory: str | Path) -> "SummaryStore":
        store = cls()
        for p in sorted(Path(directory).glob("*.summary.json")):
            store.publish(deserialize_summary(p.read_bytes()))
        return store
