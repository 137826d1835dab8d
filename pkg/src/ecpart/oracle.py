"""Concrete interpreter and brute-force input-domain partitioner.

This module is the ground truth that every symbolic claim is checked
against, so it shares nothing with the symbolic engine beyond the IR model:
all arithmetic here is on plain Python integers.

Overflow bookkeeping mirrors the executor's contract.  A register produced
by ``add``/``sub``/``mul`` carries a *wide* value computed with headroom
(width+1 for add/sub, 2*width for mul, widened further along chains of such
operations).  When such a register is written to an output location (the
top-level return, a pointer-parameter cell or a global) and the wide value
falls outside the destination type's range, the location is recorded in
``wrapped_at``.  With ``overflow_everywhere`` every arithmetic step is
checked against its own result type and a wrap anywhere adds ``"*"``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from ecpart.ir.cfg import build_cfg
from ecpart.ir.inputs import InputVar, cell_name, global_name, input_vars
from ecpart.ir.model import Br, Function, Jmp, Lit, Module, Reg
from ecpart.ir.types import IrType

DEFAULT_LOOP_FUEL = 1024
DEFAULT_ENUM_CAP = 1 << 20


class OracleError(RuntimeError):
    pass


class LoopFuelExhausted(OracleError):
    pass


class OutOfBounds(OracleError):
    pass


class UninitializedRead(OracleError):
    pass


class ExternalCall(OracleError):
    pass


class ShiftOutOfRange(OracleError):
    pass


class CapExceeded(OracleError):
    pass


@dataclass(frozen=True)
class ConcreteOutcome:
    return_value: int | None
    out_params: tuple[tuple[str, object], ...]  # (param, int | None | tuple of such), sorted
    globals_after: tuple[tuple[str, int], ...]  # written globals only, sorted
    wrapped_at: frozenset[str] = frozenset()

    @property
    def wrapped(self) -> bool:
        return bool(self.wrapped_at)

    def encode(self) -> str:
        """Canonical text encoding (used for ordering and hashing)."""
        return json.dumps(
            {
                "ret": self.return_value,
                "out": [[k, list(v) if isinstance(v, tuple) else v] for k, v in self.out_params],
                "globals": [list(x) for x in self.globals_after],
                "wrapped": sorted(self.wrapped_at),
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    def as_dict(self) -> dict:
        return json.loads(self.encode())


def _mask(w: int) -> int:
    return (1 << w) - 1


def _signed(v: int, w: int) -> int:
    v &= _mask(w)
    return v - (1 << w) if v >> (w - 1) else v


class _Val:
    __slots__ = ("v", "wide", "hw", "signed")

    def __init__(self, v: int, wide: int | None = None, hw: int = 0, signed: bool = False) -> None:
        self.v = v
        self.wide = wide
        self.hw = hw
        self.signed = signed


def _outside(val: _Val, dest: IrType) -> bool:
    if val.wide is None or dest.kind not in ("uint", "int"):
        return False
    if dest.kind == "int":
        s = _signed(val.wide, val.hw)
        return not dest.min_value <= s <= dest.max_value
    return val.wide > dest.max_value


class _Interp:
    def __init__(self, module: Module, loop_fuel: int, everywhere: bool, cfgs: dict | None = None) -> None:
        self.m = module
        self.fuel = loop_fuel
        self.everywhere = everywhere
        self.memory: dict[str, list[int | None]] = {}
        self.globals: dict[str, int | None] = {}
        self.written_globals: set[str] = set()
        self.wrapped: dict[str, bool] = {}
        self.internal_wrap = False
        # shared across runs by the partition builders; CFGs are read-only
        self.cfgs: dict[str, object] = cfgs if cfgs is not None else {}
        self.arrays: dict[str, bool] = {}

    def cfg(self, f: Function):
        c = self.cfgs.get(f.name)
        if c is None:
            c = self.cfgs[f.name] = build_cfg(f)
        return c

    def run(self, f: Function, args: dict[str, _Val], bindings: dict[str, str], top: bool) -> _Val | None:
        cfg = self.cfg(f)
        retreating = {(e.src, e.dst) for e in cfg.retreating_edges}
        loop_targets = {d for _, d in retreating}
        counters: dict[str, int] = {}
        types = f.reg_types
        regs: dict[str, _Val] = dict(args)
        for name, ty in f.locals:
            regs[name] = _Val(0)
        blocks = f.block_map
        label = f.entry
        while True:
            b = blocks[label]
            for ins in b.instrs:
                self.step(f, ins, regs, types, bindings)
            t = b.term
            if isinstance(t, Jmp):
                nxt = t.target
            elif isinstance(t, Br):
                nxt = t.then if regs[t.cond].v else t.other
            else:
                if t.value is None:
                    return None
                val = self.operand(t.value, regs, f.ret.bits)
                if top and _outside(val, f.ret):
                    self.wrapped["ret"] = True
                elif top:
                    self.wrapped["ret"] = False
                return val
            if (label, nxt) in retreating:
                counters[nxt] = counters.get(nxt, 0) + 1
                if counters[nxt] > self.fuel:
                    raise LoopFuelExhausted(f"{f.name}: loop at {nxt} exceeded {self.fuel} iterations")
            elif nxt in loop_targets:
                counters[nxt] = 0
            label = nxt

    def operand(self, o, regs: dict[str, _Val], width: int) -> _Val:
        if isinstance(o, Lit):
            return _Val(o.value & _mask(width))
        return regs[o.name]

    def _ext(self, x: _Val, width: int, signed: bool, hw: int) -> int:
        if x.wide is not None:
            base, bw, sg = x.wide, x.hw, x.signed
        else:
            base, bw, sg = x.v, width, signed
        if sg:
            return _signed(base, bw) & _mask(hw)
        return base & _mask(hw)

    def step(self, f: Function, ins, regs: dict[str, _Val], types: dict[str, IrType], bindings) -> None:
        op = ins.op
        if op == "const":
            regs[ins.dst] = _Val(ins.srcs[0].value & _mask(ins.type.bits))
            return
        if op in ("load_deref", "load_elem"):
            ptype = f.param(ins.target).type
            root = bindings[ins.target]
            idx = 0
            if op == "load_elem":
                idx = self.operand(ins.index, regs, 32).v
                if idx >= ptype.length:
                    raise OutOfBounds(f"{f.name}: index {idx} out of bounds for %{ins.target}")
            cell = self.memory[root][idx]
            if cell is None:
                raise UninitializedRead(f"{f.name}: read of unwritten output cell {root}[{idx}]")
            regs[ins.dst] = _Val(self._load(cell, ptype.pointee))
            return
        if op in ("store_deref", "store_elem"):
            ptype = f.param(ins.target).type
            root = bindings[ins.target]
            idx = 0
            if op == "store_elem":
                idx = self.operand(ins.index, regs, 32).v
                if idx >= ptype.length:
                    raise OutOfBounds(f"{f.name}: index {idx} out of bounds for %{ins.target}")
            val = self.operand(ins.srcs[0], regs, ptype.pointee.bits)
            self.memory[root][idx] = val.v
            loc = cell_name(root, idx if self._root_is_array(root) else None)
            self.wrapped[loc] = _outside(val, ptype.pointee)
            return
        if op == "load_global":
            g = self.m.global_(ins.target)
            v = self.globals.get(ins.target)
            if v is None:
                raise UninitializedRead(f"global @{ins.target} has no initial value")
            regs[ins.dst] = _Val(self._load(v, g.type))
            return
        if op == "store_global":
            g = self.m.global_(ins.target)
            val = self.operand(ins.srcs[0], regs, g.type.bits)
            self.globals[ins.target] = val.v
            self.written_globals.add(ins.target)
            self.wrapped[global_name(ins.target)] = _outside(val, g.type)
            return
        if op == "call":
            callee = self.m.function(ins.target)
            if callee.external:
                raise ExternalCall(f"call to external function {callee.name}")
            args: dict[str, _Val] = {}
            binds: dict[str, str] = {}
            for a, p in zip(ins.srcs, callee.params):
                if p.type.is_ptr:
                    binds[p.name] = bindings[a.name]
                else:
                    args[p.name] = _Val(self.operand(a, regs, p.type.bits).v)
            res = self.run(callee, args, binds, top=False)
            if ins.dst is not None:
                regs[ins.dst] = _Val(res.v)
            return
        dst_t = types[ins.dst]
        w = dst_t.bits
        s = [self.operand(x, regs, self._opwidth(ins, regs, types)) for x in ins.srcs]
        if op in ("add", "sub", "mul"):
            a, b = s
            signed = dst_t.is_signed
            own = w + 1 if op != "mul" else 2 * w
            hw = max([own] + [x.hw for x in s if x.wide is not None])
            ea, eb = self._ext(a, w, signed, hw), self._ext(b, w, signed, hw)
            wide = {"add": ea + eb, "sub": ea - eb, "mul": ea * eb}[op] & _mask(hw)
            exact = {"add": a.v + b.v, "sub": a.v - b.v, "mul": a.v * b.v}[op]
            if self.everywhere:
                if signed:
                    e = {"add": _signed(a.v, w) + _signed(b.v, w), "sub": _signed(a.v, w) - _signed(b.v, w),
                         "mul": _signed(a.v, w) * _signed(b.v, w)}[op]
                    if not -(1 << (w - 1)) <= e < (1 << (w - 1)):
                        self.internal_wrap = True
                elif not 0 <= exact <= _mask(w):
                    self.internal_wrap = True
            regs[ins.dst] = _Val(exact & _mask(w), wide, hw, signed)
            return
        regs[ins.dst] = _Val(self._pure(ins, [x.v for x in s], w, regs, types))

    def _root_is_array(self, root: str) -> bool:
        return self.arrays.get(root, False)

    def _opwidth(self, ins, regs, types) -> int:
        for x in ins.srcs:
            if isinstance(x, Reg):
                return types[x.name].bits
        return types[ins.dst].bits

    @staticmethod
    def _load(raw: int, ty: IrType) -> int:
        if ty.kind == "bool":
            return int(raw == 1)
        return raw

    def _pure(self, ins, vals: list[int], w: int, regs, types) -> int:
        op = ins.op
        m = _mask(w)
        if op == "not":
            return ~vals[0] & m
        if op == "neg":
            return -vals[0] & m
        if op == "and":
            return vals[0] & vals[1]
        if op == "or":
            return vals[0] | vals[1]
        if op == "xor":
            return vals[0] ^ vals[1]
        if op in ("shl", "lshr", "ashr"):
            x = vals[0]
            amt = regs[ins.srcs[1].name].v if isinstance(ins.srcs[1], Reg) else ins.srcs[1].value
            if amt >= w:
                raise ShiftOutOfRange(f"shift amount {amt} >= width {w}")
            if op == "shl":
                return (x << amt) & m
            if op == "lshr":
                return x >> amt
            return (_signed(x, w) >> amt) & m
        if op == "cmp":
            a, b = vals
            sw = types[ins.srcs[0].name].bits if isinstance(ins.srcs[0], Reg) else types[ins.srcs[1].name].bits
            sa, sb = _signed(a, sw), _signed(b, sw)
            return int({
                "eq": a == b, "ne": a != b, "ult": a < b, "ule": a <= b, "ugt": a > b, "uge": a >= b,
                "slt": sa < sb, "sle": sa <= sb, "sgt": sa > sb, "sge": sa >= sb,
            }[ins.pred])
        if op == "extract":
            return (vals[0] >> ins.lo) & _mask(ins.hi - ins.lo + 1)
        if op == "concat":
            lo_w = types[ins.srcs[1].name].bits
            return (vals[0] << lo_w) | vals[1]
        if op == "zext":
            return vals[0]
        if op == "sext":
            sw = types[ins.srcs[0].name].bits
            return _signed(vals[0], sw) & m
        if op == "select":
            c = regs[ins.srcs[0].name].v
            a = self.operand(ins.srcs[1], regs, w).v
            b = self.operand(ins.srcs[2], regs, w).v
            return a if c else b
        raise OracleError(f"unknown instruction {op}")


def interpret(
    module: Module,
    fname: str,
    inputs: Mapping[str, int],
    globals_init: Mapping[str, int] | None = None,
    loop_fuel: int = DEFAULT_LOOP_FUEL,
    overflow_everywhere: bool = False,
    cfg_cache: dict | None = None,
) -> ConcreteOutcome:
    """Run ``fname`` on one concrete input assignment.

    ``inputs`` is keyed by input-variable names (``x``, ``*p``, ``p[2]``,
    ``@g``).  ``globals_init`` supplies globals by plain or ``@`` name and
    is consulted for any global not present in ``inputs``.
    """
    f = module.function(fname)
    it = _Interp(module, loop_fuel, overflow_everywhere, cfg_cache)
    args: dict[str, _Val] = {}
    bindings: dict[str, str] = {}
    for p in f.params:
        t = p.type
        if not t.is_ptr:
            args[p.name] = _Val(_Interp._load(_need(inputs, p.name), t))
            continue
        bindings[p.name] = p.name
        n = t.length or 1
        it.arrays[p.name] = t.is_array
        if p.direction == "out":
            it.memory[p.name] = [None] * n
        else:
            it.memory[p.name] = [
                _need(inputs, cell_name(p.name, i if t.is_array else None)) for i in range(n)
            ]
    ginit = dict(globals_init or {})
    for g in module.globals:
        key = global_name(g.name)
        if key in inputs:
            it.globals[g.name] = inputs[key]
        elif key in ginit:
            it.globals[g.name] = ginit[key]
        elif g.name in ginit:
            it.globals[g.name] = ginit[g.name]
        else:
            it.globals[g.name] = g.init
    ret = it.run(f, args, bindings, top=True)
    out_params = []
    for p in f.params:
        if p.type.is_ptr and p.direction != "in":
            cells = it.memory[p.name]
            out_params.append((p.name, tuple(cells) if p.type.is_array else cells[0]))
    ret_value = None
    if ret is not None:
        ret_value = ret.v & _mask(f.ret.storage_bits)
    wrapped = {loc for loc, flag in it.wrapped.items() if flag}
    if it.internal_wrap:
        wrapped.add("*")
    return ConcreteOutcome(
        return_value=ret_value,
        out_params=tuple(sorted(out_params)),
        globals_after=tuple(sorted((global_name(g), it.globals[g]) for g in it.written_globals)),
        wrapped_at=frozenset(wrapped),
    )


def _need(inputs: Mapping[str, int], name: str) -> int:
    if name not in inputs:
        raise OracleError(f"missing input {name!r}")
    return inputs[name]


# --------------------------------------------------------------------------
# partitions


@dataclass
class Partition:
    inputs: tuple[str, ...]
    cells: list[tuple[ConcreteOutcome, list[dict[str, int]]]]
    errors: list[tuple[dict[str, int], str]] = field(default_factory=list)

    def cell_of(self) -> dict[tuple[int, ...], int]:
        """Map from input tuple (ordered as ``inputs``) to cell index."""
        out: dict[tuple[int, ...], int] = {}
        for i, (_, members) in enumerate(self.cells):
            for a in members:
                out[tuple(a[n] for n in self.inputs)] = i
        return out

    @property
    def size(self) -> int:
        return sum(len(m) for _, m in self.cells) + len(self.errors)


def default_domain(module: Module, fname: str, globals_mode: str = "symbolic") -> dict[str, list[int]]:
    """Every value allowed by each input's type."""
    out: dict[str, list[int]] = {}
    for v in input_vars(module, fname, globals_mode):
        dom = v.type.domain_values()
        out[v.name] = dom if dom is not None else range(1 << v.width)  # type: ignore[assignment]
    return out


def resolve_domain(
    module: Module, fname: str, domain: Mapping[str, Iterable[int]] | None, globals_mode: str = "symbolic"
) -> tuple[list[InputVar], dict[str, Sequence[int]]]:
    ivars = input_vars(module, fname, globals_mode)
    full = default_domain(module, fname, globals_mode)
    dom: dict[str, Sequence[int]] = {}
    given = dict(domain or {})
    unknown = set(given) - {v.name for v in ivars}
    if unknown:
        raise OracleError(f"domain names unknown inputs: {', '.join(sorted(unknown))}")
    for v in ivars:
        if v.name in given:
            allowed = v.type.domain_values()
            vals = list(given[v.name])
            if allowed is not None:
                vals = [x for x in vals if x in allowed]
            bad = [x for x in vals if not 0 <= x < (1 << v.width)]
            if bad:
                raise OracleError(f"domain of {v.name} exceeds its {v.width}-bit type")
            dom[v.name] = vals
        else:
            dom[v.name] = full[v.name]
    return ivars, dom


def enumerate_domain(dom: Mapping[str, Sequence[int]], names: Sequence[str]) -> Iterable[dict[str, int]]:
    for combo in itertools.product(*(dom[n] for n in names)):
        yield dict(zip(names, combo))


def partition_by_output(
    module: Module,
    fname: str,
    domain: Mapping[str, Iterable[int]] | None = None,
    globals_init: Mapping[str, int] | None = None,
    *,
    cap: int = DEFAULT_ENUM_CAP,
    loop_fuel: int = DEFAULT_LOOP_FUEL,
    globals_mode: str = "symbolic",
    overflow_everywhere: bool = False,
) -> Partition:
    """Group every assignment of the domain by its concrete outcome.

    Inputs absent from ``domain`` range over their whole type.  Assignments
    on which the interpreter fails are kept in ``errors``.
    """
    ivars, dom = resolve_domain(module, fname, domain, globals_mode)
    names = [v.name for v in ivars]
    total = 1
    for n in names:
        total *= len(dom[n])
    if total > cap:
        raise CapExceeded(f"domain has {total} assignments, cap is {cap}")
    cells: dict[ConcreteOutcome, list[dict[str, int]]] = {}
    errors: list[tuple[dict[str, int], str]] = []
    cfgs: dict = {}
    for a in enumerate_domain(dom, names):
        try:
            out = interpret(module, fname, a, globals_init, loop_fuel, overflow_everywhere, cfgs)
        except OracleError as exc:
            errors.append((a, str(exc)))
            continue
        cells.setdefault(out, []).append(a)
    ordered = sorted(cells.items(), key=lambda kv: kv[0].encode())
    return Partition(tuple(names), [(k, v) for k, v in ordered], errors)


def partition_of_samples(
    module: Module,
    fname: str,
    samples: Iterable[Mapping[str, int]],
    globals_init: Mapping[str, int] | None = None,
    *,
    loop_fuel: int = DEFAULT_LOOP_FUEL,
    overflow_everywhere: bool = False,
) -> Partition:
    """Like :func:`partition_by_output` over an explicit list of assignments.

    Used where the input space is too large to enumerate; the caller picks
    the sample.  Each assignment must name every input.
    """
    samples = [dict(a) for a in samples]
    names = tuple(sorted(samples[0])) if samples else ()
    cells: dict[ConcreteOutcome, list[dict[str, int]]] = {}
    errors: list[tuple[dict[str, int], str]] = []
    cfgs: dict = {}
    for a in samples:
        try:
            out = interpret(module, fname, a, globals_init, loop_fuel, overflow_everywhere, cfgs)
        except OracleError as exc:
            errors.append((a, str(exc)))
            continue
        cells.setdefault(out, []).append(a)
    ordered = sorted(cells.items(), key=lambda kv: kv[0].encode())
    return Partition(names, [(k, v) for k, v in ordered], errors)


# --------------------------------------------------------------------------
# comparison against inferred classes


@dataclass
class CompareReport:
    checked: int = 0
    uncovered: list[dict[str, int]] = field(default_factory=list)
    overlapping: list[tuple[dict[str, int], list[int]]] = field(default_factory=list)
    split_cells: list[tuple[dict[str, int], dict[str, int]]] = field(default_factory=list)
    merged_cells: list[tuple[dict[str, int], dict[str, int]]] = field(default_factory=list)
    mispredicted: list[tuple[dict[str, int], int, str, str]] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=lambda: {
        "uncovered": 0, "overlapping": 0, "split_cells": 0, "merged_cells": 0, "mispredicted": 0, "errors": 0,
    })

    @property
    def ok(self) -> bool:
        return not any(self.counts.values())

    def to_dict(self) -> dict:
        return {
            "checked": self.checked,
            "ok": self.ok,
            "counts": dict(sorted(self.counts.items())),
            "uncovered": self.uncovered,
            "overlapping": [{"input": a, "classes": ids} for a, ids in self.overlapping],
            "split_cells": [{"a": a, "b": b} for a, b in self.split_cells],
            "merged_cells": [{"a": a, "b": b} for a, b in self.merged_cells],
            "mispredicted": [
                {"input": a, "class": i, "expected": exp, "predicted": got} for a, i, exp, got in self.mispredicted
            ],
        }


MAX_WITNESSES = 20


def compare_partition(
    p: Partition,
    ecs: Sequence,
    eval_condition: Callable[[object, Mapping[str, int]], bool] | None = None,
) -> CompareReport:
    """Check inferred classes against an oracle partition.

    Each element of ``ecs`` needs ``id``, ``condition`` and
    ``predict(assignment) -> ConcreteOutcome``, plus ``constant`` (true when
    the class's outcome does not depend on the input).  ``eval_condition``
    decides membership; it defaults to evaluating ``condition`` as an
    expression.

    Reported: inputs in zero or several classes; inputs whose class predicts
    a different outcome than the oracle; and, among input-independent
    classes, oracle cells split across classes or classes spanning cells.
    Failing assignments in the partition count as ``errors``.
    """
    if eval_condition is None:
        from ecpart.smt.expr import evaluate

        def eval_condition(ec, a):  # type: ignore[misc]
            return bool(evaluate(ec.condition, a))

    rep = CompareReport()
    rep.counts["errors"] = len(p.errors)
    first_in_class: dict[int, tuple[dict[str, int], int]] = {}
    first_class_of_cell: dict[int, tuple[dict[str, int], int]] = {}

    def note(kind: str, item) -> None:
        rep.counts[kind] += 1
        lst = getattr(rep, kind)
        if len(lst) < MAX_WITNESSES:
            lst.append(item)

    for ci, (outcome, members) in enumerate(p.cells):
        for a in members:
            rep.checked += 1
            hits = [ec for ec in ecs if eval_condition(ec, a)]
            if not hits:
                note("uncovered", a)
                continue
            if len(hits) > 1:
                note("overlapping", (a, [ec.id for ec in hits]))
                continue
            ec = hits[0]
            got = ec.predict(a)
            if got != outcome:
                note("mispredicted", (a, ec.id, outcome.encode(), got.encode() if got is not None else "null"))
                continue
            if not getattr(ec, "constant", False):
                continue
            prev = first_in_class.get(ec.id)
            if prev is None:
                first_in_class[ec.id] = (a, ci)
            elif prev[1] != ci:
                note("merged_cells", (prev[0], a))
            prevc = first_class_of_cell.get(ci)
            if prevc is None:
                first_class_of_cell[ci] = (a, ec.id)
            elif prevc[1] != ec.id:
                note("split_cells", (prevc[0], a))
    return rep
