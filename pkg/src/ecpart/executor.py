"""Bounded symbolic execution of MicroIR functions over bit-vector expressions."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ecpart.ir.cfg import Cfg, build_cfg
from ecpart.ir.inputs import cell_name, global_name, input_vars, parse_cell
from ecpart.ir.model import Br, Function, Jmp, Lit, Module, Reg, Ret
from ecpart.ir.types import IrType
from ecpart.smt import expr as E
from ecpart.smt.expr import Expr
from ecpart.smt.normalize import normalize
from ecpart.smt.solver import DEFAULT_MAX_CONFLICTS, is_sat

log = logging.getLogger(__name__)


class ExecutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExplorationConfig:
    loop_bound: int = 1024
    overflow_forking: bool = True
    overflow_everywhere: bool = False
    max_paths: int = 50_000
    globals_init_mode: str = "symbolic"  # symbolic | concrete
    globals_init: Mapping[str, int] | None = None
    use_summaries: bool = True
    max_conflicts: int | None = DEFAULT_MAX_CONFLICTS

    def __post_init__(self) -> None:
        if self.loop_bound < 1:
            raise ValueError("loop_bound must be at least 1")
        if self.globals_init_mode not in ("symbolic", "concrete"):
            raise ValueError(f"unknown globals mode {self.globals_init_mode!r}")
        if self.max_paths < 1:
            raise ValueError("max_paths must be positive")


@dataclass(frozen=True)
class Write:
    location: str
    value: Expr
    wrapped: bool = False


@dataclass(frozen=True)
class Outputs:
    """Raw observable effects of one path (write log, not yet last-write-wins)."""

    ret: Expr | None
    ret_wrapped: bool
    writes: tuple[Write, ...]
    internal_wrap: bool = False


@dataclass(frozen=True)
class PathResult:
    path_condition: Expr
    outputs: Outputs | None
    exit: tuple[str, str, str] | None  # (ret block, predecessor or "", edge kind or "entry")
    loop_headers: frozenset[str]
    trace: tuple[tuple[str, str], ...]
    status: str = "complete"  # complete | truncated | error
    note: str = ""
    guarded: tuple[tuple[Expr, Outputs], ...] = ()

    @property
    def merged(self) -> bool:
        return bool(self.guarded)


@dataclass
class SymVal:
    expr: Expr
    wide: Expr | None = None
    signed: bool = False


@dataclass
class Frame:
    func: Function
    cfg: Cfg
    label: str
    ip: int
    regs: dict[str, SymVal]
    bindings: dict[str, str]
    counters: dict[str, int]
    ret_dst: str | None
    prefix: str

    def copy(self) -> "Frame":
        return Frame(self.func, self.cfg, self.label, self.ip, dict(self.regs), self.bindings, dict(self.counters),
                     self.ret_dst, self.prefix)


@dataclass
class SymbolicState:
    frames: list[Frame]
    memory: dict[str, list[Expr | None]]
    arrays: dict[str, bool]
    globals: dict[str, Expr]
    path_condition: Expr
    trace: list[tuple[str, str]] = field(default_factory=list)
    writes: list[Write] = field(default_factory=list)
    headers: set[str] = field(default_factory=set)
    internal_wrap: bool = False
    last_edge: tuple[str, str] = ("", "entry")
    domain: Expr = E.TRUE

    def fork(self) -> "SymbolicState":
        return SymbolicState(
            frames=[fr.copy() for fr in self.frames],
            memory={k: list(v) for k, v in self.memory.items()},
            arrays=self.arrays,
            globals=dict(self.globals),
            path_condition=self.path_condition,
            trace=list(self.trace),
            writes=list(self.writes),
            headers=set(self.headers),
            internal_wrap=self.internal_wrap,
            last_edge=self.last_edge,
            domain=self.domain,
        )

    @property
    def frame(self) -> Frame:
        return self.frames[-1]


def domain_constraint(v: Expr, ty: IrType) -> Expr:
    allowed = ty.domain_values()
    if allowed is None:
        return E.TRUE
    return E.or_(*[E.eq(v, E.const(x, v.width)) for x in allowed]) if len(allowed) > 1 else E.eq(v, allowed[0])


def make_symbolic_inputs(module: Module, fname: str, config: ExplorationConfig | None = None) -> SymbolicState:
    """Fresh variables for every input plus their type-domain constraints."""
    config = config or ExplorationConfig()
    f = module.function(fname)
    constraints: list[Expr] = []
    ivars = {v.name: v for v in input_vars(module, fname, config.globals_init_mode)}

    def fresh(name: str, ty: IrType) -> Expr:
        v = E.var(name, ty.storage_bits)
        c = domain_constraint(v, ty)
        if c is not E.TRUE:
            constraints.append(c)
        return v

    regs: dict[str, SymVal] = {}
    memory: dict[str, list[Expr | None]] = {}
    arrays: dict[str, bool] = {}
    bindings: dict[str, str] = {}
    for p in f.params:
        t = p.type
        if not t.is_ptr:
            regs[p.name] = SymVal(_read(fresh(p.name, t), t), signed=t.is_signed)
            continue
        bindings[p.name] = p.name
        arrays[p.name] = t.is_array
        n = t.length or 1
        if p.direction == "out":
            memory[p.name] = [None] * n
        else:
            memory[p.name] = [fresh(cell_name(p.name, i if t.is_array else None), t.pointee) for i in range(n)]
    globals_: dict[str, Expr] = {}
    for g in module.globals:
        key = global_name(g.name)
        if key in ivars:
            globals_[g.name] = fresh(key, g.type)
        else:
            init = None
            src = config.globals_init or {}
            for k in (key, g.name):
                if k in src:
                    init = src[k]
            if init is None:
                init = g.init if g.init is not None else 0
            globals_[g.name] = E.const(init, g.type.storage_bits)
    for name, ty in f.locals:
        regs[name] = SymVal(E.const(0, ty.bits), signed=ty.is_signed)
    dom = E.and_(*constraints) if constraints else E.TRUE
    frame = Frame(f, build_cfg(f), f.entry, 0, regs, bindings, {}, None, "")
    return SymbolicState([frame], memory, arrays, globals_, dom, domain=dom)


def _read(raw: Expr, ty: IrType) -> Expr:
    """Register value of a stored cell (bools read as ``cell == 1``)."""
    if ty.kind == "bool":
        return E.eq(raw, E.const(1, raw.width))
    return raw


def _store_form(v: Expr, ty: IrType) -> Expr:
    if ty.kind == "bool":
        return normalize(E.zext(v, 8))
    return v


def _mask(w: int) -> int:
    return (1 << w) - 1


def overflow_condition(val: SymVal, dest: IrType) -> Expr | None:
    """``v > MAX`` for an unsigned destination, out of range for a signed one."""
    if val.wide is None or dest.kind not in ("uint", "int"):
        return None
    wide = val.wide
    hw = wide.width
    if dest.kind == "int":
        hi = E.const(dest.max_value, hw)
        lo = E.const(dest.min_value & _mask(hw), hw)
        return E.or_(E.sgt(wide, hi), E.slt(wide, lo))
    if dest.max_value >= _mask(hw):
        return E.FALSE
    return E.ugt(wide, E.const(dest.max_value, hw))


# --------------------------------------------------------------------------


@dataclass
class ExplorationReport:
    paths: list[PathResult]
    truncated: int = 0
    errors: int = 0
    budget_exhausted: bool = False
    solver_calls: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not (self.truncated or self.errors or self.budget_exhausted)


class Executor:
    def __init__(self, module: Module, config: ExplorationConfig | None = None, summaries=None) -> None:
        self.m = module
        self.config = config or ExplorationConfig()
        self.summaries = summaries
        self.cfgs: dict[str, Cfg] = {}
        self.fresh_counter = 0
        self.solver_calls = 0

    def cfg(self, f: Function) -> Cfg:
        c = self.cfgs.get(f.name)
        if c is None:
            c = self.cfgs[f.name] = build_cfg(f)
        return c

    # -- feasibility -------------------------------------------------------

    def feasible(self, pc: Expr, extra: Expr) -> bool:
        n = normalize(extra)
        if n.op == "const":
            return bool(n.params[0]) and self._sat(pc)
        self.solver_calls += 1
        return is_sat(n, [pc], max_conflicts=self.config.max_conflicts).sat

    def _sat(self, pc: Expr) -> bool:
        return is_sat(pc, max_conflicts=self.config.max_conflicts).sat

    def split(self, st: SymbolicState, cond: Expr) -> list[tuple[SymbolicState, bool]]:
        """States for ``cond`` true and false (infeasible sides dropped)."""
        n = normalize(cond)
        if n.op == "const":
            return [(st, bool(n.params[0]))]
        out = []
        yes = self.feasible(st.path_condition, n)
        no = self.feasible(st.path_condition, E.not_(n))
        if yes and no:
            other = st.fork()
            st.path_condition = E.and_(st.path_condition, n)
            other.path_condition = E.and_(other.path_condition, E.not_(n))
            out = [(st, True), (other, False)]
        elif yes:
            out = [(st, True)]
        elif no:
            out = [(st, False)]
        return out

    # -- main loop ---------------------------------------------------------

    def explore(self, fname: str, state0: SymbolicState | None = None) -> ExplorationReport:
        f = self.m.function(fname)
        if f.external:
            raise ExecutionError(f"cannot explore external function {fname}")
        st0 = state0 or make_symbolic_inputs(self.m, fname, self.config)
        report = ExplorationReport([])
        if not self._sat(st0.path_condition):
            report.notes.append("input domain is empty")
            return report
        work = [st0]
        while work:
            if len(report.paths) + len(work) > self.config.max_paths:
                report.budget_exhausted = True
                report.notes.append(f"path budget {self.config.max_paths} exhausted; results are partial")
                break
            st = work.pop()
            for nxt in self.run(st, report):
                work.append(nxt)
        report.solver_calls = self.solver_calls
        report.paths.sort(key=lambda p: p.trace)
        return report

    def finish(self, st: SymbolicState, report: ExplorationReport, status: str, note: str = "",
               ret: Expr | None = None, ret_wrapped: bool = False) -> None:
        outputs = None
        if status == "complete":
            outputs = Outputs(ret, ret_wrapped, tuple(st.writes), st.internal_wrap)
        exit_ = None
        if status == "complete":
            exit_ = (st.frame.label, st.last_edge[0], st.last_edge[1])
        if status == "truncated":
            report.truncated += 1
        elif status == "error":
            report.errors += 1
        report.paths.append(PathResult(
            path_condition=st.path_condition,
            outputs=outputs,
            exit=exit_,
            loop_headers=frozenset(st.headers),
            trace=tuple(st.trace),
            status=status,
            note=note,
        ))

    def run(self, st: SymbolicState, report: ExplorationReport) -> list[SymbolicState]:
        """Advance ``st`` until it forks or ends; returns the states still running."""
        while True:
            fr = st.frame
            block = fr.func.block_map[fr.label]
            if fr.ip < len(block.instrs):
                ins = block.instrs[fr.ip]
                fr.ip += 1
                succ = self.step(st, ins, report)
            else:
                succ = self.terminate(st, block.term, report)
            if len(succ) == 1 and succ[0] is st:
                continue
            return succ

    def terminate(self, st: SymbolicState, t, report: ExplorationReport) -> list[SymbolicState]:
        fr = st.frame
        if isinstance(t, Jmp):
            return [st] if self.take(st, t.target, "fallthrough", report) else []
        if isinstance(t, Br):
            out = []
            for s2, flag in self.split(st, fr.regs[t.cond].expr):
                if self.take(s2, t.then if flag else t.other, "taken" if flag else "not_taken", report):
                    out.append(s2)
            return out
        assert isinstance(t, Ret)
        ret_t = fr.func.ret
        if len(st.frames) > 1:
            val = self.operand(fr, t.value, ret_t.bits) if t.value is not None else None
            st.frames.pop()
            if fr.ret_dst is not None and val is not None:
                st.frame.regs[fr.ret_dst] = SymVal(val.expr, signed=ret_t.is_signed)
            return [st]
        if t.value is None:
            self.finish(st, report, "complete")
            return []
        val = self.operand(fr, t.value, ret_t.bits)
        for s2, wrapped in self.overflow_split(st, val, ret_t):
            self.finish(s2, report, "complete", ret=_store_form(val.expr, ret_t), ret_wrapped=wrapped)
        return []

    def take(self, st: SymbolicState, target: str, kind: str, report: ExplorationReport) -> bool:
        fr = st.frame
        src = fr.label
        cfg = fr.cfg
        st.trace.append((fr.prefix + src, kind))
        retreating = any(e.src == src and e.dst == target for e in cfg.retreating_edges)
        loop_targets = {e.dst for e in cfg.retreating_edges}
        if target in loop_targets:
            st.headers.add(fr.prefix + target)
        if retreating:
            fr.counters[target] = fr.counters.get(target, 0) + 1
            if fr.counters[target] > self.config.loop_bound:
                self.finish(st, report, "truncated",
                            f"loop at {fr.prefix}{target} exceeded {self.config.loop_bound} iterations")
                return False
        elif target in loop_targets:
            fr.counters[target] = 0
        fr.label = target
        fr.ip = 0
        if len(st.frames) == 1:
            st.last_edge = (src, kind)
        return True

    # -- values ------------------------------------------------------------

    def operand(self, fr: Frame, o, width: int) -> SymVal:
        if isinstance(o, Lit):
            return SymVal(E.const(o.value & _mask(width), width))
        return fr.regs[o.name]

    def opwidth(self, fr: Frame, ins) -> int:
        for x in ins.srcs:
            if isinstance(x, Reg):
                return fr.func.reg_types[x.name].bits
        return fr.func.reg_types[ins.dst].bits

    def overflow_split(self, st: SymbolicState, val: SymVal, dest: IrType) -> list[tuple[SymbolicState, bool]]:
        cond = overflow_condition(val, dest) if self.config.overflow_forking else None
        if cond is None:
            return [(st, False)]
        return self.split(st, cond)

    def index_split(self, st: SymbolicState, fr: Frame, index, length: int, report) -> list[tuple[SymbolicState, int]]:
        """One state per feasible in-bounds index; the out-of-bounds side becomes an error path."""
        if isinstance(index, Lit):
            return [(st, index.value)]
        iv = fr.regs[index.name].expr
        n = normalize(iv)
        if n.op == "const":
            if n.params[0] < length:
                return [(st, n.params[0])]
            self.finish(st, report, "error", f"index {n.params[0]} out of bounds")
            return []
        out = []
        in_bounds = E.ult(iv, E.const(length, iv.width)) if length < (1 << iv.width) else E.TRUE
        if in_bounds is not E.TRUE and self.feasible(st.path_condition, E.not_(in_bounds)):
            bad = st.fork()
            bad.path_condition = E.and_(bad.path_condition, E.not_(in_bounds))
            self.finish(bad, report, "error", "array index may be out of bounds")
        for i in range(min(length, 1 << iv.width)):
            c = E.eq(iv, E.const(i, iv.width))
            if self.feasible(st.path_condition, c):
                s2 = st.fork()
                s2.path_condition = E.and_(s2.path_condition, c)
                out.append((s2, i))
        return out

    # -- instructions ------------------------------------------------------

    def step(self, st: SymbolicState, ins, report: ExplorationReport) -> list[SymbolicState]:
        fr = st.frame
        f = fr.func
        op = ins.op
        types = f.reg_types
        if op == "const":
            ty = ins.type
            fr.regs[ins.dst] = SymVal(E.const(ins.srcs[0].value & _mask(ty.bits), ty.bits), signed=ty.is_signed)
            return [st]
        if op in ("load_deref", "load_elem", "store_deref", "store_elem"):
            return self.memory_op(st, ins, report)
        if op == "load_global":
            g = self.m.global_(ins.target)
            fr.regs[ins.dst] = SymVal(_read(st.globals[ins.target], g.type), signed=g.type.is_signed)
            return [st]
        if op == "store_global":
            g = self.m.global_(ins.target)
            val = self.operand(fr, ins.srcs[0], g.type.bits)
            out = []
            for s2, wrapped in self.overflow_split(st, val, g.type):
                stored = _store_form(val.expr, g.type)
                s2.globals[ins.target] = stored
                s2.writes.append(Write(global_name(ins.target), stored, wrapped))
                out.append(s2)
            return out
        if op == "call":
            return self.call(st, ins, report)
        dst_t = types[ins.dst]
        w = dst_t.bits
        ow = self.opwidth(fr, ins)
        if op in ("add", "sub", "mul"):
            return self.arith(st, ins, dst_t)
        s = [self.operand(fr, x, ow) for x in ins.srcs]
        v = [x.expr for x in s]
        if op == "not":
            r = E.make("not", (v[0],))
        elif op == "neg":
            r = E.neg(v[0])
        elif op in ("and", "or", "xor"):
            r = E.make(op, (v[0], v[1]))
        elif op in ("shl", "lshr", "ashr"):
            return self.shift(st, ins, w, report)
        elif op == "cmp":
            r = E.make(ins.pred, (v[0], v[1]))
        elif op == "extract":
            r = E.extract(v[0], ins.hi, ins.lo)
        elif op == "concat":
            r = E.concat(v[0], v[1])
        elif op == "zext":
            r = E.zext(v[0], w)
        elif op == "sext":
            r = E.sext(v[0], w)
        elif op == "select":
            a = self.operand(fr, ins.srcs[1], w).expr
            b = self.operand(fr, ins.srcs[2], w).expr
            r = E.ite(v[0], a, b)
        else:
            raise ExecutionError(f"unknown instruction {op}")
        fr.regs[ins.dst] = SymVal(normalize(r), signed=dst_t.is_signed)
        return [st]

    def arith(self, st: SymbolicState, ins, dst_t: IrType) -> list[SymbolicState]:
        fr = st.frame
        op = ins.op
        w = dst_t.bits
        signed = dst_t.is_signed
        a, b = (self.operand(fr, x, w) for x in ins.srcs)
        own = w + 1 if op != "mul" else 2 * w
        hw = max([own] + [x.wide.width for x in (a, b) if x.wide is not None])

        def ext(x: SymVal) -> Expr:
            base, sg = (x.wide, x.signed) if x.wide is not None else (x.expr, signed)
            if base.width == hw:
                return base
            return E.sext(base, hw) if sg else E.zext(base, hw)

        wide = normalize(E.make(op, (ext(a), ext(b))))
        value = normalize(E.make(op, (a.expr, b.expr)))
        fr.regs[ins.dst] = SymVal(value, wide, signed)
        if not self.config.overflow_everywhere:
            return [st]
        if signed:
            ew = w + 1 if op != "mul" else 2 * w
            exact = E.make(op, (E.sext(a.expr, ew), E.sext(b.expr, ew)))
            cond = E.or_(E.sgt(exact, E.const(_mask(w - 1), ew)), E.slt(exact, E.const(-(1 << (w - 1)), ew)))
        elif op == "sub":
            cond = E.ult(a.expr, b.expr)
        else:
            ew = w + 1 if op == "add" else 2 * w
            exact = E.make(op, (E.zext(a.expr, ew), E.zext(b.expr, ew)))
            cond = E.ugt(exact, E.const(_mask(w), ew))
        out = []
        for s2, flag in self.split(st, cond):
            if flag:
                s2.internal_wrap = True
            out.append(s2)
        return out

    def shift(self, st: SymbolicState, ins, w: int, report: ExplorationReport) -> list[SymbolicState]:
        fr = st.frame
        x = self.operand(fr, ins.srcs[0], w).expr
        amt_o = ins.srcs[1]
        if isinstance(amt_o, Lit):
            fr.regs[ins.dst] = SymVal(normalize(E.make(ins.op, (x, E.const(amt_o.value, w)))),
                                      signed=fr.func.reg_types[ins.dst].is_signed)
            return [st]
        amt = fr.regs[amt_o.name].expr
        wa = amt.width
        in_range = E.ult(amt, E.const(w, wa)) if w < (1 << wa) else E.TRUE
        out = []
        for s2, ok in self.split(st, in_range):
            if not ok:
                self.finish(s2, report, "error", f"shift amount may reach {w} or more")
                continue
            if wa > w:
                a2 = E.extract(amt, w - 1, 0)
            elif wa < w:
                a2 = E.zext(amt, w)
            else:
                a2 = amt
            s2.frame.regs[ins.dst] = SymVal(normalize(E.make(ins.op, (x, a2))),
                                            signed=fr.func.reg_types[ins.dst].is_signed)
            out.append(s2)
        return out

    def memory_op(self, st: SymbolicState, ins, report: ExplorationReport) -> list[SymbolicState]:
        fr = st.frame
        ptype = fr.func.param(ins.target).type
        pointee = ptype.pointee
        root = fr.bindings[ins.target]
        if ins.op.endswith("elem"):
            cases = self.index_split(st, fr, ins.index, ptype.length, report)
        else:
            cases = [(st, 0)]
        out = []
        for s2, idx in cases:
            f2 = s2.frame
            if ins.op.startswith("load"):
                cell = s2.memory[root][idx]
                if cell is None:
                    self.finish(s2, report, "error", f"read of unwritten output cell {cell_name(root, idx)}")
                    continue
                f2.regs[ins.dst] = SymVal(_read(cell, pointee), signed=pointee.is_signed)
                out.append(s2)
                continue
            val = self.operand(f2, ins.srcs[0], pointee.bits)
            loc = cell_name(root, idx if s2.arrays[root] else None)
            for s3, wrapped in self.overflow_split(s2, val, pointee):
                stored = _store_form(val.expr, pointee)
                s3.memory[root][idx] = stored
                s3.writes.append(Write(loc, stored, wrapped))
                out.append(s3)
        return out

    # -- calls -------------------------------------------------------------

    def call(self, st: SymbolicState, ins, report: ExplorationReport) -> list[SymbolicState]:
        fr = st.frame
        callee = self.m.function(ins.target)
        summary = None
        if self.summaries is not None and self.config.use_summaries:
            summary = self.summaries.get(callee.name)
            if summary is not None and not summary.complete:
                report.notes.append(f"summary of {callee.name} is incomplete; inlining instead")
                summary = None
        if summary is None and callee.external:
            from ecpart.summaries import havoc_summary

            summary = havoc_summary(callee)
        if summary is not None:
            return apply_summary(self, st, ins, summary, report)
        if any(f.func.name == callee.name for f in st.frames):
            raise ExecutionError(f"recursive call to {callee.name}")
        regs: dict[str, SymVal] = {}
        binds: dict[str, str] = {}
        for a, p in zip(ins.srcs, callee.params):
            if p.type.is_ptr:
                binds[p.name] = fr.bindings[a.name]
            else:
                regs[p.name] = SymVal(self.operand(fr, a, p.type.bits).expr, signed=p.type.is_signed)
        for name, ty in callee.locals:
            regs[name] = SymVal(E.const(0, ty.bits), signed=ty.is_signed)
        prefix = f"{fr.prefix}{callee.name}#{len(st.frames)}:"
        st.trace.append((fr.prefix + fr.label, f"call {callee.name}"))
        st.frames.append(Frame(callee, self.cfg(callee), callee.entry, 0, regs, binds, {}, ins.dst, prefix))
        return [st]

    def fresh(self, base: str, width: int) -> Expr:
        self.fresh_counter += 1
        return E.var(f"${base}.{self.fresh_counter}", width)


def apply_summary(ex: Executor, st: SymbolicState, ins, summary, report: ExplorationReport) -> list[SymbolicState]:
    """Successor states for a call site, one per feasible summary case (or guard).

    Formal names in the summary are replaced by the caller's actual values:
    scalar arguments, the current contents of the cells behind pointer
    arguments, and the current values of globals.  Inputs not covered by
    any case end as an error path.
    """
    from ecpart.summaries import HAVOC_PREFIX

    fr = st.frame
    callee = ex.m.function(ins.target)
    if not summary.matches(callee) or len(ins.srcs) != len(callee.params):
        raise ExecutionError(f"summary for {summary.name} does not match the signature of {callee.name}")
    mapping: dict[str, Expr] = {}
    binds: dict[str, str] = {}
    unwritten: set[str] = set()
    for a, p in zip(ins.srcs, callee.params):
        t = p.type
        if t.is_ptr:
            root = fr.bindings[a.name]
            binds[p.name] = root
            for i, cell in enumerate(st.memory[root]):
                formal = cell_name(p.name, i if t.is_array else None)
                if cell is not None:
                    mapping[formal] = cell
                else:
                    unwritten.add(formal)
        else:
            mapping[p.name] = normalize(_store_form(ex.operand(fr, a, t.bits).expr, t))
    for g, v in st.globals.items():
        mapping[global_name(g)] = v
    for case in summary.cases:
        for name, w in E.free_vars(case.condition, *case.outputs.expressions()).items():
            if name.startswith(HAVOC_PREFIX) and name not in mapping:
                mapping[name] = ex.fresh(f"{callee.name}.{name[1:]}", w)

    def sub(e: Expr) -> Expr:
        return normalize(E.substitute(e, mapping))

    out: list[SymbolicState] = []
    covered: list[Expr] = []
    for ci, case in enumerate(summary.cases):
        cond = sub(case.condition)
        covered.append(cond)
        snap = case.outputs
        reads = unwritten & set(E.free_vars(case.condition, *snap.expressions()))
        if reads:
            if ex.feasible(st.path_condition, cond):
                bad = st.fork()
                bad.path_condition = E.and_(bad.path_condition, cond)
                ex.finish(bad, report, "error", f"{callee.name} reads unwritten output cell {min(reads)}")
            continue
        alts = [(E.TRUE, snap, "")] if not snap.guarded else [
            (sub(g), s, f".{gi}") for gi, (g, s) in enumerate(snap.guarded)]
        for guard, plain, tag in alts:
            c = normalize(E.and_(cond, guard))
            if not ex.feasible(st.path_condition, c):
                continue
            s2 = st.fork()
            s2.path_condition = E.and_(s2.path_condition, c)
            s2.trace.append((fr.prefix + fr.label, f"summary {callee.name} case {ci}{tag}"))
            f2 = s2.frame
            for loc, val in plain.cells:
                pname, idx = parse_cell(loc)
                root = binds[pname]
                v = sub(val)
                s2.memory[root][idx or 0] = v
                s2.writes.append(Write(cell_name(root, (idx or 0) if s2.arrays[root] else None), v,
                                       loc in plain.wrapped_at))
            for gname, val in plain.globals:
                v = sub(val)
                s2.globals[gname[1:]] = v
                s2.writes.append(Write(gname, v, gname in plain.wrapped_at))
            if "*" in plain.wrapped_at:
                s2.internal_wrap = True
            if ins.dst is not None and plain.ret is not None:
                rt = callee.ret
                f2.regs[ins.dst] = SymVal(normalize(_read(sub(plain.ret), rt)), signed=rt.is_signed)
            out.append(s2)
    rest = E.not_(E.or_(*covered)) if len(covered) > 1 else (E.not_(covered[0]) if covered else E.TRUE)
    if ex.feasible(st.path_condition, rest):
        gap = st.fork()
        gap.path_condition = E.and_(gap.path_condition, rest)
        ex.finish(gap, report, "error", f"no case of the {summary.name} summary applies")
    return out


def explore(module: Module, fname: str, config: ExplorationConfig | None = None, summaries=None,
            state0: SymbolicState | None = None) -> ExplorationReport:
    return Executor(module, config, summaries).explore(fname, state0)


# --------------------------------------------------------------------------
# loop-path merging


def merge_key(p: PathResult):
    return (tuple(sorted(p.loop_headers)), p.exit)


def merge_loop_paths(results: Iterable[PathResult]) -> list[PathResult]:
    """Collapse complete paths that traverse the same loop headers and leave
    through the same exit block and edge into one path with a disjunctive
    condition and a guarded output list.  Loop-free paths pass through."""
    groups: dict[tuple, list[PathResult]] = {}
    order: list[tuple] = []
    passthrough: list[PathResult] = []
    for p in results:
        if p.status != "complete" or not p.loop_headers or p.merged:
            passthrough.append(p)
            continue
        k = merge_key(p)
        if k not in groups:
            groups[k] = []
            order.append(k)
        groups[k].append(p)
    merged: list[PathResult] = []
    for k in order:
        members = groups[k]
        if len(members) == 1:
            merged.append(members[0])
            continue
        members.sort(key=lambda p: p.trace)
        cond = E.or_(*[m.path_condition for m in members])
        guarded = tuple((m.path_condition, m.outputs) for m in members)
        merged.append(PathResult(
            path_condition=cond,
            outputs=None,
            exit=members[0].exit,
            loop_headers=members[0].loop_headers,
            trace=members[0].trace,
            status="complete",
            note=f"merged {len(members)} loop paths",
            guarded=guarded,
        ))
    return passthrough + merged


def fork_overflow(v: Expr, declared_max: int, state: SymbolicState, width: int,
                  executor: Executor | None = None) -> list[tuple[SymbolicState, bool, Expr]]:
    """Split ``state`` on ``v > declared_max``.

    ``v`` is the extended-width value; each result carries the value truncated
    to ``width`` bits.  An infeasible side is dropped.
    """
    ex = executor or Executor(Module((), (), ()))
    stored = normalize(E.extract(v, width - 1, 0)) if v.width > width else v
    if declared_max >= _mask(v.width):
        return [(state, False, stored)]
    cond = E.ugt(v, E.const(declared_max, v.width))
    return [(s, flag, stored) for s, flag in ex.split(state, cond)]
