"""Deterministic text form of a :class:`Module` (inverse of the parser)."""

from __future__ import annotations

from ecpart.ir.model import BIN_OPS, UN_OPS, Br, Function, Instr, Jmp, Lit, Module, Operand
from ecpart.ir.types import IrType, type_text

HEADER = "; microir v1"


def _lit(v: int) -> str:
    return str(v) if -10 < v < 10 else (f"-{-v:#x}" if v < 0 else f"{v:#x}")


def _op(o: Operand) -> str:
    return _lit(o.value) if isinstance(o, Lit) else f"%{o.name}"


def _enum_decl(e: IrType) -> str:
    body = ", ".join(f"{n} = {_lit(v)}" for n, v in e.constants)
    return f"enum {e.name} : u{e.width} {{ {body} }}"


def instr_text(ins: Instr) -> str:
    op = ins.op
    s = [_op(x) for x in ins.srcs]
    dst = f"%{ins.dst} = " if ins.dst is not None else ""
    if op == "const":
        return f"{dst}const {type_text(ins.type)} {_lit(ins.srcs[0].value)}"
    if op in UN_OPS:
        return f"{dst}{op} {s[0]}"
    if op in BIN_OPS:
        return f"{dst}{op} {s[0]}, {s[1]}"
    if op == "cmp":
        return f"{dst}cmp {ins.pred} {s[0]}, {s[1]}"
    if op == "extract":
        return f"{dst}extract {s[0]}, {ins.hi}, {ins.lo}"
    if op == "concat":
        return f"{dst}concat {s[0]}, {s[1]}"
    if op in ("zext", "sext"):
        return f"{dst}{op} {s[0]} to {type_text(ins.type)}"
    if op == "select":
        return f"{dst}select {s[0]}, {s[1]}, {s[2]}"
    if op == "load_deref":
        return f"{dst}load %{ins.target}"
    if op == "load_elem":
        return f"{dst}load %{ins.target}[{_op(ins.index)}]"
    if op == "load_global":
        return f"{dst}load @{ins.target}"
    if op == "store_deref":
        return f"store %{ins.target}, {s[0]}"
    if op == "store_elem":
        return f"store %{ins.target}[{_op(ins.index)}], {s[0]}"
    if op == "store_global":
        return f"store @{ins.target}, {s[0]}"
    if op == "call":
        return f"{dst}call {ins.target}({', '.join(s)})"
    raise ValueError(f"unknown instruction {op}")


def _signature(f: Function) -> str:
    params = ", ".join(f"{p.direction} %{p.name}: {type_text(p.type)}" for p in f.params)
    ret = type_text(f.ret) if f.ret is not None else "void"
    return f"func {f.name}({params}) -> {ret}"


def function_text(f: Function) -> str:
    if f.external:
        return "extern " + _signature(f)
    lines = [_signature(f) + " {"]
    for name, ty in f.locals:
        lines.append(f"  local %{name}: {type_text(ty)}")
    for b in f.blocks:
        lines.append(f"{b.label}:")
        for ins in b.instrs:
            lines.append("  " + instr_text(ins))
        t = b.term
        if isinstance(t, Jmp):
            lines.append(f"  jmp {t.target}")
        elif isinstance(t, Br):
            lines.append(f"  br %{t.cond}, {t.then}, {t.other}")
        else:
            lines.append("  ret" + (f" {_op(t.value)}" if t.value is not None else ""))
    lines.append("}")
    return "\n".join(lines)


def print_module(m: Module) -> str:
    parts = [HEADER]
    if m.enums:
        parts.append("\n".join(_enum_decl(e) for e in m.enums))
    if m.globals:
        parts.append("\n".join(
            f"global @{g.name}: {type_text(g.type)}" + (f" = {_lit(g.init)}" if g.init is not None else "")
            for g in m.globals
        ))
    for f in m.functions:
        parts.append(function_text(f))
    return "\n\n".join(parts) + "\n"
