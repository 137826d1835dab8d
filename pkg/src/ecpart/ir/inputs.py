"""Naming of a function's input variables.

Scalar parameters use their own name (``pin``), the cell behind a scalar
pointer is ``*p``, array cells are ``p[i]`` and globals are ``@g``.  The same
names key concrete assignments and symbolic variables.
"""

from __future__ import annotations

from dataclasses import dataclass

from ecpart.ir.model import Function, Module
from ecpart.ir.types import IrType


@dataclass(frozen=True)
class InputVar:
    name: str
    type: IrType
    kind: str  # param | pointee | elem | global

    @property
    def width(self) -> int:
        return self.type.storage_bits

    def domain_size(self) -> int:
        dom = self.type.domain_values()
        return len(dom) if dom is not None else 1 << self.width


def cell_name(param: str, index: int | None) -> str:
    return f"*{param}" if index is None else f"{param}[{index}]"


def global_name(name: str) -> str:
    return f"@{name}"


def callees(module: Module, fname: str) -> list[str]:
    """Every function reachable through calls from ``fname`` (excluding itself), sorted."""
    seen: set[str] = set()
    work = [fname]
    while work:
        f = module.function(work.pop())
        for b in f.blocks:
            for ins in b.instrs:
                if ins.op == "call" and ins.target not in seen and ins.target != fname:
                    seen.add(ins.target)
                    work.append(ins.target)
    return sorted(seen)


def globals_read(module: Module, fname: str) -> list[str]:
    names: set[str] = set()
    for n in [fname, *callees(module, fname)]:
        f = module.function(n)
        for b in f.blocks:
            for ins in b.instrs:
                if ins.op == "load_global":
                    names.add(ins.target)
    return sorted(names)


def param_inputs(f: Function) -> list[InputVar]:
    out: list[InputVar] = []
    for p in f.params:
        t = p.type
        if not t.is_ptr:
            out.append(InputVar(p.name, t, "param"))
        elif p.direction != "out":
            assert t.pointee is not None
            if t.is_array:
                out.extend(InputVar(cell_name(p.name, i), t.pointee, "elem") for i in range(t.length))
            else:
                out.append(InputVar(cell_name(p.name, None), t.pointee, "pointee"))
    return out


def input_vars(module: Module, fname: str, globals_mode: str = "symbolic") -> list[InputVar]:
    """Inputs of ``fname``: parameters (in order), then globals it may read."""
    f = module.function(fname)
    out = param_inputs(f)
    if globals_mode == "symbolic":
        out.extend(InputVar(global_name(g), module.global_(g).type, "global") for g in globals_read(module, fname))
    return out


def parse_cell(loc: str) -> tuple[str, int | None]:
    """Inverse of :func:`cell_name`: ``"*p"`` to ("p", None), ``"p[3]"`` to ("p", 3)."""
    if loc.startswith("*"):
        return loc[1:], None
    if loc.endswith("]") and "[" in loc:
        name, idx = loc[:-1].split("[", 1)
        return name, int(idx)
    raise ValueError(f"not a cell name: {loc!r}")
