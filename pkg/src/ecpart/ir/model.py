"""Module, function, block and instruction records.

All records are frozen; structural equality is plain dataclass equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ecpart.ir.types import IrType

BIN_OPS = ("add", "sub", "mul", "and", "or", "xor", "shl", "lshr", "ashr")
UN_OPS = ("not", "neg")
CMP_OPS = ("eq", "ne", "ult", "ule", "ugt", "uge", "slt", "sle", "sgt", "sge")
ARITH_OPS = ("add", "sub", "mul")
DIRECTIONS = ("in", "out", "inout")


@dataclass(frozen=True)
class Reg:
    name: str

    def __str__(self) -> str:
        return f"%{self.name}"


@dataclass(frozen=True)
class Lit:
    value: int

    def __str__(self) -> str:
        return str(self.value) if -16 < self.value < 16 else (f"-{-self.value:#x}" if self.value < 0 else f"{self.value:#x}")


Operand = Reg | Lit


@dataclass(frozen=True)
class Instr:
    """One non-terminator instruction.

    ``op`` is one of: ``const``, the unary/binary operators, ``cmp``,
    ``extract``, ``concat``, ``zext``, ``sext``, ``select``, ``load_deref``,
    ``store_deref``, ``load_elem``, ``store_elem``, ``load_global``,
    ``store_global``, ``call``.  ``target`` names the pointer parameter,
    the global (without ``@``) or the callee.
    """

    op: str
    dst: str | None = None
    srcs: tuple[Operand, ...] = ()
    pred: str | None = None
    hi: int = 0
    lo: int = 0
    type: IrType | None = None
    target: str | None = None
    index: Operand | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Jmp:
    target: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Br:
    cond: str
    then: str
    other: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Ret:
    value: Operand | None = None
    line: int = field(default=0, compare=False)


Terminator = Jmp | Br | Ret


@dataclass(frozen=True)
class BasicBlock:
    label: str
    instrs: tuple[Instr, ...]
    term: Terminator

    def successors(self) -> tuple[str, ...]:
        t = self.term
        if isinstance(t, Jmp):
            return (t.target,)
        if isinstance(t, Br):
            return (t.then, t.other)
        return ()


@dataclass(frozen=True)
class Param:
    name: str
    type: IrType
    direction: str = "in"


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple[Param, ...]
    ret: IrType | None
    locals: tuple[tuple[str, IrType], ...]
    blocks: tuple[BasicBlock, ...]
    external: bool = False
    # register name -> type, filled in by the checker (not part of equality)
    reg_types: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def entry(self) -> str:
        return self.blocks[0].label

    def block(self, label: str) -> BasicBlock:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def param(self, name: str) -> Param:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def block_map(self) -> dict[str, BasicBlock]:
        return {b.label: b for b in self.blocks}

    def __hash__(self) -> int:
        return hash((self.name, self.params, self.ret, self.locals, self.blocks, self.external))


@dataclass(frozen=True)
class Global:
    name: str
    type: IrType
    init: int | None = None


@dataclass(frozen=True)
class Module:
    enums: tuple[IrType, ...] = ()
    globals: tuple[Global, ...] = ()
    functions: tuple[Function, ...] = ()

    def function(self, name: str) -> Function:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(f"no function {name!r}")

    def global_(self, name: str) -> Global:
        for g in self.globals:
            if g.name == name:
                return g
        raise KeyError(f"no global @{name}")

    @property
    def defined(self) -> tuple[Function, ...]:
        return tuple(f for f in self.functions if not f.external)
