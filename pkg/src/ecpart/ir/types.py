"""Value types of the intermediate representation."""

from __future__ import annotations

from dataclasses import dataclass

SCALAR_WIDTHS = (8, 16, 32)
MAX_REG_WIDTH = 64


class IrTypeError(ValueError):
    pass


@dataclass(frozen=True)
class IrType:
    """A scalar, enum or pointer type.

    ``kind`` is one of ``bool``, ``uint``, ``int``, ``enum``, ``ptr``.  Enums
    carry their name, storage width and ``(name, value)`` constants.  Pointers
    carry a scalar ``pointee`` and, for arrays, a positive ``length``.
    """

    kind: str
    width: int = 0
    name: str = ""
    constants: tuple[tuple[str, int], ...] = ()
    pointee: "IrType | None" = None
    length: int = 0

    def __post_init__(self) -> None:
        k = self.kind
        if k == "bool":
            if self.width != 1:
                raise IrTypeError("bool has register width 1")
        elif k in ("uint", "int"):
            if not 1 <= self.width <= MAX_REG_WIDTH:
                raise IrTypeError(f"integer width {self.width} out of range 1..{MAX_REG_WIDTH}")
        elif k == "enum":
            if self.width not in SCALAR_WIDTHS:
                raise IrTypeError(f"enum {self.name} storage width must be 8, 16 or 32")
            if not self.constants:
                raise IrTypeError(f"enum {self.name} declares no constants")
            values = [v for _, v in self.constants]
            if len(set(values)) != len(values):
                raise IrTypeError(f"enum {self.name} has duplicate values")
            names = [n for n, _ in self.constants]
            if len(set(names)) != len(names):
                raise IrTypeError(f"enum {self.name} has duplicate constant names")
            for n, v in self.constants:
                if not 0 <= v < (1 << self.width):
                    raise IrTypeError(f"enum constant {n}={v} does not fit {self.width} bits")
        elif k == "ptr":
            p = self.pointee
            if p is None or p.kind == "ptr":
                raise IrTypeError("pointer to a pointer (or to nothing) is not representable")
            if not p.is_memory_scalar:
                raise IrTypeError(f"pointee {p} must be bool, an enum or an 8/16/32-bit integer")
            if self.length < 0:
                raise IrTypeError("array length must be positive")
        else:
            raise IrTypeError(f"unknown type kind {k!r}")

    # -- classification ----------------------------------------------------

    @property
    def is_ptr(self) -> bool:
        return self.kind == "ptr"

    @property
    def is_array(self) -> bool:
        return self.kind == "ptr" and self.length > 0

    @property
    def is_signed(self) -> bool:
        return self.kind == "int"

    @property
    def is_memory_scalar(self) -> bool:
        """Allowed for parameters, globals and pointees."""
        if self.kind in ("bool", "enum"):
            return True
        return self.kind in ("uint", "int") and self.width in SCALAR_WIDTHS

    @property
    def bits(self) -> int:
        """Width of a register holding this type."""
        if self.kind == "ptr":
            raise IrTypeError("pointers have no register width")
        return self.width

    @property
    def storage_bits(self) -> int:
        """Width of the input variable or memory cell holding this type."""
        return 8 if self.kind == "bool" else self.bits

    @property
    def max_value(self) -> int:
        if self.kind == "int":
            return (1 << (self.width - 1)) - 1
        return (1 << self.storage_bits) - 1

    @property
    def min_value(self) -> int:
        return -(1 << (self.width - 1)) if self.kind == "int" else 0

    def domain_values(self) -> list[int] | None:
        """Storage values allowed by the type, when it restricts the raw width."""
        if self.kind == "bool":
            return [0, 1]
        if self.kind == "enum":
            return sorted(v for _, v in self.constants)
        return None

    def same_shape(self, other: "IrType") -> bool:
        """Width-based compatibility (bool is interchangeable with u1 registers)."""
        if self.is_ptr or other.is_ptr:
            return self == other
        return self.bits == other.bits

    def __str__(self) -> str:
        return type_text(self)


BOOL = IrType("bool", 1)


def uint(width: int) -> IrType:
    return IrType("uint", width)


def sint(width: int) -> IrType:
    return IrType("int", width)


def enum(name: str, width: int, constants: list[tuple[str, int]] | tuple[tuple[str, int], ...]) -> IrType:
    return IrType("enum", width, name=name, constants=tuple(constants))


def ptr(pointee: IrType, length: int = 0) -> IrType:
    return IrType("ptr", 0, pointee=pointee, length=length)


def type_text(t: IrType) -> str:
    if t.kind == "bool":
        return "bool"
    if t.kind == "uint":
        return f"u{t.width}"
    if t.kind == "int":
        return f"i{t.width}"
    if t.kind == "enum":
        return t.name
    assert t.pointee is not None
    inner = type_text(t.pointee)
    return f"ptr {inner}[{t.length}]" if t.length else f"ptr {inner}"
