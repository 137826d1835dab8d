"""Signatures, enums and global variable types recovered from DWARF."""

from __future__ import annotations

import json
from dataclasses import dataclass

from ecpart.frontend.elf import ElfError, ElfImage
from ecpart.ir import types as T
from ecpart.ir.types import IrType, IrTypeError

BUNDLE_FORMAT = "ecpart-debug-bundle"
BUNDLE_VERSION = 1

DW_ATE_boolean = 0x02
DW_ATE_signed = 0x05
DW_ATE_signed_char = 0x06
DW_ATE_unsigned = 0x07
DW_ATE_unsigned_char = 0x08


class DwarfError(ValueError):
    pass


class UnsupportedType(Exception):
    pass


@dataclass(frozen=True)
class ParamMeta:
    name: str
    type: IrType
    direction: str


@dataclass(frozen=True)
class FunctionMeta:
    name: str
    address: int
    size: int
    params: tuple[ParamMeta, ...]
    ret: IrType | None
    globals: tuple[str, ...] = ()
    unsupported: tuple[str, ...] = ()

    @property
    def supported(self) -> bool:
        return not self.unsupported


@dataclass(frozen=True)
class GlobalMeta:
    name: str
    type: IrType
    address: int
    init: int


@dataclass(frozen=True)
class DebugBundle:
    functions: tuple[FunctionMeta, ...]
    enums: tuple[IrType, ...] = ()
    typedefs: tuple[tuple[str, IrType], ...] = ()
    globals: tuple[GlobalMeta, ...] = ()
    version: int = BUNDLE_VERSION

    def function(self, name: str) -> FunctionMeta:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def to_json(self) -> str:
        return json.dumps({
            "format": BUNDLE_FORMAT,
            "version": self.version,
            "enums": [_type_doc(e) for e in self.enums],
            "typedefs": [[n, _type_doc(t)] for n, t in self.typedefs],
            "globals": [{"name": g.name, "type": _type_doc(g.type), "address": g.address, "init": g.init}
                        for g in self.globals],
            "functions": [{
                "name": f.name,
                "address": f.address,
                "size": f.size,
                "params": [{"name": p.name, "type": _type_doc(p.type), "direction": p.direction} for p in f.params],
                "ret": _type_doc(f.ret) if f.ret is not None else None,
                "globals": list(f.globals),
                "unsupported": list(f.unsupported),
            } for f in self.functions],
        }, indent=1, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "DebugBundle":
        d = json.loads(text)
        if d.get("format") != BUNDLE_FORMAT:
            raise DwarfError("not a debug bundle")
        if d.get("version") != BUNDLE_VERSION:
            raise DwarfError(f"unsupported debug bundle version {d.get('version')!r}")
        funcs = tuple(FunctionMeta(
            f["name"], f["address"], f["size"],
            tuple(ParamMeta(p["name"], _type_from(p["type"]), p["direction"]) for p in f["params"]),
            _type_from(f["ret"]) if f["ret"] is not None else None,
            tuple(f["globals"]), tuple(f["unsupported"]),
        ) for f in d["functions"])
        return DebugBundle(
            funcs,
            tuple(_type_from(e) for e in d["enums"]),
            tuple((n, _type_from(t)) for n, t in d["typedefs"]),
            tuple(GlobalMeta(g["name"], _type_from(g["type"]), g["address"], g["init"]) for g in d["globals"]),
            d["version"],
        )


def _type_doc(t: IrType) -> dict:
    out: dict = {"kind": t.kind}
    if t.kind in ("uint", "int", "enum"):
        out["width"] = t.width
    if t.kind == "enum":
        out["name"] = t.name
        out["constants"] = [[n, v] for n, v in t.constants]
    if t.kind == "ptr":
        out["pointee"] = _type_doc(t.pointee)
        out["length"] = t.length
    return out


def _type_from(d: dict) -> IrType:
    k = d["kind"]
    if k == "bool":
        return T.BOOL
    if k in ("uint", "int"):
        return IrType(k, d["width"])
    if k == "enum":
        return T.enum(d["name"], d["width"], [tuple(c) for c in d["constants"]])
    if k == "ptr":
        return T.ptr(_type_from(d["pointee"]), d["length"])
    raise DwarfError(f"unknown type kind {k!r}")


def _name(die) -> str | None:
    a = die.attributes.get("DW_AT_name")
    return a.value.decode() if a is not None else None


class _Types:
    """Resolves DIE type references into IR types, remembering enums and typedefs."""

    def __init__(self) -> None:
        self.enums: dict[str, IrType] = {}
        self.typedefs: dict[str, IrType] = {}

    def target(self, die):
        if "DW_AT_type" not in die.attributes:
            return None
        return die.get_DIE_from_attribute("DW_AT_type")

    def strip(self, die) -> tuple[object, bool]:
        """Skip qualifiers and typedefs; report whether a const was seen."""
        const = False
        while die is not None and die.tag in ("DW_TAG_const_type", "DW_TAG_volatile_type", "DW_TAG_typedef",
                                              "DW_TAG_restrict_type"):
            if die.tag == "DW_TAG_const_type":
                const = True
            if die.tag == "DW_TAG_typedef":
                inner = self.target(die)
                if inner is not None:
                    try:
                        self.typedefs[_name(die)] = self.scalar(inner)
                    except UnsupportedType:
                        pass
            die = self.target(die)
        return die, const

    def scalar(self, die) -> IrType:
        die, _ = self.strip(die)
        if die is None:
            raise UnsupportedType("void")
        if die.tag == "DW_TAG_base_type":
            enc = die.attributes["DW_AT_encoding"].value
            size = die.attributes["DW_AT_byte_size"].value
            if enc == DW_ATE_boolean:
                return T.BOOL
            if enc in (DW_ATE_unsigned, DW_ATE_unsigned_char) and size in (1, 2, 4):
                return T.uint(size * 8)
            if enc in (DW_ATE_signed, DW_ATE_signed_char) and size in (1, 2, 4):
                return T.sint(size * 8)
            raise UnsupportedType(f"base type {_name(die)}")
        if die.tag == "DW_TAG_enumeration_type":
            name = _name(die) or f"enum_{die.offset:x}"
            size = die.attributes["DW_AT_byte_size"].value
            consts = [(_name(c), c.attributes["DW_AT_const_value"].value & ((1 << (size * 8)) - 1))
                      for c in die.iter_children() if c.tag == "DW_TAG_enumerator"]
            try:
                t = T.enum(name, size * 8, consts)
            except IrTypeError as exc:
                raise UnsupportedType(str(exc)) from None
            self.enums.setdefault(name, t)
            return t
        raise UnsupportedType(die.tag.replace("DW_TAG_", ""))

    def param(self, die) -> tuple[IrType, str]:
        t, _ = self.strip(die)
        if t is not None and t.tag == "DW_TAG_pointer_type":
            pointee, const = self.strip(self.target(t))
            if pointee is None:
                raise UnsupportedType("void pointer")
            length = 0
            if pointee.tag == "DW_TAG_array_type":
                length = _array_length(pointee)
                pointee, c2 = self.strip(self.target(pointee))
                const = const or c2
            return T.ptr(self.scalar(pointee), length), ("in" if const else "inout")
        return self.scalar(die), "in"


def _array_length(die) -> int:
    for sub in die.iter_children():
        if sub.tag == "DW_TAG_subrange_type":
            if "DW_AT_count" in sub.attributes:
                return sub.attributes["DW_AT_count"].value
            if "DW_AT_upper_bound" in sub.attributes:
                return sub.attributes["DW_AT_upper_bound"].value + 1
    raise UnsupportedType("array without a length")


def extract_debug_bundle(img: ElfImage) -> DebugBundle:
    """One :class:`FunctionMeta` per defined subprogram, sorted by address.

    A parameter or return type outside the supported subset marks only its
    function as unsupported.  ``globals`` of each function is left empty
    here; :func:`ecpart.frontend.rv32i.annotate_globals` fills it in.
    """
    ef = img.elffile()
    try:
        if not ef.has_dwarf_info() or img.section(".debug_info") is None:
            raise DwarfError("image has no DWARF debug information")
        dwarf = ef.get_dwarf_info()
        types = _Types()
        funcs: dict[str, FunctionMeta] = {}
        globs: dict[str, GlobalMeta] = {}
        for cu in dwarf.iter_CUs():
            for die in cu.iter_DIEs():
                if die.tag == "DW_TAG_subprogram" and "DW_AT_low_pc" in die.attributes:
                    meta = _function(die, types, img)
                    funcs.setdefault(meta.name, meta)
                elif die.tag == "DW_TAG_variable" and "DW_AT_location" in die.attributes:
                    g = _global(die, types, img)
                    if g is not None:
                        globs.setdefault(g.name, g)
                elif die.tag in ("DW_TAG_enumeration_type", "DW_TAG_typedef"):
                    try:
                        types.scalar(die)
                    except UnsupportedType:
                        pass
    except DwarfError:
        raise
    except Exception as exc:  # pyelftools raises assorted types on corrupt sections
        raise DwarfError(f"unparseable DWARF: {type(exc).__name__}: {exc}") from None
    return DebugBundle(
        tuple(sorted(funcs.values(), key=lambda f: (f.address, f.name))),
        tuple(types.enums[k] for k in sorted(types.enums)),
        tuple(sorted(types.typedefs.items())),
        tuple(globs[k] for k in sorted(globs)),
    )


def _function(die, types: _Types, img: ElfImage) -> FunctionMeta:
    name = _name(die) or f"sub_{die.attributes['DW_AT_low_pc'].value:x}"
    low = die.attributes["DW_AT_low_pc"].value
    high = die.attributes["DW_AT_high_pc"]
    size = high.value if high.form != "DW_FORM_addr" else high.value - low
    if not img.in_executable(low):
        raise DwarfError(f"{name} starts at {low:#x}, outside every executable section")
    problems: list[str] = []
    params: list[ParamMeta] = []
    for i, child in enumerate(c for c in die.iter_children() if c.tag == "DW_TAG_formal_parameter"):
        pname = _name(child) or f"arg{i}"
        try:
            t, direction = types.param(types.target(child))
            params.append(ParamMeta(pname, t, direction))
        except (UnsupportedType, IrTypeError) as exc:
            problems.append(f"parameter {pname}: {exc}")
    if any(c.tag == "DW_TAG_unspecified_parameters" for c in die.iter_children()):
        problems.append("variadic")
    ret = None
    target = types.target(die)
    if target is not None:
        try:
            ret = types.scalar(target)
        except UnsupportedType as exc:
            problems.append(f"return type: {exc}")
    return FunctionMeta(name, low, size, tuple(params), ret, (), tuple(problems))


def _global(die, types: _Types, img: ElfImage) -> GlobalMeta | None:
    name = _name(die)
    sym = img.symbol(name) if name else None
    if sym is None or sym.kind != "object":
        return None
    try:
        t = types.scalar(types.target(die))
    except UnsupportedType:
        return None
    nbytes = t.storage_bits // 8
    try:
        init = int.from_bytes(img.read(sym.address, nbytes), "little")
    except ElfError:
        init = 0  # .bss
    return GlobalMeta(name, t, sym.address, init)


def with_globals(bundle: DebugBundle, accesses: dict[str, tuple[str, ...]]) -> DebugBundle:
    funcs = tuple(FunctionMeta(f.name, f.address, f.size, f.params, f.ret, tuple(accesses.get(f.name, ())),
                               f.unsupported) for f in bundle.functions)
    return DebugBundle(funcs, bundle.enums, bundle.typedefs, bundle.globals, bundle.version)
