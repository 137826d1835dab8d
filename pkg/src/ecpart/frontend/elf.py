"""ELF32 container reading for RV32 images."""

from __future__ import annotations

import io
from dataclasses import dataclass

from elftools.elf.elffile import ELFFile
from elftools.elf.sections import SymbolTableSection

EM_RISCV = 243


class ElfError(ValueError):
    pass


@dataclass(frozen=True)
class Section:
    name: str
    address: int
    size: int
    data: bytes
    executable: bool


@dataclass(frozen=True)
class Symbol:
    name: str
    address: int
    size: int
    kind: str  # func | object


@dataclass(frozen=True)
class ElfImage:
    machine: int
    sections: tuple[Section, ...]
    symbols: tuple[Symbol, ...]
    raw: bytes

    def section(self, name: str) -> Section | None:
        for s in self.sections:
            if s.name == name:
                return s
        return None

    def functions(self) -> list[Symbol]:
        return [s for s in self.symbols if s.kind == "func"]

    def symbol(self, name: str) -> Symbol | None:
        for s in self.symbols:
            if s.name == name:
                return s
        return None

    def symbol_at(self, address: int) -> Symbol | None:
        """The object or function symbol whose extent contains ``address``."""
        for s in self.symbols:
            if s.address <= address < s.address + max(s.size, 1):
                return s
        return None

    def read(self, address: int, size: int) -> bytes:
        for s in self.sections:
            if s.address <= address and address + size <= s.address + s.size and s.data:
                off = address - s.address
                return s.data[off:off + size]
        raise ElfError(f"address {address:#x} (+{size}) is not backed by file data")

    def in_executable(self, address: int) -> bool:
        return any(s.executable and s.address <= address < s.address + s.size for s in self.sections)

    def elffile(self) -> ELFFile:
        return ELFFile(io.BytesIO(self.raw))


def read_elf(data: bytes) -> ElfImage:
    """Parse an RV32 ELF image; every section's bytes must lie inside ``data``."""
    if len(data) < 4 or data[:4] != b"\x7fELF":
        raise ElfError("bad magic: not an ELF file")
    if len(data) < 52:
        raise ElfError("truncated ELF header")
    try:
        ef = ELFFile(io.BytesIO(data))
        if ef.elfclass != 32 or ef["e_machine"] not in ("EM_RISCV", EM_RISCV):
            raise ElfError(f"unsupported machine {ef['e_machine']} (class {ef.elfclass}); only RV32 is handled")
        shoff, shnum, shentsize = ef["e_shoff"], ef["e_shnum"], ef["e_shentsize"]
        if shoff + shnum * shentsize > len(data):
            raise ElfError("truncated section header table")
        sections = []
        symtab = None
        for sec in ef.iter_sections():
            if sec["sh_type"] == "SHT_NULL":
                continue
            size = sec["sh_size"]
            nobits = sec["sh_type"] == "SHT_NOBITS"
            if not nobits and sec["sh_offset"] + size > len(data):
                raise ElfError(f"truncated section {sec.name}")
            body = b"" if nobits else data[sec["sh_offset"]:sec["sh_offset"] + size]
            sections.append(Section(sec.name, sec["sh_addr"], size, body, bool(sec["sh_flags"] & 0x4)))
            if isinstance(sec, SymbolTableSection) and sec["sh_type"] == "SHT_SYMTAB":
                symtab = sec
        if symtab is None:
            raise ElfError("no symbol table")
        symbols = []
        for sym in symtab.iter_symbols():
            kind = {"STT_FUNC": "func", "STT_OBJECT": "object"}.get(sym["st_info"]["type"])
            if kind is None or not sym.name:
                continue
            symbols.append(Symbol(sym.name, sym["st_value"], sym["st_size"], kind))
    except ElfError:
        raise
    except Exception as exc:  # pyelftools and construct raise many unrelated types on bad input
        raise ElfError(f"malformed ELF: {type(exc).__name__}: {exc}") from None
    symbols.sort(key=lambda s: (s.address, s.name))
    return ElfImage(EM_RISCV, tuple(sections), tuple(symbols), data)
