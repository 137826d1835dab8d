"""Linker map files: symbol addresses and the ``--cref`` cross-reference table.

Both the GNU ld and the lld layouts are read.  Symbols are attributed to
the object file whose input section lists them; an edge (caller, callee)
exists when an object that defines function ``caller`` references
``callee`` in the cross-reference table.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

CREF_HEADER = "Cross Reference Table"


class MapFileError(ValueError):
    pass


@dataclass(frozen=True)
class CrossRefs:
    edges: frozenset[tuple[str, str]]
    symbol_addresses: dict[str, int]
    defined_in: dict[str, str] = field(default_factory=dict)
    text_symbols: frozenset[str] = frozenset()
    skipped_lines: int = 0

    @property
    def functions(self) -> list[str]:
        return sorted(self.text_symbols)

    def call_edges(self) -> list[tuple[str, str]]:
        return sorted((a, b) for a, b in self.edges if b in self.text_symbols)


_LLD_ROW = re.compile(r"^\s*([0-9a-fA-F]+)\s+([0-9a-fA-F]+)\s+([0-9a-fA-F]+)\s+(\d+)\s(.*)$")
_GNU_SECTION = re.compile(r"^\s*(\.\S+)?\s+0x([0-9a-fA-F]+)\s+0x([0-9a-fA-F]+)\s+(\S+\.o\S*)\s*$")
_GNU_SYMBOL = re.compile(r"^\s+0x([0-9a-fA-F]+)\s+([A-Za-z_.$][\w.$]*)\s*$")
_OBJECT = re.compile(r"^(\S+?\.o)(?::\((\S+)\))?$")


def parse_map_file(text: str) -> CrossRefs:
    lines = text.splitlines()
    try:
        cref_at = next(i for i, ln in enumerate(lines) if ln.strip() == CREF_HEADER)
    except StopIteration:
        raise MapFileError("cross-reference table header missing (link with --cref)") from None
    addresses: dict[str, int] = {}
    defined: dict[str, str] = {}
    text_syms: set[str] = set()
    skipped = 0
    cur_obj: str | None = None
    cur_text = False
    for ln in lines[:cref_at]:
        m = _LLD_ROW.match(ln)
        if m:
            rest = m.group(5)
            depth = len(rest) - len(rest.lstrip())  # 0: output section, 8: input section, 16: symbol
            item = rest.strip()
            if not item:
                continue
            if depth < 8:
                cur_obj, cur_text = None, False
                continue
            om = _OBJECT.match(item)
            if depth < 16:
                cur_obj = om.group(1) if om else None
                cur_text = bool(om and (om.group(2) or "").startswith(".text"))
                continue
            if cur_obj is not None and not item.startswith("."):
                addresses[item] = int(m.group(1), 16)
                defined.setdefault(item, cur_obj)
                if cur_text:
                    text_syms.add(item)
            continue
        m = _GNU_SECTION.match(ln)
        if m:
            cur_obj = m.group(4)
            cur_text = (m.group(1) or "").startswith(".text")
            continue
        m = _GNU_SYMBOL.match(ln)
        if m and cur_obj is not None:
            addresses[m.group(2)] = int(m.group(1), 16)
            defined.setdefault(m.group(2), cur_obj)
            if cur_text:
                text_syms.add(m.group(2))
            continue
        if ln.strip():
            skipped += 1
    refs: dict[str, list[str]] = {}
    current: str | None = None
    for ln in lines[cref_at + 1:]:
        if not ln.strip() or ln.strip().startswith("Symbol"):
            continue
        if ln[0].isspace():
            if current is None:
                skipped += 1
                continue
            refs[current].append(ln.strip())
            continue
        parts = ln.split()
        current = parts[0]
        refs[current] = parts[1:2]
    funcs_in: dict[str, list[str]] = {}
    for sym, obj in defined.items():
        if sym in text_syms:
            funcs_in.setdefault(obj, []).append(sym)
    edges: set[tuple[str, str]] = set()
    for sym, files in refs.items():
        if not files:
            continue
        owner = files[0]
        defined.setdefault(sym, owner)
        for f in files[1:]:
            for caller in funcs_in.get(f, []):
                edges.add((caller, sym))
    missing = {n for e in edges for n in e} - set(addresses)
    if missing:
        raise MapFileError(f"cross-referenced symbols without an address: {', '.join(sorted(missing))}")
    return CrossRefs(frozenset(edges), addresses, defined, frozenset(text_syms), skipped)
