"""RV32I decoding and lifting into MicroIR.

Every machine register becomes a ``u32`` local named ``r_<abi name>``.
Addresses are tracked separately by a small constant/pointer analysis:
a memory access must resolve to a pointer parameter plus a constant
offset, a stack slot, or the exact start of a global symbol.  Anything
else is a :class:`LiftError`, never a guess.

Besides the documented subset, AUIPC is accepted because linkers emit
``auipc``/``jalr`` pairs for calls; the pair must resolve to a function
entry.
"""

from __future__ import annotations

from dataclasses import dataclass

from ecpart.frontend.dwarf import DebugBundle, FunctionMeta, with_globals
from ecpart.frontend.elf import ElfImage
from ecpart.ir.model import Module
from ecpart.ir.parser import parse_module
from ecpart.ir.printer import HEADER, _enum_decl
from ecpart.ir.types import IrType, type_text

ABI = ("zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1",
       "a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7",
       "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11",
       "t3", "t4", "t5", "t6")
RA, SP, A0 = 1, 2, 10
CALLER_SAVED = (1, 5, 6, 7, 10, 11, 12, 13, 14, 15, 16, 17, 28, 29, 30, 31)
MASK32 = 0xFFFFFFFF


class LiftError(ValueError):
    pass


@dataclass(frozen=True)
class Insn:
    addr: int
    word: int
    mnem: str
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0

    def __str__(self) -> str:
        r = ABI
        m = self.mnem
        if m in ("lui", "auipc"):
            return f"{m} {r[self.rd]}, {(self.imm >> 12) & 0xFFFFF:#x}"
        if m == "jal":
            return f"jal {r[self.rd]}, {self.imm}"
        if m in ("jalr",) or m in _LOADS:
            return f"{m} {r[self.rd]}, {self.imm}({r[self.rs1]})"
        if m in _STORES:
            return f"{m} {r[self.rs2]}, {self.imm}({r[self.rs1]})"
        if m in _BRANCHES:
            return f"{m} {r[self.rs1]}, {r[self.rs2]}, {self.imm}"
        if m in _OPIMM:
            return f"{m} {r[self.rd]}, {r[self.rs1]}, {self.imm}"
        return f"{m} {r[self.rd]}, {r[self.rs1]}, {r[self.rs2]}"


_LOADS = {"lb": (1, True), "lh": (2, True), "lw": (4, False), "lbu": (1, False), "lhu": (2, False)}
_STORES = {"sb": 1, "sh": 2, "sw": 4}
_BRANCHES = {"beq": ("eq", False), "bne": ("ne", False), "blt": ("slt", False), "bge": ("slt", True),
             "bltu": ("ult", False), "bgeu": ("ult", True)}
_OPIMM = ("addi", "slti", "sltiu", "xori", "ori", "andi", "slli", "srli", "srai")
_OP = {"add": "add", "sub": "sub", "xor": "xor", "or": "or", "and": "and",
       "sll": "shl", "srl": "lshr", "sra": "ashr"}


def _sx(v: int, bits: int) -> int:
    v &= (1 << bits) - 1
    return v - (1 << bits) if v >> (bits - 1) else v


def decode(word: int, addr: int = 0) -> Insn:
    """Decode one 32-bit instruction word of the supported subset."""
    def bad() -> LiftError:
        return LiftError(f"unsupported opcode {word:#010x} at {addr:#x}")

    if word & 3 != 3:
        raise bad()
    op = word & 0x7F
    rd = (word >> 7) & 31
    f3 = (word >> 12) & 7
    rs1 = (word >> 15) & 31
    rs2 = (word >> 20) & 31
    f7 = word >> 25
    i_imm = _sx(word >> 20, 12)
    if op == 0x37:
        return Insn(addr, word, "lui", rd, imm=word & 0xFFFFF000)
    if op == 0x17:
        return Insn(addr, word, "auipc", rd, imm=word & 0xFFFFF000)
    if op == 0x6F:
        imm = ((word >> 31) << 20) | (((word >> 12) & 0xFF) << 12) | (((word >> 20) & 1) << 11) | (((word >> 21) & 0x3FF) << 1)
        return Insn(addr, word, "jal", rd, imm=_sx(imm, 21))
    if op == 0x67 and f3 == 0:
        return Insn(addr, word, "jalr", rd, rs1, imm=i_imm)
    if op == 0x63:
        names = {0: "beq", 1: "bne", 4: "blt", 5: "bge", 6: "bltu", 7: "bgeu"}
        if f3 not in names:
            raise bad()
        imm = ((word >> 31) << 12) | (((word >> 7) & 1) << 11) | (((word >> 25) & 0x3F) << 5) | (((word >> 8) & 0xF) << 1)
        return Insn(addr, word, names[f3], 0, rs1, rs2, _sx(imm, 13))
    if op == 0x03:
        names = {0: "lb", 1: "lh", 2: "lw", 4: "lbu", 5: "lhu"}
        if f3 not in names:
            raise bad()
        return Insn(addr, word, names[f3], rd, rs1, imm=i_imm)
    if op == 0x23:
        names = {0: "sb", 1: "sh", 2: "sw"}
        if f3 not in names:
            raise bad()
        imm = _sx(((word >> 25) << 5) | ((word >> 7) & 31), 12)
        return Insn(addr, word, names[f3], 0, rs1, rs2, imm)
    if op == 0x13:
        if f3 == 1:
            if f7 != 0:
                raise bad()
            return Insn(addr, word, "slli", rd, rs1, imm=rs2)
        if f3 == 5:
            if f7 not in (0, 0x20):
                raise bad()
            return Insn(addr, word, "srai" if f7 else "srli", rd, rs1, imm=rs2)
        names = {0: "addi", 2: "slti", 3: "sltiu", 4: "xori", 6: "ori", 7: "andi"}
        return Insn(addr, word, names[f3], rd, rs1, imm=i_imm)
    if op == 0x33:
        table = {(0, 0): "add", (0, 0x20): "sub", (1, 0): "sll", (2, 0): "slt", (3, 0): "sltu",
                 (4, 0): "xor", (5, 0): "srl", (5, 0x20): "sra", (6, 0): "or", (7, 0): "and"}
        m = table.get((f3, f7))
        if m is None:
            raise bad()
        return Insn(addr, word, m, rd, rs1, rs2)
    raise bad()


def decode_range(img: ElfImage, start: int, size: int) -> list[Insn]:
    if size % 4:
        raise LiftError(f"function at {start:#x} has size {size}, not a multiple of 4 (compressed code?)")
    data = img.read(start, size)
    return [decode(int.from_bytes(data[i:i + 4], "little"), start + i) for i in range(0, size, 4)]


# --------------------------------------------------------------------------
# address analysis

TOP = ("top",)


def _join(a: tuple, b: tuple) -> tuple:
    return a if a == b else TOP


@dataclass
class _State:
    regs: dict[int, tuple]
    stack: dict[int, tuple]

    def copy(self) -> "_State":
        return _State(dict(self.regs), dict(self.stack))

    def get(self, r: int) -> tuple:
        return ("const", 0) if r == 0 else self.regs.get(r, TOP)

    def set(self, r: int, v: tuple) -> None:
        if r != 0:
            self.regs[r] = v

    def join(self, other: "_State") -> "_State":
        regs = {r: _join(self.get(r), other.get(r)) for r in set(self.regs) | set(other.regs)}
        stack = {k: _join(self.stack.get(k, TOP), other.stack.get(k, TOP)) for k in set(self.stack) | set(other.stack)}
        return _State(regs, stack)


def _address(st: _State, base: int, off: int) -> tuple:
    v = st.get(base)
    if v[0] == "const":
        return ("const", (v[1] + off) & MASK32)
    if v[0] == "ptr":
        return ("ptr", v[1], v[2] + off)
    return TOP


def _transfer(st: _State, ins: Insn) -> None:
    m = ins.mnem
    if m == "lui":
        st.set(ins.rd, ("const", ins.imm))
    elif m == "auipc":
        st.set(ins.rd, ("const", (ins.addr + ins.imm) & MASK32))
    elif m == "addi":
        st.set(ins.rd, _address(st, ins.rs1, ins.imm))
    elif m == "add":
        a, b = st.get(ins.rs1), st.get(ins.rs2)
        if a[0] == "const" and b[0] == "const":
            st.set(ins.rd, ("const", (a[1] + b[1]) & MASK32))
        elif a[0] == "ptr" and b[0] == "const":
            st.set(ins.rd, ("ptr", a[1], a[2] + _sx(b[1], 32)))
        elif b[0] == "ptr" and a[0] == "const":
            st.set(ins.rd, ("ptr", b[1], b[2] + _sx(a[1], 32)))
        else:
            st.set(ins.rd, TOP)
    elif m in _LOADS:
        addr = _address(st, ins.rs1, ins.imm)
        st.set(ins.rd, st.stack.get(addr[2], TOP) if addr[0] == "ptr" and addr[1] == "$sp" and m == "lw" else TOP)
    elif m in _STORES:
        addr = _address(st, ins.rs1, ins.imm)
        if addr[0] == "ptr" and addr[1] == "$sp":
            st.stack[addr[2]] = st.get(ins.rs2) if m == "sw" else TOP
    elif m in ("jal", "jalr"):
        if ins.rd == RA:
            for r in CALLER_SAVED:
                st.set(r, TOP)
        else:
            st.set(ins.rd, TOP)
    elif m not in _BRANCHES:
        st.set(ins.rd, TOP)


# --------------------------------------------------------------------------
# lifting


class _Lifter:
    def __init__(self, img: ElfImage, bundle: DebugBundle, meta: FunctionMeta) -> None:
        self.img = img
        self.bundle = bundle
        self.meta = meta
        self.insns = decode_range(img, meta.address, meta.size)
        self.by_addr = {i.addr: i for i in self.insns}
        self.end = meta.address + meta.size
        self.tmp = 0
        self.used_regs: set[int] = set()
        self.slots: set[int] = set()
        self.globals_used: set[str] = set()
        self.callees: set[str] = set()
        self.funcs_by_addr = {f.address: f for f in bundle.functions}
        self.globals_by_addr = {g.address: g for g in bundle.globals}

    # -- control flow ------------------------------------------------------

    def _call_target(self, st: _State, ins: Insn) -> FunctionMeta | None:
        if ins.mnem == "jal":
            target = (ins.addr + ins.imm) & MASK32
        else:
            v = st.get(ins.rs1)
            if v[0] != "const":
                return None
            target = (v[1] + ins.imm) & MASK32
        return self.funcs_by_addr.get(target)

    def leaders(self) -> list[int]:
        lead = {self.meta.address}
        for ins in self.insns:
            nxt = ins.addr + 4
            if ins.mnem in _BRANCHES:
                lead.add((ins.addr + ins.imm) & MASK32)
                lead.add(nxt)
            elif ins.mnem == "jal" and ins.rd == 0:
                t = (ins.addr + ins.imm) & MASK32
                if self.meta.address <= t < self.end:
                    lead.add(t)
                lead.add(nxt)
            elif ins.mnem == "jalr" and ins.rd == 0:
                lead.add(nxt)
        for a in lead:
            if a != self.end and a not in self.by_addr:
                raise LiftError(f"branch target {a:#x} outside {self.meta.name}")
        return sorted(a for a in lead if a < self.end)

    def blocks(self) -> list[list[Insn]]:
        lead = self.leaders()
        out = []
        for i, start in enumerate(lead):
            stop = lead[i + 1] if i + 1 < len(lead) else self.end
            out.append([self.by_addr[a] for a in range(start, stop, 4)])
        return out

    def successors(self, block: list[Insn], st: _State) -> list[int]:
        last = block[-1]
        nxt = last.addr + 4
        m = last.mnem
        if m in _BRANCHES:
            return [(last.addr + last.imm) & MASK32, nxt]
        if m == "jal" and last.rd == 0:
            t = (last.addr + last.imm) & MASK32
            return [t] if self.meta.address <= t < self.end else []
        if m == "jalr" and last.rd == 0:
            return []
        return [nxt] if nxt < self.end else []

    def entry_state(self) -> _State:
        st = _State({SP: ("ptr", "$sp", 0)}, {})
        for i, p in enumerate(self.meta.params):
            if i >= 8:
                raise LiftError(f"{self.meta.name}: more than 8 parameters")
            if p.type.is_ptr:
                st.set(A0 + i, ("ptr", p.name, 0))
        return st

    def analyze(self, blocks: list[list[Insn]]) -> dict[int, _State]:
        states = {blocks[0][0].addr: self.entry_state()}
        index = {b[0].addr: b for b in blocks}
        work = [blocks[0][0].addr]
        while work:
            a = work.pop()
            st = states[a].copy()
            for ins in index[a]:
                _transfer(st, ins)
            for s in self.successors(index[a], st):
                if s not in index:
                    raise LiftError(f"{self.meta.name}: control falls off the end at {s:#x}")
                new = st if s not in states else states[s].join(st)
                if s not in states or new.regs != states[s].regs or new.stack != states[s].stack:
                    states[s] = new.copy()
                    work.append(s)
        return states

    # -- emission ----------------------------------------------------------

    def fresh(self) -> str:
        self.tmp += 1
        return f"t{self.tmp}"

    def reg(self, r: int) -> str:
        if r == 0:
            return "0"
        self.used_regs.add(r)
        return f"%r_{ABI[r]}"

    def value(self, st: _State, r: int, ins: Insn) -> str:
        if r != 0 and st.get(r)[0] == "ptr":
            raise LiftError(f"pointer in {ABI[r]} used as a value at {ins.addr:#x}")
        return self.reg(r)

    def narrow(self, src: str, ty: IrType, out: list[str]) -> str:
        """Low bits of a 32-bit register as a value of ``ty``."""
        bits = ty.bits
        if src == "0":
            return "0"
        if bits == 32:
            return src
        t = self.fresh()
        out.append(f"%{t} = extract {src}, {bits - 1}, 0")
        return f"%{t}"

    def widen(self, dst: str, src: str, ty: IrType, out: list[str]) -> None:
        if ty.bits == 32:
            out.append(f"{dst} = or {src}, 0")
        else:
            out.append(f"{dst} = {'sext' if ty.is_signed else 'zext'} {src} to u32")

    def lift(self) -> str:
        blocks = self.blocks()
        states = self.analyze(blocks)
        labels = {b[0].addr: ("entry" if b[0].addr == self.meta.address else f"L{b[0].addr:x}") for b in blocks}
        body: list[str] = []
        prologue: list[str] = []
        for i, p in enumerate(self.meta.params):
            if not p.type.is_ptr:
                self.widen(self.reg(A0 + i), f"%{p.name}", p.type, prologue)
        for b in blocks:
            a = b[0].addr
            if a not in states:
                continue  # unreachable
            st = states[a].copy()
            lines = list(prologue) if a == self.meta.address else []
            ended = False
            for ins in b:
                ended = self.emit(ins, st, lines, labels)
                _transfer(st, ins)
            if not ended:
                nxt = b[-1].addr + 4
                if nxt >= self.end:
                    raise LiftError(f"{self.meta.name}: control falls off the end at {nxt:#x}")
                lines.append(f"jmp {labels[nxt]}")
            body.append(f"{labels[a]}:")
            body.extend("  " + ln for ln in lines)
        return self.signature() + " {\n" + self.decls() + "\n".join(body) + "\n}"

    def signature(self) -> str:
        params = ", ".join(f"{p.direction} %{p.name}: {type_text(p.type)}" for p in self.meta.params)
        ret = type_text(self.meta.ret) if self.meta.ret is not None else "void"
        return f"func {self.meta.name}({params}) -> {ret}"

    def decls(self) -> str:
        names = [f"r_{ABI[r]}" for r in sorted(self.used_regs)] + [_slot(o) for o in sorted(self.slots)]
        return "".join(f"  local %{n}: u32\n" for n in names)

    def emit(self, ins: Insn, st: _State, out: list[str], labels: dict[int, str]) -> bool:
        """Append IR for ``ins``; True when it ends the block."""
        m = ins.mnem
        rd = ins.rd
        if m in ("lui", "auipc"):
            if rd:
                out.append(f"{self.reg(rd)} = const u32 {(ins.imm + (ins.addr if m == 'auipc' else 0)) & MASK32:#x}")
            return False
        if m in _OPIMM:
            if rd == 0:
                return False
            if m == "addi" and st.get(ins.rs1)[0] == "ptr":
                return False  # pointer offset, tracked by the address analysis
            src = self.value(st, ins.rs1, ins)
            imm = ins.imm & MASK32
            if m == "addi" and imm == 0 and src != "0":
                out.append(f"{self.reg(rd)} = or {src}, 0")  # mv
            elif m == "addi":
                out.append(f"{self.reg(rd)} = {'const u32 ' + hex(imm) if src == '0' else f'add {src}, {imm:#x}'}")
            elif m in ("xori", "ori", "andi"):
                out.append(f"{self.reg(rd)} = {m[:-1]} {self._nonzero(src, out)}, {imm:#x}")
            elif m in ("slli", "srli", "srai"):
                op = {"slli": "shl", "srli": "lshr", "srai": "ashr"}[m]
                out.append(f"{self.reg(rd)} = {op} {self._nonzero(src, out)}, {ins.imm}")
            else:
                t = self.fresh()
                out.append(f"%{t} = cmp {'slt' if m == 'slti' else 'ult'} {self._nonzero(src, out)}, {imm:#x}")
                out.append(f"{self.reg(rd)} = zext %{t} to u32")
            return False
        if m in _OP or m in ("slt", "sltu"):
            if rd == 0:
                return False
            if m == "add" and (st.get(ins.rs1)[0] == "ptr" or st.get(ins.rs2)[0] == "ptr"):
                after = st.copy()
                _transfer(after, ins)
                if after.get(rd)[0] == "ptr":
                    return False
            a = self._nonzero(self.value(st, ins.rs1, ins), out)
            b = self.value(st, ins.rs2, ins)
            if m in ("slt", "sltu"):
                t = self.fresh()
                out.append(f"%{t} = cmp {'slt' if m == 'slt' else 'ult'} {a}, {b}")
                out.append(f"{self.reg(rd)} = zext %{t} to u32")
            elif m in ("sll", "srl", "sra"):
                amt = self.fresh()
                out.append(f"%{amt} = and {self._nonzero(b, out)}, 31")
                out.append(f"{self.reg(rd)} = {_OP[m]} {a}, %{amt}")
            else:
                out.append(f"{self.reg(rd)} = {_OP[m]} {a}, {b}")
            return False
        if m in _LOADS:
            self.load(ins, st, out)
            return False
        if m in _STORES:
            self.store(ins, st, out)
            return False
        if m in _BRANCHES:
            pred, swap = _BRANCHES[m]
            a = self._nonzero(self.value(st, ins.rs1, ins), out)
            b = self.value(st, ins.rs2, ins)
            t = self.fresh()
            out.append(f"%{t} = cmp {pred} {a}, {b}")
            taken = labels[(ins.addr + ins.imm) & MASK32]
            fall = labels[ins.addr + 4]
            out.append(f"br %{t}, {fall}, {taken}" if swap else f"br %{t}, {taken}, {fall}")
            return True
        if m == "jal" and rd == 0:
            t = (ins.addr + ins.imm) & MASK32
            if self.meta.address <= t < self.end:
                out.append(f"jmp {labels[t]}")
                return True
            return self.tail_call(ins, st, out)
        if m in ("jal", "jalr") and rd == RA:
            callee = self._call_target(st, ins)
            if callee is None:
                raise LiftError(f"indirect or unknown call target at {ins.addr:#x}")
            self.call(callee, st, out, ins)
            return False
        if m == "jalr" and rd == 0 and ins.rs1 == RA and ins.imm == 0:
            self.ret(out)
            return True
        if m == "jalr" and rd == 0:
            return self.tail_call(ins, st, out)
        raise LiftError(f"unsupported use of {m} at {ins.addr:#x}")

    def _nonzero(self, src: str, out: list[str]) -> str:
        """A register operand for positions where a literal is not allowed."""
        if src != "0":
            return src
        t = self.fresh()
        out.append(f"%{t} = const u32 0")
        return f"%{t}"

    def tail_call(self, ins: Insn, st: _State, out: list[str]) -> bool:
        callee = self._call_target(st, ins)
        if callee is None:
            raise LiftError(f"indirect jump at {ins.addr:#x}")
        self.call(callee, st, out, ins)
        self.ret(out)
        return True

    def ret(self, out: list[str]) -> None:
        rt = self.meta.ret
        if rt is None:
            out.append("ret")
            return
        self.used_regs.add(A0)
        out.append(f"ret {self.narrow('%r_a0', rt, out)}")

    def call(self, callee: FunctionMeta, st: _State, out: list[str], ins: Insn) -> None:
        if callee.unsupported:
            raise LiftError(f"call to {callee.name} whose signature is unsupported")
        args = []
        for i, p in enumerate(callee.params):
            r = A0 + i
            if p.type.is_ptr:
                v = st.get(r)
                own = {q.name: q for q in self.meta.params}
                if v[0] != "ptr" or v[2] != 0 or v[1] not in own or own[v[1]].type != p.type:
                    raise LiftError(f"pointer argument {p.name} of {callee.name} at {ins.addr:#x} "
                                    f"is not one of {self.meta.name}'s pointer parameters")
                args.append(f"%{v[1]}")
            else:
                args.append(self.narrow(self._nonzero(self.value(st, r, ins), out), p.type, out))
        self.callees.add(callee.name)
        call = f"call {callee.name}({', '.join(args)})"
        if callee.ret is None:
            out.append(call)
        else:
            t = self.fresh()
            out.append(f"%{t} = {call}")
            self.widen(self.reg(A0), f"%{t}", callee.ret, out)

    def _resolve(self, ins: Insn, st: _State, nbytes: int) -> tuple[str, str, IrType | None]:
        """(IR location, kind, type) of a memory access."""
        addr = _address(st, ins.rs1, ins.imm)
        if addr[0] == "ptr" and addr[1] == "$sp":
            if nbytes != 4:
                raise LiftError(f"sub-word stack access at {ins.addr:#x}")
            self.slots.add(addr[2])
            return f"%{_slot(addr[2])}", "stack", None
        if addr[0] == "ptr":
            p = next(q for q in self.meta.params if q.name == addr[1])
            pt = p.type.pointee
            size = pt.storage_bits // 8
            if size != nbytes:
                raise LiftError(f"{nbytes}-byte access to {p.name} ({type_text(pt)}) at {ins.addr:#x}")
            off = addr[2]
            if p.type.is_array:
                if off % size or not 0 <= off // size < p.type.length:
                    raise LiftError(f"access outside array {p.name} at {ins.addr:#x}")
                return f"%{p.name}[{off // size}]", "param", pt
            if off != 0:
                raise LiftError(f"offset {off} from scalar pointer {p.name} at {ins.addr:#x}")
            return f"%{p.name}", "param", pt
        if addr[0] == "const":
            g = self.globals_by_addr.get(addr[1])
            if g is None or g.type.storage_bits // 8 != nbytes:
                raise LiftError(f"access to unresolvable address {addr[1]:#x} at {ins.addr:#x}")
            self.globals_used.add(g.name)
            return f"@{g.name}", "global", g.type
        raise LiftError(f"access through unresolvable address at {ins.addr:#x}")

    def load(self, ins: Insn, st: _State, out: list[str]) -> None:
        nbytes, signed = _LOADS[ins.mnem]
        loc, kind, ty = self._resolve(ins, st, nbytes)
        if ins.rd == 0:
            return
        if kind == "stack":
            if st.stack.get(int(loc.split("_")[-1].replace("m", "-")), TOP)[0] == "ptr":
                return
            out.append(f"{self.reg(ins.rd)} = or {loc}, 0")
            return
        t = self.fresh()
        out.append(f"%{t} = load {loc}")
        if ty.bits == 32:
            out.append(f"{self.reg(ins.rd)} = or %{t}, 0")
        else:
            out.append(f"{self.reg(ins.rd)} = {'sext' if signed else 'zext'} %{t} to u32")

    def store(self, ins: Insn, st: _State, out: list[str]) -> None:
        nbytes = _STORES[ins.mnem]
        loc, kind, ty = self._resolve(ins, st, nbytes)
        if kind == "stack":
            if ins.rs2 != 0 and st.get(ins.rs2)[0] == "ptr":
                return
            out.append(f"{loc} = or {self._nonzero(self.reg(ins.rs2), out)}, 0")
            return
        src = self.value(st, ins.rs2, ins)
        out.append(f"store {loc}, {self.narrow(src, ty, out)}")


def _slot(off: int) -> str:
    return f"stk_{'m' if off < 0 else ''}{abs(off)}"


def lift_function_text(img: ElfImage, bundle: DebugBundle, meta: FunctionMeta) -> tuple[str, set[str], set[str]]:
    """MicroIR text of one function plus the globals and callees it uses."""
    if meta.unsupported:
        raise LiftError(f"{meta.name}: unsupported signature ({'; '.join(meta.unsupported)})")
    lf = _Lifter(img, bundle, meta)
    text = lf.lift()
    return text, lf.globals_used, lf.callees


@dataclass
class LiftResult:
    module: Module
    text: str
    errors: dict[str, str]
    bundle: DebugBundle


def _extern(meta: FunctionMeta) -> str:
    params = ", ".join(f"{p.direction} %{p.name}: {type_text(p.type)}" for p in meta.params)
    ret = type_text(meta.ret) if meta.ret is not None else "void"
    return f"extern func {meta.name}({params}) -> {ret}"


def lift_module(img: ElfImage, bundle: DebugBundle, names: list[str] | None = None) -> LiftResult:
    """Lift the named functions (default: all with debug info) into one module.

    Functions that fail to lift are reported in ``errors``; when another
    lifted function calls one, it is declared ``extern`` so the caller still
    lifts (its effects are then unknown to the analysis).
    """
    wanted = [f for f in bundle.functions if names is None or f.name in names]
    if names is not None:
        missing = set(names) - {f.name for f in wanted}
        if missing:
            raise LiftError(f"no debug information for {', '.join(sorted(missing))}")
    texts: dict[str, str] = {}
    errors: dict[str, str] = {}
    accesses: dict[str, tuple[str, ...]] = {}
    called: set[str] = set()
    for meta in wanted:
        try:
            text, globs, callees = lift_function_text(img, bundle, meta)
        except LiftError as exc:
            errors[meta.name] = str(exc)
            continue
        texts[meta.name] = text
        accesses[meta.name] = tuple(sorted(globs))
        called |= callees
    for name in sorted(called - set(texts)):
        texts[name] = _extern(bundle.function(name))
    parts = [HEADER]
    if bundle.enums:
        parts.append("\n".join(_enum_decl(e) for e in bundle.enums))
    if bundle.globals:
        parts.append("\n".join(f"global @{g.name}: {type_text(g.type)} = {g.init:#x}" for g in bundle.globals))
    order = sorted(texts, key=lambda n: (bundle.function(n).address, n))
    parts.extend(texts[n] for n in order)
    text = "\n\n".join(parts) + "\n"
    module = parse_module(text)
    return LiftResult(module, text, errors, with_globals(bundle, accesses))


def annotate_globals(img: ElfImage, bundle: DebugBundle) -> DebugBundle:
    """Fill each function's ``globals`` with the symbols its lifted code touches."""
    return lift_module(img, bundle).bundle
