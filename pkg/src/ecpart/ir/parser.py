"""Parser and checker for the line-based ``.mir`` text format.

See ``docs/microir.md`` for the grammar.  Every error carries a line and
column.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ecpart.ir import types as T
from ecpart.ir.model import (
    BIN_OPS, CMP_OPS, DIRECTIONS, UN_OPS, BasicBlock, Br, Function, Global, Instr, Jmp, Lit,
    Module, Operand, Param, Reg, Ret,
)
from ecpart.ir.types import IrType, IrTypeError

_TOKEN = re.compile(
    r"\s*(?:(?P<num>-?0[xX][0-9a-fA-F_]+|-?0[bB][01_]+|-?\d+)"
    r"|(?P<reg>%[A-Za-z_][\w.]*)"
    r"|(?P<glob>@[A-Za-z_][\w.]*)"
    r"|(?P<ident>[A-Za-z_][\w.]*)"
    r"|(?P<arrow>->)"
    r"|(?P<punct>[:,(){}\[\]=]))"
)


class IrParseError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0) -> None:
        self.message = message
        self.line = line
        self.col = col
        loc = f"{line}:{col}: " if line else ""
        super().__init__(f"{loc}{message}")


@dataclass
class Tok:
    kind: str
    text: str
    col: int


class _Line:
    def __init__(self, text: str, lineno: int) -> None:
        self.lineno = lineno
        self.toks: list[Tok] = []
        pos = 0
        body = text.split(";", 1)[0].rstrip()
        while pos < len(body):
            m = _TOKEN.match(body, pos)
            if not m or m.end() == pos:
                if body[pos:].strip() == "":
                    break
                col = pos + len(body[pos:]) - len(body[pos:].lstrip()) + 1
                raise IrParseError(f"unexpected character {body[col - 1]!r}", lineno, col)
            kind = m.lastgroup or ""
            start = m.start(kind)
            self.toks.append(Tok(kind, m.group(kind), start + 1))
            pos = m.end()
        self.i = 0

    def error(self, msg: str, tok: Tok | None = None) -> IrParseError:
        if tok is None:
            tok = self.peek()
        col = tok.col if tok else (self.toks[-1].col + len(self.toks[-1].text) if self.toks else 1)
        return IrParseError(msg, self.lineno, col)

    def peek(self, k: int = 0) -> Tok | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def done(self) -> bool:
        return self.i >= len(self.toks)

    def next(self, what: str = "token") -> Tok:
        t = self.peek()
        if t is None:
            raise self.error(f"expected {what}, found end of line")
        self.i += 1
        return t

    def expect(self, text: str) -> Tok:
        t = self.next(repr(text))
        if t.text != text:
            raise self.error(f"expected {text!r}, found {t.text!r}", t)
        return t

    def accept(self, text: str) -> bool:
        t = self.peek()
        if t is not None and t.text == text:
            self.i += 1
            return True
        return False

    def kind(self, kind: str, what: str) -> Tok:
        t = self.next(what)
        if t.kind != kind:
            raise self.error(f"expected {what}, found {t.text!r}", t)
        return t

    def end(self) -> None:
        if not self.done():
            t = self.peek()
            raise self.error(f"unexpected {t.text!r}", t)


def parse_int(text: str) -> int:
    return int(text.replace("_", ""), 0)


class _Parser:
    def __init__(self, text: str) -> None:
        self.lines = [_Line(t, i + 1) for i, t in enumerate(text.splitlines())]
        self.lines = [ln for ln in self.lines if ln.toks]
        self.pos = 0
        self.enums: dict[str, IrType] = {}

    # -- types -------------------------------------------------------------

    def scalar_type(self, ln: _Line, allow_wide: bool = False) -> IrType:
        t = ln.kind("ident", "type")
        name = t.text
        try:
            if name == "bool":
                return T.BOOL
            m = re.fullmatch(r"([ui])(\d+)", name)
            if m:
                w = int(m.group(2))
                if not allow_wide and w not in T.SCALAR_WIDTHS:
                    raise ln.error(f"type {name} not allowed here (use u8/u16/u32/i8/i16/i32)", t)
                return T.uint(w) if m.group(1) == "u" else T.sint(w)
        except IrTypeError as exc:
            raise ln.error(str(exc), t) from None
        if name in self.enums:
            return self.enums[name]
        raise ln.error(f"unknown type {name!r}", t)

    def value_type(self, ln: _Line, allow_wide: bool = False) -> IrType:
        t = ln.peek()
        if t is not None and t.text == "ptr":
            ln.next()
            inner = self.scalar_type(ln)
            length = 0
            if ln.accept("["):
                n = ln.kind("num", "array length")
                length = parse_int(n.text)
                if length < 1:
                    raise ln.error("array length must be at least 1", n)
                ln.expect("]")
            return T.ptr(inner, length)
        return self.scalar_type(ln, allow_wide)

    # -- top level ---------------------------------------------------------

    def parse(self) -> Module:
        enums: list[IrType] = []
        globals_: list[Global] = []
        funcs: list[Function] = []
        names: set[str] = set()
        while self.pos < len(self.lines):
            ln = self.lines[self.pos]
            head = ln.peek()
            assert head is not None
            if head.text == "enum":
                e = self.parse_enum(ln)
                if e.name in self.enums:
                    raise ln.error(f"duplicate enum {e.name}", head)
                self.enums[e.name] = e
                enums.append(e)
                self.pos += 1
            elif head.text == "global":
                g = self.parse_global(ln)
                if any(x.name == g.name for x in globals_):
                    raise ln.error(f"duplicate global @{g.name}", head)
                globals_.append(g)
                self.pos += 1
            elif head.text in ("func", "extern"):
                f = self.parse_function()
                if f.name in names:
                    raise IrParseError(f"duplicate function {f.name}", ln.lineno, head.col)
                names.add(f.name)
                funcs.append(f)
            else:
                raise ln.error(f"expected 'enum', 'global', 'extern' or 'func', found {head.text!r}", head)
        module = Module(tuple(enums), tuple(globals_), tuple(funcs))
        check_module(module)
        return module

    def parse_enum(self, ln: _Line) -> IrType:
        ln.expect("enum")
        name = ln.kind("ident", "enum name").text
        ln.expect(":")
        base = self.scalar_type(ln)
        if base.kind != "uint":
            raise ln.error("enum base type must be u8, u16 or u32")
        ln.expect("{")
        consts: list[tuple[str, int]] = []
        while True:
            cn = ln.kind("ident", "enum constant")
            ln.expect("=")
            val = parse_int(ln.kind("num", "integer").text)
            consts.append((cn.text, val))
            if ln.accept("}"):
                break
            ln.expect(",")
        ln.end()
        try:
            return T.enum(name, base.width, consts)
        except IrTypeError as exc:
            raise ln.error(str(exc), None) from None

    def parse_global(self, ln: _Line) -> Global:
        ln.expect("global")
        name = ln.kind("glob", "global name").text[1:]
        ln.expect(":")
        ty = self.scalar_type(ln)
        init = None
        if ln.accept("="):
            init = self.literal(ln, ty)
        ln.end()
        return Global(name, ty, init)

    def literal(self, ln: _Line, ty: IrType) -> int:
        t = ln.next("literal")
        if t.kind == "num":
            v = parse_int(t.text)
        elif t.text in ("true", "false"):
            v = int(t.text == "true")
        elif t.kind == "ident" and "." in t.text:
            v = self.enum_const(ln, t)
        else:
            raise ln.error(f"expected literal, found {t.text!r}", t)
        return fit_literal(v, ty.storage_bits if ty.kind != "bool" else 1, ln, t)

    def enum_const(self, ln: _Line, t: Tok) -> int:
        ename, _, cname = t.text.partition(".")
        e = self.enums.get(ename)
        if e is None:
            raise ln.error(f"unknown enum {ename!r}", t)
        for n, v in e.constants:
            if n == cname:
                return v
        raise ln.error(f"enum {ename} has no constant {cname!r}", t)

    def params(self, ln: _Line) -> list[Param]:
        ln.expect("(")
        out: list[Param] = []
        if ln.accept(")"):
            return out
        while True:
            d = ln.next("parameter direction")
            if d.text not in DIRECTIONS:
                raise ln.error(f"expected in/out/inout, found {d.text!r}", d)
            name = ln.kind("reg", "parameter register").text[1:]
            ln.expect(":")
            ty = self.value_type(ln)
            if d.text != "in" and not ty.is_ptr:
                raise ln.error(f"{d.text} parameter %{name} must have a pointer type", d)
            if any(p.name == name for p in out):
                raise ln.error(f"duplicate parameter %{name}", d)
            out.append(Param(name, ty, d.text))
            if ln.accept(")"):
                return out
            ln.expect(",")

    def parse_function(self) -> Function:
        ln = self.lines[self.pos]
        external = ln.accept("extern")
        ln.expect("func")
        name = ln.kind("ident", "function name").text
        params = self.params(ln)
        ret: IrType | None = None
        if ln.accept("->"):
            t = ln.peek()
            if t is not None and t.text == "void":
                ln.next()
            else:
                ret = self.scalar_type(ln)
        if external:
            ln.end()
            self.pos += 1
            return Function(name, tuple(params), ret, (), (), external=True)
        ln.expect("{")
        ln.end()
        self.pos += 1
        locals_: list[tuple[str, IrType]] = []
        blocks: list[BasicBlock] = []
        label: str | None = None
        label_line: _Line | None = None
        instrs: list[Instr] = []
        while True:
            if self.pos >= len(self.lines):
                raise IrParseError(f"function {name}: missing closing '}}'", ln.lineno, 1)
            cur = self.lines[self.pos]
            self.pos += 1
            head = cur.peek()
            assert head is not None
            if head.text == "}":
                cur.next()
                cur.end()
                if label is not None:
                    raise IrParseError(f"block {label} has no terminator", label_line.lineno if label_line else 0, 1)
                break
            if head.text == "local":
                if blocks or label is not None:
                    raise cur.error("locals must be declared before the first block", head)
                cur.next()
                rname = cur.kind("reg", "local register").text[1:]
                cur.expect(":")
                ty = self.scalar_type(cur, allow_wide=True)
                cur.end()
                locals_.append((rname, ty))
                continue
            if head.kind == "ident" and cur.peek(1) is not None and cur.peek(1).text == ":" and len(cur.toks) == 2:
                if label is not None:
                    raise cur.error(f"block {label} has no terminator", head)
                label, label_line = head.text, cur
                instrs = []
                continue
            if label is None:
                raise cur.error("instruction outside a block (missing label?)", head)
            if head.text in ("jmp", "br", "ret"):
                term = self.terminator(cur)
                blocks.append(BasicBlock(label, tuple(instrs), term))
                label = None
                continue
            instrs.append(self.instr(cur))
        if not blocks:
            raise IrParseError(f"function {name} has no blocks", ln.lineno, 1)
        return Function(name, tuple(params), ret, tuple(locals_), tuple(blocks))

    # -- instructions ------------------------------------------------------

    def operand(self, ln: _Line) -> Operand:
        t = ln.next("operand")
        if t.kind == "reg":
            return Reg(t.text[1:])
        if t.kind == "num":
            return Lit(parse_int(t.text))
        if t.text in ("true", "false"):
            return Lit(int(t.text == "true"))
        if t.kind == "ident" and "." in t.text:
            return Lit(self.enum_const(ln, t))
        raise ln.error(f"expected register or literal, found {t.text!r}", t)

    def terminator(self, ln: _Line):
        head = ln.next()
        if head.text == "jmp":
            target = ln.kind("ident", "label").text
            ln.end()
            return Jmp(target, ln.lineno)
        if head.text == "br":
            cond = ln.kind("reg", "condition register").text[1:]
            ln.expect(",")
            a = ln.kind("ident", "label").text
            ln.expect(",")
            b = ln.kind("ident", "label").text
            ln.end()
            return Br(cond, a, b, ln.lineno)
        value = None if ln.done() else self.operand(ln)
        ln.end()
        return Ret(value, ln.lineno)

    def instr(self, ln: _Line) -> Instr:
        head = ln.peek()
        assert head is not None
        line = ln.lineno
        if head.text == "store":
            ln.next()
            t = ln.next("store target")
            if t.kind == "glob":
                ln.expect(",")
                src = self.operand(ln)
                ln.end()
                return Instr("store_global", None, (src,), target=t.text[1:], line=line)
            if t.kind != "reg":
                raise ln.error("store target must be %ptr, %ptr[index] or @global", t)
            index = None
            if ln.accept("["):
                index = self.operand(ln)
                ln.expect("]")
            ln.expect(",")
            src = self.operand(ln)
            ln.end()
            op = "store_elem" if index is not None else "store_deref"
            return Instr(op, None, (src,), target=t.text[1:], index=index, line=line)
        if head.text == "call":
            ln.next()
            return self.call(ln, None, line)
        dst_tok = ln.kind("reg", "destination register")
        dst = dst_tok.text[1:]
        ln.expect("=")
        opt = ln.kind("ident", "operation")
        op = opt.text
        if op == "call":
            return self.call(ln, dst, line)
        if op == "const":
            ty = self.scalar_type(ln, allow_wide=True)
            v = self.literal(ln, ty)
            ln.end()
            return Instr("const", dst, (Lit(v),), type=ty, line=line)
        if op in UN_OPS:
            a = self.operand(ln)
            ln.end()
            return Instr(op, dst, (a,), line=line)
        if op in BIN_OPS:
            a = self.operand(ln)
            ln.expect(",")
            b = self.operand(ln)
            ln.end()
            return Instr(op, dst, (a, b), line=line)
        if op == "cmp":
            p = ln.kind("ident", "comparison predicate")
            if p.text not in CMP_OPS:
                raise ln.error(f"unknown comparison {p.text!r}", p)
            a = self.operand(ln)
            ln.expect(",")
            b = self.operand(ln)
            ln.end()
            return Instr("cmp", dst, (a, b), pred=p.text, line=line)
        if op == "extract":
            a = self.operand(ln)
            ln.expect(",")
            hi = parse_int(ln.kind("num", "high bit").text)
            ln.expect(",")
            lo = parse_int(ln.kind("num", "low bit").text)
            ln.end()
            return Instr("extract", dst, (a,), hi=hi, lo=lo, line=line)
        if op == "concat":
            a = self.operand(ln)
            ln.expect(",")
            b = self.operand(ln)
            ln.end()
            return Instr("concat", dst, (a, b), line=line)
        if op in ("zext", "sext"):
            a = self.operand(ln)
            ln.expect("to")
            ty = self.scalar_type(ln, allow_wide=True)
            ln.end()
            return Instr(op, dst, (a,), type=ty, line=line)
        if op == "select":
            c = self.operand(ln)
            ln.expect(",")
            a = self.operand(ln)
            ln.expect(",")
            b = self.operand(ln)
            ln.end()
            return Instr("select", dst, (c, a, b), line=line)
        if op == "load":
            t = ln.next("load source")
            if t.kind == "glob":
                ln.end()
                return Instr("load_global", dst, (), target=t.text[1:], line=line)
            if t.kind != "reg":
                raise ln.error("load source must be %ptr, %ptr[index] or @global", t)
            if ln.accept("["):
                index = self.operand(ln)
                ln.expect("]")
                ln.end()
                return Instr("load_elem", dst, (), target=t.text[1:], index=index, line=line)
            ln.end()
            return Instr("load_deref", dst, (), target=t.text[1:], line=line)
        raise ln.error(f"unknown operation {op!r}", opt)

    def call(self, ln: _Line, dst: str | None, line: int) -> Instr:
        callee = ln.kind("ident", "callee name").text
        ln.expect("(")
        args: list[Operand] = []
        if not ln.accept(")"):
            while True:
                args.append(self.operand(ln))
                if ln.accept(")"):
                    break
                ln.expect(",")
        ln.end()
        return Instr("call", dst, tuple(args), target=callee, line=line)


def fit_literal(v: int, width: int, ln: _Line | None = None, tok: Tok | None = None, line: int = 0) -> int:
    if not -(1 << (width - 1)) <= v < (1 << width):
        msg = f"literal {v} does not fit {width} bits"
        if ln is not None:
            raise ln.error(msg, tok)
        raise IrParseError(msg, line, 1)
    return v & ((1 << width) - 1)


# --------------------------------------------------------------------------
# checking


def _err(msg: str, line: int) -> IrParseError:
    return IrParseError(msg, line, 1)


def check_module(m: Module) -> None:
    """Validate every invariant; fills ``Function.reg_types``."""
    names = [f.name for f in m.functions]
    if len(set(names)) != len(names):
        raise IrParseError("duplicate function names")
    gnames = [g.name for g in m.globals]
    if len(set(gnames)) != len(gnames):
        raise IrParseError("duplicate global names")
    for g in m.globals:
        if not g.type.is_memory_scalar:
            raise IrParseError(f"global @{g.name}: unsupported type {g.type}")
        dom = g.type.domain_values()
        if g.init is not None and dom is not None and g.init not in dom:
            raise IrParseError(f"global @{g.name}: initial value {g.init} outside its type domain")
    funcs = {f.name: f for f in m.functions}
    globs = {g.name: g for g in m.globals}
    for f in m.functions:
        for p in f.params:
            if not (p.type.is_ptr or p.type.is_memory_scalar):
                raise IrParseError(f"{f.name}: parameter %{p.name} has unsupported type {p.type}")
        if f.ret is not None and not f.ret.is_memory_scalar:
            raise IrParseError(f"{f.name}: unsupported return type {f.ret}")
        if not f.external:
            _check_function(f, funcs, globs)


def _check_function(f: Function, funcs: dict[str, Function], globs: dict[str, Global]) -> None:
    labels = [b.label for b in f.blocks]
    seen: set[str] = set()
    for b in f.blocks:
        if b.label in seen:
            raise _err(f"{f.name}: duplicate block label {b.label}", b.term.line)
        seen.add(b.label)
    regs: dict[str, IrType] = {}
    ptrs: dict[str, object] = {}
    for p in f.params:
        if p.type.is_ptr:
            ptrs[p.name] = p
        else:
            regs[p.name] = p.type
    local_names: set[str] = set()
    for name, ty in f.locals:
        if name in regs or name in ptrs or name in local_names:
            raise _err(f"{f.name}: local %{name} shadows another register", 0)
        local_names.add(name)
        regs[name] = ty
    reassignable = set(local_names)

    def fail(msg: str, line: int) -> IrParseError:
        return _err(f"{f.name}: {msg}", line)

    for b in f.blocks:
        defined_here: set[str] = set()

        def use(o, line: int, want: IrType | None = None) -> IrType | None:
            if isinstance(o, Lit):
                if want is not None:
                    fit_literal(o.value, want.bits, line=line)
                return want
            if o.name in ptrs:
                raise fail(f"pointer %{o.name} used as a value", line)
            if o.name not in regs:
                raise fail(f"use of undefined register %{o.name}", line)
            if o.name not in reassignable and o.name not in defined_here and o.name not in {
                p.name for p in f.params
            }:
                raise fail(f"register %{o.name} is defined in another block (share values through a local)", line)
            ty = regs[o.name]
            if want is not None and ty.bits != want.bits:
                raise fail(f"%{o.name} has width {ty.bits}, expected {want.bits}", line)
            return ty

        def define(name: str, ty: IrType, line: int) -> None:
            if name in ptrs or name in {p.name for p in f.params}:
                raise fail(f"cannot assign parameter %{name}", line)
            if name in reassignable:
                if regs[name].bits != ty.bits:
                    raise fail(f"local %{name} has width {regs[name].bits}, assigned width {ty.bits}", line)
                return
            if name in defined_here:
                raise fail(f"register %{name} assigned twice in block {b.label}", line)
            if name in regs and regs[name].bits != ty.bits:
                raise fail(f"register %{name} redefined with width {ty.bits} (was {regs[name].bits})", line)
            regs.setdefault(name, ty)
            defined_here.add(name)

        def pair(a, c, line: int) -> IrType:
            ta = use(a, line) if isinstance(a, Reg) else None
            tc = use(c, line) if isinstance(c, Reg) else None
            if ta is None and tc is None:
                raise fail("cannot infer the width of two literal operands", line)
            ty = ta or tc
            use(a, line, ty)
            use(c, line, ty)
            return ty  # type: ignore[return-value]

        for ins in b.instrs:
            line = ins.line
            op = ins.op
            if op == "const":
                define(ins.dst, ins.type, line)
            elif op in UN_OPS:
                if not isinstance(ins.srcs[0], Reg):
                    raise fail(f"{op} needs a register operand", line)
                define(ins.dst, use(ins.srcs[0], line), line)
            elif op in BIN_OPS:
                a, c = ins.srcs
                if op in ("shl", "lshr", "ashr"):
                    if not isinstance(a, Reg):
                        raise fail("shifted value must be a register", line)
                    ta = use(a, line)
                    if isinstance(c, Lit):
                        if not 0 <= c.value < ta.bits:
                            raise fail(f"shift amount {c.value} out of range for width {ta.bits}", line)
                    else:
                        use(c, line)
                    define(ins.dst, ta, line)
                else:
                    define(ins.dst, pair(a, c, line), line)
            elif op == "cmp":
                pair(*ins.srcs, line)
                define(ins.dst, T.BOOL, line)
            elif op == "extract":
                ta = use(ins.srcs[0], line)
                if ta is None:
                    raise fail("extract needs a register operand", line)
                if not 0 <= ins.lo <= ins.hi < ta.bits:
                    raise fail(f"extract [{ins.hi}:{ins.lo}] out of range for width {ta.bits}", line)
                define(ins.dst, T.uint(ins.hi - ins.lo + 1), line)
            elif op == "concat":
                ta = use(ins.srcs[0], line)
                tb = use(ins.srcs[1], line)
                if ta is None or tb is None:
                    raise fail("concat needs register operands", line)
                if ta.bits + tb.bits > T.MAX_REG_WIDTH:
                    raise fail("concat result wider than 64 bits", line)
                define(ins.dst, T.uint(ta.bits + tb.bits), line)
            elif op in ("zext", "sext"):
                ta = use(ins.srcs[0], line)
                if ta is None:
                    raise fail(f"{op} needs a register operand", line)
                if ins.type.bits < ta.bits:
                    raise fail(f"{op} to a narrower type", line)
                define(ins.dst, ins.type, line)
            elif op == "select":
                c, a, d = ins.srcs
                if not isinstance(c, Reg):
                    raise fail("select condition must be a register", line)
                use(c, line, T.BOOL)
                define(ins.dst, pair(a, d, line), line)
            elif op in ("load_deref", "load_elem", "store_deref", "store_elem"):
                p = ptrs.get(ins.target)
                if p is None:
                    raise fail(f"%{ins.target} is not a pointer parameter", line)
                pt = p.type  # type: ignore[attr-defined]
                if op.endswith("elem") != pt.is_array:
                    raise fail(f"%{ins.target} is {'an array' if pt.is_array else 'a scalar'} pointer", line)
                if ins.index is not None:
                    if isinstance(ins.index, Lit):
                        if not 0 <= ins.index.value < pt.length:
                            raise fail(f"index {ins.index.value} out of bounds for %{ins.target}", line)
                    else:
                        use(ins.index, line)
                if op.startswith("load"):
                    define(ins.dst, pt.pointee, line)
                else:
                    if p.direction == "in":  # type: ignore[attr-defined]
                        raise fail(f"store through input pointer %{ins.target}", line)
                    use(ins.srcs[0], line, pt.pointee)
            elif op in ("load_global", "store_global"):
                g = globs.get(ins.target)
                if g is None:
                    raise fail(f"unknown global @{ins.target}", line)
                if op == "load_global":
                    define(ins.dst, g.type, line)
                else:
                    use(ins.srcs[0], line, g.type)
            elif op == "call":
                callee = funcs.get(ins.target)
                if callee is None:
                    raise fail(f"unknown callee {ins.target}", line)
                if len(ins.srcs) != len(callee.params):
                    raise fail(f"{ins.target} takes {len(callee.params)} arguments, got {len(ins.srcs)}", line)
                for arg, cp in zip(ins.srcs, callee.params):
                    if cp.type.is_ptr:
                        if not isinstance(arg, Reg) or arg.name not in ptrs:
                            raise fail(f"argument for %{cp.name} must be a pointer parameter", line)
                        mine = ptrs[arg.name]
                        if mine.type != cp.type:  # type: ignore[attr-defined]
                            raise fail(f"pointer %{arg.name} does not match {cp.type}", line)
                        if mine.direction == "in" and cp.direction != "in":  # type: ignore[attr-defined]
                            raise fail(f"input pointer %{arg.name} passed as {cp.direction}", line)
                        if mine.direction == "out" and cp.direction != "out":  # type: ignore[attr-defined]
                            raise fail(f"output pointer %{arg.name} passed as {cp.direction}", line)
                    else:
                        use(arg, line, cp.type)
                if ins.dst is not None:
                    if callee.ret is None:
                        raise fail(f"{ins.target} returns void", line)
                    define(ins.dst, callee.ret, line)
            else:
                raise fail(f"unknown instruction {op}", line)
        t = b.term
        if isinstance(t, Jmp):
            if t.target not in seen:
                raise fail(f"jump to unknown label {t.target}", t.line)
        elif isinstance(t, Br):
            for target in (t.then, t.other):
                if target not in seen:
                    raise fail(f"branch to unknown label {target}", t.line)
            ty = use(Reg(t.cond), t.line)
            if ty is None or ty.bits != 1:
                raise fail(f"branch condition %{t.cond} must be bool", t.line)
        else:
            if f.ret is None and t.value is not None:
                raise fail("void function returns a value", t.line)
            if f.ret is not None:
                if t.value is None:
                    raise fail("missing return value", t.line)
                use(t.value, t.line, f.ret)
    del labels
    f.reg_types.clear()
    f.reg_types.update(regs)


def parse_module(text: str) -> Module:
    """Parse ``.mir`` text into a checked :class:`Module`."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return _Parser(text).parse()
