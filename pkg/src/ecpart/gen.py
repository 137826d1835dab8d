"""Random MicroIR functions with small, fully enumerable input spaces.

The generator builds structured programs (straight-line arithmetic,
if/else, bounded counting loops with optional early returns, stores
through pointers and to a global) so that the symbolic pipeline can be
cross-checked against brute force on every input.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

# name, parameter list, return type, globals, input assignment count
_PROFILES = (
    ("two_bytes", "in %a: u8, in %b: u8", "u8", (), 1 << 16),
    ("signed_byte", "in %a: i8, in %b: u8", "u8", (), 1 << 16),
    ("halfword", "in %h: u16", "u8", (), 1 << 16),
    ("flags", "in %a: u8, in %f: bool, in %m: mode", "u8", (), 256 * 2 * 3),
    ("buffer", "in %buf: ptr u8[2]", "u16", (), 1 << 16),
    ("inout", "inout %p: ptr u8, in %f: bool", "void", (), 512),
    ("global", "in %a: u8", "u8", ("g",), 1 << 16),
    ("out", "in %a: u8, out %o: ptr u8", "void", (), 256),
    ("byte", "in %a: u8", "u8", (), 256),
)

_ENUM = "enum mode : u8 { OFF = 0, LOW = 1, HIGH = 2 }"
_BINOPS = ("add", "sub", "mul", "and", "or", "xor")
_SHIFTS = ("shl", "lshr", "ashr")
_PREDS = ("eq", "ne", "ult", "ule", "ugt", "uge", "slt", "sle", "sgt", "sge")


@dataclass(frozen=True)
class GeneratedFunction:
    name: str
    profile: str
    text: str
    domain_size: int


class _Builder:
    def __init__(self, rng: random.Random, profile: tuple) -> None:
        self.rng = rng
        self.profile_name, self.params, self.ret, self.globals, _ = profile
        self.blocks: list[tuple[str, list[str]]] = []
        self.cur: list[str] | None = None
        self.tmp = 0
        self.labels = 0
        self.locals = ["v0", "v1"]
        self.loop_var: str | None = None
        self.uses_loop = False

    # -- plumbing ----------------------------------------------------------

    def label(self, hint: str) -> str:
        self.labels += 1
        return f"{hint}{self.labels}"

    def open(self, label: str) -> None:
        self.cur = []
        self.blocks.append((label, self.cur))

    def emit(self, line: str) -> None:
        assert self.cur is not None
        self.cur.append("  " + line)

    def close(self, term: str) -> None:
        self.emit(term)
        self.cur = None

    def fresh(self) -> str:
        self.tmp += 1
        return f"t{self.tmp}"

    # -- values ------------------------------------------------------------

    def leaf(self) -> str:
        """A register holding some 8-bit value available in the current block."""
        rng = self.rng
        choices = ["local"] * 2 + ["input"] * 3
        if self.loop_var:
            choices.append("loop")
        kind = rng.choice(choices)
        if kind == "local":
            return "%" + rng.choice(self.locals)
        if kind == "loop":
            return "%" + self.loop_var  # type: ignore[operator]
        return self.input_value()

    def input_value(self) -> str:
        rng = self.rng
        p = self.profile_name
        t = "%" + self.fresh()
        if p in ("two_bytes", "signed_byte"):
            return rng.choice(["%a", "%b"])
        if p == "halfword":
            hi, lo = rng.choice([(7, 0), (15, 8), (11, 4)])
            self.emit(f"{t} = extract %h, {hi}, {lo}")
            return t
        if p == "flags":
            pick = rng.choice(["a", "a", "f", "m"])
            if pick == "f":
                self.emit(f"{t} = zext %f to u8")
                return t
            return "%" + pick
        if p == "buffer":
            self.emit(f"{t} = load %buf[{rng.randrange(2)}]")
            return t
        if p == "inout":
            if rng.random() < 0.3:
                self.emit(f"{t} = zext %f to u8")
            else:
                self.emit(f"{t} = load %p")
            return t
        if p == "global":
            if rng.random() < 0.5:
                self.emit(f"{t} = load @g")
                return t
            return "%a"
        return "%a"

    def literal(self) -> str:
        return str(self.rng.choice([0, 1, 2, 3, 7, 0x0F, 0x10, 0x40, 0x7F, 0x80, 0xC8, 0xFE, 0xFF,
                                    self.rng.randrange(256)]))

    def expr(self, depth: int) -> str:
        """Emit instructions for a random 8-bit expression; returns its register."""
        rng = self.rng
        if depth <= 0 or rng.random() < 0.25:
            return self.leaf()
        t = "%" + self.fresh()
        form = rng.random()
        if form < 0.45:
            a = self.expr(depth - 1)
            b = self.expr(depth - 1) if rng.random() < 0.5 else self.literal()
            self.emit(f"{t} = {rng.choice(_BINOPS)} {a}, {b}")
        elif form < 0.6:
            a = self.expr(depth - 1)
            self.emit(f"{t} = {rng.choice(_SHIFTS)} {a}, {rng.randrange(1, 8)}")
        elif form < 0.75:
            c = self.cond(depth - 1)
            a = self.expr(depth - 1)
            b = self.literal() if rng.random() < 0.5 else self.expr(depth - 1)
            self.emit(f"{t} = select {c}, {a}, {b}")
        elif form < 0.85:
            a = self.expr(depth - 1)
            self.emit(f"{t} = {rng.choice(('not', 'neg'))} {a}")
        else:
            c = self.cond(depth - 1)
            self.emit(f"{t} = zext {c} to u8")
        return t

    def cond(self, depth: int) -> str:
        t = "%" + self.fresh()
        a = self.expr(depth)
        b = self.literal() if self.rng.random() < 0.6 else self.expr(depth)
        self.emit(f"{t} = cmp {self.rng.choice(_PREDS)} {a}, {b}")
        return t

    # -- statements --------------------------------------------------------

    def assign(self) -> None:
        dst = self.rng.choice(self.locals)
        v = self.expr(2)
        self.emit(f"%{dst} = or {v}, 0")

    def effect(self) -> None:
        """A store to an output location, if the profile has one."""
        p = self.profile_name
        if p == "inout":
            self.emit(f"store %p, {self.expr(2)}")
        elif p == "out":
            self.emit(f"store %o, {self.expr(2)}")
        elif p == "global":
            self.emit(f"store @g, {self.expr(1)}")
        else:
            self.assign()

    def ret_term(self) -> str:
        if self.ret == "void":
            return "ret"
        v = self.expr(2)
        if self.ret == "u16":
            w = "%" + self.fresh()
            self.emit(f"{w} = zext {v} to u16")
            u = "%" + self.fresh()
            if self.rng.random() < 0.5:
                self.emit(f"{u} = add {w}, {self.rng.choice([1, 0x100, 0xFF00])}")
            else:
                self.emit(f"{u} = shl {w}, {self.rng.randrange(0, 9)}")
            return f"ret {u}"
        return f"ret {v}"

    def statements(self, depth: int, allow_loop: bool, allow_ret: bool) -> None:
        for _ in range(self.rng.randint(1, 3)):
            r = self.rng.random()
            if r < 0.35:
                self.assign()
            elif r < 0.5:
                self.effect()
            elif r < 0.8 and depth > 0:
                self.if_else(depth - 1, allow_ret)
            elif allow_loop and not self.uses_loop:
                self.loop()
            else:
                self.assign()

    def if_else(self, depth: int, allow_ret: bool) -> None:
        c = self.cond(1)
        then_l, else_l, join_l = self.label("then"), self.label("else"), self.label("join")
        self.close(f"br {c}, {then_l}, {else_l}")
        for lbl in (then_l, else_l):
            self.open(lbl)
            self.statements(depth, False, allow_ret)
            if allow_ret and self.rng.random() < 0.3:
                self.close(self.ret_term())
            else:
                self.close(f"jmp {join_l}")
        self.open(join_l)

    def loop(self) -> None:
        self.uses_loop = True
        bound = self.rng.randint(1, 4)
        head, body, done = self.label("head"), self.label("body"), self.label("done")
        self.emit("%i = const u8 0")
        self.close(f"jmp {head}")
        self.open(head)
        self.emit(f"%more = cmp ult %i, {bound}")
        self.close(f"br %more, {body}, {done}")
        self.open(body)
        self.loop_var = "i"
        if self.rng.random() < 0.5:
            # early exit, the shape that produces merged loop paths
            c = self.cond(1)
            out, cont = self.label("exit"), self.label("latch")
            self.close(f"br {c}, {out}, {cont}")
            self.open(out)
            self.close(self.ret_term())
            self.open(cont)
        self.statements(0, False, False)
        self.emit("%i = add %i, 1")
        self.close(f"jmp {head}")
        self.loop_var = None
        self.open(done)

    # -- whole function ----------------------------------------------------

    def build(self, name: str) -> str:
        self.open("entry")
        self.emit("%v0 = or " + self.input_value() + ", 0")
        self.emit(f"%v1 = const u8 {self.literal()}")
        self.statements(2, True, True)
        self.close(self.ret_term())
        head = [f"func {name}({self.params}) -> {self.ret} {{", "  local %v0: u8", "  local %v1: u8"]
        if self.uses_loop:
            head.append("  local %i: u8")
        body = []
        for label, lines in self.blocks:
            body.append(f"{label}:")
            body.extend(lines)
        return "\n".join(head + body + ["}"])


def random_function(rng: random.Random, name: str, profile: str | None = None) -> GeneratedFunction:
    prof = next(p for p in _PROFILES if p[0] == profile) if profile else rng.choice(_PROFILES)
    b = _Builder(rng, prof)
    func = b.build(name)
    decls = []
    if prof[0] == "flags":
        decls.append(_ENUM)
    for g in prof[3]:
        decls.append(f"global @{g}: u8 = {rng.randrange(256)}")
    text = "\n".join(decls + ([""] if decls else []) + [func]) + "\n"
    return GeneratedFunction(name, prof[0], text, prof[4])


def random_corpus(seed: int, n: int, max_domain: int = 1 << 16,
                  large: int | None = None) -> list[GeneratedFunction]:
    """``n`` functions, cycling through profiles so every shape is covered.

    ``large`` caps how many functions get an input space above 4096
    assignments; once it is used up only the small profiles remain.
    """
    rng = random.Random(seed)
    shapes = [p for p in _PROFILES if p[4] <= max_domain]
    small = [p for p in shapes if p[4] <= 4096]
    out = []
    big = 0
    for i in range(n):
        prof = shapes[i % len(shapes)]
        if prof[4] > 4096:
            if large is not None and big >= large:
                prof = small[i % len(small)]
            else:
                big += 1
        out.append(random_function(rng, f"gen{i:02d}", prof[0]))
    return out
