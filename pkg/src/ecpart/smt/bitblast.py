"""Tseitin bit-blasting of expressions into CNF for :class:`SatSolver`."""

from __future__ import annotations

from ecpart.smt import expr as E
from ecpart.smt.expr import Expr
from ecpart.smt.sat import SatSolver  # noqa: F401  (or any object with the same surface)

Bits = list[int]


class BitBlaster:
    def __init__(self, solver: SatSolver) -> None:
        self.s = solver
        self.T = solver.new_var()
        solver.add_clause([self.T])
        self.F = -self.T
        self.cache: dict[int, Bits] = {}
        self.gates: dict[tuple, int] = {}
        self.var_bits: dict[str, Bits] = {}

    # -- gates -------------------------------------------------------------

    def _new(self) -> int:
        return self.s.new_var()

    def AND(self, a: int, b: int) -> int:
        T, F = self.T, self.F
        if a == F or b == F or a == -b:
            return F
        if a == T:
            return b
        if b == T or a == b:
            return a
        key = ("and", min(a, b), max(a, b))
        g = self.gates.get(key)
        if g is None:
            g = self._new()
            self.s.add_clause([-g, a])
            self.s.add_clause([-g, b])
            self.s.add_clause([g, -a, -b])
            self.gates[key] = g
        return g

    def OR(self, a: int, b: int) -> int:
        return -self.AND(-a, -b)

    def XOR(self, a: int, b: int) -> int:
        T, F = self.T, self.F
        if a == F:
            return b
        if b == F:
            return a
        if a == T:
            return -b
        if b == T:
            return -a
        if a == b:
            return F
        if a == -b:
            return T
        sign = 1
        if a < 0:
            a, sign = -a, -sign
        if b < 0:
            b, sign = -b, -sign
        key = ("xor", min(a, b), max(a, b))
        g = self.gates.get(key)
        if g is None:
            g = self._new()
            self.s.add_clause([-g, a, b])
            self.s.add_clause([-g, -a, -b])
            self.s.add_clause([g, -a, b])
            self.s.add_clause([g, a, -b])
            self.gates[key] = g
        return g * sign

    def MUX(self, c: int, t: int, e: int) -> int:
        T, F = self.T, self.F
        if c == T or t == e:
            return t
        if c == F:
            return e
        if t == T and e == F:
            return c
        if t == F and e == T:
            return -c
        key = ("mux", c, t, e)
        g = self.gates.get(key)
        if g is None:
            g = self._new()
            self.s.add_clause([-c, -t, g])
            self.s.add_clause([-c, t, -g])
            self.s.add_clause([c, -e, g])
            self.s.add_clause([c, e, -g])
            self.gates[key] = g
        return g

    def AND_N(self, lits: list[int]) -> int:
        out = self.T
        for lit in lits:
            out = self.AND(out, lit)
        return out

    def OR_N(self, lits: list[int]) -> int:
        out = self.F
        for lit in lits:
            out = self.OR(out, lit)
        return out

    def MAJ(self, a: int, b: int, c: int) -> int:
        return self.OR(self.AND(a, b), self.AND(c, self.XOR(a, b)))

    # -- words -------------------------------------------------------------

    def const_bits(self, value: int, width: int) -> Bits:
        return [self.T if (value >> i) & 1 else self.F for i in range(width)]

    def adder(self, a: Bits, b: Bits, cin: int) -> tuple[Bits, int]:
        out = []
        c = cin
        for x, y in zip(a, b):
            t = self.XOR(x, y)
            out.append(self.XOR(t, c))
            c = self.OR(self.AND(x, y), self.AND(c, t))
        return out, c

    def ult_bits(self, a: Bits, b: Bits) -> int:
        # a < b  iff  no carry out of a + ~b + 1
        c = self.T
        for x, y in zip(a, b):
            c = self.MAJ(x, -y, c)
        return -c

    def mul_bits(self, a: Bits, b: Bits) -> Bits:
        w = len(a)
        acc = [self.F] * w
        for i in range(w):
            if b[i] == self.F:
                continue
            partial = [self.F] * i + [self.AND(a[j], b[i]) for j in range(w - i)]
            acc, _ = self.adder(acc, partial, self.F)
        return acc

    def shift_bits(self, op: str, a: Bits, amt: Bits) -> Bits:
        w = len(a)
        fill = a[-1] if op == "ashr" else self.F
        cur = list(a)
        stages = max(1, (w - 1).bit_length())
        for k in range(min(stages, len(amt))):
            step = 1 << k
            sel = amt[k]
            if op == "shl":
                shifted = [self.F] * min(step, w) + cur[: max(0, w - step)]
            else:
                shifted = cur[step:] + [fill] * min(step, w)
            cur = [self.MUX(sel, s, c) for s, c in zip(shifted, cur)]
        # amounts >= w saturate
        big = self.ult_bits(amt, self.const_bits(w, len(amt))) if w < (1 << len(amt)) else self.T
        return [self.MUX(big, c, fill) for c in cur]

    # -- expressions -------------------------------------------------------

    def blast(self, root: Expr) -> Bits:
        for n in E.postorder(root):
            if n.id in self.cache:
                continue
            self.cache[n.id] = self._node(n)
        return self.cache[root.id]

    def _node(self, n: Expr) -> Bits:
        op = n.op
        args = [self.cache[a.id] for a in n.args]
        if op == "const":
            return self.const_bits(n.params[0], n.width)
        if op == "var":
            name = n.params[0]
            bits = self.var_bits.get(name)
            if bits is None:
                bits = [self._new() for _ in range(n.width)]
                self.var_bits[name] = bits
            return bits
        if op == "not":
            return [-x for x in args[0]]
        if op in ("and", "or", "xor"):
            fn = {"and": self.AND, "or": self.OR, "xor": self.XOR}[op]
            out = args[0]
            for other in args[1:]:
                out = [fn(x, y) for x, y in zip(out, other)]
            return out
        if op == "add":
            return self.adder(args[0], args[1], self.F)[0]
        if op == "sub":
            return self.adder(args[0], [-y for y in args[1]], self.T)[0]
        if op == "neg":
            return self.adder([-x for x in args[0]], self.const_bits(0, n.width), self.T)[0]
        if op == "mul":
            return self.mul_bits(args[0], args[1])
        if op in E.SHIFTS:
            return self.shift_bits(op, args[0], args[1])
        if op == "extract":
            hi, lo = n.params
            return args[0][lo: hi + 1]
        if op == "concat":
            return args[1] + args[0]
        if op == "zext":
            return args[0] + [self.F] * (n.width - len(args[0]))
        if op == "sext":
            return args[0] + [args[0][-1]] * (n.width - len(args[0]))
        if op == "ite":
            c = args[0][0]
            return [self.MUX(c, t, e) for t, e in zip(args[1], args[2])]
        if op == "rel":
            sym, signed = n.params
            key = {("<", False): "ult", ("<=", False): "ule", (">", False): "ugt", (">=", False): "uge",
                   ("<", True): "slt", ("<=", True): "sle", (">", True): "sgt", (">=", True): "sge"}[(sym, signed)]
            return [self._cmp(key, args[0], args[1])]
        if op in E.INTERNAL_CMP:
            return [self._cmp(op, args[0], args[1])]
        raise E.ExprError(f"cannot bit-blast {op}")

    def _cmp(self, op: str, a: Bits, b: Bits) -> int:
        if op in ("eq", "ne"):
            r = self.AND_N([-self.XOR(x, y) for x, y in zip(a, b)])
            return r if op == "eq" else -r
        if op[0] == "s":
            a = a[:-1] + [-a[-1]]
            b = b[:-1] + [-b[-1]]
            op = "u" + op[1:]
        if op == "ult":
            return self.ult_bits(a, b)
        if op == "ugt":
            return self.ult_bits(b, a)
        if op == "ule":
            return -self.ult_bits(b, a)
        return -self.ult_bits(a, b)  # uge
