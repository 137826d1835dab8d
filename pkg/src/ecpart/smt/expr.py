"""Hash-consed bit-vector expressions.

Every node is interned: two structurally equal expressions are the same
Python object, so ``a is b`` is structural equality and ``id`` is a stable
per-process node identity.  Booleans are width-1 bit-vectors.
"""

from __future__ import annotations

import hashlib
import threading
from typing import Callable, Iterable, Mapping

# operation families
BITWISE = frozenset({"and", "or", "xor"})
ARITH = frozenset({"add", "sub", "mul"})
SHIFTS = frozenset({"shl", "lshr", "ashr"})
INTERNAL_CMP = frozenset({"eq", "ne", "ult", "ule", "ugt", "uge", "slt", "sle", "sgt", "sge"})
COMMUTATIVE = frozenset({"and", "or", "xor", "add", "mul", "eq", "ne"})
REL_SYMS = ("<", "<=", ">", ">=")

MAX_WIDTH = 128


class ExprError(ValueError):
    pass


class Expr:
    """One interned DAG node.  Never construct directly; use the helpers below."""

    __slots__ = ("op", "width", "args", "params", "id", "skey", "__weakref__")

    op: str
    width: int
    args: tuple["Expr", ...]
    params: tuple
    id: int
    skey: int

    def __repr__(self) -> str:
        from ecpart.smt.text import to_infix

        return f"<Expr {to_infix(self)} :{self.width}>"

    def __reduce__(self):
        from ecpart.smt.text import parse_sexpr, to_sexpr

        return (parse_sexpr, (to_sexpr(self),))

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    @property
    def is_var(self) -> bool:
        return self.op == "var"

    @property
    def value(self) -> int:
        if self.op != "const":
            raise ExprError(f"not a constant: {self.op}")
        return self.params[0]

    @property
    def name(self) -> str:
        if self.op != "var":
            raise ExprError(f"not a variable: {self.op}")
        return self.params[0]


_lock = threading.Lock()
_table: dict[tuple, Expr] = {}
_counter = 0


def _digest(op: str, width: int, params: tuple, args: tuple[Expr, ...]) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(f"{op}|{width}|{params!r}|".encode())
    for a in args:
        h.update(a.skey.to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


def _intern(op: str, width: int, args: tuple[Expr, ...], params: tuple) -> Expr:
    global _counter
    key = (op, width, params, tuple(a.id for a in args))
    node = _table.get(key)
    if node is not None:
        return node
    with _lock:
        node = _table.get(key)
        if node is None:
            node = object.__new__(Expr)
            node.op = op
            node.width = width
            node.args = args
            node.params = params
            node.id = _counter
            node.skey = _digest(op, width, params, args)
            _counter += 1
            _table[key] = node
    return node


def mask(width: int) -> int:
    return (1 << width) - 1


def to_signed(value: int, width: int) -> int:
    value &= mask(width)
    return value - (1 << width) if value >> (width - 1) else value


def sort_key(e: Expr) -> tuple[int, int]:
    """Canonical operand order: non-constants first, then structural digest."""
    return (1 if e.op == "const" else 0, e.skey)


# --------------------------------------------------------------------------
# raw constructors (width checked, no rewriting)


def var(name: str, width: int) -> Expr:
    if not 1 <= width <= MAX_WIDTH:
        raise ExprError(f"bad width {width} for {name}")
    return _intern("var", width, (), (name,))


def const(value: int, width: int) -> Expr:
    if not 1 <= width <= MAX_WIDTH:
        raise ExprError(f"bad width {width}")
    return _intern("const", width, (), (value & mask(width),))


TRUE = const(1, 1)
FALSE = const(0, 1)


def boolean(flag: bool) -> Expr:
    return TRUE if flag else FALSE


def _coerce(a: Expr | int, b: Expr | int) -> tuple[Expr, Expr]:
    if isinstance(a, int) and isinstance(b, int):
        raise ExprError("at least one operand must be an expression")
    if isinstance(a, int):
        a = const(a, b.width)  # type: ignore[union-attr]
    if isinstance(b, int):
        b = const(b, a.width)
    if a.width != b.width:
        raise ExprError(f"width mismatch {a.width} vs {b.width}")
    return a, b


def make(op: str, args: Iterable[Expr], params: tuple = ()) -> Expr:
    """Build a node of kind ``op`` after validating operand widths."""
    args = tuple(args)
    if op in ("var", "const"):
        raise ExprError("use var()/const()")
    if op in ("not", "neg"):
        _arity(op, args, 1)
        width = args[0].width
    elif op in BITWISE:
        if not args:
            raise ExprError(f"{op} needs operands")
        if len(args) == 1:
            return args[0]
        _same_width(op, args)
        width = args[0].width
    elif op in ARITH or op in SHIFTS:
        _arity(op, args, 2)
        _same_width(op, args)
        width = args[0].width
    elif op == "extract":
        _arity(op, args, 1)
        hi, lo = params
        if not 0 <= lo <= hi < args[0].width:
            raise ExprError(f"extract [{hi}:{lo}] out of range for width {args[0].width}")
        width = hi - lo + 1
    elif op == "concat":
        _arity(op, args, 2)
        width = args[0].width + args[1].width
    elif op in ("zext", "sext"):
        _arity(op, args, 1)
        (width,) = params
        if width < args[0].width or width > MAX_WIDTH:
            raise ExprError(f"{op} to {width} from {args[0].width}")
    elif op == "ite":
        _arity(op, args, 3)
        if args[0].width != 1:
            raise ExprError("ite condition must be boolean")
        if args[1].width != args[2].width:
            raise ExprError("ite arms differ in width")
        width = args[1].width
    elif op in INTERNAL_CMP:
        _arity(op, args, 2)
        _same_width(op, args)
        width = 1
    elif op == "rel":
        _arity(op, args, 2)
        _same_width(op, args)
        sym, signed = params
        if sym not in REL_SYMS or not isinstance(signed, bool):
            raise ExprError(f"bad relation {params!r}")
        width = 1
    else:
        raise ExprError(f"unknown op {op!r}")
    if width > MAX_WIDTH:
        raise ExprError(f"width {width} exceeds {MAX_WIDTH}")
    return _intern(op, width, args, tuple(params))


def _arity(op: str, args: tuple, n: int) -> None:
    if len(args) != n:
        raise ExprError(f"{op} takes {n} operands, got {len(args)}")


def _same_width(op: str, args: tuple[Expr, ...]) -> None:
    w = args[0].width
    for a in args[1:]:
        if a.width != w:
            raise ExprError(f"{op}: width mismatch {w} vs {a.width}")


def _bin(op: str) -> Callable[[Expr | int, Expr | int], Expr]:
    def build(a: Expr | int, b: Expr | int) -> Expr:
        a, b = _coerce(a, b)
        return make(op, (a, b))

    build.__name__ = op
    return build


add = _bin("add")
sub = _bin("sub")
mul = _bin("mul")
xor = _bin("xor")
shl = _bin("shl")
lshr = _bin("lshr")
ashr = _bin("ashr")
eq = _bin("eq")
ne = _bin("ne")
ult = _bin("ult")
ule = _bin("ule")
ugt = _bin("ugt")
uge = _bin("uge")
slt = _bin("slt")
sle = _bin("sle")
sgt = _bin("sgt")
sge = _bin("sge")


def and_(*args: Expr) -> Expr:
    if not args:
        return TRUE
    return make("and", args)


def or_(*args: Expr) -> Expr:
    if not args:
        return FALSE
    return make("or", args)


def not_(a: Expr) -> Expr:
    return make("not", (a,))


def neg(a: Expr) -> Expr:
    return make("neg", (a,))


def extract(x: Expr, hi: int, lo: int) -> Expr:
    return make("extract", (x,), (hi, lo))


def concat(hi: Expr, lo: Expr) -> Expr:
    return make("concat", (hi, lo))


def zext(x: Expr, width: int) -> Expr:
    if width == x.width:
        return x
    return make("zext", (x,), (width,))


def sext(x: Expr, width: int) -> Expr:
    if width == x.width:
        return x
    return make("sext", (x,), (width,))


def ite(c: Expr, a: Expr | int, b: Expr | int) -> Expr:
    a, b = _coerce(a, b)
    return make("ite", (c, a, b))


def rel(sym: str, signed: bool, a: Expr | int, b: Expr | int) -> Expr:
    a, b = _coerce(a, b)
    return make("rel", (a, b), (sym, signed))


def implies(a: Expr, b: Expr) -> Expr:
    return or_(not_(a), b)


# --------------------------------------------------------------------------
# traversal


def postorder(*roots: Expr) -> list[Expr]:
    """All distinct nodes reachable from ``roots``, children before parents."""
    seen: set[int] = set()
    out: list[Expr] = []
    stack: list[tuple[Expr, bool]] = [(r, False) for r in reversed(roots)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            out.append(node)
            continue
        if node.id in seen:
            continue
        seen.add(node.id)
        stack.append((node, True))
        for child in reversed(node.args):
            if child.id not in seen:
                stack.append((child, False))
    return out


def size(e: Expr) -> int:
    return len(postorder(e))


def free_vars(*roots: Expr) -> dict[str, int]:
    """Map of variable name to width over all roots."""
    out: dict[str, int] = {}
    for node in postorder(*roots):
        if node.op == "var":
            out[node.params[0]] = node.width
    return out


def contains_op(e: Expr, op: str) -> bool:
    return any(n.op == op for n in postorder(e))


def rebuild(e: Expr, fn: Callable[[Expr, tuple[Expr, ...]], Expr | None]) -> Expr:
    """Bottom-up rewrite.  ``fn(node, new_args)`` returns a replacement or None."""
    done: dict[int, Expr] = {}
    for node in postorder(e):
        new_args = tuple(done[a.id] for a in node.args)
        repl = fn(node, new_args)
        if repl is None:
            if node.op in ("var", "const") or all(x is y for x, y in zip(new_args, node.args)):
                repl = node
            else:
                repl = make(node.op, new_args, node.params)
        done[node.id] = repl
    return done[e.id]


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by name.  Replacement widths must match."""

    def fn(node: Expr, args: tuple[Expr, ...]) -> Expr | None:
        if node.op == "var" and node.params[0] in mapping:
            repl = mapping[node.params[0]]
            if repl.width != node.width:
                raise ExprError(f"substitution for {node.params[0]} has width {repl.width}, want {node.width}")
            return repl
        return None

    return rebuild(e, fn)


def replace_node(e: Expr, target: Expr, repl: Expr) -> Expr:
    return rebuild(e, lambda n, a: repl if n is target else None)


# --------------------------------------------------------------------------
# concrete semantics


def apply_op(op: str, width: int, params: tuple, vals: list[int], widths: list[int]) -> int:
    """Concrete result of one operation over unsigned operand values."""
    m = mask(width)
    if op == "not":
        return ~vals[0] & m
    if op == "neg":
        return -vals[0] & m
    if op == "and":
        r = m
        for v in vals:
            r &= v
        return r
    if op == "or":
        r = 0
        for v in vals:
            r |= v
        return r
    if op == "xor":
        r = 0
        for v in vals:
            r ^= v
        return r
    if op == "add":
        return (vals[0] + vals[1]) & m
    if op == "sub":
        return (vals[0] - vals[1]) & m
    if op == "mul":
        return (vals[0] * vals[1]) & m
    if op == "shl":
        return 0 if vals[1] >= width else (vals[0] << vals[1]) & m
    if op == "lshr":
        return 0 if vals[1] >= width else vals[0] >> vals[1]
    if op == "ashr":
        s = to_signed(vals[0], width)
        return (s >> min(vals[1], width)) & m
    if op == "extract":
        hi, lo = params
        return (vals[0] >> lo) & mask(hi - lo + 1)
    if op == "concat":
        return (vals[0] << widths[1]) | vals[1]
    if op == "zext":
        return vals[0]
    if op == "sext":
        return to_signed(vals[0], widths[0]) & m
    if op == "ite":
        return vals[1] if vals[0] else vals[2]
    a, b = vals[0], vals[1] if len(vals) > 1 else 0
    w = widths[0]
    if op == "eq":
        return int(a == b)
    if op == "ne":
        return int(a != b)
    if op == "ult":
        return int(a < b)
    if op == "ule":
        return int(a <= b)
    if op == "ugt":
        return int(a > b)
    if op == "uge":
        return int(a >= b)
    if op in ("slt", "sle", "sgt", "sge"):
        sa, sb = to_signed(a, w), to_signed(b, w)
        return int({"slt": sa < sb, "sle": sa <= sb, "sgt": sa > sb, "sge": sa >= sb}[op])
    if op == "rel":
        sym, signed = params
        if signed:
            a, b = to_signed(a, w), to_signed(b, w)
        return int({"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[sym])
    raise ExprError(f"cannot evaluate op {op!r}")


def evaluate(e: Expr, assignment: Mapping[str, int]) -> int:
    """Value of ``e`` (modulo 2^width) under a complete variable assignment."""
    vals: dict[int, int] = {}
    for node in postorder(e):
        if node.op == "const":
            vals[node.id] = node.params[0]
        elif node.op == "var":
            name = node.params[0]
            if name not in assignment:
                raise ExprError(f"missing variable {name!r}")
            vals[node.id] = assignment[name] & mask(node.width)
        else:
            vals[node.id] = apply_op(
                node.op,
                node.width,
                node.params,
                [vals[a.id] for a in node.args],
                [a.width for a in node.args],
            )
    return vals[e.id]


eval_expr = evaluate
