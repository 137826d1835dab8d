"""Canonical normalization of expressions.

Constant folding, identity elimination, canonical operand order and a small
set of width-reducing rewrites (shifts by constants become slices, low masks
become zero-extended slices, comparisons see through zero extension).  The
result is semantically equal to the input and ``normalize`` is idempotent.
"""

from __future__ import annotations

from ecpart.smt import expr as E
from ecpart.smt.expr import Expr

_cache: dict[int, Expr] = {}


def normalize(e: Expr) -> Expr:
    hit = _cache.get(e.id)
    if hit is not None:
        return hit
    done: dict[int, Expr] = {}
    for node in E.postorder(e):
        got = _cache.get(node.id)
        if got is None:
            if node.op in ("var", "const"):
                got = node
            else:
                got = build(node.op, tuple(done[a.id] for a in node.args), node.params)
            _cache[node.id] = got
        done[node.id] = got
    return done[e.id]


def clear_cache() -> None:
    _cache.clear()


def is_ones(e: Expr) -> bool:
    return e.op == "const" and e.params[0] == E.mask(e.width)


def is_zero(e: Expr) -> bool:
    return e.op == "const" and e.params[0] == 0


def _c(v: int, w: int) -> Expr:
    return E.const(v, w)


def _ite_const(e: Expr) -> bool:
    return e.op == "ite" and e.args[1].op == "const" and e.args[2].op == "const"


def build(op: str, args: tuple[Expr, ...], params: tuple = ()) -> Expr:
    """Smart constructor: ``args`` must already be normalized."""
    if args and all(a.op == "const" for a in args):
        raw = E.make(op, args, params)
        return _c(
            E.apply_op(op, raw.width, params, [a.params[0] for a in args], [a.width for a in args]),
            raw.width,
        )
    # push operations with constant operands into both arms of a constant ite
    if op != "ite" and args:
        ites = [i for i, a in enumerate(args) if _ite_const(a)]
        if len(ites) == 1 and all(a.op == "const" for j, a in enumerate(args) if j != ites[0]):
            i = ites[0]
            c, k1, k2 = args[i].args
            left = build(op, args[:i] + (k1,) + args[i + 1:], params)
            right = build(op, args[:i] + (k2,) + args[i + 1:], params)
            return build("ite", (c, left, right))
    rule = _RULES.get(op)
    if rule is not None:
        out = rule(args, params)
        if out is not None:
            return out
    return E.make(op, args, params)


# --------------------------------------------------------------------------
# bitwise


def _flatten(op: str, args: tuple[Expr, ...]) -> list[Expr]:
    out: list[Expr] = []
    for a in args:
        if a.op == op:
            out.extend(a.args)
        else:
            out.append(a)
    return out


def _low_mask_bits(v: int) -> int | None:
    if v and (v & (v + 1)) == 0:
        return v.bit_length()
    return None


def _and(args, params):
    w = args[0].width
    items = _flatten("and", args)
    acc = E.mask(w)
    rest: dict[int, Expr] = {}
    for a in items:
        if a.op == "const":
            acc &= a.params[0]
        else:
            rest.setdefault(a.id, a)
    if acc == 0:
        return _c(0, w)
    terms = sorted(rest.values(), key=E.sort_key)
    ids = {t.id for t in terms}
    for t in terms:
        if t.op == "not" and t.args[0].id in ids:
            return _c(0, w)
    if not terms:
        return _c(acc, w)
    if acc != E.mask(w):
        if len(terms) == 1:
            m = _low_mask_bits(acc)
            if m is not None:
                return build("zext", (build("extract", (terms[0],), (m - 1, 0)),), (w,))
        terms.append(_c(acc, w))
    if len(terms) == 1:
        return terms[0]
    return E.make("and", terms)


def _or(args, params):
    w = args[0].width
    items = _flatten("or", args)
    acc = 0
    rest: dict[int, Expr] = {}
    for a in items:
        if a.op == "const":
            acc |= a.params[0]
        else:
            rest.setdefault(a.id, a)
    if acc == E.mask(w):
        return _c(acc, w)
    terms = sorted(rest.values(), key=E.sort_key)
    ids = {t.id for t in terms}
    for t in terms:
        if t.op == "not" and t.args[0].id in ids:
            return _c(E.mask(w), w)
    if acc:
        terms.append(_c(acc, w))
    if not terms:
        return _c(0, w)
    if len(terms) == 1:
        return terms[0]
    return E.make("or", terms)


def _xor(args, params):
    w = args[0].width
    items = _flatten("xor", args)
    acc = 0
    parity: dict[int, tuple[Expr, int]] = {}
    for a in items:
        if a.op == "const":
            acc ^= a.params[0]
        else:
            node, n = parity.get(a.id, (a, 0))
            parity[a.id] = (node, n + 1)
    terms = sorted((node for node, n in parity.values() if n % 2), key=E.sort_key)
    if not terms:
        return _c(acc, w)
    if acc == E.mask(w):
        inner = terms[0] if len(terms) == 1 else E.make("xor", terms)
        return build("not", (inner,))
    if acc:
        terms.append(_c(acc, w))
    if len(terms) == 1:
        return terms[0]
    return E.make("xor", terms)


_FLIP = {"ult": "ule", "ule": "ult", "slt": "sle", "sle": "slt"}


def _not(args, params):
    (a,) = args
    if a.op == "not":
        return a.args[0]
    if a.width == 1 and a.op in _FLIP:
        x, y = a.args
        return build(_FLIP[a.op], (y, x))
    return None


# --------------------------------------------------------------------------
# arithmetic


MAX_POLY_TERMS = 64

Poly = dict[tuple[int, ...], int]


def _poly_of(e: Expr, atoms: dict[int, Expr]) -> Poly:
    """Read a normalized arithmetic tree back as a polynomial over atoms."""
    m = E.mask(e.width)
    if e.op == "const":
        return {(): e.params[0]} if e.params[0] else {}
    if e.op == "add":
        out = dict(_poly_of(e.args[0], atoms))
        for k, c in _poly_of(e.args[1], atoms).items():
            out[k] = (out.get(k, 0) + c) & m
        return {k: c for k, c in out.items() if c}
    if e.op == "neg":
        return {k: (-c) & m for k, c in _poly_of(e.args[0], atoms).items()}
    if e.op == "mul" and e.args[1].op == "const":
        f = e.args[1].params[0]
        return {k: (c * f) & m for k, c in _poly_of(e.args[0], atoms).items() if (c * f) & m}
    if e.op == "mul":
        factors, todo = [], [e]
        while todo:
            f = todo.pop()
            if f.op == "mul" and f.args[1].op != "const":
                todo.extend(f.args)
            else:
                factors.append(f)
        if all(f.op not in ("add", "neg", "const") for f in factors):
            for f in factors:
                atoms[f.id] = f
            return {tuple(sorted(f.id for f in factors)): 1}
    atoms[e.id] = e
    return {(e.id,): 1}


def _poly_mul(p: Poly, q: Poly, m: int) -> Poly | None:
    if len(p) * len(q) > MAX_POLY_TERMS:
        return None
    out: Poly = {}
    for k1, c1 in p.items():
        for k2, c2 in q.items():
            k = tuple(sorted(k1 + k2))
            out[k] = (out.get(k, 0) + c1 * c2) & m
    return {k: c for k, c in out.items() if c}


def _poly_expr(p: Poly, atoms: dict[int, Expr], width: int) -> Expr:
    m = E.mask(width)

    def mono(key: tuple[int, ...]) -> Expr:
        fs = sorted((atoms[i] for i in key), key=E.sort_key)
        acc = fs[0]
        for f in fs[1:]:
            acc = E.make("mul", (acc, f))
        return acc

    keys = sorted((k for k in p if k), key=lambda k: (len(k), [atoms[i].skey for i in k]))
    const = p.get((), 0)
    terms = []
    for key in keys:
        c = p[key]
        t = mono(key)
        if len(key) == 1 and _ite_const(t):
            # scale (and, when alone, offset) the arms of a constant-armed ite
            off = const if len(keys) == 1 else 0
            const -= off
            k1, k2 = t.args[1].params[0], t.args[2].params[0]
            terms.append(build("ite", (t.args[0], _c(k1 * c + off, width), _c(k2 * c + off, width))))
            continue
        if c == m and width > 1:
            t = E.make("neg", (t,))
        elif c != 1:
            t = E.make("mul", (t, E.const(c, width)))
        terms.append(t)
    terms.sort(key=E.sort_key)
    if const & m:
        terms.append(E.const(const, width))
    if not terms:
        return E.const(0, width)
    acc = terms[0]
    for t in terms[1:]:
        acc = E.make("add", (acc, t))
    return acc


def _arith(op):
    def rule(args, params):
        w = args[0].width
        m = E.mask(w)
        atoms: dict[int, Expr] = {}
        p = _poly_of(args[0], atoms)
        if op == "neg":
            out = {k: (-c) & m for k, c in p.items()}
        else:
            q = _poly_of(args[1], atoms)
            if op == "add":
                out = dict(p)
                for k, c in q.items():
                    out[k] = (out.get(k, 0) + c) & m
            elif op == "sub":
                out = dict(p)
                for k, c in q.items():
                    out[k] = (out.get(k, 0) - c) & m
            else:
                out = _poly_mul(p, q, m)
                if out is None:
                    a, b = sorted(args, key=E.sort_key)
                    return E.make("mul", (a, b))
            out = {k: c for k, c in out.items() if c}
        return _poly_expr(out, atoms, w)

    return rule


def _shift(op):
    def rule(args, params):
        a, s = args
        if s.op != "const":
            return None
        k, w = s.params[0], a.width
        if k == 0:
            return a
        if op == "ashr":
            k = min(k, w - 1)
            return build("sext", (build("extract", (a,), (w - 1, k)),), (w,))
        if k >= w:
            return _c(0, w)
        if op == "shl":
            return build("concat", (build("extract", (a,), (w - k - 1, 0)), _c(0, k)))
        return build("zext", (build("extract", (a,), (w - 1, k)),), (w,))

    return rule


# --------------------------------------------------------------------------
# slicing and extension


def _extract(args, params):
    (x,) = args
    hi, lo = params
    w = hi - lo + 1
    if lo == 0 and hi == x.width - 1:
        return x
    op = x.op
    if op == "extract":
        base = x.params[1]
        return build("extract", x.args, (base + hi, base + lo))
    if op == "concat":
        top, bot = x.args
        wl = bot.width
        if hi < wl:
            return build("extract", (bot,), (hi, lo))
        if lo >= wl:
            return build("extract", (top,), (hi - wl, lo - wl))
        return build("concat", (build("extract", (top,), (hi - wl, 0)), build("extract", (bot,), (wl - 1, lo))))
    if op == "zext":
        (y,) = x.args
        wy = y.width
        if hi < wy:
            return build("extract", (y,), (hi, lo))
        if lo >= wy:
            return _c(0, w)
        return build("zext", (build("extract", (y,), (wy - 1, lo)),), (w,))
    if op == "sext":
        (y,) = x.args
        wy = y.width
        if hi < wy:
            return build("extract", (y,), (hi, lo))
        start = min(lo, wy - 1)
        return build("sext", (build("extract", (y,), (wy - 1, start)),), (w,))
    if op in ("and", "or", "xor"):
        return build(op, tuple(build("extract", (a,), (hi, lo)) for a in x.args))
    if op == "not":
        return build("not", (build("extract", x.args, (hi, lo)),))
    if lo == 0 and op in ("add", "sub", "mul"):
        return build(op, tuple(build("extract", (a,), (hi, 0)) for a in x.args))
    if lo == 0 and op == "neg":
        return build("neg", (build("extract", x.args, (hi, 0)),))
    return None


def _concat(args, params):
    a, b = args
    if is_zero(a):
        return build("zext", (b,), (a.width + b.width,))
    if a.op == "concat":
        return build("concat", (a.args[0], build("concat", (a.args[1], b))))
    tail = b.args[0] if b.op == "concat" else b
    merged = None
    if a.op == "extract" and tail.op == "extract" and a.args[0] is tail.args[0] and a.params[1] == tail.params[0] + 1:
        merged = build("extract", a.args, (a.params[0], tail.params[1]))
    elif a.op == "const" and tail.op == "const":
        merged = _c((a.params[0] << tail.width) | tail.params[0], a.width + tail.width)
    if merged is not None:
        if b.op == "concat":
            return build("concat", (merged, b.args[1]))
        return merged
    return None


def _zext(args, params):
    (x,) = args
    (w,) = params
    if w == x.width:
        return x
    if x.op == "zext":
        return build("zext", x.args, (w,))
    if x.width == 1:
        return build("ite", (x, _c(1, w), _c(0, w)))
    return None


def _sext(args, params):
    (x,) = args
    (w,) = params
    if w == x.width:
        return x
    if x.op == "sext":
        return build("sext", x.args, (w,))
    if x.op == "zext":
        return build("zext", x.args, (w,))
    if x.width == 1:
        return build("ite", (x, _c(E.mask(w), w), _c(0, w)))
    return None


def _ite(args, params):
    c, a, b = args
    if c.op == "const":
        return a if c.params[0] else b
    if a is b:
        return a
    if c.op == "not":
        return build("ite", (c.args[0], b, a))
    if a.width == 1 and a.op == "const" and b.op == "const":
        return c if a.params[0] else build("not", (c,))
    if a.op == "ite" and a.args[0] is c:
        return build("ite", (c, a.args[1], b))
    if b.op == "ite" and b.args[0] is c:
        return build("ite", (c, a, b.args[2]))
    return None


# --------------------------------------------------------------------------
# comparisons


def _eq(args, params):
    a, b = sorted(args, key=E.sort_key)
    w = a.width
    if a is b:
        return E.TRUE
    if w == 1 and b.op == "const":
        return a if b.params[0] else build("not", (a,))
    if b.op == "const":
        c = b.params[0]
        if a.op == "zext":
            y = a.args[0]
            return build("eq", (y, _c(c, y.width))) if c >> y.width == 0 else E.FALSE
        if a.op == "sext":
            y = a.args[0]
            s = E.to_signed(c, w)
            if -(1 << (y.width - 1)) <= s < (1 << (y.width - 1)):
                return build("eq", (y, _c(s, y.width)))
            return E.FALSE
        if a.op == "add" and a.args[1].op == "const":
            return build("eq", (a.args[0], _c(c - a.args[1].params[0], w)))
        if a.op == "xor" and len(a.args) == 2 and a.args[1].op == "const":
            return build("eq", (a.args[0], _c(c ^ a.args[1].params[0], w)))
        if a.op == "not":
            return build("eq", (a.args[0], _c(~c, w)))
        if a.op == "neg":
            return build("eq", (a.args[0], _c(-c, w)))
        if a.op == "concat":
            top, bot = a.args
            if bot.op == "const":
                if c & E.mask(bot.width) != bot.params[0]:
                    return E.FALSE
                return build("eq", (top, _c(c >> bot.width, top.width)))
            if top.op == "const":
                if c >> bot.width != top.params[0]:
                    return E.FALSE
                return build("eq", (bot, _c(c, bot.width)))
    if a.op == "zext" and b.op == "zext" and a.args[0].width == b.args[0].width:
        return build("eq", (a.args[0], b.args[0]))
    return E.make("eq", (a, b))


def _ne(args, params):
    return build("not", (build("eq", args),))


def _ult(args, params):
    a, b = args
    w = a.width
    top = E.mask(w)
    if a is b or is_zero(b) or is_ones(a):
        return E.FALSE
    if is_zero(a):
        return build("not", (build("eq", (b, _c(0, w))),))
    if b.op == "const" and b.params[0] == 1:
        return build("eq", (a, _c(0, w)))
    if is_ones(b):
        return build("not", (build("eq", (a, b)),))
    if a.op == "zext" and b.op == "const":
        y = a.args[0]
        if b.params[0] >> y.width:
            return E.TRUE
        return build("ult", (y, _c(b.params[0], y.width)))
    if b.op == "zext" and a.op == "const":
        y = b.args[0]
        if a.params[0] >= E.mask(y.width):
            return E.FALSE
        return build("ult", (_c(a.params[0], y.width), y))
    if a.op == "zext" and b.op == "zext" and a.args[0].width == b.args[0].width:
        return build("ult", (a.args[0], b.args[0]))
    del top
    return None


def _ule(args, params):
    a, b = args
    w = a.width
    if a is b or is_zero(a) or is_ones(b):
        return E.TRUE
    if is_zero(b):
        return build("eq", (a, b))
    if is_ones(a):
        return build("eq", (b, a))
    if a.op == "zext" and b.op == "const":
        y = a.args[0]
        if b.params[0] >= E.mask(y.width):
            return E.TRUE
        return build("ule", (y, _c(b.params[0], y.width)))
    if b.op == "zext" and a.op == "const":
        y = b.args[0]
        if a.params[0] >> y.width:
            return E.FALSE
        return build("ule", (_c(a.params[0], y.width), y))
    if a.op == "zext" and b.op == "zext" and a.args[0].width == b.args[0].width:
        return build("ule", (a.args[0], b.args[0]))
    del w
    return None


def _slt(args, params):
    a, b = args
    if a is b:
        return E.FALSE
    if a.op == "sext" and b.op == "sext" and a.args[0].width == b.args[0].width:
        return build("slt", (a.args[0], b.args[0]))
    return None


def _sle(args, params):
    a, b = args
    if a is b:
        return E.TRUE
    if a.op == "sext" and b.op == "sext" and a.args[0].width == b.args[0].width:
        return build("sle", (a.args[0], b.args[0]))
    return None


def _swap(target):
    def rule(args, params):
        return build(target, (args[1], args[0]))

    return rule


def _rel(args, params):
    sym, signed = params
    a, b = args
    lt, le = ("slt", "sle") if signed else ("ult", "ule")
    if sym == "<":
        return build(lt, (a, b))
    if sym == "<=":
        return build(le, (a, b))
    if sym == ">":
        return build(lt, (b, a))
    return build(le, (b, a))


_RULES = {
    "and": _and,
    "or": _or,
    "xor": _xor,
    "not": _not,
    "neg": _arith("neg"),
    "add": _arith("add"),
    "sub": _arith("sub"),
    "mul": _arith("mul"),
    "shl": _shift("shl"),
    "lshr": _shift("lshr"),
    "ashr": _shift("ashr"),
    "extract": _extract,
    "concat": _concat,
    "zext": _zext,
    "sext": _sext,
    "ite": _ite,
    "eq": _eq,
    "ne": _ne,
    "ult": _ult,
    "ule": _ule,
    "ugt": _swap("ult"),
    "uge": _swap("ule"),
    "slt": _slt,
    "sle": _sle,
    "sgt": _swap("slt"),
    "sge": _swap("sle"),
    "rel": _rel,
}
