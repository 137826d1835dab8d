"""Readability rewrites for class conditions and output expressions.

Rules 1-7 are local rewrites applied bottom-up to a fixpoint; each one is an
exact identity (rule 2 may additionally rely on the input-domain facts passed
in a :class:`Context`).  Rule 8 splits a class on the guards of its
if-then-else terms and works on whole classes, see :func:`split_ite_cases`.

Rewritten expressions are presentation forms: they may contain ``rel`` and
shift nodes that :func:`normalize` would turn back into internal spellings,
so they are never normalized again.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

from ecpart.smt import expr as E
from ecpart.smt.expr import Expr
from ecpart.smt.normalize import normalize
from ecpart.smt.solver import check_equiv, is_sat

ALL_RULES = frozenset(range(1, 9))
MAX_ITERATIONS = 32


class SimplificationError(AssertionError):
    """A rewrite changed the meaning of an expression."""


@dataclass(frozen=True)
class Context:
    """Facts about the inputs that rule 2 may use.

    ``domains`` maps a variable name to its finite set of allowed values and
    ``domain_parts`` holds the conjuncts of the type-domain constraint.
    """

    domains: Mapping[str, tuple[int, ...]] = field(default_factory=dict)
    domain_parts: frozenset[int] = frozenset()
    assumption: Expr | None = None

    @staticmethod
    def from_constraint(domain: Expr | None, domains: Mapping[str, Sequence[int]] | None = None) -> "Context":
        if domain is None:
            return Context(dict(domains or {}))
        d = normalize(domain)
        parts = d.args if d.op == "and" and d.width == 1 else (d,)
        return Context({k: tuple(v) for k, v in (domains or {}).items()}, frozenset(p.id for p in parts), d)


@dataclass
class SimplificationReport:
    counts: dict[int, int] = field(default_factory=lambda: {i: 0 for i in sorted(ALL_RULES)})
    size_before: int = 0
    size_after: int = 0
    iterations: int = 0
    capped: bool = False

    def merge(self, other: "SimplificationReport") -> None:
        for k, v in other.counts.items():
            self.counts[k] = self.counts.get(k, 0) + v
        self.size_before += other.size_before
        self.size_after += other.size_after
        self.iterations = max(self.iterations, other.iterations)
        self.capped = self.capped or other.capped

    def to_dict(self) -> dict:
        return {
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
            "size_before": self.size_before,
            "size_after": self.size_after,
            "capped": self.capped,
        }


Rewrite = Callable[[Expr, Context], "Expr | None"]


@dataclass(frozen=True)
class RewriteRule:
    id: int
    name: str
    rewrite: Rewrite
    enabled: bool = True


def parse_rule_spec(text: str) -> frozenset[int]:
    """``"1,2,5-8"`` to ``{1, 2, 5, 6, 7, 8}``."""
    out: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            lo, hi = int(a), int(b)
            if lo > hi:
                raise ValueError(f"empty rule range {part!r}")
            out.update(range(lo, hi + 1))
        else:
            out.add(int(part))
    bad = out - ALL_RULES
    if bad:
        raise ValueError(f"unknown rule ids: {sorted(bad)}")
    return frozenset(out)


# --------------------------------------------------------------------------
# shape helpers


def _const(e: Expr) -> int | None:
    return e.params[0] if e.op == "const" else None


def _bit(e: Expr) -> tuple[Expr, int, int] | None:
    """``x[i]`` as (x, i, 1) and ``!x[i]`` as (x, i, 0)."""
    if e.width != 1:
        return None
    if e.op == "extract" and e.params[0] == e.params[1]:
        return e.args[0], e.params[0], 1
    if e.op == "not" and e.args[0].op == "extract" and e.args[0].params[0] == e.args[0].params[1]:
        return e.args[0].args[0], e.args[0].params[0], 0
    return None


def _conjuncts(e: Expr) -> tuple[Expr, ...]:
    return e.args if e.op == "and" and e.width == 1 else (e,)


def _disjuncts(e: Expr) -> tuple[Expr, ...]:
    return e.args if e.op == "or" and e.width == 1 else (e,)


def _and(items: Sequence[Expr]) -> Expr:
    if not items:
        return E.TRUE
    if any(x is E.FALSE for x in items):
        return E.FALSE
    items = [x for x in items if x is not E.TRUE]
    if not items:
        return E.TRUE
    return items[0] if len(items) == 1 else E.make("and", items)


def _or(items: Sequence[Expr]) -> Expr:
    if any(x is E.TRUE for x in items):
        return E.TRUE
    items = [x for x in items if x is not E.FALSE]
    if not items:
        return E.FALSE
    return items[0] if len(items) == 1 else E.make("or", items)


def _dedupe(items: Iterable[Expr]) -> list[Expr]:
    seen: set[int] = set()
    out = []
    for x in items:
        if x.id not in seen:
            seen.add(x.id)
            out.append(x)
    return out


_SWAP = {"ugt": "ult", "uge": "ule", "sgt": "slt", "sge": "sle"}
_REL_OP = {("<", False): "ult", ("<=", False): "ule", ("<", True): "slt", ("<=", True): "sle"}


def _cmp(e: Expr) -> tuple[str, Expr, Expr] | None:
    """Read an ordering comparison as (ult|ule|slt|sle, lhs, rhs)."""
    op = e.op
    if op in ("ult", "ule", "slt", "sle"):
        return op, e.args[0], e.args[1]
    if op in _SWAP:
        return _SWAP[op], e.args[1], e.args[0]
    if op == "rel":
        sym, signed = e.params
        a, b = e.args
        if sym in ("<", "<="):
            return _REL_OP[(sym, signed)], a, b
        return _REL_OP[("<" if sym == ">" else "<=", signed)], b, a
    return None


# --------------------------------------------------------------------------
# rule 1: slice-wise constants


def _slice_fact(e: Expr) -> tuple[Expr, int, int, int] | None:
    """(x, hi, lo, value) for ``x[hi:lo] == k`` style conjuncts."""
    b = _bit(e)
    if b is not None:
        x, i, v = b
        return x, i, i, v
    if e.op == "eq":
        a, c = e.args
        if c.op != "const" and a.op == "const":
            a, c = c, a
        k = _const(c)
        if k is None:
            return None
        if a.op == "extract":
            return a.args[0], a.params[0], a.params[1], k
        if a.op in ("var", "concat") or a.width > 1:
            return a, a.width - 1, 0, k
    return None


def rule_slices(e: Expr, ctx: Context) -> Expr | None:
    if not (e.op == "and" and e.width == 1):
        return None
    facts: dict[int, list[tuple[int, tuple[Expr, int, int, int]]]] = {}
    for pos, c in enumerate(e.args):
        f = _slice_fact(c)
        if f is not None:
            facts.setdefault(f[0].id, []).append((pos, f))
    replaced: dict[int, list[Expr]] = {}
    drop: set[int] = set()
    for group in facts.values():
        if len(group) < 2:
            continue
        x = group[0][1][0]
        known: dict[int, int] = {}
        for _, (_, hi, lo, v) in group:
            for i in range(lo, hi + 1):
                bit = (v >> (i - lo)) & 1
                if known.setdefault(i, bit) != bit:
                    return E.FALSE
        runs: list[tuple[int, int]] = []
        for i in sorted(known):
            if runs and runs[-1][0] == i - 1:
                runs[-1] = (i, runs[-1][1])
            else:
                runs.append((i, i))
        if len(runs) >= len(group):
            continue
        new = []
        for hi, lo in runs:
            val = sum(known[i] << (i - lo) for i in range(lo, hi + 1))
            target = x if (hi, lo) == (x.width - 1, 0) else E.extract(x, hi, lo)
            if hi == lo and target is not x:
                new.append(target if val else E.not_(target))
            else:
                new.append(E.eq(target, E.const(val, hi - lo + 1)))
        first = min(p for p, _ in group)
        replaced[first] = new
        drop.update(p for p, _ in group)
    if not replaced:
        return None
    out: list[Expr] = []
    for pos, c in enumerate(e.args):
        if pos in replaced:
            out.extend(replaced[pos])
        elif pos not in drop:
            out.append(c)
    return _and(_dedupe(out))


# --------------------------------------------------------------------------
# rule 2: boolean clean-up and comparison compaction


@dataclass
class _Bounds:
    lo: int
    hi: int
    lo_src: Expr | None = None
    hi_src: Expr | None = None
    excluded: set[int] = field(default_factory=set)
    members: list[int] = field(default_factory=list)


def _bound_of(c: Expr) -> tuple[Expr, str, int, Expr] | None:
    """Unsigned constant bound: (subject, 'lo'|'hi'|'eq'|'ne', value, node)."""
    if c.op == "not" and c.args[0].op == "eq":
        inner = c.args[0]
        a, b = inner.args
        if _const(b) is not None and _const(a) is None:
            return a, "ne", _const(b), c
        if _const(a) is not None and _const(b) is None:
            return b, "ne", _const(a), c
        return None
    if c.op == "eq":
        a, b = c.args
        if _const(b) is not None and _const(a) is None:
            return a, "eq", _const(b), c
        if _const(a) is not None and _const(b) is None:
            return b, "eq", _const(a), c
        return None
    got = _cmp(c)
    if got is None or got[0] not in ("ult", "ule"):
        return None
    op, a, b = got
    if _const(b) is not None and _const(a) is None:
        k = _const(b)
        return (a, "hi", k - 1, c) if op == "ult" else (a, "hi", k, c)
    if _const(a) is not None and _const(b) is None:
        k = _const(a)
        return (b, "lo", k + 1, c) if op == "ult" else (b, "lo", k, c)
    return None


def _compact_and(items: list[Expr]) -> list[Expr] | None:
    groups: dict[int, _Bounds] = {}
    subjects: dict[int, Expr] = {}
    for pos, c in enumerate(items):
        b = _bound_of(c)
        if b is None:
            continue
        x, kind, v, node = b
        g = groups.get(x.id)
        if g is None:
            g = groups[x.id] = _Bounds(0, E.mask(x.width))
            subjects[x.id] = x
        g.members.append(pos)
        if kind == "lo" and v > g.lo:
            g.lo, g.lo_src = v, node
        elif kind == "hi" and v < g.hi:
            g.hi, g.hi_src = v, node
        elif kind == "eq":
            if v > g.lo:
                g.lo, g.lo_src = v, node
            if v < g.hi:
                g.hi, g.hi_src = v, node
            if g.lo == g.hi == v:
                g.lo_src = g.hi_src = node
        elif kind == "ne":
            g.excluded.add(v)
    changed = False
    replace_at: dict[int, list[Expr]] = {}
    drop: set[int] = set()
    for xid, g in groups.items():
        x = subjects[xid]
        lo, hi = g.lo, g.hi
        lo_src, hi_src = g.lo_src, g.hi_src
        while lo <= hi and lo in g.excluded:
            lo += 1
            lo_src = None
        while hi >= lo and hi in g.excluded:
            hi -= 1
            hi_src = None
        if lo > hi:
            return [E.FALSE]
        new: list[Expr] = []
        if lo == hi:
            new.append(lo_src if lo_src is not None and lo_src is hi_src else E.eq(x, E.const(lo, x.width)))
        else:
            if lo > 0:
                new.append(lo_src if lo_src is not None else E.ule(E.const(lo, x.width), x))
            if hi < E.mask(x.width):
                new.append(hi_src if hi_src is not None and hi_src is not lo_src else E.ule(x, E.const(hi, x.width)))
            new.extend(items[p] for p in g.members
                       if _bound_of(items[p])[1] == "ne" and lo < _bound_of(items[p])[2] < hi)
        new = _dedupe(new)
        old = [items[p] for p in g.members]
        if [n.id for n in new] != [o.id for o in _dedupe(old)]:
            changed = True
            replace_at[min(g.members)] = new
            drop.update(g.members)
    if not changed:
        return None
    out: list[Expr] = []
    for pos, c in enumerate(items):
        if pos in replace_at:
            out.extend(replace_at[pos])
        elif pos not in drop:
            out.append(c)
    return out


def _compact_or(items: list[Expr]) -> list[Expr] | None:
    """Among single-bound disjuncts on one subject keep only the weakest."""
    best_hi: dict[int, tuple[int, int]] = {}
    best_lo: dict[int, tuple[int, int]] = {}
    subj: dict[int, Expr] = {}
    for pos, c in enumerate(items):
        b = _bound_of(c)
        if b is None or b[1] not in ("lo", "hi"):
            continue
        x, kind, v, _ = b
        subj[x.id] = x
        if kind == "hi":
            if x.id not in best_hi or v > best_hi[x.id][0]:
                best_hi[x.id] = (v, pos)
        elif x.id not in best_lo or v < best_lo[x.id][0]:
            best_lo[x.id] = (v, pos)
    keep: set[int] = {p for _, p in best_hi.values()} | {p for _, p in best_lo.values()}
    for xid in set(best_hi) & set(best_lo):
        if best_hi[xid][0] + 1 >= best_lo[xid][0]:
            return [E.TRUE]
    out = []
    changed = False
    for pos, c in enumerate(items):
        b = _bound_of(c)
        if b is not None and b[1] in ("lo", "hi") and pos not in keep:
            changed = True
            continue
        out.append(c)
    return out if changed else None


def _cube(e: Expr, subjects: dict[int, Expr]) -> frozenset[tuple[int, int, int]] | None:
    """A conjunction of slice constants as a set of (subject, bit, value) literals."""
    lits: set[tuple[int, int, int]] = set()
    for c in _conjuncts(e):
        f = _slice_fact(c)
        if f is None:
            return None
        x, hi, lo, v = f
        subjects[x.id] = x
        for i in range(lo, hi + 1):
            lit = (x.id, i, (v >> (i - lo)) & 1)
            if (x.id, i, 1 - lit[2]) in lits:
                return None
            lits.add(lit)
    return frozenset(lits)


def _reduce_cubes(items: list[Expr]) -> list[Expr] | None:
    """Absorption and consensus on disjuncts that fix individual bits.

    ``a || (!a && b)`` becomes ``a || b`` and ``a || (a && b)`` becomes ``a``.
    """
    subjects: dict[int, Expr] = {}
    cubes: dict[int, frozenset] = {}
    for pos, d in enumerate(items):
        c = _cube(d, subjects)
        if c is not None:
            cubes[pos] = c
    if len(cubes) < 2:
        return None
    start = dict(cubes)
    changed = True
    while changed:
        changed = False
        keys = sorted(cubes)
        for i in keys:
            if i not in cubes:
                continue
            c1 = cubes[i]
            for j in keys:
                if j == i or j not in cubes or i not in cubes:
                    continue
                c2 = cubes[j]
                if c1 <= c2:
                    del cubes[j]
                    changed = True
                    continue
                for lit in c1:
                    opp = (lit[0], lit[1], 1 - lit[2])
                    if opp in c2 and (c1 - {lit}) <= c2:
                        cubes[j] = c2 - {opp}
                        changed = True
                        break
    if cubes == start:
        return None
    out: list[Expr] = []
    for pos, d in enumerate(items):
        if pos not in start:
            out.append(d)
        elif pos in cubes:
            if cubes[pos] == start[pos]:
                out.append(d)
                continue
            lits = []
            for xid, i, v in sorted(cubes[pos]):
                b = E.extract(subjects[xid], i, i)
                lits.append(b if v else E.not_(b))
            out.append(_and(lits))
    return out


def _negation_of(a: Expr, b: Expr) -> bool:
    return (a.op == "not" and a.args[0] is b) or (b.op == "not" and b.args[0] is a)


def rule_boolean(e: Expr, ctx: Context) -> Expr | None:
    if e.width != 1:
        return None
    op = e.op
    if op == "not" and e.args[0].op == "not":
        return e.args[0].args[0]
    if op == "not" and e.args[0].op == "eq" and ctx.domains:
        a, b = e.args[0].args
        if a.op == "var" and b.op == "const":
            dom = ctx.domains.get(a.params[0])
            if dom is not None and len(dom) == 2 and b.params[0] in dom:
                other = dom[0] if dom[1] == b.params[0] else dom[1]
                return E.eq(a, E.const(other, a.width))
    if op == "and":
        items = list(e.args)
        start = [x.id for x in items]
        flat: list[Expr] = []
        for x in items:
            flat.extend(_conjuncts(x))
        items = _dedupe(x for x in flat if x.id not in ctx.domain_parts and x is not E.TRUE)
        if any(x is E.FALSE for x in items):
            return E.FALSE
        ids = {x.id for x in items}
        if any(x.op == "not" and x.args[0].id in ids for x in items):
            return E.FALSE
        # x && (x || y) -> x
        items = [x for x in items if not (x.op == "or" and any(d.id in ids for d in x.args))]
        compact = _compact_and(items)
        if compact is not None:
            items = compact
        if [x.id for x in items] == start:
            return None
        return _and(items)
    if op == "or":
        items = list(e.args)
        start = [x.id for x in items]
        flat = []
        for x in items:
            flat.extend(_disjuncts(x))
        items = _dedupe(x for x in flat if x is not E.FALSE)
        if any(x is E.TRUE for x in items):
            return E.TRUE
        ids = {x.id for x in items}
        if any(x.op == "not" and x.args[0].id in ids for x in items):
            return E.TRUE
        cubes = _reduce_cubes(items)
        if cubes is not None:
            items = _dedupe(cubes)
            ids = {x.id for x in items}
            if any(x is E.TRUE for x in items):
                return E.TRUE
        # a || (!a && b) -> a || b, and a || (a && b) -> a
        out: list[Expr] = []
        for x in items:
            if x.op == "and":
                cs = [c for c in x.args
                      if not any(_negation_of(c, d) for d in items if d is not x)]
                if any(c.id in ids for c in cs):
                    continue
                x = _and(cs) if len(cs) != len(x.args) else x
            out.append(x)
        compact = _compact_or(out)
        if compact is not None:
            out = compact
        if [x.id for x in out] == start:
            return None
        return _or(out)
    return None


# --------------------------------------------------------------------------
# rule 3: common factors


def _addends(e: Expr) -> list[Expr]:
    if e.op == "add":
        return _addends(e.args[0]) + _addends(e.args[1])
    return [e]


def _factors(t: Expr) -> tuple[int, list[Expr]]:
    """(coefficient, symbolic factors) of a product term."""
    w = t.width
    if t.op == "const":
        return t.params[0], []
    if t.op == "neg":
        c, fs = _factors(t.args[0])
        return (-c) & E.mask(w), fs
    if t.op == "mul":
        c1, f1 = _factors(t.args[0])
        c2, f2 = _factors(t.args[1])
        return (c1 * c2) & E.mask(w), f1 + f2
    return 1, [t]


def _product(c: int, fs: list[Expr], w: int) -> Expr:
    sc = E.to_signed(c, w)
    if not fs:
        return E.const(c, w)
    acc = fs[0]
    for f in fs[1:]:
        acc = E.make("mul", (acc, f))
    if sc == 1:
        return acc
    if sc == -1:
        return E.neg(acc)
    return E.make("mul", (acc, E.const(c, w)))


def _sum(terms: list[Expr]) -> Expr:
    acc = terms[0]
    for t in terms[1:]:
        acc = E.make("add", (acc, t))
    return acc


def rule_factor(e: Expr, ctx: Context) -> Expr | None:
    if e.op != "add" or e.width < 2:
        return None
    w = e.width
    terms = [_factors(t) for t in _addends(e)]
    if len(terms) < 2:
        return None
    g = 0
    for c, _ in terms:
        g = math.gcd(g, abs(E.to_signed(c, w)))
    common: list[Expr] = []
    if all(fs for _, fs in terms):
        rest = [list(fs) for _, fs in terms]
        for f in list(rest[0]):
            if all(any(x is f for x in r) for r in rest):
                common.append(f)
                for r in rest:
                    r.remove(next(x for x in r if x is f))
        if any(not r for r in rest) and common:
            # a whole term would become the constant 1: x*k + x -> x*(k + 1)
            pass
    if g <= 1 and not common:
        return None
    inner_terms = []
    for c, fs in terms:
        fs2 = list(fs)
        for f in common:
            fs2.remove(next(x for x in fs2 if x is f))
        sc = E.to_signed(c, w) // g if g > 1 else E.to_signed(c, w)
        inner_terms.append(_product(sc & E.mask(w), fs2, w))
    inner = _sum(inner_terms)
    factor_parts = list(common)
    if g > 1:
        factor_parts.append(E.const(g, w))
    out = inner
    for f in factor_parts:
        out = E.make("mul", (out, f))
    return out


# --------------------------------------------------------------------------
# rule 4: standard comparison spellings


_REL_SYM = {"ult": ("<", False), "ule": ("<=", False), "slt": ("<", True), "sle": ("<=", True)}
_FLIPPED = {"<": ">", "<=": ">="}


def rule_relations(e: Expr, ctx: Context) -> Expr | None:
    if e.op == "rel":
        return None
    got = _cmp(e)
    if got is None:
        return None
    op, a, b = got
    sym, signed = _REL_SYM[op]
    if a.op == "const" and b.op != "const":
        return E.rel(_FLIPPED[sym], signed, b, a)
    return E.rel(sym, signed, a, b)


# --------------------------------------------------------------------------
# rule 5: at least one bit set


def rule_any_bit(e: Expr, ctx: Context) -> Expr | None:
    if not (e.op == "or" and e.width == 1):
        return None
    bits: dict[int, list[tuple[int, int]]] = {}
    subj: dict[int, Expr] = {}
    for pos, d in enumerate(e.args):
        b = _bit(d)
        if b is not None and b[2] == 1:
            bits.setdefault(b[0].id, []).append((pos, b[1]))
            subj[b[0].id] = b[0]
    hits = {k: v for k, v in bits.items() if len(v) >= 2}
    if not hits:
        return None
    out: list[Expr] = []
    done: set[int] = set()
    for pos, d in enumerate(e.args):
        b = _bit(d)
        if b is not None and b[2] == 1 and b[0].id in hits:
            xid = b[0].id
            if xid in done:
                continue
            done.add(xid)
            x = subj[xid]
            idx = sorted(i for _, i in hits[xid])
            lo, hi = idx[0], idx[-1]
            if idx == list(range(lo, hi + 1)):
                target = x if (lo, hi) == (0, x.width - 1) else E.extract(x, hi, lo)
                out.append(E.not_(E.eq(target, E.const(0, target.width))))
            else:
                m = sum(1 << i for i in idx)
                out.append(E.not_(E.eq(E.make("and", (x, E.const(m, x.width))), E.const(0, x.width))))
            continue
        out.append(d)
    return _or(out)


# --------------------------------------------------------------------------
# rule 6: zero-padding as a shift


def rule_concat_shift(e: Expr, ctx: Context) -> Expr | None:
    if e.op != "concat":
        return None
    x, z = e.args
    if z.op != "const" or z.params[0] != 0 or x.op == "const":
        return None
    w = e.width
    k = z.width
    return E.shl(E.zext(x, w), E.const(k, w))


# --------------------------------------------------------------------------
# rule 7: comparisons on shifted values


def _shifted(s: Expr) -> tuple[Expr, int] | None:
    """(x, k) such that ``s == zext(x) * 2**k`` exactly."""
    w = s.width
    if s.op == "concat" and s.args[1].op == "const" and s.args[1].params[0] == 0:
        return s.args[0], s.args[1].width
    if s.op == "shl" and s.args[1].op == "const":
        k = s.args[1].params[0]
        if not 0 < k < w:
            return None
        y = s.args[0]
        if y.op == "zext" and y.args[0].width + k <= w:
            return y.args[0], k
        return E.extract(y, w - k - 1, 0), k
    return None


def rule_shift_compare(e: Expr, ctx: Context) -> Expr | None:
    if e.op == "eq":
        a, b = e.args
        if _const(a) is not None:
            a, b = b, a
        sh = _shifted(a)
        c = _const(b)
        if sh is None or c is None:
            return None
        x, k = sh
        if c & ((1 << k) - 1) or c >> k > E.mask(x.width):
            return E.FALSE
        return E.eq(x, E.const(c >> k, x.width))
    got = _cmp(e)
    if got is None or got[0] not in ("ult", "ule"):
        return None
    op, a, b = got
    xmax = None
    if _const(b) is not None and (sh := _shifted(a)) is not None:
        x, k = sh
        c = b.params[0]
        xmax = E.mask(x.width)
        if op == "ult":  # x*2^k < c
            t = -(-c // (1 << k))
            if t > xmax:
                return E.TRUE
            return E.FALSE if t == 0 else E.ult(x, E.const(t, x.width))
        t = c >> k  # x*2^k <= c
        return E.TRUE if t >= xmax else E.ule(x, E.const(t, x.width))
    if _const(a) is not None and (sh := _shifted(b)) is not None:
        x, k = sh
        c = a.params[0]
        xmax = E.mask(x.width)
        if op == "ult":  # c < x*2^k
            t = c >> k
            return E.FALSE if t >= xmax else E.ult(E.const(t, x.width), x)
        t = -(-c // (1 << k))  # c <= x*2^k
        if t > xmax:
            return E.FALSE
        return E.TRUE if t == 0 else E.ule(E.const(t, x.width), x)
    return None


RULES: dict[int, RewriteRule] = {
    1: RewriteRule(1, "combine slice constants", rule_slices),
    2: RewriteRule(2, "boolean clean-up", rule_boolean),
    3: RewriteRule(3, "factor common terms", rule_factor),
    4: RewriteRule(4, "standard comparisons", rule_relations),
    5: RewriteRule(5, "any bit set", rule_any_bit),
    6: RewriteRule(6, "zero padding as shift", rule_concat_shift),
    7: RewriteRule(7, "compare unshifted value", rule_shift_compare),
}

# rule 7 reads the concat form that rule 6 replaces; rule 4 runs last because
# the other rules match internal comparison spellings
_ORDER = (1, 2, 5, 3, 7, 6)


def _one_pass(e: Expr, rules: Sequence[RewriteRule], ctx: Context, counts: dict[int, int]) -> Expr:
    done: dict[int, Expr] = {}
    for node in E.postorder(e):
        args = tuple(done[a.id] for a in node.args)
        cur = node if all(x is y for x, y in zip(args, node.args)) else E.make(node.op, args, node.params)
        for _ in range(8):
            for r in rules:
                out = r.rewrite(cur, ctx)
                if out is not None and out is not cur:
                    if out.width != cur.width:
                        raise SimplificationError(f"rule {r.id} changed width of {cur}")
                    counts[r.id] = counts.get(r.id, 0) + 1
                    cur = out
                    break
            else:
                break
        done[node.id] = cur
    return done[e.id]


def _active(rules: Iterable[int] | None, custom: Sequence[RewriteRule] | None = None) -> tuple[list[RewriteRule], list[RewriteRule]]:
    ids = ALL_RULES if rules is None else frozenset(rules)
    pool = {r.id: r for r in RULES.values()}
    if custom:
        pool.update({r.id: r for r in custom})
    main = [pool[i] for i in _ORDER if i in ids and i in pool and pool[i].enabled]
    extra = [r for i, r in sorted(pool.items()) if i not in _ORDER and i != 4 and i in ids and r.enabled]
    final = [pool[4]] if 4 in ids and pool[4].enabled else []
    return main + extra, final


def simplify(e: Expr, rules: Iterable[int] | None = None, ctx: Context | None = None, *,
             verify: bool = True, custom: Sequence[RewriteRule] | None = None,
             max_iterations: int = MAX_ITERATIONS) -> tuple[Expr, SimplificationReport]:
    """Rewrite ``e`` to a fixpoint of the selected rules (8 is class-level and ignored here).

    With ``verify`` the result is checked against the input with the solver
    (under the context's domain assumption) and a mismatch raises
    :class:`SimplificationError`.
    """
    ctx = ctx or Context()
    rep = SimplificationReport()
    main, final = _active(rules, custom)
    src = normalize(e)
    rep.size_before = E.size(e)
    cur = src
    for it in range(max_iterations):
        rep.iterations = it + 1
        nxt = _one_pass(cur, main, ctx, rep.counts)
        if nxt is cur:
            break
        cur = nxt
    else:
        rep.capped = True
    if final:
        cur = _one_pass(cur, final, ctx, rep.counts)
    rep.size_after = E.size(cur)
    if verify and cur is not e:
        assume = [ctx.assumption] if ctx.assumption is not None else []
        if not check_equiv(e, cur, assume):
            raise SimplificationError(f"simplification changed meaning of {e}")
    return cur, rep


# --------------------------------------------------------------------------
# rule 8: one class per if-then-else guard


def _first_guard(exprs: Iterable[Expr]) -> Expr | None:
    for e in exprs:
        for n in E.postorder(e):
            if n.op == "ite":
                return n.args[0]
    return None


def split_ite_cases(ec, max_cases: int = 256):
    """Split a class on each if-then-else guard in its condition or outputs.

    Returns classes whose conditions are pairwise disjoint and together equal
    the original; guards that cannot hold within the class are dropped.  The
    class is returned unchanged in a one-element list when it has no ite.
    """
    from ecpart.ecp import EquivalenceClass  # noqa: F401  (type of ec)

    work = [ec]
    out = []
    while work:
        cur = work.pop()
        exprs = [cur.condition, *cur.snapshot.expressions()]
        g = _first_guard(exprs)
        if g is None:
            out.append(cur)
            continue
        if len(out) + len(work) >= max_cases:
            raise SimplificationError(f"ite splitting exceeded {max_cases} cases")
        for flag in (True, False):
            lit = E.TRUE if flag else E.FALSE
            guard = g if flag else E.not_(g)

            def sub(x: Expr, lit: Expr = lit) -> Expr:
                return normalize(E.replace_node(x, g, lit))

            cond = normalize(E.and_(sub(cur.condition), guard))
            if cond is E.FALSE or not is_sat(cond).sat:
                continue
            snap = cur.snapshot.map_exprs(sub)
            if snap.guarded:
                snap = replace(snap, guarded=tuple((gd, s) for gd, s in snap.guarded if gd is not E.FALSE))
            work.append(replace(cur, condition=cond, snapshot=snap,
                                cases=tuple(normalize(E.and_(sub(c), guard)) for c in cur.cases),
                                representatives=[]))
    out.reverse()
    return out


# --------------------------------------------------------------------------
# rule verification harness


@dataclass
class Violation:
    rule: int
    before: Expr
    after: Expr

    def to_dict(self) -> dict:
        from ecpart.smt.text import to_sexpr

        return {"rule": self.rule, "before": to_sexpr(self.before), "after": to_sexpr(self.after)}


@dataclass
class VerificationReport:
    checked: int = 0
    applied: dict[int, int] = field(default_factory=dict)
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _enum_equal(a: Expr, b: Expr) -> bool | None:
    """Equality by exhaustive enumeration, or None when the space is too large."""
    from ecpart.smt.vector import MAX_GRID_BITS, equal_everywhere

    names = E.free_vars(a, b)
    if sum(names.values()) > min(MAX_GRID_BITS, 16) or max([a.width, b.width, *names.values()]) > 64:
        return None
    if any(n.width > 64 for n in E.postorder(a, b)):
        return None
    return equal_everywhere(a, b)


def verify_rules(corpus: Iterable[Expr], rules: Iterable[int] | None = None, *,
                 custom: Sequence[RewriteRule] | None = None, enumerate_small: bool = True) -> VerificationReport:
    """Apply each rule in one bottom-up pass to every corpus entry and check equivalence.

    Every rewrite is checked with the solver; when the variable space is at
    most 2**16 assignments it is also checked by enumeration.
    """
    rep = VerificationReport()
    main, final = _active(rules, custom)
    for e in corpus:
        e = normalize(e)
        for r in main + final:
            counts: dict[int, int] = {}
            out = _one_pass(e, [r], Context(), counts)
            rep.checked += 1
            if out is e:
                continue
            rep.applied[r.id] = rep.applied.get(r.id, 0) + 1
            ok = check_equiv(e, out)
            if ok and enumerate_small:
                ok = _enum_equal(e, out) is not False
            if not ok:
                rep.violations.append(Violation(r.id, e, out))
    return rep


def verify_split(ec) -> bool:
    """Rule 8 contract: split conditions are disjoint and their union is the original."""
    parts = split_ite_cases(ec)
    for i, a in enumerate(parts):
        for b in parts[i + 1:]:
            if is_sat(E.and_(a.condition, b.condition)).sat:
                return False
    union = E.or_(*[p.condition for p in parts]) if len(parts) > 1 else parts[0].condition
    return check_equiv(union, ec.condition)


# --------------------------------------------------------------------------
# random corpus generation (shared with the tests and the acceptance suite)


def random_expr(rng: random.Random, width: int = 8, depth: int = 3, nvars: int = 2, boolean: bool = False) -> Expr:
    """A random expression over ``nvars`` variables ``a``, ``b``, ...  of ``width`` bits."""
    names = "abcd"[:nvars]

    def term(w: int, d: int) -> Expr:
        if d <= 0 or rng.random() < 0.2:
            if rng.random() < 0.6:
                v = E.var(rng.choice(names), width)
                if w == width:
                    return v
                if w < width:
                    lo = rng.randrange(0, width - w + 1)
                    return E.extract(v, lo + w - 1, lo)
                return E.zext(v, w)
            return E.const(rng.randrange(1 << w), w)
        k = rng.randrange(11)
        if k < 3:
            return E.make(rng.choice(["add", "sub", "mul"]), (term(w, d - 1), term(w, d - 1)))
        if k < 5:
            return E.make(rng.choice(["and", "or", "xor"]), (term(w, d - 1), term(w, d - 1)))
        if k == 5 and w > 1:
            s = rng.randrange(1, w)
            return E.make(rng.choice(["shl", "lshr", "ashr"]), (term(w, d - 1), E.const(s, w)))
        if k == 6 and w > 2:
            lo_w = rng.randrange(1, w)
            return E.concat(term(w - lo_w, d - 1), term(lo_w, d - 1) if rng.random() < 0.5 else E.const(0, lo_w))
        if k == 7:
            return E.ite(cond(d - 1), term(w, d - 1), term(w, d - 1))
        if k == 8:
            return E.neg(term(w, d - 1))
        if k == 9 and w > 1:
            return E.mul(term(w, d - 1), E.const(rng.choice([2, 3, 4, 6, 8]), w))
        return term(w, 0)

    def cond(d: int) -> Expr:
        k = rng.randrange(8)
        if d <= 0 or k < 4:
            a = term(width, max(d - 1, 0))
            b = E.const(rng.randrange(1 << width), width) if rng.random() < 0.6 else term(width, max(d - 1, 0))
            return E.make(rng.choice(["ult", "ule", "ugt", "uge", "slt", "sle", "eq", "ne"]), (a, b))
        if k == 4:
            v = E.var(rng.choice(names), width)
            i = rng.randrange(width)
            return E.extract(v, i, i)
        if k == 5:
            return E.not_(cond(d - 1))
        if k == 6:
            return E.and_(*[cond(d - 1) for _ in range(rng.randrange(2, 4))])
        return E.or_(*[cond(d - 1) for _ in range(rng.randrange(2, 4))])

    return cond(depth) if boolean else term(width, depth)


def rule_corpus(rule: int, rng: random.Random, width: int = 8) -> Expr:
    """A random expression shaped so that ``rule`` is likely to fire."""
    a = E.var("a", width)
    b = E.var("b", width)
    if rule == 1:
        cuts = sorted(rng.sample(range(1, width), rng.randrange(1, min(4, width - 1) + 1)))
        bounds = [0, *cuts, width]
        parts = []
        for lo, hi in zip(bounds, bounds[1:]):
            if rng.random() < 0.85:
                parts.append(E.eq(E.extract(a, hi - 1, lo), E.const(rng.randrange(1 << (hi - lo)), hi - lo)))
        parts.append(random_expr(rng, width, 1, boolean=True))
        rng.shuffle(parts)
        return E.and_(*parts)
    if rule == 2:
        x = rng.choice([a, b, E.add(a, b)])
        ks = [rng.randrange(1 << width) for _ in range(rng.randrange(2, 5))]
        cmps = [E.make(rng.choice(["ult", "ule", "ugt", "uge", "eq", "ne"]), (x, E.const(k, width))) for k in ks]
        cmps.append(random_expr(rng, width, 1, boolean=True))
        if rng.random() < 0.5:
            cmps.append(E.not_(E.not_(cmps[0])))
        return (E.and_ if rng.random() < 0.6 else E.or_)(*cmps)
    if rule == 3:
        k = E.const(rng.choice([2, 3, 4, 6, -2 & E.mask(width)]), width)
        terms = [E.mul(rng.choice([a, b, E.mul(a, b)]), E.mul(k, E.const(rng.randrange(1, 4), width)))
                 for _ in range(rng.randrange(2, 4))]
        acc = terms[0]
        for t in terms[1:]:
            acc = E.add(acc, t)
        return E.eq(acc, E.const(rng.randrange(1 << width), width))
    if rule == 4:
        return random_expr(rng, width, 2, boolean=True)
    if rule == 5:
        bits = sorted(rng.sample(range(width), rng.randrange(2, width + 1)))
        parts = [E.eq(E.extract(a, i, i), E.const(1, 1)) for i in bits]
        if rng.random() < 0.5:
            parts.append(random_expr(rng, width, 1, boolean=True))
        rng.shuffle(parts)
        return E.or_(*parts)
    if rule == 6:
        k = rng.randrange(1, width)
        x = E.extract(a, rng.randrange(0, width), 0) if rng.random() < 0.5 else a
        c = E.concat(x, E.const(0, k))
        other = E.zext(b, c.width) if c.width >= width else E.extract(b, c.width - 1, 0)
        if rng.random() < 0.5:
            return E.ult(c, E.const(rng.randrange(1 << c.width), c.width))
        return E.eq(E.add(c, other), E.const(rng.randrange(1 << c.width), c.width))
    if rule == 7:
        k = rng.randrange(1, width)
        if rng.random() < 0.5:
            s = E.concat(a, E.const(0, k))
        else:
            s = E.shl(a, E.const(k, width))
        c = E.const(rng.randrange(1 << s.width), s.width)
        op = rng.choice(["ult", "ule", "ugt", "uge", "eq"])
        return E.make(op, (s, c) if rng.random() < 0.5 else (c, s))
    raise ValueError(f"no corpus for rule {rule}")
