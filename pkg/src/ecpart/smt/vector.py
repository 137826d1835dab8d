"""Evaluate an expression on every assignment of its variables at once.

Used as the enumeration side of solver cross-checks.  Values are held in
``uint64`` arrays, so every node must be at most 64 bits wide.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ecpart.smt import expr as E
from ecpart.smt.expr import Expr

MAX_GRID_BITS = 22
_U = np.uint64


def grid(names: Mapping[str, int]) -> dict[str, np.ndarray]:
    """Columns enumerating every assignment; the first name varies fastest."""
    total = sum(names.values())
    if total > MAX_GRID_BITS:
        raise ValueError(f"{total} input bits exceed the enumeration limit {MAX_GRID_BITS}")
    idx = np.arange(1 << total, dtype=_U)
    out: dict[str, np.ndarray] = {}
    shift = 0
    for n in sorted(names):
        w = names[n]
        out[n] = (idx >> _U(shift)) & _U((1 << w) - 1)
        shift += w
    return out


def _m(w: int) -> np.uint64:
    return _U((1 << w) - 1) if w < 64 else _U(0xFFFFFFFFFFFFFFFF)


def _signed(v: np.ndarray, w: int) -> np.ndarray:
    s = v.astype(np.int64)
    if w < 64:
        sign = _U(1 << (w - 1))
        s = np.where((v & sign) != 0, s - np.int64(1 << (w - 1)) - np.int64(1 << (w - 1)), s)
    return s


def evaluate_grid(e: Expr, cols: Mapping[str, np.ndarray], n: int | None = None) -> np.ndarray:
    """Values of ``e`` for each row of ``cols`` (unsigned, masked to ``e.width``)."""
    if n is None:
        n = len(next(iter(cols.values()))) if cols else 1
    vals: dict[int, np.ndarray] = {}
    with np.errstate(over="ignore"):
        for node in E.postorder(e):
            w = node.width
            if w > 64:
                raise ValueError("vector evaluation supports widths up to 64")
            a = [vals[x.id] for x in node.args]
            op = node.op
            m = _m(w)
            if op == "var":
                r = np.asarray(cols[node.params[0]], dtype=_U)
            elif op == "const":
                r = np.full(n, node.params[0], dtype=_U)
            elif op == "not":
                r = ~a[0] & m
            elif op == "neg":
                r = (_U(0) - a[0]) & m
            elif op == "and":
                r = a[0]
                for x in a[1:]:
                    r = r & x
            elif op == "or":
                r = a[0]
                for x in a[1:]:
                    r = r | x
            elif op == "xor":
                r = a[0]
                for x in a[1:]:
                    r = r ^ x
            elif op == "add":
                r = (a[0] + a[1]) & m
            elif op == "sub":
                r = (a[0] - a[1]) & m
            elif op == "mul":
                r = (a[0] * a[1]) & m
            elif op in ("shl", "lshr", "ashr"):
                amt = a[1]
                big = amt >= _U(w)
                sh = np.where(big, _U(0), amt)
                if op == "shl":
                    r = np.where(big, _U(0), (a[0] << sh) & m)
                elif op == "lshr":
                    r = np.where(big, _U(0), a[0] >> sh)
                else:
                    s = _signed(a[0], w)
                    sh2 = np.minimum(amt, _U(w - 1)).astype(np.int64)
                    r = (s >> sh2).astype(_U) & m
            elif op == "extract":
                hi, lo = node.params
                r = (a[0] >> _U(lo)) & _m(hi - lo + 1)
            elif op == "concat":
                r = (a[0] << _U(node.args[1].width)) | a[1]
            elif op == "zext":
                r = a[0]
            elif op == "sext":
                r = _signed(a[0], node.args[0].width).astype(_U) & m
            elif op == "ite":
                r = np.where(a[0] != 0, a[1], a[2])
            else:
                r = _compare(node, a)
            vals[node.id] = r
    return vals[e.id]


def _compare(node: Expr, a: list[np.ndarray]) -> np.ndarray:
    op = node.op
    w = node.args[0].width
    x, y = a
    if op == "rel":
        sym, signed = node.params
        op = {("<", False): "ult", ("<=", False): "ule", (">", False): "ugt", (">=", False): "uge",
              ("<", True): "slt", ("<=", True): "sle", (">", True): "sgt", (">=", True): "sge"}[(sym, signed)]
    if op in ("slt", "sle", "sgt", "sge"):
        x, y = _signed(x, w), _signed(y, w)
        op = "u" + op[1:]
    r = {
        "eq": x == y, "ne": x != y, "ult": x < y, "ule": x <= y, "ugt": x > y, "uge": x >= y,
    }[op]
    return r.astype(_U)


def equal_everywhere(a: Expr, b: Expr, assume: Expr | None = None) -> bool:
    """True iff ``a`` and ``b`` agree on every assignment (satisfying ``assume``)."""
    names = E.free_vars(a, b, *( [assume] if assume is not None else []))
    cols = grid(names)
    n = 1 << sum(names.values())
    va = evaluate_grid(a, cols, n)
    vb = evaluate_grid(b, cols, n)
    diff = va != vb
    if assume is not None:
        diff &= evaluate_grid(assume, cols, n) != 0
    return not bool(diff.any())


def satisfiable(cond: Expr) -> bool:
    names = E.free_vars(cond)
    cols = grid(names)
    return bool((evaluate_grid(cond, cols, 1 << sum(names.values())) != 0).any())
