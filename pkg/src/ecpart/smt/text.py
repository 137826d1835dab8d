"""Textual forms of expressions.

``to_sexpr``/``parse_sexpr`` are the lossless machine format used in JSON
documents.  ``to_infix`` is the human form used in reports.  ``to_smtlib``
dumps a satisfiability query in SMT-LIB v2 for external cross-checking.
"""

from __future__ import annotations

import re
from typing import Mapping

from ecpart.smt import expr as E
from ecpart.smt.expr import Expr, ExprError

_NAME_RE = re.compile(r"^[A-Za-z_@*$.][A-Za-z0-9_@*$.\[\]]*$")
_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")

_PARAM_OPS = {"extract": 2, "zext": 1, "sext": 1, "rel": 2}


def to_sexpr(e: Expr) -> str:
    out: dict[int, str] = {}
    for n in E.postorder(e):
        if n.op == "var":
            out[n.id] = f"(var {n.params[0]} {n.width})"
        elif n.op == "const":
            out[n.id] = f"(const {n.params[0]:#x} {n.width})"
        else:
            parts = [n.op]
            if n.op == "rel":
                sym, signed = n.params
                parts += [sym, "s" if signed else "u"]
            else:
                parts += [str(p) for p in n.params]
            parts += [out[a.id] for a in n.args]
            out[n.id] = "(" + " ".join(parts) + ")"
    return out[e.id]


def parse_sexpr(text: str) -> Expr:
    """Inverse of :func:`to_sexpr`.  Raises :class:`ExprError` on malformed input."""
    tokens = _TOKEN_RE.findall(text)
    if not tokens:
        raise ExprError("empty expression")
    stack: list[list] = []
    result: Expr | None = None
    for i, tok in enumerate(tokens):
        if result is not None:
            raise ExprError(f"trailing tokens after expression: {tok!r}")
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise ExprError("unbalanced ')'")
            node = _build(stack.pop())
            if stack:
                stack[-1].append(node)
            else:
                result = node
        else:
            if not stack:
                raise ExprError(f"unexpected atom {tok!r}")
            stack[-1].append(tok)
    if stack or result is None:
        raise ExprError("unbalanced '('")
    return result


def _int(tok) -> int:
    if not isinstance(tok, str):
        raise ExprError("expected integer literal")
    try:
        return int(tok, 0)
    except ValueError:
        raise ExprError(f"bad integer literal {tok!r}") from None


def _build(items: list) -> Expr:
    if not items or not isinstance(items[0], str):
        raise ExprError("expected operator")
    op = items[0]
    rest = items[1:]
    if op == "var":
        if len(rest) != 2 or not isinstance(rest[0], str) or not _NAME_RE.match(rest[0]):
            raise ExprError(f"bad var form {rest!r}")
        return E.var(rest[0], _int(rest[1]))
    if op == "const":
        if len(rest) != 2:
            raise ExprError("bad const form")
        return E.const(_int(rest[0]), _int(rest[1]))
    nparams = _PARAM_OPS.get(op, 0)
    raw_params, args = rest[:nparams], rest[nparams:]
    if any(not isinstance(a, Expr) for a in args) or any(isinstance(p, Expr) for p in raw_params):
        raise ExprError(f"malformed operands for {op}")
    if op == "rel":
        sym, sign = raw_params
        if sign not in ("u", "s"):
            raise ExprError(f"bad signedness {sign!r}")
        params: tuple = (sym, sign == "s")
    else:
        params = tuple(_int(p) for p in raw_params)
    return E.make(op, args, params)


# --------------------------------------------------------------------------
# human-readable infix

_PREC = {
    "or": 10, "and": 20, "cmp": 30, "bor": 40, "bxor": 45, "band": 50,
    "concat": 55, "shift": 60, "add": 70, "mul": 80, "unary": 90, "atom": 100,
}
_CMP_SYM = {"eq": "==", "ne": "!="}


def format_const(value: int, width: int, upper: bool = False, pad: bool = False) -> str:
    if pad and width % 4:
        return "0b" + format(value, f"0{width}b")
    digits = format(value, "X" if upper else "x")
    if pad:
        digits = digits.rjust(width // 4, "0")
    return "0x" + digits


def to_infix(
    e: Expr,
    *,
    names: Mapping[int, str] | None = None,
    signed_vars: frozenset[str] | set[str] = frozenset(),
    upper: bool = False,
) -> str:
    """Render ``e`` with conventional operators.

    ``names`` maps constant values to identifiers (named constants).
    Equalities between a variable in ``signed_vars`` and a constant print the
    constant as a signed decimal.
    """
    names = names or {}
    memo: dict[int, tuple[str, int]] = {}

    def const_text(n: Expr, pad: bool = False) -> str:
        v = n.params[0]
        if n.width == 1 and not pad:
            return "true" if v else "false"
        if v in names:
            return names[v]
        return format_const(v, n.width, upper, pad)

    def wrap(child: Expr, prec: int, strict: bool = False) -> str:
        text, p = memo[child.id]
        if p < prec or (strict and p == prec):
            return f"({text})"
        return text

    for n in E.postorder(e):
        op = n.op
        a = n.args
        if op == "var":
            memo[n.id] = (n.params[0], _PREC["atom"])
        elif op == "const":
            memo[n.id] = (const_text(n), _PREC["atom"])
        elif op == "not":
            inner = a[0]
            if n.width == 1 and inner.op == "eq":
                l, r = inner.args
                memo[n.id] = (f"{wrap(l, _PREC['bor'])} != {wrap(r, _PREC['bor'])}", _PREC["cmp"])
            else:
                sym = "!" if n.width == 1 else "~"
                memo[n.id] = (sym + wrap(inner, _PREC["unary"]), _PREC["unary"])
        elif op == "neg":
            memo[n.id] = ("-" + wrap(a[0], _PREC["unary"]), _PREC["unary"])
        elif op in ("and", "or", "xor"):
            if n.width == 1 and op != "xor":
                key, sym = ("and", " && ") if op == "and" else ("or", " || ")
            else:
                key, sym = {"and": ("band", " & "), "or": ("bor", " | "), "xor": ("bxor", " ^ ")}[op]
            memo[n.id] = (sym.join(wrap(x, _PREC[key], strict=True) for x in a), _PREC[key])
        elif op in ("add", "sub", "mul"):
            key = "mul" if op == "mul" else "add"
            left = wrap(a[0], _PREC[key])
            if op == "add" and a[1].op == "const" and a[1].params[0] >> (n.width - 1) and n.width > 1:
                mag = (1 << n.width) - a[1].params[0]
                memo[n.id] = (f"{left} - {names.get(mag, format_const(mag, n.width, upper))}", _PREC[key])
            elif op == "add" and a[1].op == "neg":
                memo[n.id] = (f"{left} - {wrap(a[1].args[0], _PREC[key], strict=True)}", _PREC[key])
            elif op == "add" and a[0].op == "neg":
                right = wrap(a[1], _PREC[key])
                memo[n.id] = (f"{right} - {wrap(a[0].args[0], _PREC[key], strict=True)}", _PREC[key])
            else:
                sym = {"add": " + ", "sub": " - ", "mul": " * "}[op]
                memo[n.id] = (left + sym + wrap(a[1], _PREC[key], strict=True), _PREC[key])
        elif op in E.SHIFTS:
            sym = {"shl": " << ", "lshr": " >> ", "ashr": " >>s "}[op]
            memo[n.id] = (wrap(a[0], _PREC["shift"]) + sym + wrap(a[1], _PREC["shift"], strict=True), _PREC["shift"])
        elif op == "extract":
            hi, lo = n.params
            sl = f"[{hi}]" if hi == lo else f"[{hi}:{lo}]"
            memo[n.id] = (wrap(a[0], _PREC["atom"]) + sl, _PREC["atom"])
        elif op == "concat":
            parts = []
            for x in a:
                if x.op == "const":
                    parts.append(const_text(x, pad=True))
                else:
                    parts.append(wrap(x, _PREC["concat"], strict=True))
            memo[n.id] = (" .. ".join(parts), _PREC["concat"])
        elif op in ("zext", "sext"):
            memo[n.id] = (f"{op}{n.params[0]}({memo[a[0].id][0]})", _PREC["atom"])
        elif op == "ite":
            memo[n.id] = (f"ite({memo[a[0].id][0]}, {memo[a[1].id][0]}, {memo[a[2].id][0]})", _PREC["atom"])
        elif op in ("eq", "ne"):
            l, r = a
            if op == "eq" and (r.op == "const" and l.op == "var" and l.params[0] in signed_vars):
                rt = str(E.to_signed(r.params[0], r.width))
                memo[n.id] = (f"{memo[l.id][0]} == {rt}", _PREC["cmp"])
            else:
                memo[n.id] = (f"{wrap(l, _PREC['bor'])} {_CMP_SYM[op]} {wrap(r, _PREC['bor'])}", _PREC["cmp"])
        elif op in E.INTERNAL_CMP:
            memo[n.id] = (f"{op.upper()}({memo[a[0].id][0]}, {memo[a[1].id][0]})", _PREC["atom"])
        elif op == "rel":
            sym, signed = n.params
            sym = sym + ("s" if signed else "")
            memo[n.id] = (f"{wrap(a[0], _PREC['bor'])} {sym} {wrap(a[1], _PREC['bor'])}", _PREC["cmp"])
        else:  # pragma: no cover - make() rejects unknown ops
            raise ExprError(op)
    return memo[e.id][0]


# --------------------------------------------------------------------------
# SMT-LIB v2 dump

_SMT_OPS = {
    "not": "bvnot", "neg": "bvneg", "and": "bvand", "or": "bvor", "xor": "bvxor",
    "add": "bvadd", "sub": "bvsub", "mul": "bvmul", "shl": "bvshl", "lshr": "bvlshr",
    "ashr": "bvashr", "concat": "concat", "ult": "bvult", "ule": "bvule", "ugt": "bvugt",
    "uge": "bvuge", "slt": "bvslt", "sle": "bvsle", "sgt": "bvsgt", "sge": "bvsge",
}
_REL_SMT = {("<", False): "bvult", ("<=", False): "bvule", (">", False): "bvugt", (">=", False): "bvuge",
            ("<", True): "bvslt", ("<=", True): "bvsle", (">", True): "bvsgt", (">=", True): "bvsge"}


def to_smtlib(cond: Expr) -> str:
    """A complete ``(check-sat)`` script asserting ``cond`` (width 1) equals #b1."""
    decls = [f"(declare-const |{name}| (_ BitVec {w}))" for name, w in sorted(E.free_vars(cond).items())]
    terms: dict[int, str] = {}
    for n in E.postorder(cond):
        a = [terms[x.id] for x in n.args]
        if n.op == "var":
            t = f"|{n.params[0]}|"
        elif n.op == "const":
            t = f"(_ bv{n.params[0]} {n.width})"
        elif n.op == "extract":
            t = f"((_ extract {n.params[0]} {n.params[1]}) {a[0]})"
        elif n.op in ("zext", "sext"):
            kind = "zero_extend" if n.op == "zext" else "sign_extend"
            t = f"((_ {kind} {n.params[0] - n.args[0].width}) {a[0]})"
        elif n.op == "ite":
            t = f"(ite (= {a[0]} #b1) {a[1]} {a[2]})"
        elif n.op == "eq":
            t = f"(ite (= {a[0]} {a[1]}) #b1 #b0)"
        elif n.op == "ne":
            t = f"(ite (= {a[0]} {a[1]}) #b0 #b1)"
        elif n.op == "rel":
            t = f"(ite ({_REL_SMT[n.params]} {a[0]} {a[1]}) #b1 #b0)"
        elif n.op in E.INTERNAL_CMP:
            t = f"(ite ({_SMT_OPS[n.op]} {a[0]} {a[1]}) #b1 #b0)"
        elif n.op in E.BITWISE:
            t = a[0]
            for x in a[1:]:
                t = f"({_SMT_OPS[n.op]} {t} {x})"
        else:
            t = f"({_SMT_OPS[n.op]} {' '.join(a)})"
        terms[n.id] = t
    body = "\n".join(decls)
    return f"(set-logic QF_BV)\n{body}\n(assert (= {terms[cond.id]} #b1))\n(check-sat)\n(get-model)\n"
