"""EcDataset serialization, deterministic text rendering and the optional LLM pass."""

from __future__ import annotations

import json
import logging
import os
import urllib.error
import urllib.request
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

from ecpart import __version__
from ecpart.analysis import Failure, FunctionAnalysis, ModuleAnalysis
from ecpart.ecp import EquivalenceClass, OutPort, OutputSnapshot
from ecpart.executor import ExplorationConfig
from ecpart.ir.parser import parse_module
from ecpart.ir.printer import print_module
from ecpart.ir.model import Module
from ecpart.scheduler import FunctionMetrics
from ecpart.smt import expr as E
from ecpart.smt.expr import Expr
from ecpart.smt.text import format_const, parse_sexpr, to_infix, to_sexpr

log = logging.getLogger(__name__)

DATASET_FORMAT = "ecpart-dataset"
SCHEMA_VERSION = 1
LLM_ENDPOINT_ENV = "ECPART_LLM_ENDPOINT"
LLM_TIMEOUT_ENV = "ECPART_LLM_TIMEOUT"


class DatasetError(ValueError):
    pass


class LlmConfigError(RuntimeError):
    pass


def hex_value(v: int) -> str:
    return f"{v:#x}"


# --------------------------------------------------------------------------
# JSON


def _class_doc(ec: EquivalenceClass) -> dict:
    disp_c = ec.display_condition if ec.display_condition is not None else ec.condition
    disp_s = ec.display_snapshot if ec.display_snapshot is not None else ec.snapshot
    return {
        "id": ec.id,
        "condition": to_sexpr(ec.condition),
        "display_condition": to_sexpr(disp_c),
        "condition_text": to_infix(disp_c),
        "snapshot": ec.snapshot.as_json(),
        "display_snapshot": disp_s.as_json(),
        "representatives": [{k: hex_value(v) for k, v in sorted(r.items())} for r in ec.representatives],
        "source_paths": [[list(step) for step in trace] for trace in ec.source_paths],
    }


def _function_doc(fa: FunctionAnalysis, interface: tuple[OutPort, ...]) -> dict:
    m = fa.metrics
    return {
        "name": fa.name,
        "inputs": [{"name": n, "width": w} for n, w in sorted(fa.inputs.items())],
        "domain": to_sexpr(fa.domain),
        "interface": [{"name": p.name, "direction": p.direction, "length": p.length} for p in interface],
        "metrics": {"call_depth": m.call_depth, "globals_count": m.globals_count} if m else None,
        "truncated": fa.truncated,
        "incomplete": fa.incomplete,
        "used_summaries": list(fa.used_summaries),
        "notes": sorted(fa.notes),
        "simplification": fa.simplification.to_dict(),
        "classes": [_class_doc(ec) for ec in fa.classes],
        "failures": [{"status": f.status, "condition": to_sexpr(f.condition), "note": f.note,
                      "trace": [list(s) for s in f.trace]} for f in fa.failures],
    }


def _config_doc(cfg: ExplorationConfig, rules: frozenset[int]) -> dict:
    return {
        "loop_bound": cfg.loop_bound,
        "rules": sorted(rules),
        "globals_mode": cfg.globals_init_mode,
        "globals_init": {k: hex_value(v) for k, v in sorted((cfg.globals_init or {}).items())},
        "overflow_forking": cfg.overflow_forking,
        "overflow_everywhere": cfg.overflow_everywhere,
        "use_summaries": cfg.use_summaries,
        "max_paths": cfg.max_paths,
    }


def dataset_doc(result: ModuleAnalysis, source: Mapping[str, object] | None = None) -> dict:
    from ecpart.ecp import interface_of

    funcs = []
    for name in sorted(result.functions):
        funcs.append(_function_doc(result.functions[name], interface_of(result.module.function(name))))
    return {
        "format": DATASET_FORMAT,
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "ecpart", "version": __version__},
        "config": _config_doc(result.options.config, result.options.rules),
        "source": dict(source or {}),
        "module": print_module(result.module),
        "schedule": list(result.plan.schedule),
        "functions": funcs,
    }


def dump_doc(doc: dict) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False) + "\n").encode("utf-8")


def emit_json(result: ModuleAnalysis, source: Mapping[str, object] | None = None) -> bytes:
    """Deterministic EcDataset bytes for ``result``."""
    return dump_doc(dataset_doc(result, source))


def load_dataset(data: bytes | str) -> dict:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"not JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != DATASET_FORMAT:
        raise DatasetError("not an ecpart dataset")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise DatasetError(f"unsupported dataset schema version {doc.get('schema_version')!r}")
    return doc


def schema() -> dict:
    return json.loads((resources.files("ecpart") / "schema" / f"ecdataset-v{SCHEMA_VERSION}.json").read_text())


def config_from_doc(doc: dict) -> ExplorationConfig:
    c = doc["config"]
    return ExplorationConfig(
        loop_bound=c["loop_bound"],
        overflow_forking=c["overflow_forking"],
        overflow_everywhere=c["overflow_everywhere"],
        max_paths=c["max_paths"],
        globals_init_mode=c["globals_mode"],
        globals_init={k: int(v, 16) for k, v in c["globals_init"].items()} or None,
        use_summaries=c["use_summaries"],
    )


def analyses_from_doc(doc: dict) -> tuple[Module, dict[str, FunctionAnalysis]]:
    """Rebuild the module and checkable classes recorded in a dataset."""
    module = parse_module(doc["module"])
    out: dict[str, FunctionAnalysis] = {}
    for fd in doc["functions"]:
        interface = tuple(OutPort(p["name"], p["direction"], p["length"]) for p in fd["interface"])
        classes = []
        for cd in fd["classes"]:
            ec = EquivalenceClass(
                id=cd["id"],
                condition=parse_sexpr(cd["condition"]),
                snapshot=OutputSnapshot.from_json(cd["snapshot"]),
                representatives=[{k: int(v, 16) for k, v in r.items()} for r in cd["representatives"]],
                interface=interface,
            )
            ec.display_condition = parse_sexpr(cd["display_condition"])
            ec.display_snapshot = OutputSnapshot.from_json(cd["display_snapshot"])
            classes.append(ec)
        failures = [Failure(f["status"], parse_sexpr(f["condition"]), f["note"],
                            tuple(tuple(s) for s in f["trace"])) for f in fd["failures"]]
        m = fd["metrics"]
        out[fd["name"]] = FunctionAnalysis(
            name=fd["name"],
            classes=classes,
            failures=failures,
            metrics=FunctionMetrics(fd["name"], m["call_depth"], m["globals_count"]) if m else None,
            truncated=fd["truncated"],
            incomplete=fd["incomplete"],
            used_summaries=tuple(fd["used_summaries"]),
            notes=list(fd["notes"]),
            inputs={i["name"]: i["width"] for i in fd["inputs"]},
            domain=parse_sexpr(fd["domain"]),
        )
    return module, out


# --------------------------------------------------------------------------
# deterministic text


_SYMBOLS = (
    (" == ", " = "), (" != ", " ≠ "), (" <= ", " ≤ "), (" >= ", " ≥ "),
    (" <=s ", " ≤s "), (" >=s ", " ≥s "), (" && ", " ∧ "), (" || ", " ∨ "),
)


def load_name_map(text: str) -> dict[int, str]:
    """Name-map file: JSON object from integer literal (``"0x540"``) to identifier."""
    raw = json.loads(text)
    if not isinstance(raw, dict):
        raise DatasetError("name map must be a JSON object")
    out: dict[int, str] = {}
    for k, v in raw.items():
        try:
            out[int(k, 0)] = str(v)
        except ValueError:
            raise DatasetError(f"name map key {k!r} is not an integer literal") from None
    return out


class _Text:
    def __init__(self, names: Mapping[int, str]) -> None:
        self.names = dict(names)
        # small values read better in decimal; explicit names win
        self.infix_names = {v: str(v) for v in range(10)}
        self.infix_names.update(self.names)

    def const(self, v: int, width: int) -> str:
        if v in self.names:
            return self.names[v]
        if v < 10:
            return str(v)
        return format_const(v, width, upper=True)

    def expr(self, e: Expr) -> str:
        if e.op == "const":
            return self.const(e.params[0], e.width)
        text = to_infix(e, names=self.infix_names, upper=True)
        for a, b in _SYMBOLS:
            text = text.replace(a, b)
        return text

    def condition(self, e: Expr) -> str:
        if e is E.TRUE:
            return "always"
        disj = e.args if (e.op == "or" and e.width == 1) else (e,)
        parts = [self._conjunction(d) for d in disj]
        if len(parts) == 1:
            return parts[0]
        return " ∨ ".join(f"({p})" if " ∧ " in p else p for p in parts)

    def _conjunction(self, e: Expr) -> str:
        items = list(e.args) if (e.op == "and" and e.width == 1) else [e]
        lower: dict[int, tuple[Expr, int, bool]] = {}
        upper: dict[int, tuple[Expr, int, bool]] = {}
        order: list[tuple[str, object]] = []

        def tighten(slot: dict, subj: Expr, v: int, closed: bool, is_lo: bool) -> None:
            incl = v if closed else (v + 1 if is_lo else v - 1)
            prev = slot.get(subj.id)
            if prev is not None:
                p_incl = prev[1] if prev[2] else (prev[1] + 1 if is_lo else prev[1] - 1)
                if (incl <= p_incl) if is_lo else (incl >= p_incl):
                    return
            slot[subj.id] = (subj, v, closed)

        for c in items:
            window = _window(c)
            b = None if window is not None else _bound(c)
            if window is None and b is None:
                order.append(("x", c))
                continue
            if window is not None:
                subj, lo_v, hi_v = window
                tighten(lower, subj, lo_v, True, True)
                tighten(upper, subj, hi_v, False, False)
            else:
                subj, kind, v, closed = b  # type: ignore[misc]
                tighten(lower if kind == "lo" else upper, subj, v, closed, kind == "lo")
            if ("b", subj.id) not in order:
                order.append(("b", subj.id))
        out = []
        for kind, item in order:
            if kind == "x":
                out.append(self.expr(item))  # type: ignore[arg-type]
                continue
            lo, hi = lower.get(item), upper.get(item)
            subj = (lo or hi)[0]  # type: ignore[index]
            s = self.expr(subj)
            if lo and hi:
                lb = "[" if lo[2] else "("
                rb = "]" if hi[2] else ")"
                out.append(f"{s} ∈ {lb}{self.const(lo[1], subj.width)}, {self.const(hi[1], subj.width)}{rb}")
            elif lo:
                out.append(f"{s} {'≥' if lo[2] else '>'} {self.const(lo[1], subj.width)}")
            else:
                out.append(f"{s} {'≤' if hi[2] else '<'} {self.const(hi[1], subj.width)}")  # type: ignore[index]
        return " ∧ ".join(out)

    def outputs(self, snap: OutputSnapshot) -> str:
        if snap.guarded:
            return self._guarded(snap)
        parts = []
        if snap.ret is not None:
            parts.append("return " + self.expr(snap.ret) + (" (wraps)" if "ret" in snap.wrapped_at else ""))
        for k, v in snap.cells + snap.globals:
            parts.append(f"set {k} = {self.expr(v)}" + (" (wraps)" if k in snap.wrapped_at else ""))
        return "; ".join(parts) if parts else "no effect"

    def _guarded(self, snap: OutputSnapshot) -> str:
        per_loc: dict[str, list[Expr]] = {}
        for _, s in snap.guarded:
            if s.ret is not None:
                per_loc.setdefault("return", []).append(s.ret)
            for k, v in s.cells + s.globals:
                per_loc.setdefault(k, []).append(v)
        parts = []
        for loc, vals in per_loc.items():
            head = "return" if loc == "return" else f"set {loc}"
            if all(v.op == "const" for v in vals):
                nums = sorted({v.params[0] for v in vals})
                w = vals[0].width
                if len(nums) > 1 and nums == list(range(nums[0], nums[-1] + 1)):
                    parts.append(f"{head} in [{self.const(nums[0], w)},{self.const(nums[-1] + 1, w)})")
                elif len(nums) == 1:
                    parts.append(f"{head} {self.const(nums[0], w)}")
                else:
                    parts.append(f"{head} in {{{', '.join(self.const(n, w) for n in nums)}}}")
            else:
                alts = sorted({self.expr(v) for v in vals})
                parts.append(f"{head} one of {{{', '.join(alts)}}}")
        return "; ".join(parts) if parts else "no effect"


def _bound(c: Expr) -> tuple[Expr, str, int, bool] | None:
    """``(subject, lo|hi, constant, closed)`` for an unsigned comparison against a constant."""
    if c.op == "rel" and not c.params[1]:
        sym = c.params[0]
        a, b = c.args
    elif c.op in ("ult", "ule", "ugt", "uge"):
        sym = {"ult": "<", "ule": "<=", "ugt": ">", "uge": ">="}[c.op]
        a, b = c.args
    else:
        return None
    if a.op == "const" and b.op != "const":
        a, b = b, a
        sym = {"<": ">", "<=": ">=", ">": "<", ">=": "<="}[sym]
    if b.op != "const" or a.op == "const":
        return None
    v = b.params[0]
    kind = "lo" if sym in (">", ">=") else "hi"
    return a, kind, v, sym in ("<=", ">=")


def _window(c: Expr) -> tuple[Expr, int, int] | None:
    """``x - lo < k`` (unsigned, no wrap) as the half-open interval ``[lo, lo + k)``."""
    b = _bound(c)
    if b is None or b[1] != "hi":
        return None
    subj, _, k, closed = b
    if closed:
        k += 1
    if subj.op != "add" or len(subj.args) != 2 or subj.args[1].op != "const":
        return None
    x, off = subj.args[0], subj.args[1].params[0]
    lo = (-off) & E.mask(subj.width)
    if lo == 0 or lo + k > E.mask(subj.width) + 1:
        return None
    return x, lo, lo + k


def _signature(fd: dict) -> str:
    ins = ", ".join(f"{i['name']}:{i['width']}" for i in fd["inputs"])
    return f"function {fd['name']}({ins})"


def render_human(doc: dict, names: Mapping[int, str] | None = None) -> str:
    """Plain-text report; a pure function of the dataset and the name map."""
    t = _Text(names or {})
    lines = []
    for fd in doc["functions"]:
        flags = [k for k in ("truncated", "incomplete") if fd[k]]
        head = _signature(fd) + (f"  [{', '.join(flags)}]" if flags else "")
        lines.append(head)
        for cd in fd["classes"]:
            cond = parse_sexpr(cd["display_condition"])
            snap = OutputSnapshot.from_json(cd["display_snapshot"])
            lines.append(f"  EC{cd['id']}: {t.outputs(snap)} when {t.condition(cond)}")
            if cd["representatives"]:
                ex = "; ".join(", ".join(f"{k}=0x{int(v, 16):X}" for k, v in r.items())
                               for r in cd["representatives"])
                lines.append(f"       examples: {ex}")
        for f in fd["failures"]:
            lines.append(f"  {f['status']}: {f['note'] or 'no output'} when {t.condition(parse_sexpr(f['condition']))}")
        lines.append("")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# optional LLM rendering


@dataclass(frozen=True)
class LlmResult:
    text: str | None
    warning: str | None


def default_template() -> str:
    return (resources.files("ecpart") / "templates" / "llm_prompt.txt").read_text()


def llm_endpoint() -> str:
    url = os.environ.get(LLM_ENDPOINT_ENV, "").strip()
    if not url:
        raise LlmConfigError(f"--llm needs an HTTP endpoint: set {LLM_ENDPOINT_ENV}")
    return url


def llm_render(doc: dict, endpoint: str | None = None, template: str | None = None,
               timeout: float | None = None) -> LlmResult:
    """POST the deterministic rendering wrapped in the prompt template.

    The request body is ``{"prompt": ...}``; a JSON reply's ``text`` field
    (or the raw body) is returned.  Transport problems come back as a
    warning with no text so callers keep the deterministic output.
    """
    url = endpoint or llm_endpoint()
    prompt = (template or default_template()).replace("{{CLASSES}}", render_human(doc))
    if timeout is None:
        timeout = float(os.environ.get(LLM_TIMEOUT_ENV, "30"))
    req = urllib.request.Request(url, data=json.dumps({"prompt": prompt}).encode(),
                                 headers={"Content-Type": "application/json"}, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            body = resp.read().decode("utf-8", "replace")
    except (urllib.error.URLError, OSError, ValueError) as exc:
        msg = f"LLM rendering skipped: {exc}"
        log.warning(msg)
        return LlmResult(None, msg)
    try:
        parsed = json.loads(body)
        if isinstance(parsed, dict) and isinstance(parsed.get("text"), str):
            body = parsed["text"]
    except json.JSONDecodeError:
        pass
    return LlmResult(body, None)


def sidecar_path(base: str | Path) -> Path:
    return Path(str(base) + ".llm.txt")
