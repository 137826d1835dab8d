"""Command line entry point: analyze, lift, cluster, verify, render."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from ecpart.analysis import AnalysisOptions, analyze_module, verify_against_oracle
from ecpart.executor import ExecutionError, ExplorationConfig
from ecpart.frontend.dwarf import DwarfError, extract_debug_bundle
from ecpart.frontend.elf import ElfError, read_elf
from ecpart.frontend.mapfile import MapFileError, parse_map_file
from ecpart.frontend.rv32i import LiftError, lift_module
from ecpart.ir.model import Module
from ecpart.ir.parser import IrParseError, parse_module
from ecpart.oracle import OracleError
from ecpart.report import (DatasetError, LlmConfigError, analyses_from_doc, config_from_doc, dump_doc,
                           emit_json, llm_endpoint, llm_render, load_dataset, load_name_map, render_human,
                           sidecar_path)
from ecpart.scheduler import CallCycleError, build_call_graph, compute_metrics, plan
from ecpart.simplify import parse_rule_spec
from ecpart.summaries import SummaryError, SummaryStore
from ecpart.smt.expr import ExprError
from ecpart.smt.solver import dump_queries

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_MISMATCH = 0, 1, 2, 3

ANALYSIS_ERRORS = (IrParseError, ElfError, DwarfError, MapFileError, LiftError, CallCycleError, ExecutionError,
                   OracleError, SummaryError, DatasetError, ExprError, KeyError, OSError)

log = logging.getLogger("ecpart")


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecpart", description="Output-oriented equivalence class inference.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def source_args(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--ir", help="MicroIR module")
        sp.add_argument("--elf", help="RV32I ELF image with DWARF")
        sp.add_argument("--map", help="linker map file with a cross-reference table")
        sp.add_argument("--function", action="append", dest="functions", metavar="NAME",
                        help="restrict to this function (repeatable)")

    a = sub.add_parser("analyze", help="infer equivalence classes")
    source_args(a)
    a.add_argument("--loop-bound", type=int, default=1024)
    a.add_argument("--rules", default="1-8", help='simplification rules, e.g. "1,2,5-8" or "none"')
    a.add_argument("--globals-mode", choices=("symbolic", "concrete"), default="symbolic")
    a.add_argument("--no-summaries", action="store_true", help="inline callees instead of applying summaries")
    a.add_argument("--max-paths", type=int, default=50_000)
    a.add_argument("--out", help="dataset path (default: stdout)")
    a.add_argument("--summaries-dir", help="load summaries from and save them to this directory")
    a.add_argument("--render", nargs="?", const="-", metavar="PATH", help="also write the text rendering")
    a.add_argument("--name-map", help="JSON object mapping literals to identifiers for --render")
    a.add_argument("--llm", action="store_true", help="also request an LLM rendering (sidecar file)")
    a.add_argument("--dump-queries", metavar="DIR", help="write every solver query as SMT-LIB v2 into DIR")

    li = sub.add_parser("lift", help="lift an ELF image to MicroIR")
    li.add_argument("--elf", required=True)
    li.add_argument("--function", action="append", dest="functions", metavar="NAME")
    li.add_argument("--out")
    li.add_argument("--bundle-out", help="write the recovered debug bundle as JSON")

    c = sub.add_parser("cluster", help="emit the analysis schedule")
    source_args(c)
    c.add_argument("--bucket-width", type=int, default=1)
    c.add_argument("--out")

    v = sub.add_parser("verify", help="compare a dataset against the concrete oracle")
    v.add_argument("dataset")
    v.add_argument("--domain", action="append", default=[], metavar="NAME=SPEC",
                   help="input values: lo..hi, lo..hi:step or v1,v2,... (repeatable)")
    v.add_argument("--function", action="append", dest="functions", metavar="NAME")
    v.add_argument("--out")

    r = sub.add_parser("render", help="render a dataset as text")
    r.add_argument("dataset")
    r.add_argument("--name-map")
    r.add_argument("--out")
    return p


def parse_domain_spec(spec: str) -> tuple[str, list[int]]:
    """``pin=0..0x5FF`` (inclusive), ``a=0..0xFFFF:61`` or ``m=0,2``."""
    if "=" not in spec:
        raise UsageError(f"bad --domain {spec!r}: expected NAME=SPEC")
    name, rng = spec.split("=", 1)
    try:
        if ".." in rng:
            lo_s, rest = rng.split("..", 1)
            hi_s, _, step_s = rest.partition(":")
            lo, hi, step = int(lo_s, 0), int(hi_s, 0), int(step_s, 0) if step_s else 1
            if hi < lo or step < 1:
                raise ValueError
            vals = list(range(lo, hi + 1, step))
        else:
            vals = [int(x, 0) for x in rng.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --domain {spec!r}") from None
    if not name.strip() or not vals:
        raise UsageError(f"bad --domain {spec!r}")
    return name.strip(), vals


def _write(path: str | None, data: bytes | str) -> None:
    raw = data.encode("utf-8") if isinstance(data, str) else data
    if path is None or path == "-":
        sys.stdout.buffer.write(raw)
        sys.stdout.flush()
    else:
        Path(path).write_bytes(raw)


def _load_source(args) -> tuple[Module, dict]:
    if bool(args.ir) == bool(args.elf):
        raise UsageError("give exactly one of --ir or --elf")
    if args.ir:
        text = Path(args.ir).read_text()
        return parse_module(text), {"kind": "microir", "path": Path(args.ir).name}
    img = read_elf(Path(args.elf).read_bytes())
    bundle = extract_debug_bundle(img)
    lifted = lift_module(img, bundle)
    for name, err in sorted(lifted.errors.items()):
        log.warning("not lifted: %s: %s", name, err)
    source: dict = {"kind": "elf", "path": Path(args.elf).name,
                    "not_lifted": {k: v for k, v in sorted(lifted.errors.items())}}
    if args.map:
        refs = parse_map_file(Path(args.map).read_text())
        source["map"] = Path(args.map).name
        source["xref_edges"] = [list(e) for e in refs.call_edges()]
        lifted_edges = set(build_call_graph(lifted.module).edges)
        unexpected = sorted(lifted_edges - set(refs.call_edges()))
        if unexpected:
            log.warning("lifted calls missing from the map's cross references: %s", unexpected)
        source["edges_missing_from_map"] = [list(e) for e in unexpected]
    return lifted.module, source


def cmd_analyze(args) -> int:
    if args.loop_bound < 1:
        raise UsageError("--loop-bound must be at least 1")
    if args.max_paths < 1:
        raise UsageError("--max-paths must be at least 1")
    try:
        rules = frozenset() if args.rules.strip().lower() == "none" else parse_rule_spec(args.rules)
    except ValueError as exc:
        raise UsageError(f"--rules: {exc}") from None
    names = load_name_map(Path(args.name_map).read_text()) if args.name_map else {}
    if args.llm:
        try:
            endpoint = llm_endpoint()
        except LlmConfigError as exc:
            raise UsageError(str(exc)) from None
    module, source = _load_source(args)
    cfg = ExplorationConfig(loop_bound=args.loop_bound, globals_init_mode=args.globals_mode,
                            use_summaries=not args.no_summaries, max_paths=args.max_paths)
    store = SummaryStore.load(args.summaries_dir) if args.summaries_dir and Path(args.summaries_dir).is_dir() \
        else SummaryStore()
    if args.dump_queries:
        dump_queries(args.dump_queries)
    try:
        result = analyze_module(module, args.functions, AnalysisOptions(config=cfg, rules=rules), store)
    finally:
        if args.dump_queries:
            dump_queries(None)
    if args.summaries_dir:
        result.store.save(args.summaries_dir)
    data = emit_json(result, source)
    if args.out or args.render != "-":
        _write(args.out, data)
    doc = load_dataset(data)
    if args.render:
        _write(args.render, render_human(doc, names))
    if args.llm:
        res = llm_render(doc, endpoint)
        if res.text is None:
            print(f"warning: {res.warning}", file=sys.stderr)
        else:
            base = args.out or (args.render if args.render not in (None, "-") else "dataset")
            sidecar_path(base).write_text(res.text)
    return EXIT_OK


def cmd_lift(args) -> int:
    img = read_elf(Path(args.elf).read_bytes())
    bundle = extract_debug_bundle(img)
    lifted = lift_module(img, bundle, args.functions)
    for name, err in sorted(lifted.errors.items()):
        print(f"warning: not lifted: {name}: {err}", file=sys.stderr)
    if args.bundle_out:
        Path(args.bundle_out).write_text(lifted.bundle.to_json())
    _write(args.out, lifted.text)
    return EXIT_OK if lifted.module.defined else EXIT_ERROR


def cmd_cluster(args) -> int:
    if args.bucket_width < 1:
        raise UsageError("--bucket-width must be at least 1")
    if args.map and not (args.ir or args.elf):
        refs = parse_map_file(Path(args.map).read_text())
        graph = build_call_graph(refs)
        metrics = compute_metrics(graph, {})
    else:
        module, _ = _load_source(args)
        graph = build_call_graph(module)
        metrics = compute_metrics(graph, module)
    _write(args.out, plan(metrics, args.bucket_width, graph).to_json() + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    doc = load_dataset(Path(args.dataset).read_bytes())
    module, analyses = analyses_from_doc(doc)
    cfg = config_from_doc(doc)
    domain = dict(parse_domain_spec(s) for s in args.domain)
    wanted = args.functions or sorted(analyses)
    unknown = set(wanted) - set(analyses)
    if unknown:
        raise UsageError(f"dataset has no function {', '.join(sorted(unknown))}")
    report: dict = {}
    ok = True
    for name in wanted:
        fa = analyses[name]
        dom = {k: v for k, v in domain.items() if k in fa.inputs}
        rep = verify_against_oracle(module, fa, dom, cfg)
        report[name] = rep.to_dict()
        ok = ok and rep.ok
    _write(args.out, dump_doc({"ok": ok, "functions": report}))
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_render(args) -> int:
    doc = load_dataset(Path(args.dataset).read_bytes())
    names = load_name_map(Path(args.name_map).read_text()) if args.name_map else {}
    _write(args.out, render_human(doc, names))
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "lift": cmd_lift, "cluster": cmd_cluster, "verify": cmd_verify,
            "render": cmd_render}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except UsageError as exc:
        print(f"ecpart: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ANALYSIS_ERRORS as exc:
        print(f"ecpart: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
