"""Command-line front end: ``sysmodel check|simulate|refine|synthesize|graph``.

Exit codes: 0 success/accepted, 1 check rejected, 2 input error,
3 resource limit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import docgraph
from .core import ENV, Message
from .dsl import DocKind, parse_file, serialize
from .errors import (ElaborationError, ExplosionLimit, GraphError, ModelError,
                     ParseError)
from .refinement import (SynthesisOptions, check_seq_against_state, refine_class_diagram,
                         refine_state_diagram, synthesize_state_diagram,
                         trace_refinement_check)
from .semantics import check_documents, class_table_of, elaborate
from .simulator import RoundRobin, SeededRandom, enumerate_runs, run
from .syntax import BaseParser

OK, REJECTED, INPUT_ERROR, LIMIT = 0, 1, 2, 3
WORKSPACE_ENV = "SYSMODEL_WORKSPACE"


@dataclass(frozen=True)
class CliConfig:
    workspace: Path
    rounds: int = 8
    cap: int = 10_000
    seed: int = 0
    output: str = "text"

    def __post_init__(self):
        if self.rounds < 1 or self.cap < 1:
            raise ValueError("--rounds and --cap must be at least 1")


class InputError(Exception):
    pass


# -- small file formats ----------------------------------------------------------------


def parse_stimuli(text: str, doc="<stimuli>") -> list[tuple[int, Message]]:
    """Lines ``round <n>: <sender> -> <id> . <selector>(<literals>)``."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith(("#", "//")):
            continue
        p = BaseParser(line, doc)
        kw = p.ident("'round'")
        if kw.text != "round":
            raise ParseError("stimulus lines start with 'round'", lineno, 1, doc)
        if not p.at_kind("int"):
            p.error({"round number"})
        rnd = int(p.advance().text)
        p.expect(":")
        sender = p.ident("sender").text
        p.expect("->")
        receiver = p.ident("receiver").text
        p.expect(".")
        sel = p.ident("selector").text
        args = p.literal_list()
        p.expect_eof()
        out.append((rnd, Message(sender, receiver, sel, args)))
    return out


def parse_mapping(text: str) -> dict[str, str]:
    """Lines ``new_state -> old_state``."""
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith(("#", "//")):
            continue
        p = BaseParser(line, "<map>")
        new = p.ident("state").text
        p.expect("->")
        out[new] = p.ident("state").text
        p.expect_eof()
    return out


# -- helpers -------------------------------------------------------------------------------


def _load(paths):
    try:
        return [parse_file(p) for p in paths]
    except OSError as exc:
        raise InputError(str(exc)) from None


def _emit(cfg: CliConfig, text: str, data):
    if cfg.output == "structured":
        sys.stdout.write(json.dumps(data, sort_keys=True, indent=1) + "\n")
    else:
        sys.stdout.write(text)


def _verdict_data(v):
    return {"accepted": v.accepted,
            "violations": [{"rule": x.rule, "doc": x.doc, "message": x.message,
                            "line": x.span.line if x.span else 0,
                            "col": x.span.col if x.span else 0} for x in v.violations],
            "warnings": list(v.warnings), "witness": v.witness}


def _stimuli(path):
    if not path:
        return []
    return parse_stimuli(Path(path).read_text(encoding="utf-8"), str(path))


# -- commands ------------------------------------------------------------------------------


def cmd_check(cfg: CliConfig, args) -> int:
    docs = _load(args.paths)
    report, _ = check_documents(docs, object_diagram=args.objects)
    _emit(cfg, report.render(),
          [{"severity": f.severity, "code": f.code, "doc": f.doc, "message": f.message,
            "line": f.span.line if f.span else 0, "col": f.span.col if f.span else 0}
           for f in report.findings])
    return OK if report.ok else REJECTED


def cmd_simulate(cfg: CliConfig, args) -> int:
    docs = _load(args.paths)
    stimuli = _stimuli(args.stimuli)
    try:
        model = elaborate(docs, object_diagram=args.objects)
    except ElaborationError as exc:
        sys.stderr.write(exc.report.render())
        return INPUT_ERROR
    if args.exhaustive:
        runs = enumerate_runs(model, stimuli, cfg.rounds, cfg.cap)
        text = [f"# exhaustive rounds={cfg.rounds} cap={cfg.cap}\n"]
        for i, tr in enumerate(runs, 1):
            text.append(f"# run {i}\n")
            text.append(tr.to_text())
        text.append(f"# runs={len(runs)}" + (" truncated" if runs.truncated else "") + "\n")
        _emit(cfg, "".join(text), {"rounds": cfg.rounds, "cap": cfg.cap,
                                   "truncated": runs.truncated, "count": len(runs),
                                   "runs": [tr.to_records() for tr in runs]})
        return LIMIT if runs.truncated else OK
    policy = RoundRobin() if args.policy == "roundrobin" else SeededRandom(cfg.seed)
    trace = run(model, stimuli, cfg.rounds, policy)
    head = f"# seed={cfg.seed} rounds={cfg.rounds} policy={args.policy}\n"
    _emit(cfg, head + trace.to_text(), {"seed": cfg.seed, "rounds": cfg.rounds,
                                        "policy": args.policy,
                                        "events": trace.to_records()})
    return OK


def cmd_refine(cfg: CliConfig, args) -> int:
    old, new = _load(args.old), _load(args.new)
    context = _load(args.context or [])
    if args.kind == "cd":
        if [d.kind for d in old + new] != [DocKind.CLASS, DocKind.CLASS]:
            raise InputError("--kind cd takes one old and one new class diagram")
        verdict = refine_class_diagram(old[0], new[0])
    elif args.kind == "sd":
        if [d.kind for d in old + new] != [DocKind.STATE, DocKind.STATE]:
            raise InputError("--kind sd takes one old and one new state diagram")
        mapping = parse_mapping(Path(args.map).read_text(encoding="utf-8")) if args.map \
            else None
        table = class_table_of(context) if context else None
        verdict = refine_state_diagram(old[0], new[0], mapping, table)
    else:
        stimuli = _stimuli(args.stimuli)
        try:
            abstract = elaborate(old + context)
            concrete = elaborate(new + context)
        except ElaborationError as exc:
            sys.stderr.write(exc.report.render())
            return INPUT_ERROR
        state_map = None
        if args.map:
            # the map renames control states of the new side's state diagrams
            mapping = parse_mapping(Path(args.map).read_text(encoding="utf-8"))
            state_map = {d.body.class_name: mapping for d in new if d.kind is DocKind.STATE}
        verdict = trace_refinement_check(abstract, concrete, stimuli, cfg.rounds, cfg.cap,
                                         observe=args.observe, state_map=state_map)
    _emit(cfg, verdict.render(), _verdict_data(verdict))
    return OK if verdict.accepted else REJECTED


def cmd_synthesize(cfg: CliConfig, args) -> int:
    docs = _load(args.paths)
    seqs = [d for d in docs if d.kind is DocKind.SEQUENCE]
    table = class_table_of([d for d in docs if d.kind is DocKind.CLASS])
    opts = SynthesisOptions(args.cls, args.merge, args.loop_folding)
    out = Path(args.output)
    sd = synthesize_state_diagram(seqs, opts, table, doc_id=str(out))
    out.write_text(serialize(sd), encoding="utf-8")
    again = parse_file(out)
    lines, data, status = [f"wrote {out}\n"], [], OK
    for qd in seqs:
        v = check_seq_against_state(qd, again, table)
        lines.append(f"{qd.id}: {'ACCEPTED' if v.accepted else 'REJECTED'}\n")
        data.append({"doc": qd.id, **_verdict_data(v)})
        if not v.accepted:
            status = REJECTED
    _emit(cfg, "".join(lines), {"output": str(out), "checks": data})
    return status


def cmd_graph(cfg: CliConfig, args) -> int:
    manifest = cfg.workspace / docgraph.MANIFEST_NAME
    if args.action == "init":
        cfg.workspace.mkdir(parents=True, exist_ok=True)
        if manifest.exists():
            raise InputError(f"{manifest} already exists")
        docgraph.save(docgraph.new_graph(manifest))
        _emit(cfg, f"initialized {manifest}\n", {"manifest": str(manifest)})
        return OK
    if not manifest.exists():
        raise InputError(f"no document graph at {manifest}; run 'graph init'")
    g = docgraph.load(manifest)
    status = OK
    if args.action == "add":
        ids = [docgraph.add_document(g, Path(p).resolve(), author=args.author)
               for p in args.items]
        _emit(cfg, "".join(i + "\n" for i in ids), {"nodes": ids})
    elif args.action == "link":
        edge = docgraph.link(g, args.edge_kind, args.sources.split(","),
                             args.targets.split(","))
        _emit(cfg, edge.render() + "\n", {"edge": edge.render()})
    elif args.action == "validate":
        edge = docgraph.DocEdge(docgraph.TRANSFORM, tuple(args.sources.split(",")),
                                tuple(args.targets.split(",")))
        if edge not in g.edges:
            raise InputError(f"no such transform edge: {edge.render()}")
        mapping = parse_mapping(Path(args.map).read_text(encoding="utf-8")) if args.map \
            else None
        verdict = docgraph.validate_transform(g, edge, mapping)
        _emit(cfg, verdict.render(), _verdict_data(verdict))
        status = OK if verdict.accepted else REJECTED
    elif args.action == "redundant":
        flags = {n: docgraph.mark_redundant(g, n) for n in args.items}
        _emit(cfg, "".join(f"{n} redundant={'u' if v is None else int(v)}\n"
                           for n, v in flags.items()), flags)
    elif args.action == "status":
        rows = ["id kind path v V t c r\n"]
        data = []
        for nid in sorted(g.nodes):
            n = g.nodes[nid]
            tri = docgraph._tri
            rows.append(f"{nid} {n.kind.value} {n.path} {int(n.validated)} {int(n.verified)} "
                        f"{int(n.tested)} {tri(n.consistent)} {tri(n.redundant)}\n")
            data.append({"id": nid, "kind": n.kind.value, "path": n.path,
                         "validated": n.validated, "verified": n.verified,
                         "tested": n.tested, "consistent": n.consistent,
                         "redundant": n.redundant})
        rows += [e.render() + "\n" for e in sorted(g.edges)]
        _emit(cfg, "".join(rows), {"nodes": data,
                                   "edges": [e.render() for e in sorted(g.edges)]})
        return OK
    docgraph.save(g)
    return status


# -- argument parsing ----------------------------------------------------------------------


def _global_options(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--workspace", default=d(None),
                        help=f"workspace root (default: ${WORKSPACE_ENV} or .)")
    parser.add_argument("--seed", type=int, default=d(0))
    parser.add_argument("--rounds", type=int, default=d(8))
    parser.add_argument("--cap", type=int, default=d(10_000))
    parser.add_argument("--format", choices=("text", "structured"), default=d("text"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sysmodel", description=__doc__.split("\n")[0])
    _global_options(ap, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="parse and check documents")
    p.add_argument("paths", nargs="+")
    p.add_argument("--objects", help="id of the object diagram with the initial objects")

    p = sub.add_parser("simulate", parents=[common], help="simulate system runs")
    p.add_argument("paths", nargs="+")
    p.add_argument("--stimuli")
    p.add_argument("--objects")
    p.add_argument("--policy", choices=("random", "roundrobin"), default="random")
    p.add_argument("--exhaustive", action="store_true")

    p = sub.add_parser("refine", parents=[common], help="check a refinement step")
    p.add_argument("--kind", choices=("cd", "sd", "trace"), required=True)
    p.add_argument("--old", nargs="+", required=True)
    p.add_argument("--new", nargs="+", required=True)
    p.add_argument("--map", help="state map file (lines 'new -> old'); for --kind trace it "
                   "renames the new side's control states under --observe full")
    p.add_argument("--context", nargs="*", help="documents shared by both sides")
    p.add_argument("--stimuli")
    p.add_argument("--observe", choices=("io", "full"), default="io")

    p = sub.add_parser("synthesize", parents=[common],
                       help="state diagram from sequence diagrams")
    p.add_argument("paths", nargs="+")
    p.add_argument("--class", dest="cls", required=True)
    p.add_argument("--merge", choices=("trie", "labels"), default="trie")
    p.add_argument("--loop-folding", action="store_true")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("graph", parents=[common], help="manage the document graph")
    p.add_argument("action", choices=("init", "add", "link", "validate", "status",
                                      "redundant"))
    p.add_argument("items", nargs="*", help="files for add, node ids for redundant")
    p.add_argument("--kind", dest="edge_kind", choices=("refers", "transform"),
                   default="transform")
    p.add_argument("--from", dest="sources")
    p.add_argument("--to", dest="targets")
    p.add_argument("--map")
    p.add_argument("--author", default=os.environ.get("USER", ""))
    return ap


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "refine": cmd_refine,
            "synthesize": cmd_synthesize, "graph": cmd_graph}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        workspace = Path(args.workspace or os.environ.get(WORKSPACE_ENV) or ".")
        cfg = CliConfig(workspace, args.rounds, args.cap, args.seed, args.format)
        if args.command == "graph" and args.action in ("link", "validate") \
                and not (args.sources and args.targets):
            raise InputError("graph link/validate need --from and --to")
        return COMMANDS[args.command](cfg, args)
    except ExplosionLimit as exc:
        sys.stderr.write(f"error: {exc}\n")
        return LIMIT
    except (InputError, ParseError, GraphError, ModelError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
