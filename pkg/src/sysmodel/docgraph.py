"""Persistent document graph: documents with lifecycle flags, refers-to and
transform edges, and transform validation through the refinement checks.

Manifest format, one record per line, sorted (nodes by id, then edges)::

    node <id> <kind> <relative-path> author=<s> created=<ts> updated=<ts> flags=v:0,V:0,t:0,c:u,r:u
    edge <refers|transform> <src[,src...]> -> <dst[,dst...]>

Paths and authors are percent-encoded so that every field is one token.
"""

from __future__ import annotations

import os
import tempfile
import warnings
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from urllib.parse import quote, unquote

from .dsl import FORMAL_KINDS, DocKind, Document, as_kind, kind_for_path, parse
from .errors import (CycleError, DuplicatePath, ManifestFormatError, ModelError,
                     UnknownNode, UnsupportedTransformShape)
from .refinement import (RefinementVerdict, Violation, check_seq_against_state,
                         refine_class_diagram, refine_state_diagram, target_role)
from .semantics import class_table_of

REFERS, TRANSFORM = "refers", "transform"
MANIFEST_NAME = "docgraph.manifest"


def utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class DocNode:
    path: str  # relative to the manifest directory
    kind: DocKind
    author: str
    created: str
    updated: str
    validated: bool = False
    verified: bool = False
    tested: bool = False
    consistent: bool | None = None
    redundant: bool | None = None
    violations: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.verified and self.kind not in FORMAL_KINDS:
            raise ValueError("only formal documents can be verified")
        if self.tested:
            raise ValueError("no document kind here is executable; tested stays false")


@dataclass(frozen=True, order=True)
class DocEdge:
    kind: str
    sources: tuple[str, ...]
    targets: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in (REFERS, TRANSFORM):
            raise ValueError(f"unknown edge kind {self.kind!r}")
        object.__setattr__(self, "sources", tuple(sorted(set(self.sources))))
        object.__setattr__(self, "targets", tuple(sorted(set(self.targets))))

    def render(self) -> str:
        return f"edge {self.kind} {','.join(self.sources)} -> {','.join(self.targets)}"


@dataclass
class DocGraph:
    manifest_path: Path
    nodes: dict[str, DocNode] = field(default_factory=dict)
    edges: list[DocEdge] = field(default_factory=list)

    @property
    def root(self) -> Path:
        return Path(self.manifest_path).parent

    def __eq__(self, other):
        return (isinstance(other, DocGraph) and self.nodes == other.nodes
                and sorted(self.edges) == sorted(other.edges))

    def node(self, node_id: str) -> DocNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"unknown node {node_id!r}") from None

    def document(self, node_id: str) -> Document:
        n = self.node(node_id)
        text = (self.root / n.path).read_text(encoding="utf-8")
        return parse(n.kind, text, n.path)

    def neighbours(self, node_id: str, kind: str) -> list[str]:
        return sorted({t for e in self.edges if e.kind == kind and node_id in e.sources
                       for t in e.targets})


def new_graph(manifest_path) -> DocGraph:
    return DocGraph(Path(manifest_path))


def _node_id(g: DocGraph, rel: str) -> str:
    base = "".join(ch if ch.isalnum() or ch in "_-." else "_" for ch in Path(rel).stem)
    base = base or "doc"
    nid, n = base, 2
    while nid in g.nodes:
        nid, n = f"{base}_{n}", n + 1
    return nid


def add_document(g: DocGraph, path, kind=None, author: str = "", now=None) -> str:
    """Parse the file and add it as a node with every flag cleared.

    The graph is left unchanged when parsing fails.
    """
    path = Path(path)
    full = path if path.is_absolute() else g.root / path
    rel = os.path.relpath(full, g.root)
    if any(n.path == rel for n in g.nodes.values()):
        raise DuplicatePath(f"{rel} is already in the graph")
    kind = as_kind(kind) if kind is not None else kind_for_path(full)
    parse(kind, full.read_text(encoding="utf-8"), rel)
    ts = now or utc_now()
    nid = _node_id(g, rel)
    g.nodes[nid] = DocNode(rel, kind, author, ts, ts)
    return nid


def _reaches(g: DocGraph, kind: str, starts, goals) -> bool:
    seen, todo = set(), list(starts)
    while todo:
        n = todo.pop()
        if n in goals:
            return True
        if n in seen:
            continue
        seen.add(n)
        todo += g.neighbours(n, kind)
    return False


def link(g: DocGraph, kind: str, sources, targets) -> DocEdge:
    """Add a directed edge unless it closes a cycle among edges of its kind."""
    edge = DocEdge(kind, tuple(sources), tuple(targets))
    if not edge.sources or not edge.targets:
        raise ValueError("an edge needs at least one source and one target")
    for n in edge.sources + edge.targets:
        g.node(n)
    if _reaches(g, kind, edge.targets, set(edge.sources)):
        raise CycleError(f"{edge.render()} would close a {kind} cycle")
    if edge not in g.edges:
        g.edges.append(edge)
    return edge


def is_acyclic(g: DocGraph, kind: str) -> bool:
    return not any(_reaches(g, kind, g.neighbours(n, kind), {n}) for n in g.nodes)


def context_table(g: DocGraph, node_ids):
    """Class table from the class diagrams reachable over refers-to edges."""
    seen, todo, cds = set(), list(node_ids), []
    while todo:
        n = todo.pop()
        if n in seen:
            continue
        seen.add(n)
        if g.node(n).kind is DocKind.CLASS:
            cds.append(g.document(n))
        todo += g.neighbours(n, REFERS)
    return class_table_of(cds)


def _set_flags(g: DocGraph, node_id: str, now=None, **flags):
    g.nodes[node_id] = replace(g.nodes[node_id], updated=now or utc_now(), **flags)


def set_flag(g: DocGraph, node_id: str, now=None, **flags):
    """Set lifecycle flags (validated, verified) by hand."""
    allowed = {"validated", "verified"}
    if set(flags) - allowed:
        raise ValueError(f"only {sorted(allowed)} can be set by hand")
    g.node(node_id)
    _set_flags(g, node_id, now, **flags)


def validate_transform(g: DocGraph, edge: DocEdge, mapping=None, now=None) -> RefinementVerdict:
    """Check a transform edge with the technical step for its document kinds
    and record the outcome in the targets' ``consistent`` flag. Documents
    are never modified."""
    if edge.kind != TRANSFORM:
        raise UnsupportedTransformShape("only transform edges can be validated")
    srcs = [g.node(n).kind for n in edge.sources]
    dsts = [g.node(n).kind for n in edge.targets]
    if set(srcs) == {DocKind.CLASS} and dsts == [DocKind.CLASS]:
        olds = [g.document(n) for n in edge.sources]
        new = g.document(edge.targets[0])
        verdicts = [refine_class_diagram(o, new) for o in olds]
    elif srcs == [DocKind.STATE] and dsts == [DocKind.STATE]:
        table = context_table(g, edge.sources + edge.targets)
        verdicts = [refine_state_diagram(g.document(edge.sources[0]),
                                         g.document(edge.targets[0]), mapping, table)]
    elif set(srcs) == {DocKind.SEQUENCE} and set(dsts) == {DocKind.STATE}:
        table = context_table(g, edge.sources + edge.targets)
        sds = [g.document(n) for n in edge.targets]
        verdicts = []
        for n in edge.sources:
            qd = g.document(n)
            relevant = [sd for sd in sds if target_role(qd, sd.body.class_name)]
            if not relevant:
                verdicts.append(RefinementVerdict((Violation(
                    "R-QD-LIFELINE", "no target state diagram matches a lifeline", qd.id),),
                    ("R-QD-LIFELINE",)))
            verdicts += [check_seq_against_state(qd, sd, table) for sd in relevant]
    else:
        raise UnsupportedTransformShape(
            f"no technical step from {[k.value for k in srcs]} to {[k.value for k in dsts]}")
    verdict = RefinementVerdict(
        tuple(v for vd in verdicts for v in vd.violations),
        tuple(dict.fromkeys(r for vd in verdicts for r in vd.checked_rules)),
        tuple(dict.fromkeys(w for vd in verdicts for w in vd.warnings)))
    for n in edge.targets:
        _set_flags(g, n, now, consistent=verdict.accepted, violations=verdict.violations)
    return verdict


def mark_redundant(g: DocGraph, node_id: str, now=None) -> bool | None:
    """A sequence diagram is redundant when some state diagram for one of its
    lifeline classes already admits it as a path. Other kinds: undecided."""
    node = g.node(node_id)
    if node.kind is not DocKind.SEQUENCE:
        warnings.warn(f"redundancy of {node.kind.value} documents is not decidable here",
                      stacklevel=2)
        return None
    qd = g.document(node_id)
    table = context_table(g, [node_id])
    redundant = False
    for nid in sorted(g.nodes):
        if g.nodes[nid].kind is not DocKind.STATE:
            continue
        sd = g.document(nid)
        try:
            if target_role(qd, sd.body.class_name) is None:
                continue
            if check_seq_against_state(qd, sd, table).accepted:
                redundant = True
                break
        except ModelError:
            continue
    _set_flags(g, node_id, now, redundant=redundant)
    return redundant


# -- manifest ---------------------------------------------------------------------------


def _tri(v) -> str:
    return "u" if v is None else str(int(v))


def render_manifest(g: DocGraph) -> str:
    lines = []
    for nid in sorted(g.nodes):
        n = g.nodes[nid]
        flags = (f"v:{int(n.validated)},V:{int(n.verified)},t:{int(n.tested)},"
                 f"c:{_tri(n.consistent)},r:{_tri(n.redundant)}")
        lines.append(f"node {nid} {n.kind.value} {quote(n.path)} author={quote(n.author)} "
                     f"created={n.created} updated={n.updated} flags={flags}")
    lines += sorted(e.render() for e in g.edges)
    return "".join(line + "\n" for line in lines)


def save(g: DocGraph) -> None:
    """Write the manifest atomically (temp file, then rename)."""
    path = Path(g.manifest_path)
    for nid, n in g.nodes.items():
        if not (path.parent / n.path).exists():
            raise FileNotFoundError(f"node {nid}: {n.path} does not exist")
    text = render_manifest(g)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".manifest.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_tri(s, lineno):
    if s == "u":
        return None
    if s in ("0", "1"):
        return s == "1"
    raise ManifestFormatError(f"bad flag value {s!r}", lineno)


def parse_manifest(text: str, manifest_path) -> DocGraph:
    g = DocGraph(Path(manifest_path))
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        try:
            if parts[0] == "node":
                if len(parts) != 8:
                    raise ManifestFormatError("node record needs 8 fields", lineno)
                _, nid, kind, path, author, created, updated, flags = parts
                fields = {}
                for tok, key in ((author, "author"), (created, "created"),
                                 (updated, "updated"), (flags, "flags")):
                    if not tok.startswith(key + "="):
                        raise ManifestFormatError(f"expected {key}=...", lineno)
                    fields[key] = tok[len(key) + 1:]
                fl = dict(f.split(":", 1) for f in fields["flags"].split(","))
                if set(fl) != {"v", "V", "t", "c", "r"}:
                    raise ManifestFormatError("flags need v, V, t, c and r", lineno)
                if nid in g.nodes:
                    raise ManifestFormatError(f"duplicate node {nid!r}", lineno)
                g.nodes[nid] = DocNode(
                    unquote(path), as_kind(kind), unquote(fields["author"]),
                    fields["created"], fields["updated"],
                    validated=_parse_tri(fl["v"], lineno) or False,
                    verified=_parse_tri(fl["V"], lineno) or False,
                    tested=_parse_tri(fl["t"], lineno) or False,
                    consistent=_parse_tri(fl["c"], lineno),
                    redundant=_parse_tri(fl["r"], lineno))
            elif parts[0] == "edge":
                if len(parts) != 5 or parts[3] != "->":
                    raise ManifestFormatError("edge record is 'edge KIND SRC -> DST'", lineno)
                if parts[1] not in (REFERS, TRANSFORM):
                    raise ManifestFormatError(f"unknown edge kind {parts[1]!r}", lineno)
                edge = DocEdge(parts[1], tuple(parts[2].split(",")),
                               tuple(parts[4].split(",")))
                for n in edge.sources + edge.targets:
                    if n not in g.nodes:
                        raise ManifestFormatError(f"edge endpoint {n!r} is not a node", lineno)
                g.edges.append(edge)
            else:
                raise ManifestFormatError(f"unknown record {parts[0]!r}", lineno)
        except ManifestFormatError:
            raise
        except (ValueError, ModelError) as exc:
            raise ManifestFormatError(str(exc), lineno) from None
    for kind in (REFERS, TRANSFORM):
        if not is_acyclic(g, kind):
            raise ManifestFormatError(f"{kind} edges form a cycle", 0)
    return g


def load(path) -> DocGraph:
    path = Path(path)
    return parse_manifest(path.read_text(encoding="utf-8"), path)
