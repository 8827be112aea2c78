"""Elaboration of diagram documents into a SystemModel, the cross-document
context conditions, and view classification."""

from __future__ import annotations

import enum
import warnings
from typing import Iterable

from .core import (ENV, Automaton, ClassTable, ObjectId, ObjectState, Signature,
                   SystemModel, check_class_table, default_valuation, effective_signature,
                   is_subclass)
from .dsl import DocKind, Document
from .errors import ElaborationError, ExprTypeError, ModelError, UnsupportedKind
from .expr import BOOL, OBJREF, conjoin, has_type, type_of, typecheck
from .report import ERROR, WARNING, Finding, ValidationReport


class View(str, enum.Enum):
    STRUCTURAL = "Structural"
    BEHAVIORAL = "Behavioral"
    DATA = "Data"
    INTERFACE = "Interface"


VIEWS = {
    DocKind.CLASS: frozenset({View.STRUCTURAL, View.DATA, View.INTERFACE}),
    DocKind.OBJECT: frozenset({View.STRUCTURAL, View.DATA}),
    DocKind.STATE: frozenset({View.BEHAVIORAL, View.DATA, View.INTERFACE}),
    DocKind.SEQUENCE: frozenset({View.BEHAVIORAL, View.INTERFACE}),
    DocKind.TEXT: frozenset(),
}


def classify_view(d: Document) -> frozenset[View]:
    """Views a document projects onto. Free text projects onto none (warns)."""
    try:
        views = VIEWS[d.kind]
    except KeyError:
        raise UnsupportedKind(f"no view classification for {d.kind!r}") from None
    if not views:
        warnings.warn(f"document {d.id!r} ({d.kind}) carries no formal view", stacklevel=2)
    return views


def _f(doc: Document, key, code, message, severity=ERROR) -> Finding:
    return Finding(severity, code, message, doc.id, doc.span(*key))


def _sorted_docs(docs: Iterable[Document]) -> list[Document]:
    return sorted(docs, key=lambda d: (d.id, d.kind.value))


# -- class table merging ----------------------------------------------------------


def merge_class_diagrams(docs: Iterable[Document]):
    """Merge class diagrams; equal redeclarations fold, different ones are findings.

    Returns ``(ClassTable, findings)``.
    """
    decls, assocs, origins, out = {}, {}, {}, []
    assoc_docs = {}
    for d in _sorted_docs(docs):
        if d.kind is not DocKind.CLASS:
            continue
        for c in d.body.classes:
            if c.name in decls and decls[c.name] != c:
                out.append(_f(d, ("class", c.name), "E-DUP-CLASS",
                              f"class {c.name!r} conflicts with its declaration in "
                              f"{origins[c.name][0]}"))
                continue
            if c.name not in decls:
                decls[c.name] = c
                origins[c.name] = (d.id, d.span("class", c.name))
        for a in d.body.associations:
            pair = (a.source, a.target)
            if a.name in assocs and assocs[a.name] != pair:
                out.append(_f(d, ("assoc", a.name), "E-DUP-ASSOC",
                              f"association {a.name!r} declared with different endpoints"))
                continue
            if a.name not in assocs:
                assocs[a.name] = pair
                assoc_docs[a.name] = d
    for name, pair in assocs.items():
        for end in pair:
            if end not in decls:
                out.append(_f(assoc_docs[name], ("assoc", name), "E-UNKNOWN-CLASS",
                              f"association {name!r} refers to unknown class {end!r}"))
    table = ClassTable(
        classes={n: Signature(c.attributes, c.methods) for n, c in decls.items()},
        parents={n: c.parent for n, c in decls.items()},
        invariants={n: conjoin(c.invariants) for n, c in decls.items() if c.invariants},
        associations=assocs,
        origins=origins,
    )
    return table, out


def class_table_of(docs: Iterable[Document]) -> ClassTable:
    return merge_class_diagrams(docs)[0]


def _effective(cls, t):
    try:
        return effective_signature(cls, t)
    except ModelError:
        return None


# -- per-document checks ---------------------------------------------------------------


def check_state_diagram(sd: Document, t: ClassTable) -> ValidationReport:
    """Triggers against the class signature; guards, actions, emits type-checked."""
    body = sd.body
    out = []
    if body.class_name not in t.classes:
        out.append(_f(sd, ("statemachine",), "E-UNKNOWN-CLASS",
                      f"state diagram for unknown class {body.class_name!r}"))
        return ValidationReport(tuple(out))
    sig = _effective(body.class_name, t)
    if sig is None:
        return ValidationReport()
    attrs = sig.attribute_types()
    for i, tr in enumerate(body.transitions):
        key = ("trans", i)
        meth = sig.method(tr.trigger)
        if meth is None:
            out.append(_f(sd, key, "E-SIG-TRIGGER",
                          f"trigger {tr.trigger!r} is not a method of {body.class_name!r}"))
            continue
        if len(meth.params) != len(tr.params):
            out.append(_f(sd, key, "E-ARITY",
                          f"trigger {tr.trigger!r} binds {len(tr.params)} parameter(s), "
                          f"method takes {len(meth.params)}"))
            continue
        env = dict(attrs)
        env.update({"self": OBJREF, "sender": OBJREF})
        env.update(zip(tr.params, meth.arg_types))
        if tr.guard is not None:
            try:
                ty = typecheck(tr.guard, env)
                if ty != BOOL:
                    raise ExprTypeError(f"guard has type {ty}")
            except ExprTypeError as exc:
                out.append(_f(sd, key, "E-GUARD-TYPE", str(exc)))
        for act in tr.actions:
            if act.attr not in attrs:
                out.append(_f(sd, key, "E-UNKNOWN-ATTR",
                              f"assignment to unknown attribute {act.attr!r}"))
                continue
            try:
                ty = typecheck(act.expr, env)
                if ty != attrs[act.attr]:
                    raise ExprTypeError(f"{act.attr!r} has type {attrs[act.attr]}, "
                                        f"assigned {ty}")
            except ExprTypeError as exc:
                out.append(_f(sd, key, "E-ACTION-TYPE", str(exc)))
            if act.attr not in tr.params:
                env[act.attr] = attrs[act.attr]
        for em in tr.outputs:
            try:
                for a in em.args:
                    typecheck(a, env)
                if typecheck(em.target, env) != OBJREF:
                    raise ExprTypeError(f"target of emit {em.selector!r} is not an ObjectRef")
            except ExprTypeError as exc:
                out.append(_f(sd, key, "E-EMIT-TYPE", str(exc)))
    return ValidationReport(tuple(out))


def check_object_diagram(od: Document, t: ClassTable) -> ValidationReport:
    """Objects, attribute bindings and links against the class table."""
    body = od.body
    out = []
    classes = {}
    for o in body.objects:
        key = ("object", o.id)
        if o.cls not in t.classes:
            out.append(_f(od, key, "E-UNKNOWN-CLASS",
                          f"object {o.id!r} has undeclared class {o.cls!r}"))
            continue
        classes[o.id] = o.cls
        sig = _effective(o.cls, t)
        if sig is None:
            continue
        for name, value in o.bindings:
            attr = sig.attribute(name)
            if attr is None:
                out.append(_f(od, key, "E-ATTR-UNKNOWN",
                              f"{o.cls!r} has no attribute {name!r}"))
            elif not has_type(value, attr.type):
                out.append(_f(od, key, "E-ATTR-TYPE",
                              f"{o.id}.{name} expects {attr.type}, got {type_of(value)}"))
    for i, ln in enumerate(body.links):
        key = ("link", i)
        if ln.assoc not in t.associations:
            out.append(_f(od, key, "E-UNKNOWN-ASSOC",
                          f"link over undeclared association {ln.assoc!r}"))
            continue
        src_cls, dst_cls = t.associations[ln.assoc]
        for end, want in ((ln.source, src_cls), (ln.target, dst_cls)):
            have = classes.get(end)
            if have is None:
                continue
            try:
                ok = want in t.classes and is_subclass(have, want, t)
            except ModelError:
                ok = False
            if not ok:
                out.append(_f(od, key, "E-LINK-ENDPOINT",
                              f"link {ln.assoc!r}: {end!r} is a {have}, expected {want}"))
    for c in body.creatables:
        if c.cls not in t.classes:
            out.append(_f(od, ("creatable", c.id), "E-UNKNOWN-CLASS",
                          f"creatable {c.id!r} has undeclared class {c.cls!r}"))
    return ValidationReport(tuple(out))


def check_sequence_diagram(qd: Document, t: ClassTable) -> ValidationReport:
    """Lifeline classes exist; every event is in the receiver's signature."""
    body = qd.body
    out = []
    for role, cls in body.lifelines:
        if cls not in t.classes:
            out.append(_f(qd, ("lifeline", role), "E-UNKNOWN-CLASS",
                          f"lifeline {role!r} has undeclared class {cls!r}"))
    for i, ev in enumerate(body.events):
        if ev.receiver == ENV:
            continue
        cls = body.class_of(ev.receiver)
        sig = _effective(cls, t) if cls in t.classes else None
        if sig is None:
            continue
        key = ("event", i)
        meth = sig.method(ev.selector)
        if meth is None:
            out.append(_f(qd, key, "E-UNKNOWN-SELECTOR",
                          f"{cls!r} has no method {ev.selector!r}"))
        elif len(meth.params) != len(ev.args):
            out.append(_f(qd, key, "E-ARITY",
                          f"{ev.selector!r} takes {len(meth.params)} argument(s), "
                          f"got {len(ev.args)}"))
        else:
            for p, v in zip(meth.params, ev.args):
                if not has_type(v, p.type):
                    out.append(_f(qd, key, "E-ARG-TYPE",
                                  f"{ev.selector}: {p.name} expects {p.type}, "
                                  f"got {type_of(v)}"))
    return ValidationReport(tuple(out))


# -- elaboration ---------------------------------------------------------------------


def _default_objects(t: ClassTable):
    """One instance per class, named after the class with a lower-case initial."""
    objs = []
    for cls in sorted(t.classes):
        name = cls[0].lower() + cls[1:]
        if name != ENV:
            objs.append((name, cls, ()))
    return objs


def check_documents(docs: Iterable[Document], refers_to=(), object_diagram=None):
    """Run every context condition. Returns ``(report, parts)`` where ``parts``
    holds what elaboration needs when the report has no errors."""
    docs = _sorted_docs(docs)
    ids = {d.id for d in docs}
    out: list[Finding] = []
    for src, dst in refers_to:
        if src not in ids or dst not in ids:
            out.append(Finding(ERROR, "E-REFERS-UNKNOWN",
                               f"refers-to edge {src} -> {dst} leaves the document set",
                               src if src in ids else ""))
    cds = [d for d in docs if d.kind is DocKind.CLASS]
    if not cds:
        out.append(Finding(ERROR, "E-NO-CLASS-DIAGRAM", "no class diagram in document set"))
    table, merge_findings = merge_class_diagrams(cds)
    out += merge_findings
    out += check_class_table(table).findings
    automata, owners = {}, {}
    for d in docs:
        if d.kind is DocKind.TEXT:
            out.append(_f(d, ("document",), "W-TEXT", "free text carries no formal view",
                          WARNING))
        elif d.kind is DocKind.STATE:
            rep = check_state_diagram(d, table)
            out += rep.findings
            cls = d.body.class_name
            if cls in owners:
                out.append(_f(d, ("statemachine",), "E-DUP-AUTOMATON",
                              f"class {cls!r} already has a state diagram in {owners[cls]}"))
            elif rep.ok and cls in table.classes:
                owners[cls] = d.id
                b = d.body
                automata[cls] = Automaton(cls, b.states, b.initial, b.transitions)
        elif d.kind is DocKind.SEQUENCE:
            out += check_sequence_diagram(d, table).findings
        elif d.kind is DocKind.OBJECT:
            out += check_object_diagram(d, table).findings
    ods = [d for d in docs if d.kind is DocKind.OBJECT]
    od = None
    if object_diagram is not None:
        od = next((d for d in ods if d.id == object_diagram), None)
        if od is None:
            out.append(Finding(ERROR, "E-NO-OBJECTS",
                               f"designated object diagram {object_diagram!r} not found"))
    elif len(ods) == 1:
        od = ods[0]
    elif len(ods) > 1:
        out.append(Finding(ERROR, "E-AMBIGUOUS-OBJECTS",
                           "several object diagrams and none designated", ods[0].id))
    parts = {"table": table, "automata": automata, "od": od}
    if od is not None:
        initial = {o.id for o in od.body.objects}
        owner_of = {}
        for c in od.body.creatables:
            if c.id in initial:
                out.append(_f(od, ("creatable", c.id), "E-CREATABLE-INITIAL",
                              f"initial object {c.id!r} cannot be creatable"))
            if c.id in owner_of:
                out.append(_f(od, ("creatable", c.id), "E-CREATABLE-OVERLAP",
                              f"{c.id!r} is creatable by several owners"))
            owner_of[c.id] = c.owner
    return ValidationReport(tuple(out)), parts


def elaborate(docs: Iterable[Document], refers_to=(), object_diagram=None) -> SystemModel:
    """Build the canonical SystemModel satisfying all documents.

    Classes without a state diagram get the stutter automaton. Initial
    objects come from the designated object diagram (or the only one);
    without any, each class contributes one default instance. Raises
    ElaborationError carrying the report when a context condition fails.
    """
    report, parts = check_documents(docs, refers_to, object_diagram)
    if not report.ok:
        raise ElaborationError(report)
    table = parts["table"]
    automata = dict(parts["automata"])
    for cls in table.classes:
        if cls not in automata:
            automata[cls] = Automaton(cls, ("idle",), ("idle",), ())
    od = parts["od"]
    if od is not None:
        objs = [(o.id, o.cls, o.bindings) for o in od.body.objects]
        creat: dict[str, set] = {}
        for c in od.body.creatables:
            creat.setdefault(c.owner, set()).add(ObjectId(c.id, c.cls))
    else:
        objs, creat = _default_objects(table), {}
    initial = []
    for name, cls, binds in objs:
        vals = default_valuation(effective_signature(cls, table))
        vals.update(binds)
        initial.append((ObjectId(name, cls),
                        ObjectState.of(automata[cls].initial_controls[0], vals)))
    try:
        return SystemModel(table, automata, tuple(initial),
                           {k: frozenset(v) for k, v in creat.items()})
    except ModelError as exc:
        raise ElaborationError(ValidationReport((
            Finding(ERROR, "E-MODEL", str(exc), od.id if od else ""),))) from exc
