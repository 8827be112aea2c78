"""Textual diagram notations: parsing into Documents and canonical serialization.

One diagram per file. Grammar (``[]`` optional, ``*`` repetition, ``;``
terminators optional)::

    class NAME [extends NAME] { (attr NAME: TYPE | method NAME(P: T, ...): TYPE
                                 | invariant EXPR)* }
    assoc NAME: CLASS -> CLASS

    statemachine CLASS {
      states NAME, ... ; initial NAME, ... ;
      trans SRC -> DST on SEL(p, ...) [if EXPR] [/ x := EXPR, ..., emit SEL(EXPR, ...) to EXPR, ...]
    }

    sequence NAME {
      objects role: Class, ... ;
      role -> role : SEL(LITERAL, ...)
      state role = LABEL
    }

    objects {
      id: Class [{ attr = LITERAL, ... }]
      link ASSOC id -> id
      creatable id: Class by OWNER
    }

``env`` is an implicit lifeline in sequence diagrams and a valid creator
in object diagrams. Comments run from ``//`` to end of line.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .core import ENV, Assign, Attribute, Emit, MethodSig, Param, Transition
from .errors import DslSyntaxError, DuplicateName, UnknownKind
from .expr import Expr, format_expr, format_value
from .syntax import BaseParser, Span


class DocKind(str, enum.Enum):
    CLASS = "ClassDiagram"
    OBJECT = "ObjectDiagram"
    STATE = "StateDiagram"
    SEQUENCE = "SequenceDiagram"
    TEXT = "Text"

    def __str__(self):
        return self.value


EXTENSIONS = {
    ".cd": DocKind.CLASS,
    ".od": DocKind.OBJECT,
    ".sd": DocKind.STATE,
    ".qd": DocKind.SEQUENCE,
    ".txt": DocKind.TEXT,
}
FORMAL_KINDS = frozenset({DocKind.CLASS, DocKind.OBJECT, DocKind.STATE, DocKind.SEQUENCE})


def kind_for_path(path) -> DocKind:
    ext = Path(path).suffix
    try:
        return EXTENSIONS[ext]
    except KeyError:
        raise UnknownKind(f"no diagram kind for extension {ext!r}", doc=str(path)) from None


def as_kind(kind) -> DocKind:
    if isinstance(kind, DocKind):
        return kind
    for k in DocKind:
        if kind in (k.value, k.name, k.name.lower()):
            return k
    for ext, k in EXTENSIONS.items():
        if kind in (ext, ext[1:]):
            return k
    raise UnknownKind(f"unknown document kind {kind!r}")


# -- bodies --------------------------------------------------------------------


@dataclass(frozen=True)
class ClassDecl:
    name: str
    parent: str | None = None
    attributes: tuple[Attribute, ...] = ()
    methods: tuple[MethodSig, ...] = ()
    invariants: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Association:
    name: str
    source: str
    target: str


@dataclass(frozen=True)
class ClassDiagramBody:
    classes: tuple[ClassDecl, ...] = ()
    associations: tuple[Association, ...] = ()


@dataclass(frozen=True)
class StateDiagramBody:
    class_name: str
    states: tuple[str, ...]
    initial: tuple[str, ...]
    transitions: tuple[Transition, ...] = ()


@dataclass(frozen=True)
class Event:
    sender: str
    receiver: str
    selector: str
    args: tuple = ()


@dataclass(frozen=True)
class StateMark:
    index: int  # number of events preceding the mark
    role: str
    label: str


@dataclass(frozen=True)
class SequenceDiagramBody:
    name: str
    lifelines: tuple[tuple[str, str], ...]
    events: tuple[Event, ...] = ()
    marks: tuple[StateMark, ...] = ()

    def class_of(self, role: str) -> str | None:
        return dict(self.lifelines).get(role)


@dataclass(frozen=True)
class ObjectDecl:
    id: str
    cls: str
    bindings: tuple[tuple[str, object], ...] = ()


@dataclass(frozen=True)
class Link:
    assoc: str
    source: str
    target: str


@dataclass(frozen=True)
class CreatableDecl:
    id: str
    cls: str
    owner: str


@dataclass(frozen=True)
class ObjectDiagramBody:
    objects: tuple[ObjectDecl, ...] = ()
    links: tuple[Link, ...] = ()
    creatables: tuple[CreatableDecl, ...] = ()


@dataclass(frozen=True)
class TextBody:
    text: str


Body = Union[ClassDiagramBody, StateDiagramBody, SequenceDiagramBody,
             ObjectDiagramBody, TextBody]


@dataclass(frozen=True)
class Document:
    id: str
    kind: DocKind
    body: Body
    source: str = field(default="", compare=False, repr=False)
    # node key (a tuple such as ("class", "A")) -> source span
    spans: dict = field(default_factory=dict, compare=False, repr=False)

    def span(self, *key) -> Span | None:
        return self.spans.get(key) or self.spans.get(("document",))


# -- parser ----------------------------------------------------------------------

TYPE_NAMES = ("Int", "Bool", "String", "ObjectRef")


class _DiagramParser(BaseParser):
    def __init__(self, text, doc):
        super().__init__(text, doc)
        self.spans: dict = {}

    def mark(self, key, start: Span):
        if key in self.spans:
            raise DuplicateName(f"duplicate declaration of {key[-1]!r}",
                                start.line, start.col, self.doc)
        self.spans[key] = start.cover(self.last_span)

    def type_name(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text not in TYPE_NAMES:
            self.error(set(TYPE_NAMES))
        return self.advance().text

    def skip_semis(self):
        while self.accept(";"):
            pass

    # class diagrams
    def class_diagram(self) -> ClassDiagramBody:
        classes, assocs = [], []
        while not self.at_kind("eof"):
            if self.at("class"):
                classes.append(self.class_decl())
            elif self.at("assoc"):
                start = self.advance().span
                name = self.ident("association name").text
                self.expect(":")
                src = self.ident("class name").text
                self.expect("->")
                dst = self.ident("class name").text
                self.mark(("assoc", name), start)
                assocs.append(Association(name, src, dst))
            else:
                self.error({"'class'", "'assoc'"})
            self.skip_semis()
        return ClassDiagramBody(tuple(classes), tuple(assocs))

    def class_decl(self) -> ClassDecl:
        start = self.expect("class").span
        name = self.ident("class name").text
        parent = None
        if self.accept("extends"):
            parent = self.ident("class name").text
        self.expect("{")
        attrs, methods, invs = [], [], []
        while not self.at("}"):
            mstart = self.tok.span
            if self.accept("attr"):
                an = self.ident("attribute name").text
                self.expect(":")
                attrs.append(Attribute(an, self.type_name()))
                self.mark(("attr", name, an), mstart)
            elif self.accept("method"):
                mn = self.ident("method name").text
                self.expect("(")
                params = []
                if not self.at(")"):
                    while True:
                        pn = self.ident("parameter name")
                        self.expect(":")
                        if any(p.name == pn.text for p in params):
                            raise DuplicateName(f"duplicate parameter {pn.text!r}",
                                                pn.span.line, pn.span.col, self.doc)
                        params.append(Param(pn.text, self.type_name()))
                        if not self.accept(","):
                            break
                self.expect(")")
                self.expect(":")
                methods.append(MethodSig(mn, tuple(params), self.type_name()))
                self.mark(("method", name, mn), mstart)
            elif self.accept("invariant"):
                invs.append(self.expression())
                self.mark(("invariant", name, len(invs) - 1), mstart)
            else:
                self.error({"'attr'", "'method'", "'invariant'", "'}'"})
            self.skip_semis()
        self.expect("}")
        self.mark(("class", name), start)
        return ClassDecl(name, parent, tuple(attrs), tuple(methods), tuple(invs))

    # state diagrams
    def state_diagram(self) -> StateDiagramBody:
        start = self.expect("statemachine").span
        cls = self.ident("class name").text
        self.expect("{")
        self.skip_semis()
        self.expect("states")
        states = []
        for t in self.name_list("state name"):
            self.mark(("state", t.text), t.span)
            states.append(t.text)
        self.skip_semis()
        istart = self.expect("initial").span
        initial = [t.text for t in self.name_list("state name")]
        self.spans[("initial",)] = istart.cover(self.last_span)
        for s in initial:
            if s not in states:
                raise DslSyntaxError(f"initial state {s!r} is not declared", istart.line,
                                     istart.col, doc=self.doc)
        if len(set(initial)) != len(initial):
            raise DuplicateName("duplicate initial state", istart.line, istart.col, self.doc)
        self.skip_semis()
        transitions = []
        while self.at("trans"):
            transitions.append(self.transition(len(transitions), set(states)))
            self.skip_semis()
        self.expect("}")
        self.spans[("statemachine",)] = start.cover(self.last_span)
        return StateDiagramBody(cls, tuple(states), tuple(initial), tuple(transitions))

    def transition(self, index, states) -> Transition:
        start = self.expect("trans").span
        src = self.ident("state name")
        self.expect("->")
        dst = self.ident("state name")
        for t in (src, dst):
            if t.text not in states:
                raise DslSyntaxError(f"undeclared state {t.text!r}", t.span.line,
                                     t.span.col, doc=self.doc)
        self.expect("on")
        trig = self.ident("trigger selector").text
        self.expect("(")
        params = []
        if not self.at(")"):
            params = [t.text for t in self.name_list("parameter name")]
        self.expect(")")
        if len(set(params)) != len(params):
            raise DuplicateName("duplicate trigger parameter", start.line, start.col, self.doc)
        guard = None
        if self.accept("if"):
            guard = self.expression()
        actions, outputs = [], []
        if self.accept("/"):
            while True:
                if self.at("emit"):
                    self.advance()
                    sel = self.ident("selector").text
                    self.expect("(")
                    args = []
                    if not self.at(")"):
                        args.append(self.expression())
                        while self.accept(","):
                            args.append(self.expression())
                    self.expect(")")
                    self.expect("to")
                    outputs.append(Emit(sel, tuple(args), self.expression()))
                elif self.at_kind("ident"):
                    t = self.advance()
                    if outputs:
                        raise DslSyntaxError("assignments must precede emits",
                                             t.span.line, t.span.col, doc=self.doc)
                    self.expect(":=")
                    actions.append(Assign(t.text, self.expression()))
                else:
                    self.error({"attribute name", "'emit'"})
                if not self.accept(","):
                    break
        self.spans[("trans", index)] = start.cover(self.last_span)
        return Transition(src.text, dst.text, trig, tuple(params), guard,
                          tuple(actions), tuple(outputs))

    # sequence diagrams
    def sequence_diagram(self) -> SequenceDiagramBody:
        start = self.expect("sequence").span
        name = self.ident("diagram name").text
        self.expect("{")
        self.skip_semis()
        self.expect("objects")
        lifelines = []
        while True:
            rstart = self.tok.span
            role = self.ident("role name").text
            if role == ENV:
                self.error(set(), f"{ENV!r} is an implicit lifeline")
            self.expect(":")
            lifelines.append((role, self.ident("class name").text))
            self.mark(("lifeline", role), rstart)
            if not self.accept(","):
                break
        roles = {r for r, _ in lifelines} | {ENV}
        self.skip_semis()
        events, marks = [], []
        while not self.at("}"):
            estart = self.tok.span
            if self.accept("state"):
                role = self.ident("role name")
                self.expect("=")
                label = self.ident("state label").text
                self._check_role(role, roles)
                marks.append(StateMark(len(events), role.text, label))
                self.spans[("mark", len(marks) - 1)] = estart.cover(self.last_span)
            else:
                snd = self.ident("role name")
                self.expect("->")
                rcv = self.ident("role name")
                self.expect(":")
                sel = self.ident("selector").text
                args = self.literal_list()
                self._check_role(snd, roles)
                self._check_role(rcv, roles)
                events.append(Event(snd.text, rcv.text, sel, args))
                self.spans[("event", len(events) - 1)] = estart.cover(self.last_span)
            self.skip_semis()
        self.expect("}")
        self.spans[("sequence",)] = start.cover(self.last_span)
        return SequenceDiagramBody(name, tuple(lifelines), tuple(events), tuple(marks))

    def _check_role(self, tok, roles):
        if tok.text not in roles:
            raise DslSyntaxError(f"undeclared lifeline {tok.text!r}", tok.span.line,
                                 tok.span.col, doc=self.doc)

    # object diagrams
    def object_diagram(self) -> ObjectDiagramBody:
        self.expect("objects")
        self.expect("{")
        objs, links, creatables = [], [], []
        while not self.at("}"):
            start = self.tok.span
            if self.accept("link"):
                assoc = self.ident("association name").text
                src = self.ident("object id")
                self.expect("->")
                dst = self.ident("object id")
                links.append(Link(assoc, src.text, dst.text))
                self.spans[("link", len(links) - 1)] = start.cover(self.last_span)
            elif self.accept("creatable"):
                oid = self.ident("object id").text
                self.expect(":")
                cls = self.ident("class name").text
                self.expect("by")
                owner = self.ident("owner id").text
                self.mark(("creatable", oid), start)
                creatables.append(CreatableDecl(oid, cls, owner))
            else:
                oid = self.ident("object id").text
                if oid == ENV:
                    self.error(set(), f"{ENV!r} is reserved")
                self.expect(":")
                cls = self.ident("class name").text
                binds = []
                if self.accept("{"):
                    if not self.at("}"):
                        while True:
                            an = self.ident("attribute name")
                            self.expect("=")
                            if any(n == an.text for n, _ in binds):
                                raise DuplicateName(f"attribute {an.text!r} bound twice",
                                                    an.span.line, an.span.col, self.doc)
                            binds.append((an.text, self.literal()))
                            if not self.accept(","):
                                break
                    self.expect("}")
                self.mark(("object", oid), start)
                objs.append(ObjectDecl(oid, cls, tuple(binds)))
            self.skip_semis()
        self.expect("}")
        declared = {o.id for o in objs}
        for i, ln in enumerate(links):
            for end in (ln.source, ln.target):
                if end not in declared:
                    s = self.spans[("link", i)]
                    raise DslSyntaxError(f"link endpoint {end!r} is not declared",
                                         s.line, s.col, doc=self.doc)
        for c in creatables:
            if c.id in declared:
                raise DuplicateName(f"{c.id!r} is both an object and a creatable",
                                    *self._pos(("creatable", c.id)), self.doc)
            if c.owner != ENV and c.owner not in declared and c.owner not in \
                    {x.id for x in creatables}:
                raise DslSyntaxError(f"creator {c.owner!r} is not declared",
                                     *self._pos(("creatable", c.id)), doc=self.doc)
        return ObjectDiagramBody(tuple(objs), tuple(links), tuple(creatables))

    def _pos(self, key):
        s = self.spans[key]
        return s.line, s.col


def parse(kind, text: str, doc_id: str = "<string>") -> Document:
    """Parse ``text`` as a diagram of ``kind`` into a Document."""
    kind = as_kind(kind)
    if kind is DocKind.TEXT:
        lines = text.split("\n")
        span = Span(1, 1, len(lines), len(lines[-1]) + 1)
        return Document(doc_id, kind, TextBody(text), text, {("document",): span})
    p = _DiagramParser(text, doc_id)
    body = {
        DocKind.CLASS: p.class_diagram,
        DocKind.STATE: p.state_diagram,
        DocKind.SEQUENCE: p.sequence_diagram,
        DocKind.OBJECT: p.object_diagram,
    }[kind]()
    p.expect_eof()
    first, last = p.tokens[0].span, p.tokens[-1].span
    p.spans[("document",)] = first.cover(last)
    return Document(doc_id, kind, body, text, p.spans)


def parse_file(path, doc_id: str | None = None) -> Document:
    path = Path(path)
    return parse(kind_for_path(path), path.read_text(encoding="utf-8"),
                 doc_id if doc_id is not None else str(path))


# -- serializer -----------------------------------------------------------------


def _params(ps) -> str:
    return ", ".join(f"{p.name}: {p.type}" for p in ps)


def _lits(vals) -> str:
    return ", ".join(format_value(v) for v in vals)


def format_transition(t: Transition) -> str:
    text = f"trans {t.source} -> {t.target} on {t.trigger}({', '.join(t.params)})"
    if t.guard is not None:
        text += f" if {format_expr(t.guard)}"
    effects = [f"{a.attr} := {format_expr(a.expr)}" for a in t.actions]
    effects += [f"emit {e.selector}({', '.join(format_expr(x) for x in e.args)})"
                f" to {format_expr(e.target)}" for e in t.outputs]
    if effects:
        text += " / " + ", ".join(effects)
    return text


def serialize(d) -> str:
    """Canonical text: 2-space indent, declaration order preserved."""
    body = d.body if isinstance(d, Document) else d
    if isinstance(body, TextBody):
        return body.text
    if isinstance(body, ClassDiagramBody):
        blocks = []
        for c in body.classes:
            head = f"class {c.name}" + (f" extends {c.parent}" if c.parent else "") + " {\n"
            lines = [f"  attr {a.name}: {a.type}\n" for a in c.attributes]
            lines += [f"  method {m.name}({_params(m.params)}): {m.result}\n"
                      for m in c.methods]
            lines += [f"  invariant {format_expr(e)}\n" for e in c.invariants]
            blocks.append(head + "".join(lines) + "}\n")
        if body.associations:
            blocks.append("".join(f"assoc {a.name}: {a.source} -> {a.target}\n"
                                  for a in body.associations))
        return "\n".join(blocks)
    if isinstance(body, StateDiagramBody):
        out = [f"statemachine {body.class_name} {{\n",
               f"  states {', '.join(body.states)}\n",
               f"  initial {', '.join(body.initial)}\n"]
        out += [f"  {format_transition(t)}\n" for t in body.transitions]
        out.append("}\n")
        return "".join(out)
    if isinstance(body, SequenceDiagramBody):
        out = [f"sequence {body.name} {{\n",
               "  objects " + ", ".join(f"{r}: {c}" for r, c in body.lifelines) + "\n"]
        marks = sorted(body.marks, key=lambda m: m.index)
        mi = 0
        for i in range(len(body.events) + 1):
            while mi < len(marks) and marks[mi].index == i:
                out.append(f"  state {marks[mi].role} = {marks[mi].label}\n")
                mi += 1
            if i < len(body.events):
                e = body.events[i]
                out.append(f"  {e.sender} -> {e.receiver} : {e.selector}({_lits(e.args)})\n")
        out.append("}\n")
        return "".join(out)
    if isinstance(body, ObjectDiagramBody):
        out = ["objects {\n"]
        for o in body.objects:
            line = f"  {o.id}: {o.cls}"
            if o.bindings:
                line += " { " + ", ".join(f"{n} = {format_value(v)}"
                                          for n, v in o.bindings) + " }"
            out.append(line + "\n")
        out += [f"  link {ln.assoc} {ln.source} -> {ln.target}\n" for ln in body.links]
        out += [f"  creatable {c.id}: {c.cls} by {c.owner}\n" for c in body.creatables]
        out.append("}\n")
        return "".join(out)
    raise TypeError(f"cannot serialize {type(body).__name__}")
