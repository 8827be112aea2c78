"""The system model: identifiers, messages, timed streams, signatures,
class tables with inheritance, per-class automata, and system models.

All values here are immutable. The operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import (ConflictingInheritedMember, EvaluationError, ExplosionLimit,
                     ExprTypeError, InheritanceCycle, InvalidModel, UnknownClass,
                     UnknownObject)
from .expr import (BOOL, DEFAULTS, OBJREF, VALUE_TYPES, Expr, Ref, Value, evaluate,
                   format_value, has_type, holds, type_of, typecheck)
from .report import ERROR, Finding, ValidationReport

ENV = "env"
DEFAULT_CAP = 10_000


# -- signatures and class tables -------------------------------------------


@dataclass(frozen=True)
class Attribute:
    name: str
    type: str


@dataclass(frozen=True)
class Param:
    name: str
    type: str


@dataclass(frozen=True)
class MethodSig:
    name: str
    params: tuple[Param, ...]
    result: str

    @property
    def arg_types(self) -> tuple[str, ...]:
        return tuple(p.type for p in self.params)

    def same_type(self, other: "MethodSig") -> bool:
        return self.arg_types == other.arg_types and self.result == other.result


@dataclass(frozen=True)
class Signature:
    attributes: tuple[Attribute, ...] = ()
    methods: tuple[MethodSig, ...] = ()

    def attribute(self, name: str) -> Attribute | None:
        return next((a for a in self.attributes if a.name == name), None)

    def method(self, name: str) -> MethodSig | None:
        return next((m for m in self.methods if m.name == name), None)

    def members(self) -> frozenset:
        """Members as comparable tuples; parameter names do not count."""
        return frozenset(
            [("attr", a.name, a.type) for a in self.attributes]
            + [("method", m.name, m.arg_types, m.result) for m in self.methods])

    def attribute_types(self) -> dict[str, str]:
        return {a.name: a.type for a in self.attributes}


@dataclass(frozen=True)
class ClassTable:
    classes: Mapping[str, Signature]
    parents: Mapping[str, str | None] = field(default_factory=dict)
    invariants: Mapping[str, Expr | None] = field(default_factory=dict)
    # association name -> (source class, target class)
    associations: Mapping[str, tuple[str, str]] = field(default_factory=dict)
    # class -> (document id, span) for diagnostics
    origins: Mapping[str, tuple] = field(default_factory=dict, compare=False)

    def parent(self, c: str) -> str | None:
        return self.parents.get(c)


def ancestry(c: str, t: ClassTable) -> list[str]:
    """``c`` followed by its ancestors, nearest first."""
    if c not in t.classes:
        raise UnknownClass(f"unknown class {c!r}")
    chain = [c]
    p = t.parent(c)
    while p is not None:
        if p in chain:
            raise InheritanceCycle(f"inheritance cycle through {p!r}")
        if p not in t.classes:
            raise UnknownClass(f"unknown parent class {p!r} of {chain[-1]!r}")
        chain.append(p)
        p = t.parent(p)
    return chain


def is_subclass(c: str, d: str, t: ClassTable) -> bool:
    """c ⊑ d: reflexive-transitive closure of the parent relation."""
    return d in ancestry(c, t)


def effective_signature(c: str, t: ClassTable) -> Signature:
    """Union of the signatures of ``c`` and all its ancestors.

    Ancestor members come first, each class contributing in declaration
    order. Redeclaring an inherited member with the same type is allowed
    and keeps the ancestor's position; a changed type raises
    ConflictingInheritedMember.
    """
    attrs: dict[str, Attribute] = {}
    methods: dict[str, MethodSig] = {}
    for cls in reversed(ancestry(c, t)):
        sig = t.classes[cls]
        for a in sig.attributes:
            prev = attrs.get(a.name)
            if prev is None:
                attrs[a.name] = a
            elif prev.type != a.type:
                raise ConflictingInheritedMember(
                    f"class {cls!r} redeclares attribute {a.name!r} as {a.type} "
                    f"(inherited as {prev.type})")
        for m in sig.methods:
            prev = methods.get(m.name)
            if prev is None:
                methods[m.name] = m
            elif not prev.same_type(m):
                raise ConflictingInheritedMember(
                    f"class {cls!r} redeclares method {m.name!r} with a different type")
    return Signature(tuple(attrs.values()), tuple(methods.values()))


def _finding(t: ClassTable, c: str, code: str, message: str) -> Finding:
    doc, span = t.origins.get(c, ("", None))
    return Finding(ERROR, code, message, doc, span)


def check_class_table(t: ClassTable) -> ValidationReport:
    """Report inheritance cycles, unknown parents, duplicate or conflicting
    members, bad member types and ill-typed invariants."""
    out: list[Finding] = []
    broken: set[str] = set()
    for c in t.classes:
        p = t.parent(c)
        if p is not None and p not in t.classes:
            out.append(_finding(t, c, "E-UNKNOWN-PARENT",
                                f"class {c!r} extends unknown class {p!r}"))
        seen = [c]
        while p is not None and p in t.classes:
            if p in seen:
                cycle = seen[seen.index(p):]
                if c == min(cycle):
                    out.append(_finding(t, c, "E-CYCLE",
                                        "inheritance cycle: " + " -> ".join(cycle + [p])))
                broken.add(c)
                break
            seen.append(p)
            p = t.parent(p)
        if p is not None and p not in t.classes:
            broken.add(c)
    for c, sig in t.classes.items():
        for kind, names in (("attribute", [a.name for a in sig.attributes]),
                            ("method", [m.name for m in sig.methods])):
            dups = sorted({n for n in names if names.count(n) > 1})
            for n in dups:
                out.append(_finding(t, c, "E-DUP-MEMBER",
                                    f"class {c!r} declares {kind} {n!r} twice"))
        types = [(a.name, a.type) for a in sig.attributes]
        for m in sig.methods:
            types += [(f"{m.name}.{p.name}", p.type) for p in m.params]
            types.append((f"{m.name}()", m.result))
        for name, ty in types:
            if ty not in VALUE_TYPES:
                out.append(_finding(t, c, "E-UNKNOWN-TYPE",
                                    f"{c}.{name} has unknown type {ty!r}"))
    for c in t.classes:
        if c in broken:
            continue
        try:
            eff = effective_signature(c, t)
        except ConflictingInheritedMember as exc:
            out.append(_finding(t, c, "E-CONFLICT", str(exc)))
            continue
        inv = t.invariants.get(c)
        if inv is not None:
            env = eff.attribute_types()
            env["self"] = OBJREF
            try:
                ty = typecheck(inv, env)
                if ty != BOOL:
                    raise ExprTypeError(f"invariant has type {ty}, expected Bool")
            except ExprTypeError as exc:
                out.append(_finding(t, c, "E-INVARIANT-TYPE",
                                    f"invariant of {c!r}: {exc}"))
    return ValidationReport(tuple(out))


# -- objects and messages -----------------------------------------------------


@dataclass(frozen=True, order=True)
class ObjectId:
    name: str
    cls: str

    def __str__(self):
        return self.name


CALL, RETURN = "call", "return"


@dataclass(frozen=True, order=True)
class Message:
    sender: str
    receiver: str
    selector: str
    args: tuple = ()
    tag: str = CALL

    def __str__(self):
        args = ",".join(format_value(a) for a in self.args)
        text = f"{self.sender}->{self.receiver}.{self.selector}({args})"
        return text + "!return" if self.tag == RETURN else text


class _Tick:
    """Time-progress marker in a timed stream."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "TICK"

    def __reduce__(self):
        return (_Tick, ())


TICK = _Tick()


@dataclass(frozen=True)
class TimedStream:
    """Finite prefix of a timed stream: items interleaved with TICKs."""

    events: tuple = ()

    def ticks(self) -> int:
        return sum(1 for e in self.events if e is TICK)

    def items(self) -> list:
        return [e for e in self.events if e is not TICK]

    def rounds(self) -> list[list]:
        """Items grouped by the round they occur in (one list per TICK)."""
        out, cur = [], []
        for e in self.events:
            if e is TICK:
                out.append(cur)
                cur = []
            else:
                cur.append(e)
        if cur:
            out.append(cur)
        return out

    def truncate(self, k: int) -> "TimedStream":
        """Prefix ending right after the k-th TICK."""
        n = 0
        for i, e in enumerate(self.events):
            if e is TICK:
                n += 1
                if n == k:
                    return TimedStream(self.events[: i + 1])
        return self if k > 0 else TimedStream(())

    def __add__(self, other) -> "TimedStream":
        return TimedStream(self.events + tuple(other))


# -- automata ------------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    attr: str
    expr: Expr


@dataclass(frozen=True)
class Emit:
    selector: str
    args: tuple[Expr, ...]
    target: Expr


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    trigger: str
    params: tuple[str, ...] = ()
    guard: Expr | None = None
    actions: tuple[Assign, ...] = ()
    outputs: tuple[Emit, ...] = ()


@dataclass(frozen=True)
class Automaton:
    owner_class: str
    control_states: tuple[str, ...]
    initial_controls: tuple[str, ...]
    transitions: tuple[Transition, ...] = ()

    def __post_init__(self):
        states = set(self.control_states)
        if not self.initial_controls:
            raise InvalidModel(f"automaton of {self.owner_class!r} has no initial state")
        bad = [s for s in self.initial_controls if s not in states]
        for tr in self.transitions:
            bad += [s for s in (tr.source, tr.target) if s not in states]
        if bad:
            raise InvalidModel(f"automaton of {self.owner_class!r} uses undeclared "
                               f"state(s) {sorted(set(bad))}")


def stutter_automaton(cls: str) -> Automaton:
    """One control state, no transitions: every message is consumed silently."""
    return Automaton(cls, ("idle",), ("idle",), ())


@dataclass(frozen=True, order=True)
class ObjectState:
    control: str
    valuation: tuple[tuple[str, Value], ...] = ()

    @classmethod
    def of(cls, control: str, values: Mapping[str, Value]) -> "ObjectState":
        return cls(control, tuple(sorted(values.items())))

    @property
    def values(self) -> dict[str, Value]:
        return dict(self.valuation)

    def __str__(self):
        binds = ",".join(f"{k}={format_value(v)}" for k, v in self.valuation)
        return f"{self.control},{{{binds}}}"


def default_valuation(sig: Signature) -> dict[str, Value]:
    return {a.name: DEFAULTS[a.type] for a in sig.attributes}


@dataclass(frozen=True)
class SystemModel:
    class_table: ClassTable
    automata: Mapping[str, Automaton]
    initial_objects: tuple[tuple[ObjectId, ObjectState], ...]
    creatables: Mapping[str, frozenset[ObjectId]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.initial_objects:
            raise InvalidModel("a system model needs at least one initial object")
        names = [o.name for o, _ in self.initial_objects]
        if len(set(names)) != len(names) or ENV in names:
            raise InvalidModel(f"initial object ids must be unique and not {ENV!r}")
        for o, _ in self.initial_objects:
            if o.cls not in self.class_table.classes:
                raise InvalidModel(f"initial object {o.name!r} has unknown class {o.cls!r}")
        seen: dict[str, str] = {}
        for owner, ids in sorted(self.creatables.items()):
            for oid in ids:
                if oid.name in names:
                    raise InvalidModel(f"initial object {oid.name!r} is creatable by {owner!r}")
                if oid.name in seen and seen[oid.name] != owner:
                    raise InvalidModel(f"{oid.name!r} is creatable by both "
                                       f"{seen[oid.name]!r} and {owner!r}")
                if oid.cls not in self.class_table.classes:
                    raise InvalidModel(f"creatable {oid.name!r} has unknown class {oid.cls!r}")
                seen[oid.name] = owner
        self.__dict__["_classes"] = {o.name: o.cls for o, _ in self.initial_objects}
        self.__dict__["_classes"].update(
            {o.name: o.cls for ids in self.creatables.values() for o in ids})
        self.__dict__["_creator"] = seen

    def class_of(self, oid) -> str:
        name = getattr(oid, "name", oid)
        try:
            return self._classes[name]
        except KeyError:
            raise UnknownObject(f"unknown object {name!r}") from None

    def knows(self, name: str) -> bool:
        return name in self._classes

    def creator_of(self, name: str) -> str | None:
        return self._creator.get(name)

    def creatable_by(self, owner: str, name: str) -> bool:
        return self._creator.get(name) == owner

    def automaton(self, cls: str) -> Automaton:
        a = self.automata.get(cls)
        return a if a is not None else stutter_automaton(cls)

    def signature(self, cls: str) -> Signature:
        return effective_signature(cls, self.class_table)

    def fresh_state(self, name: str, control: str | None = None) -> ObjectState:
        """Start state of an object created mid-run."""
        cls = self.class_of(name)
        a = self.automaton(cls)
        return ObjectState.of(control or a.initial_controls[0],
                              default_valuation(self.signature(cls)))

    def object_names(self) -> list[str]:
        return sorted(self._classes)


# -- message acceptance and automaton steps -------------------------------------


def accepts(oid, m: Message, model: SystemModel) -> bool:
    """Whether ``m`` belongs to the input interface of object ``oid``."""
    name = getattr(oid, "name", oid)
    cls = model.class_of(name)
    if m.receiver != name:
        return False
    meth = model.signature(cls).method(m.selector)
    if meth is None or len(meth.params) != len(m.args):
        return False
    return all(has_type(v, p.type) for v, p in zip(m.args, meth.params))


@dataclass(frozen=True)
class Step:
    state: ObjectState
    outputs: tuple[Message, ...]


def fire(tr: Transition, s: ObjectState, m: Message) -> Step | None:
    """Result of taking ``tr`` on ``m`` from ``s``, or None if its guard is false."""
    if len(tr.params) != len(m.args):
        raise EvaluationError(f"trigger {tr.trigger!r} binds {len(tr.params)} "
                              f"parameter(s), message has {len(m.args)}")
    vals = s.values
    scope = dict(vals)
    scope.update(zip(tr.params, m.args))
    scope["self"] = Ref(m.receiver)
    scope["sender"] = Ref(m.sender)
    if not holds(tr.guard, scope):
        return None
    for act in tr.actions:
        if act.attr not in vals:
            raise EvaluationError(f"assignment to unknown attribute {act.attr!r}")
        v = evaluate(act.expr, scope)
        if type_of(v) != type_of(vals[act.attr]):
            raise EvaluationError(f"assigning {format_value(v)} to {act.attr!r} "
                                  f"of type {type_of(vals[act.attr])}")
        vals[act.attr] = v
        if act.attr not in tr.params:
            scope[act.attr] = v
    outs = []
    for em in tr.outputs:
        dest = evaluate(em.target, scope)
        if not isinstance(dest, Ref) or dest.target is None:
            raise EvaluationError(f"emit {em.selector!r} has no target object "
                                  f"({format_value(dest)})")
        args = tuple(evaluate(a, scope) for a in em.args)
        outs.append(Message(m.receiver, dest.target, em.selector, args))
    return Step(ObjectState.of(tr.target, vals), tuple(outs))


def enabled_steps(a: Automaton, s: ObjectState, m: Message) -> tuple[Step, ...]:
    """All distinct reactions of ``a`` in state ``s`` to ``m``.

    One entry per transition leaving ``s.control`` on ``m.selector`` whose
    guard holds, in declaration order, duplicates removed. Empty when no
    transition applies; the caller then consumes ``m`` with no effect.
    """
    out: list[Step] = []
    for tr in a.transitions:
        if tr.source != s.control or tr.trigger != m.selector:
            continue
        st = fire(tr, s, m)
        if st is not None and st not in out:
            out.append(st)
    return tuple(out)


def reactions(a: Automaton, s: ObjectState, m: Message) -> tuple[Step, ...]:
    """``enabled_steps`` with the silent stutter filled in for the empty case."""
    return enabled_steps(a, s, m) or (Step(s, ()),)


def black_box(a: Automaton, init: ObjectState, input_prefix: Iterable[Message],
              bound: int, cap: int = DEFAULT_CAP) -> frozenset[TimedStream]:
    """Possible timed output prefixes for a timed input prefix.

    Input message ``k`` arrives in round ``k``; every round ends with a
    TICK, for ``bound`` rounds in total. Nondeterministic choices branch.
    """
    inputs = list(input_prefix)
    if bound < len(inputs):
        raise ValueError("bound must cover every input message")
    results: set[TimedStream] = set()
    nodes = 0
    frontier = [(init, ())]
    for r in range(bound):
        nxt = []
        for state, out in frontier:
            nodes += 1
            if nodes > cap:
                raise ExplosionLimit(cap, "black-box enumeration")
            if r < len(inputs):
                for st in reactions(a, state, inputs[r]):
                    nxt.append((st.state, out + st.outputs + (TICK,)))
            else:
                nxt.append((state, out + (TICK,)))
        frontier = list(dict.fromkeys(nxt))
    for _, out in frontier:
        results.add(TimedStream(out))
    return frozenset(results)
