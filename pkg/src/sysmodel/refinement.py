"""Technical refinement steps on diagrams and the bounded trace-set
oracles behind them: inclusion for refinement, intersection for
consistency."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .core import (ENV, Emit, Transition, ClassTable, SystemModel, ancestry,
                   effective_signature)
from .dsl import (DocKind, Document, StateDiagramBody, SequenceDiagramBody, parse,
                  serialize)
from .errors import (AmbiguousLifeline, EvaluationError, ExplosionLimit, LabelConflict,
                     MappingError, ModelError, ProjectionEmpty, SynthesisError)
from .expr import (OBJREF, TRUE, Binary, Expr, Lit, Ref, Unary, Var, bounded_implies,
                   conjoin, conjuncts, disjoin, free_vars, holds)
from .semantics import class_table_of, elaborate
from .simulator import enumerate_runs
from .syntax import Span

CD_RULES = ("R-CD-DELETE", "R-CD-RETYPE", "R-CD-INHERIT", "R-CD-INVARIANT")
SD_RULES = ("R-SD-STATE", "R-SD-NEWTRANS", "R-SD-RETARGET", "R-SD-DELETE", "R-SD-INITIAL")
QD_RULES = ("R-QD-LIFELINE", "R-QD-UNPROMPTED", "R-QD-PATH")


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    doc: str = ""
    span: Span | None = None

    def render(self) -> str:
        s = self.span or Span(0, 0, 0, 0)
        return f"{self.rule} {self.doc or '-'}:{s.line}:{s.col} {self.message}"


@dataclass(frozen=True)
class RefinementVerdict:
    violations: tuple[Violation, ...] = ()
    checked_rules: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()
    witness: str | None = None
    info: Mapping[str, object] = field(default_factory=dict, compare=False)

    @property
    def accepted(self) -> bool:
        return not self.violations

    def rules(self) -> list[str]:
        return [v.rule for v in self.violations]

    def render(self) -> str:
        out = ["ACCEPTED" if self.accepted else "REJECTED"]
        out += [v.render() for v in self.violations]
        out += [f"warning: {w}" for w in self.warnings]
        if self.witness is not None:
            out.append("witness:")
            out += self.witness.rstrip("\n").split("\n")
        return "".join(line + "\n" for line in out)


def _implies(p: Expr | None, q: Expr | None, types, warns: list) -> bool:
    """p => q: syntactic shortcuts first, then bounded evaluation."""
    p, q = TRUE if p is None else p, TRUE if q is None else q
    if q == TRUE or p == q:
        return True
    if set(conjuncts(q)) <= set(conjuncts(p)):
        return True
    if types is None:
        return False
    res = bounded_implies(p, q, types)
    if res is None:
        warns.append("implication over more than 3 variables decided syntactically")
        return False
    return res[0]


# -- class diagrams -------------------------------------------------------------------


def _closure(t: ClassTable) -> set[tuple[str, str]]:
    pairs = set()
    for c in t.classes:
        try:
            pairs |= {(c, d) for d in ancestry(c, t)}
        except ModelError:
            pass
    return pairs


def _effective_invariant(c: str, t: ClassTable) -> Expr | None:
    try:
        chain = ancestry(c, t)
    except ModelError:
        chain = [c]
    return conjoin(t.invariants[x] for x in reversed(chain) if t.invariants.get(x))


def refine_class_diagram(old: Document, new: Document) -> RefinementVerdict:
    """Addition-only refinement: classes, members, associations survive
    unchanged, inheritance only grows, invariants only get stronger."""
    told, tnew = class_table_of([old]), class_table_of([new])
    out, warns = [], []

    def v(rule, msg, key):
        out.append(Violation(rule, msg, new.id if key[0] != "old" else old.id,
                             new.span(*key) if key[0] != "old" else old.span(*key[1:])))

    for c in old.body.classes:
        if c.name not in tnew.classes:
            v("R-CD-DELETE", f"class {c.name!r} was deleted", ("old", "class", c.name))
            continue
        try:
            sig = effective_signature(c.name, tnew)
        except ModelError as exc:
            v("R-CD-RETYPE", f"class {c.name!r} is no longer well-formed: {exc}",
              ("class", c.name))
            continue
        for a in c.attributes:
            na = sig.attribute(a.name)
            if na is None:
                v("R-CD-DELETE", f"attribute {c.name}.{a.name} was deleted",
                  ("old", "attr", c.name, a.name))
            elif na.type != a.type:
                v("R-CD-RETYPE", f"attribute {c.name}.{a.name} changed type "
                  f"{a.type} -> {na.type}", ("class", c.name))
        for m in c.methods:
            nm = sig.method(m.name)
            if nm is None:
                v("R-CD-DELETE", f"method {c.name}.{m.name} was deleted",
                  ("old", "method", c.name, m.name))
            elif not nm.same_type(m):
                v("R-CD-RETYPE", f"method {c.name}.{m.name} changed its type",
                  ("class", c.name))
    for a in old.body.associations:
        pair = tnew.associations.get(a.name)
        if pair is None:
            v("R-CD-DELETE", f"association {a.name!r} was deleted", ("old", "assoc", a.name))
        elif pair != (a.source, a.target):
            v("R-CD-RETYPE", f"association {a.name!r} changed its endpoints",
              ("assoc", a.name))
    lost = sorted(p for p in _closure(told) - _closure(tnew) if p[0] != p[1]
                  and p[0] in tnew.classes and p[1] in tnew.classes)
    for c, d in lost:
        v("R-CD-INHERIT", f"{c} is no longer a subclass of {d}", ("class", c))
    for c in old.body.classes:
        if c.name not in tnew.classes:
            continue
        old_inv = _effective_invariant(c.name, told)
        if old_inv is None:
            continue
        new_inv = _effective_invariant(c.name, tnew)
        try:
            types = effective_signature(c.name, tnew).attribute_types()
        except ModelError:
            types = {}
        types["self"] = OBJREF
        if not _implies(new_inv, old_inv, types, warns):
            v("R-CD-INVARIANT", f"invariant of {c.name!r} is not strengthened",
              ("class", c.name))
    return RefinementVerdict(tuple(out), CD_RULES, tuple(dict.fromkeys(warns)))


# -- state diagrams -------------------------------------------------------------------


def _rename(e: Expr | None, names: Mapping[str, str]) -> Expr | None:
    if e is None:
        return None
    if isinstance(e, Var):
        return Var(names.get(e.name, e.name))
    if isinstance(e, Unary):
        return Unary(e.op, _rename(e.operand, names))
    if isinstance(e, Binary):
        return Binary(e.op, _rename(e.left, names), _rename(e.right, names))
    return e


def _canon(tr: Transition):
    """Guard and effects with trigger parameters renamed positionally."""
    names = {p: f"arg{i}__" for i, p in enumerate(tr.params)}
    effects = (tuple((a.attr, _rename(a.expr, names)) for a in tr.actions),
               tuple((o.selector, tuple(_rename(x, names) for x in o.args),
                      _rename(o.target, names)) for o in tr.outputs))
    return _rename(tr.guard, names), effects


def _types_for(t: ClassTable | None, cls: str, trigger: str):
    if t is None or cls not in t.classes:
        return None
    try:
        sig = effective_signature(cls, t)
    except ModelError:
        return None
    types = sig.attribute_types()
    types.update({"self": OBJREF, "sender": OBJREF})
    meth = sig.method(trigger)
    if meth is not None:
        types.update({f"arg{i}__": p.type for i, p in enumerate(meth.params)})
    return types


def _or_guards(guards) -> Expr:
    gs = [TRUE if g is None else g for g in guards]
    return TRUE if TRUE in gs else disjoin(gs)


def reachable_states(body: StateDiagramBody) -> set[str]:
    seen = set(body.initial)
    todo = list(body.initial)
    while todo:
        s = todo.pop()
        for tr in body.transitions:
            if tr.source == s and tr.target not in seen:
                seen.add(tr.target)
                todo.append(tr.target)
    return seen


def refine_state_diagram(old: Document, new: Document, mapping=None,
                         class_table: ClassTable | None = None) -> RefinementVerdict:
    """Check a state-diagram refinement step.

    ``mapping`` sends each state of ``new`` to the state of ``old`` it
    refines; states with the same name map to themselves by default.
    Rules: every old state is refined (R-SD-STATE); every transition
    leaving a reachable new state is the image of an old transition with
    the same trigger and effects, the mapped target and a guard at most as
    permissive (R-SD-NEWTRANS, R-SD-RETARGET); a reachable new state
    handles at least the inputs its old state handled (R-SD-DELETE); new
    initial states refine old ones (R-SD-INITIAL). With a class table,
    guard implications are decided by bounded evaluation; otherwise
    syntactically.
    """
    ob, nb = old.body, new.body
    if ob.class_name != nb.class_name:
        v = Violation("R-SD-CLASS", f"state diagrams describe different classes "
                      f"({ob.class_name} vs {nb.class_name})", new.id, new.span("statemachine"))
        return RefinementVerdict((v,), SD_RULES + ("R-SD-CLASS",))
    mp = {s: s for s in nb.states if s in ob.states}
    mp.update(mapping or {})
    missing = [s for s in nb.states if s not in mp]
    if missing:
        raise MappingError(f"mapping is not total: no image for {missing}")
    bad = sorted(f"{k}->{v}" for k, v in mp.items() if k in nb.states and v not in ob.states)
    if bad:
        raise MappingError(f"mapping targets unknown old states: {bad}")
    cls = nb.class_name
    out, warns = [], []

    def add(rule, msg, key):
        out.append(Violation(rule, msg, new.id, new.span(*key)))

    for s in ob.states:
        if not any(mp[n] == s for n in nb.states):
            out.append(Violation("R-SD-STATE", f"old state {s!r} has no refinement",
                                 old.id, old.span("state", s)))
    for n in nb.initial:
        if mp[n] not in ob.initial:
            add("R-SD-INITIAL", f"initial state {n!r} refines non-initial {mp[n]!r}",
                ("initial",))
    reach = reachable_states(nb)
    old_c = [(tr, *_canon(tr)) for tr in ob.transitions]
    for i, tr in enumerate(nb.transitions):
        if tr.source not in reach:
            continue
        guard, effects = _canon(tr)
        cands = [(o, g) for o, g, e in old_c
                 if o.source == mp[tr.source] and o.trigger == tr.trigger
                 and len(o.params) == len(tr.params) and e == effects]
        same = [g for o, g in cands if o.target == mp[tr.target]]
        types = _types_for(class_table, cls, tr.trigger)
        if same:
            if not _implies(guard, _or_guards(same), types, warns):
                add("R-SD-NEWTRANS", f"guard of {tr.source}->{tr.target} on {tr.trigger} "
                    f"is weaker than the old transition's", ("trans", i))
        elif cands:
            add("R-SD-RETARGET", f"{tr.source}->{tr.target} on {tr.trigger} targets a "
                f"refinement of {mp[tr.target]!r}, the old transition went elsewhere",
                ("trans", i))
        else:
            add("R-SD-NEWTRANS", f"{tr.source}->{tr.target} on {tr.trigger} is not the "
                f"image of an old transition", ("trans", i))
    new_c = [(tr, *_canon(tr)) for tr in nb.transitions]
    for n in nb.states:
        if n not in reach:
            continue
        s = mp[n]
        triggers = dict.fromkeys(o.trigger for o in ob.transitions if o.source == s)
        for trig in triggers:
            old_g = _or_guards(g for o, g, _ in old_c if o.source == s and o.trigger == trig)
            kept = [g for t2, g, _ in new_c if t2.source == n and t2.trigger == trig]
            if not kept:
                add("R-SD-DELETE", f"state {n!r} no longer reacts to {trig!r}",
                    ("state", n))
            elif not _implies(old_g, _or_guards(kept), _types_for(class_table, cls, trig),
                              warns):
                add("R-SD-DELETE", f"state {n!r} reacts to {trig!r} in fewer situations",
                    ("state", n))
    return RefinementVerdict(tuple(out), SD_RULES, tuple(dict.fromkeys(warns)))


# -- sequence diagrams -------------------------------------------------------------------


@dataclass(frozen=True)
class Letter:
    """One reaction of the target lifeline: a received message and what it sends."""

    selector: str
    args: tuple
    sender: str
    outputs: tuple[tuple[str, tuple, str], ...]  # (selector, args, receiver role)
    event: int  # index of the triggering event


def target_role(qd: Document, cls: str) -> str | None:
    roles = [r for r, c in qd.body.lifelines if c == cls]
    if len(roles) > 1:
        raise AmbiguousLifeline(f"{qd.id}: lifelines {roles} all have class {cls!r}")
    return roles[0] if roles else None


def project(body: SequenceDiagramBody, role: str):
    """Split the events seen by ``role`` into letters.

    Returns ``(letters, unprompted, positions)``: ``unprompted`` lists
    indices of events the role sends before receiving anything;
    ``positions`` maps each state mark of the role to its letter count.
    """
    letters, unprompted = [], []
    cur = None
    for i, ev in enumerate(body.events):
        if ev.sender == role:
            if cur is None:
                unprompted.append(i)
            else:
                cur["outputs"].append((ev.selector, ev.args, ev.receiver))
        if ev.receiver == role:
            if cur is not None:
                letters.append(cur)
            cur = {"selector": ev.selector, "args": ev.args, "sender": ev.sender,
                   "outputs": [], "event": i}
    if cur is not None:
        letters.append(cur)
    letters = [Letter(c["selector"], c["args"], c["sender"], tuple(c["outputs"]), c["event"])
               for c in letters]
    positions = []
    for mk in body.marks:
        if mk.role == role:
            pos = sum(1 for ev in body.events[:mk.index] if ev.receiver == role)
            positions.append((pos, mk.label))
    return letters, unprompted, positions


def check_seq_against_state(qd: Document, sd: Document,
                            t: ClassTable | None = None) -> RefinementVerdict:
    """Does the trigger word of the lifeline of the state diagram's class
    label a path from an initial state? Guards over parameters are
    evaluated with the literal arguments; guards mentioning attributes
    count as satisfiable."""
    cls = sd.body.class_name
    role = target_role(qd, cls)
    if role is None:
        v = Violation("R-QD-LIFELINE", f"no lifeline of class {cls!r}", qd.id,
                      qd.span("sequence"))
        return RefinementVerdict((v,), QD_RULES)
    letters, unprompted, _ = project(qd.body, role)
    out, warns = [], []
    for i in unprompted:
        out.append(Violation("R-QD-UNPROMPTED", f"{role!r} sends before receiving anything",
                             qd.id, qd.span("event", i)))
    current = set(sd.body.initial)
    for letter in letters:
        nxt = set()
        for tr in sd.body.transitions:
            if tr.source not in current or tr.trigger != letter.selector \
                    or len(tr.params) != len(letter.args):
                continue
            env = dict(zip(tr.params, letter.args))
            env.update({"self": Ref(role), "sender": Ref(letter.sender)})
            if tr.guard is not None and free_vars(tr.guard) - set(env):
                warns.append(f"guard of {tr.source}->{tr.target} on {tr.trigger} reads "
                             f"attributes; assumed satisfiable")
                nxt.add(tr.target)
                continue
            try:
                if holds(tr.guard, env):
                    nxt.add(tr.target)
            except EvaluationError:
                pass
        if not nxt:
            out.append(Violation("R-QD-PATH", f"no transition on {letter.selector!r} from "
                                 f"{sorted(current)}", qd.id, qd.span("event", letter.event)))
            break
        current = nxt
    return RefinementVerdict(tuple(out), QD_RULES, tuple(dict.fromkeys(warns)))


@dataclass(frozen=True)
class SynthesisOptions:
    target_class: str
    merge: str = "trie"  # "trie" (shared prefixes) or "labels" (explicit state labels)
    loop_folding: bool = False


def _label(letter: Letter):
    return (letter.selector, letter.outputs, letter.sender)


def _make_transition(src, dst, letter: Letter, params) -> Transition:
    outs = []
    for sel, args, rcv in letter.outputs:
        target = Var("sender") if rcv == letter.sender else Lit(Ref(rcv))
        outs.append(Emit(sel, tuple(Lit(a) for a in args), target))
    return Transition(src, dst, letter.selector, tuple(params), None, (), tuple(outs))


def _edge_key(letter: Letter):
    # the sender only matters where an output is addressed back to it
    outs = tuple((s, a, "sender" if r == letter.sender else r)
                 for s, a, r in letter.outputs)
    return (letter.selector, len(letter.args), outs)


def synthesize_state_diagram(seqs: Iterable[Document], opts: SynthesisOptions,
                             t: ClassTable | None = None,
                             doc_id: str = "synthesized.sd") -> Document:
    """Build a state diagram for ``opts.target_class`` whose paths include
    the projection of every sequence diagram. No guards, no actions."""
    words = []
    for qd in sorted(seqs, key=lambda d: d.id):
        role = target_role(qd, opts.target_class)
        if role is None:
            raise SynthesisError(f"{qd.id}: no lifeline of class {opts.target_class!r}")
        letters, unprompted, positions = project(qd.body, role)
        if unprompted:
            raise SynthesisError(f"{qd.id}: {role!r} sends before receiving anything")
        if not letters:
            raise ProjectionEmpty(f"{qd.id}: {role!r} never receives a message")
        words.append((qd, letters, positions))

    def params_for(letter):
        meth = None
        if t is not None and opts.target_class in t.classes:
            try:
                meth = effective_signature(opts.target_class, t).method(letter.selector)
            except ModelError:
                meth = None
        if meth is not None and len(meth.params) == len(letter.args):
            return [p.name for p in meth.params]
        return [f"p{i}" for i in range(len(letter.args))]

    states, initial, edges = [], [], {}

    def add_state(name):
        if name not in states:
            states.append(name)
        return name

    if opts.merge == "trie":
        add_state("s0")
        initial.append("s0")
        children: dict = {}
        for _qd, letters, _ in words:
            cur, came_by = "s0", None
            for letter in letters:
                key = _edge_key(letter)
                if opts.loop_folding and key == came_by and cur != "s0":
                    edges.setdefault((cur, key, cur), _make_transition(
                        cur, cur, letter, params_for(letter)))
                    continue
                if (cur, key) not in children:
                    # a folded self-loop already covers this letter
                    if (cur, key, cur) in edges:
                        continue
                    nxt = add_state(f"s{len(states)}")
                    children[(cur, key)] = nxt
                    edges[(cur, key, nxt)] = _make_transition(cur, nxt, letter,
                                                              params_for(letter))
                cur, came_by = children[(cur, key)], key
    elif opts.merge == "labels":
        labels = {lab for _, _, pos in words for _, lab in pos}

        def fresh(base):
            name = base
            while name in labels:
                name += "_"
            return name

        for wi, (qd, letters, positions) in enumerate(words):
            named: dict[int, str] = {}
            for pos, lab in positions:
                if named.get(pos, lab) != lab:
                    raise LabelConflict(f"{qd.id}: position {pos} labelled both "
                                        f"{named[pos]!r} and {lab!r}")
                named[pos] = lab
            path = []
            for j in range(len(letters) + 1):
                if j in named:
                    path.append(named[j])
                elif j == 0:
                    path.append(fresh("s0"))
                else:
                    path.append(fresh(f"q{wi}_{j}"))
            for name in path:
                add_state(name)
            if path[0] not in initial:
                initial.append(path[0])
            for j, letter in enumerate(letters):
                key = (path[j], _edge_key(letter), path[j + 1])
                edges.setdefault(key, _make_transition(path[j], path[j + 1], letter,
                                                       params_for(letter)))
    else:
        raise ValueError(f"unknown merge strategy {opts.merge!r}")
    body = StateDiagramBody(opts.target_class, tuple(states), tuple(initial),
                            tuple(edges.values()))
    return parse(DocKind.STATE, serialize(body), doc_id)


# -- bounded semantic oracles ---------------------------------------------------------------


def canonical_lines(trace, model: SystemModel | None = None, observe: str = "io",
                    state_map=None) -> str:
    """Canonical trace text used for set comparison.

    ``observe="io"`` keeps message and tick lines only; ``"full"`` also
    keeps state lines, renaming control states through
    ``state_map[class][state]`` when given.
    """
    lines = []
    for line in trace.lines():
        rnd, obj, ev = line.split(" ", 2)
        if ev.startswith("state="):
            if observe != "full":
                continue
            if state_map and model is not None:
                ctrl, rest = ev[6:].split(",", 1)
                ren = state_map.get(model.class_of(obj[4:]), {})
                ev = f"state={ren.get(ctrl, ctrl)},{rest}"
        lines.append(f"{rnd} {obj} {ev}")
    return "".join(x + "\n" for x in lines)


def _trace_set(model, stimuli, rounds, cap, observe, state_map=None):
    runs = enumerate_runs(model, stimuli, rounds, cap)
    if runs.truncated:
        raise ExplosionLimit(cap, "trace enumeration")
    return {canonical_lines(tr, model, observe, state_map) for tr in runs}


def trace_refinement_check(abstract: SystemModel, concrete: SystemModel, stimuli=(),
                           rounds: int = 4, cap: int = 10_000, observe: str = "io",
                           state_map=None) -> RefinementVerdict:
    """Bounded refinement: every concrete trace is an abstract trace.

    A bounded approximation: acceptance says nothing about runs longer
    than ``rounds``. ``state_map`` (``{class: {state: abstract_state}}``)
    renames the concrete model's control states when ``observe="full"``.
    """
    if state_map is not None and not all(isinstance(m, Mapping) for m in state_map.values()):
        raise ValueError("state_map must map each class name to a {state: state} mapping")
    stimuli = list(stimuli)
    abs_set = _trace_set(abstract, stimuli, rounds, cap, observe)
    con_set = _trace_set(concrete, stimuli, rounds, cap, observe, state_map)
    extra = sorted(con_set - abs_set)
    info = {"rounds": rounds, "cap": cap, "abstract_traces": len(abs_set),
            "concrete_traces": len(con_set), "observe": observe}
    if not extra:
        return RefinementVerdict((), ("R-TRACE-INCLUSION",), info=info)
    v = Violation("R-TRACE-INCLUSION", f"{len(extra)} concrete trace(s) outside the "
                  f"abstract trace set (bound {rounds}, cap {cap})")
    return RefinementVerdict((v,), ("R-TRACE-INCLUSION",), witness=extra[0], info=info)


def consistency_intersection(models, stimuli=(), rounds: int = 4, cap: int = 10_000,
                             observe: str = "io") -> RefinementVerdict:
    """Documents are jointly consistent (up to the bound) iff some trace is
    admitted by all of them. Each item is a SystemModel or a collection of
    Documents to elaborate."""
    models = [m if isinstance(m, SystemModel) else elaborate(list(m)) for m in models]
    if len(models) < 2:
        raise ValueError("consistency needs at least two models")
    stimuli = list(stimuli)
    common = None
    for m in models:
        s = _trace_set(m, stimuli, rounds, cap, observe)
        common = s if common is None else common & s
    info = {"rounds": rounds, "cap": cap, "common_traces": len(common)}
    if common:
        return RefinementVerdict((), ("R-CONSISTENCY",), witness=min(common), info=info)
    v = Violation("R-CONSISTENCY", f"no common trace up to bound {rounds}")
    return RefinementVerdict((v,), ("R-CONSISTENCY",), info=info)
