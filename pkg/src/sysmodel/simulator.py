"""Bounded system runs over an order-preserving, lossless message medium.

Every round starts by injecting the stimuli scheduled for it, then
delivers at most one buffered message (exactly one object steps), and
ends with a TICK on every stream. A round with nothing buffered is a
pure TICK.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Iterable, Mapping, Union

from .core import (DEFAULT_CAP, ENV, TICK, Message, ObjectState, Step, SystemModel,
                   TimedStream, accepts, reactions)
from .errors import CreationViolation, InvalidStimulus, MessageNotAccepted

# -- scheduler policies --------------------------------------------------------


@dataclass(frozen=True)
class SeededRandom:
    seed: int = 0


@dataclass(frozen=True)
class RoundRobin:
    pass


@dataclass(frozen=True)
class ExhaustiveEnumeration:
    cap: int = DEFAULT_CAP


SchedulerPolicy = Union[SeededRandom, RoundRobin, ExhaustiveEnumeration]


# -- medium ----------------------------------------------------------------------


@dataclass(frozen=True)
class MediumState:
    """One FIFO buffer per receiver; heads are taken per (receiver, sender) pair."""

    buffers: Mapping[str, tuple[Message, ...]] = field(default_factory=dict)

    def send(self, m: Message) -> "MediumState":
        bufs = dict(self.buffers)
        bufs[m.receiver] = bufs.get(m.receiver, ()) + (m,)
        return MediumState(bufs)

    def choices(self) -> list[tuple[str, str]]:
        """Sorted (receiver, sender) pairs that have a deliverable head."""
        return sorted({(r, m.sender) for r, q in self.buffers.items() for m in q})

    def take(self, receiver: str, sender: str) -> tuple[Message, "MediumState"]:
        q = self.buffers[receiver]
        i = next(i for i, m in enumerate(q) if m.sender == sender)
        bufs = dict(self.buffers)
        rest = q[:i] + q[i + 1:]
        if rest:
            bufs[receiver] = rest
        else:
            del bufs[receiver]
        return q[i], MediumState(bufs)

    def pending(self) -> list[Message]:
        return [m for _, q in sorted(self.buffers.items()) for m in q]

    @property
    def empty(self) -> bool:
        return not self.buffers


# -- run state and traces --------------------------------------------------------------


@dataclass(frozen=True)
class TraceEvent:
    round: int
    obj: str
    kind: str  # "in", "out" or "state"
    value: object


@dataclass(frozen=True)
class StepEvent:
    round: int
    receiver: str | None = None  # None: pure tick
    message: Message | None = None
    created: bool = False
    outputs: tuple[Message, ...] = ()
    injected: tuple[Message, ...] = ()

    @property
    def tick_only(self) -> bool:
        return self.receiver is None


@dataclass(frozen=True)
class RunState:
    model: SystemModel
    medium: MediumState
    live: Mapping[str, ObjectState]
    tick_count: int = 0
    log: tuple[TraceEvent, ...] = ()
    rng_seed: int = 0
    policy: SchedulerPolicy = RoundRobin()
    stimuli: tuple[tuple[int, Message], ...] = ()
    cursor: tuple[str, str] | None = None
    creators: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class RunTrace:
    """The triple of timed input, output and state streams, per object."""

    rounds: int
    input: Mapping[str, TimedStream]
    output: Mapping[str, TimedStream]
    state: Mapping[str, TimedStream]

    def objects(self) -> list[str]:
        return sorted(self.input)

    def lines(self) -> list[str]:
        out = []
        streams = {o: (self.input[o].rounds(), self.state[o].rounds(),
                       self.output[o].rounds()) for o in self.objects()}
        for r in range(self.rounds):
            for o in self.objects():
                for kind, rounds in zip(("in", "state", "out"), streams[o]):
                    for item in (rounds[r] if r < len(rounds) else ()):
                        out.append(f"round={r} obj={o} {kind}={item}")
                out.append(f"round={r} obj={o} tick")
        return out

    def to_text(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def to_records(self) -> list[dict]:
        recs = []
        for line in self.lines():
            rnd, obj, ev = line.split(" ", 2)
            kind, _, value = ev.partition("=")
            rec = {"round": int(rnd[6:]), "obj": obj[4:], "kind": kind}
            if value:
                rec["value"] = value
            recs.append(rec)
        return recs

    def to_json(self) -> str:
        return json.dumps({"rounds": self.rounds, "events": self.to_records()},
                          sort_keys=True, separators=(",", ":"))

    def __eq__(self, other):
        return isinstance(other, RunTrace) and self.to_text() == other.to_text()

    def __hash__(self):
        return hash(self.to_text())

    def __lt__(self, other):
        return self.to_text() < other.to_text()


@dataclass(frozen=True)
class RunSet:
    """Distinct traces of an exhaustive enumeration, sorted canonically."""

    traces: tuple[RunTrace, ...]
    truncated: bool = False
    cap: int = DEFAULT_CAP
    nodes: int = 0

    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    def texts(self) -> frozenset[str]:
        return frozenset(t.to_text() for t in self.traces)


# -- operations --------------------------------------------------------------------------


def init_run(model: SystemModel, stimuli: Iterable[tuple[int, Message]] = (),
             policy: SchedulerPolicy = RoundRobin()) -> RunState:
    """Initial objects live in their initial state, empty medium, round 0."""
    initial = {o.name for o, _ in model.initial_objects}
    checked = []
    for rnd, m in stimuli:
        if rnd < 0:
            raise InvalidStimulus(f"negative round {rnd} for {m}")
        if m.sender != ENV and m.sender not in initial:
            raise InvalidStimulus(f"stimulus sender {m.sender!r} is neither {ENV!r} "
                                  f"nor an initial object")
        if m.receiver not in initial and not model.creatable_by(ENV, m.receiver):
            raise InvalidStimulus(f"stimulus receiver {m.receiver!r} is neither initial "
                                  f"nor creatable by {ENV!r}")
        if not accepts(m.receiver, m, model):
            raise InvalidStimulus(f"{m} is not in the input interface of {m.receiver!r}")
        checked.append((rnd, m))
    checked.sort(key=lambda x: x[0])
    seed = policy.seed if isinstance(policy, SeededRandom) else 0
    return RunState(model, MediumState(), {o.name: s for o, s in model.initial_objects},
                    rng_seed=seed, policy=policy, stimuli=tuple(checked))


def _inject(rs: RunState) -> tuple[RunState, tuple[Message, ...]]:
    r = rs.tick_count
    msgs = tuple(m for rnd, m in rs.stimuli if rnd == r)
    if not msgs:
        return rs, ()
    medium, log = rs.medium, list(rs.log)
    for m in msgs:
        medium = medium.send(m)
        log.append(TraceEvent(r, m.sender, "out", m))
    return replace(rs, medium=medium, log=tuple(log)), msgs


def _finish_round(rs: RunState, live, medium, log, **changes) -> RunState:
    r = rs.tick_count
    log = list(log)
    for name in sorted(live):
        log.append(TraceEvent(r, name, "state", live[name]))
    return replace(rs, live=live, medium=medium, log=tuple(log), tick_count=r + 1,
                   **changes)


def _start_states(rs: RunState, receiver: str, sender: str, all_initials: bool):
    """States the receiver may be in before reacting; creates it if needed."""
    if receiver in rs.live:
        return [rs.live[receiver]], False
    if not rs.model.knows(receiver) or not rs.model.creatable_by(sender, receiver):
        raise CreationViolation(f"{sender!r} cannot create {receiver!r}")
    if not all_initials:
        return [rs.model.fresh_state(receiver)], True
    auto = rs.model.automaton(rs.model.class_of(receiver))
    return [rs.model.fresh_state(receiver, c) for c in auto.initial_controls], True


def _apply(rs: RunState, medium, pair, msg: Message, created: bool, step: Step,
           injected) -> tuple[RunState, StepEvent]:
    r = rs.tick_count
    receiver, sender = pair
    log = list(rs.log)
    log.append(TraceEvent(r, receiver, "in", msg))
    for out in step.outputs:
        log.append(TraceEvent(r, receiver, "out", out))
        if out.receiver == ENV:
            log.append(TraceEvent(r, ENV, "in", out))
        else:
            medium = medium.send(out)
    live = dict(rs.live)
    live[receiver] = step.state
    changes = {"cursor": pair}
    if created:
        creators = dict(rs.creators)
        creators[receiver] = sender
        changes["creators"] = creators
    nxt = _finish_round(rs, live, medium, log, **changes)
    return nxt, StepEvent(r, receiver, msg, created, step.outputs, injected)


def _deliverable(rs: RunState, receiver: str, msg: Message) -> None:
    if not accepts(receiver, msg, rs.model):
        raise MessageNotAccepted(f"{msg} is not in the input interface of {receiver!r}")


def successors(rs: RunState) -> list[tuple[RunState, StepEvent]]:
    """Every possible next round: all scheduler choices, all initial controls
    of a newly created receiver, all enabled reactions."""
    rs, injected = _inject(rs)
    pairs = rs.medium.choices()
    if not pairs:
        nxt = _finish_round(rs, dict(rs.live), rs.medium, rs.log)
        return [(nxt, StepEvent(rs.tick_count, injected=injected))]
    out = []
    for pair in pairs:
        msg, medium = rs.medium.take(*pair)
        starts, created = _start_states(rs, pair[0], pair[1], all_initials=True)
        _deliverable(rs, pair[0], msg)
        auto = rs.model.automaton(rs.model.class_of(pair[0]))
        for start in starts:
            for step in reactions(auto, start, msg):
                out.append(_apply(rs, medium, pair, msg, created, step, injected))
    return out


def _pick_pair(rs: RunState, pairs, rng):
    if isinstance(rs.policy, SeededRandom):
        return rng.choice(pairs)
    if rs.cursor is not None:
        for p in pairs:
            if p > rs.cursor:
                return p
    return pairs[0]


def step(rs: RunState) -> tuple[RunState, StepEvent]:
    """One round under the run's scheduler policy (RoundRobin or SeededRandom)."""
    if isinstance(rs.policy, ExhaustiveEnumeration):
        raise ValueError("exhaustive runs branch; use successors() or enumerate_runs()")
    rng = random.Random(f"{rs.rng_seed}:{rs.tick_count}")
    rs, injected = _inject(rs)
    pairs = rs.medium.choices()
    if not pairs:
        nxt = _finish_round(rs, dict(rs.live), rs.medium, rs.log)
        return nxt, StepEvent(rs.tick_count, injected=injected)
    pair = _pick_pair(rs, pairs, rng)
    msg, medium = rs.medium.take(*pair)
    (start,), created = _start_states(rs, pair[0], pair[1], all_initials=False)
    _deliverable(rs, pair[0], msg)
    steps = reactions(rs.model.automaton(rs.model.class_of(pair[0])), start, msg)
    chosen = rng.choice(steps) if isinstance(rs.policy, SeededRandom) else steps[0]
    return _apply(rs, medium, pair, msg, created, chosen, injected)


def finalize(rs: RunState) -> RunTrace:
    """Assemble the per-object streams of a run state into a RunTrace."""
    rounds = rs.tick_count
    objs = sorted(set(rs.live) | {ENV})
    per = {o: {k: [[] for _ in range(rounds)] for k in ("in", "out", "state")}
           for o in objs}
    for ev in rs.log:
        if ev.round < rounds:
            per[ev.obj][ev.kind][ev.round].append(ev.value)

    def stream(o, kind):
        events = []
        for items in per[o][kind]:
            events += items
            events.append(TICK)
        return TimedStream(tuple(events))

    return RunTrace(rounds,
                    {o: stream(o, "in") for o in objs},
                    {o: stream(o, "out") for o in objs},
                    {o: stream(o, "state") for o in objs})


def run(model: SystemModel, stimuli: Iterable[tuple[int, Message]] = (), rounds: int = 1,
        policy: SchedulerPolicy = RoundRobin()):
    """Run for ``rounds`` rounds and return the RunTrace.

    Under ExhaustiveEnumeration the result is the RunSet of all runs.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if isinstance(policy, ExhaustiveEnumeration):
        return enumerate_runs(model, stimuli, rounds, policy.cap)
    rs = init_run(model, stimuli, policy)
    for _ in range(rounds):
        rs, _ev = step(rs)
    return finalize(rs)


def initial_run_states(model: SystemModel, stimuli, policy=RoundRobin()) -> list[RunState]:
    """One start state per combination of initial controls of the initial objects."""
    base = init_run(model, stimuli, policy)
    names = [o.name for o, _ in model.initial_objects]
    options = []
    for o, s in model.initial_objects:
        controls = model.automaton(o.cls).initial_controls
        options.append([ObjectState(c, s.valuation) for c in controls])
    return [replace(base, live=dict(zip(names, combo))) for combo in product(*options)]


def enumerate_runs(model: SystemModel, stimuli: Iterable[tuple[int, Message]] = (),
                   rounds: int = 1, cap: int = DEFAULT_CAP) -> RunSet:
    """All distinct traces of ``rounds`` rounds, branching over scheduling,
    nondeterministic reactions and initial control states.

    Stops after expanding ``cap`` run states and marks the result truncated.
    """
    if cap <= 0:
        raise ValueError("cap must be positive")
    stimuli = list(stimuli)
    stack = [(s, 0) for s in reversed(initial_run_states(model, stimuli))]
    found: dict[str, RunTrace] = {}
    nodes, truncated = 0, False
    while stack:
        rs, depth = stack.pop()
        if depth == rounds:
            tr = finalize(rs)
            found.setdefault(tr.to_text(), tr)
            continue
        nodes += 1
        if nodes > cap:
            truncated = True
            break
        for nxt, _ev in reversed(successors(rs)):
            stack.append((nxt, depth + 1))
    traces = tuple(found[k] for k in sorted(found))
    return RunSet(traces, truncated, cap, min(nodes, cap))
