"""Acceptance suite: nine criteria at their stated sizes, tolerances and time limits.

Run with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""

import random
import subprocess
import sys
import time
from collections import Counter
from pathlib import Path

import pytest

from corpus import (ACCOUNT_CD, CD_ACCEPT, CD_REJECT, QD_ACCEPT, QD_REJECT, SD_ACCEPT,
                    SD_REJECT)
from generators import (NODE_CD, TRIGGERS, automaton, class_diagram_body, class_table,
                        doc_graph, object_diagram_body, refinement_pair, sequence_body,
                        state_diagram_body, system_model, text_body)
from oracles import (dfs_black_box, dfs_system_runs, oeval, projection_keys,
                     signature_law_holds, trie_size)
from sysmodel import docgraph
from sysmodel.core import (ENV, Emit, Message, ObjectState, SystemModel, Transition,
                           black_box, check_class_table)
from sysmodel.core import Automaton
from sysmodel.dsl import DocKind, parse, serialize
from sysmodel.expr import Lit, Ref, Var
from sysmodel.refinement import (SynthesisOptions, check_seq_against_state,
                                 refine_class_diagram, refine_state_diagram,
                                 synthesize_state_diagram, trace_refinement_check)
from sysmodel.semantics import class_table_of, elaborate
from sysmodel.simulator import (RoundRobin, SeededRandom, enumerate_runs, finalize, init_run,
                                step)

ROOT = Path(__file__).resolve().parent.parent
DEMO = ROOT / "demos" / "models"


class Timer:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.1f}s, limit {self.limit}s"


@pytest.mark.criterion(1, "inheritance-signature law on 200 class tables")
def test_signature_law():
    verdicts = Counter()
    with Timer(5):
        for seed in range(200):
            t = class_table(random.Random(seed), max_classes=10)
            law = signature_law_holds(t)
            assert check_class_table(t).empty == law, f"seed {seed}"
            verdicts[law] += 1
    print(f"law holds on {verdicts[True]} tables, violated on {verdicts[False]}")
    assert verdicts[True] and verdicts[False]


def _medium_run(seed):
    rng = random.Random(seed)
    model, stimuli = system_model(rng, max_objects=4, creatable_rate=0.8, max_trans=6,
                                  out_rate=0.9, max_stimuli=6, last_round=8)
    rounds = rng.randint(1, 12)
    policy = SeededRandom(seed) if seed % 2 else RoundRobin()
    rs = init_run(model, stimuli, policy)
    created = Counter()
    for _ in range(rounds):
        rs, ev = step(rs)
        if ev.created:
            created[ev.receiver] += 1
            assert model.creator_of(ev.receiver) == ev.message.sender
    return model, finalize(rs), rs.medium.pending(), created


@pytest.mark.criterion(2, "medium laws over 500 seeded runs")
def test_medium_laws():
    delivered_total = creations = 0
    with Timer(30):
        for seed in range(500):
            model, trace, pending, created = _medium_run(seed)
            sent, got = {}, {}
            for o in trace.objects():
                for m in trace.output[o].items():
                    if m.receiver != ENV:
                        sent.setdefault((m.sender, m.receiver), []).append(m)
                if o != ENV:
                    for m in trace.input[o].items():
                        assert m.receiver == o
                        got.setdefault((m.sender, m.receiver), []).append(m)
            for pair, msgs in got.items():
                assert sent.get(pair, [])[:len(msgs)] == msgs, f"FIFO broken, seed {seed}"
            in_flight = Counter(pending) + Counter(m for ms in got.values() for m in ms)
            assert in_flight == Counter(m for ms in sent.values() for m in ms), f"seed {seed}"
            assert all(n == 1 for n in created.values())
            for name in created:
                first = trace.input[name].items()[0]
                assert first.sender == model.creator_of(name)
            delivered_total += sum(len(v) for v in got.values())
            creations += len(created)
    print(f"{delivered_total} deliveries and {creations} creations checked")
    assert creations > 0


@pytest.mark.criterion(3, "black box equals DFS oracle on 100 automata")
def test_black_box_oracle():
    checks = 0
    with Timer(60):
        for seed in range(100):
            rng = random.Random(seed)
            a = automaton(rng, max_states=5, max_trans=8)
            assert len(a.control_states) <= 5 and len(a.transitions) <= 8
            for k in range(5):
                inputs = [Message(ENV, "obj", rng.choice(TRIGGERS), (rng.randint(-1, 4),))
                          for _ in range(k)]
                bound = max(k, 1)
                for init in a.initial_controls:
                    got = {s.events for s in black_box(a, ObjectState.of(init, {"x": 0}),
                                                       inputs, bound)}
                    assert got == dfs_black_box(a, init, {"x": 0}, inputs, bound)
                    checks += 1
    print(f"{checks} input prefixes compared")


def _node_docs(old_body, new_body):
    cd = parse(DocKind.CLASS, NODE_CD, "node.cd")
    old = parse(DocKind.STATE, serialize(old_body), "old.sd")
    new = parse(DocKind.STATE, serialize(new_body), "new.sd")
    return cd, old, new


@pytest.mark.criterion(4, "state-diagram refinement implies bounded trace inclusion")
def test_refinement_soundness_link():
    table = class_table_of([parse(DocKind.CLASS, NODE_CD, "node.cd")])
    accepted, rejected = 0, Counter()
    seed = 0
    with Timer(300):
        while (accepted < 100 or sum(rejected.values()) < 100) and seed < 5000:
            rng = random.Random(seed)
            seed += 1
            old_b, new_b, mapping = refinement_pair(rng)
            cd, old, new = _node_docs(old_b, new_b)
            verdict = refine_state_diagram(old, new, mapping, table)
            rules = {v.rule for v in verdict.violations}
            stimuli = [(k, Message(ENV, "node", trig, (rng.randint(-1, 4),)))
                       for k, trig in enumerate(TRIGGERS)]
            am, cm = elaborate([cd, old]), elaborate([cd, new])
            if verdict.accepted and accepted < 100:
                accepted += 1
                for bound in range(2, 7):
                    tv = trace_refinement_check(am, cm, stimuli, bound)
                    assert tv.accepted, f"seed {seed - 1}, bound {bound}:\n{tv.render()}"
            elif rules & {"R-SD-RETARGET", "R-SD-NEWTRANS"} \
                    and sum(rejected.values()) < 100:
                witnessed = any(not trace_refinement_check(am, cm, stimuli, b).accepted
                                for b in range(2, 7))
                rejected["witness" if witnessed else "syntactic-only"] += 1
    print(f"accepted pairs: {accepted}, all trace-included at bounds 2..6")
    print(f"semantically rejected pairs: {dict(rejected)}")
    assert accepted == 100 and sum(rejected.values()) == 100


def _mutant(model, stimuli):
    """Add one output to a transition that the first stimulus certainly fires."""
    _, m = stimuli[0]
    cls = model.class_of(m.receiver)
    auto = model.automata[cls]
    env = {"x": 0, "n": m.args[0], "self": Ref(m.receiver), "sender": Ref(m.sender)}
    for i, tr in enumerate(auto.transitions):
        if tr.source in auto.initial_controls and tr.trigger == m.selector \
                and oeval(tr.guard, env):
            extra = Emit("o", (Lit(99),), Var("sender"))
            trs = list(auto.transitions)
            trs[i] = Transition(tr.source, tr.target, tr.trigger, tr.params, tr.guard,
                                tr.actions, tr.outputs + (extra,))
            automata = dict(model.automata)
            automata[cls] = Automaton(cls, auto.control_states, auto.initial_controls,
                                      tuple(trs))
            return SystemModel(model.class_table, automata, model.initial_objects,
                               model.creatables)
    return None


@pytest.mark.criterion(5, "trace inclusion: reflexive on 50 models, rejects 50 mutants")
def test_set_inclusion_semantics():
    reflexive = mutants = 0
    seed = 0
    with Timer(120):
        while (reflexive < 50 or mutants < 50) and seed < 2000:
            rng = random.Random(10_000 + seed)
            seed += 1
            model, stimuli = system_model(rng, max_objects=3)
            stimuli = [(0, Message(ENV, "o0", "a", (1,)))] + stimuli
            if reflexive < 50:
                v = trace_refinement_check(model, model, stimuli, 4, cap=100_000)
                assert v.accepted, v.render()
                reflexive += 1
            mut = _mutant(model, stimuli)
            if mut is not None and mutants < 50:
                v = trace_refinement_check(model, mut, stimuli, 4, cap=100_000)
                assert not v.accepted
                assert "o(99)" in v.witness
                print(f"-- mutant {mutants} witness:\n{v.witness}")
                mutants += 1
    assert reflexive == 50 and mutants == 50


@pytest.mark.criterion(6, "synthesis completeness on 100 sequence bundles")
def test_synthesis_completeness():
    with Timer(30):
        for seed in range(100):
            rng = random.Random(seed)
            seqs = [parse(DocKind.SEQUENCE, serialize(sequence_body(rng, max_events=6)),
                          f"q{j}.qd") for j in range(rng.randint(1, 4))]
            sd = synthesize_state_diagram(seqs, SynthesisOptions("Target"))
            for q in seqs:
                v = check_seq_against_state(q, sd)
                assert v.accepted, f"seed {seed}: {v.render()}"
            words = [projection_keys(q.body, "t") for q in seqs]
            assert len(sd.body.states) == trie_size(words), f"seed {seed}"


@pytest.mark.criterion(7, "round trips: 500 documents, 100 document graphs")
def test_round_trips(tmp_path):
    makers = [(DocKind.CLASS, class_diagram_body), (DocKind.STATE, state_diagram_body),
              (DocKind.SEQUENCE, lambda r: sequence_body(r, marks=True)),
              (DocKind.OBJECT, object_diagram_body), (DocKind.TEXT, text_body)]
    with Timer(30):
        for seed in range(500):
            kind, make = makers[seed % len(makers)]
            body = make(random.Random(seed))
            text = serialize(body)
            doc = parse(kind, text, "doc")
            assert doc.body == body, f"seed {seed}"
            assert serialize(doc) == text
        for seed in range(100):
            root = tmp_path / f"g{seed}"
            root.mkdir()
            g = doc_graph(random.Random(seed), root)
            docgraph.save(g)
            again = docgraph.load(g.manifest_path)
            assert again == g, f"seed {seed}"
            assert docgraph.render_manifest(again) == docgraph.render_manifest(g)


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "sysmodel.cli", *args], capture_output=True,
                          check=False, cwd=DEMO)


@pytest.mark.criterion(8, "reproducible simulation and exhaustive counts")
def test_reproducibility():
    with Timer(30):
        args = ("simulate", "pingpong.cd", "pingpong.sd", "pingpong.od",
                "--stimuli", "pingpong.stim", "--seed", "7", "--rounds", "10")
        outs = [_cli(*args) for _ in range(3)]
        assert all(o.returncode == 0 for o in outs), outs[0].stderr
        assert outs[0].stdout == outs[1].stdout == outs[2].stdout
        assert outs[0].stdout.startswith(b"# seed=7 rounds=10")
        counts = []
        for seed in range(20):
            model, stimuli = system_model(random.Random(500 + seed), max_objects=3)
            runs = enumerate_runs(model, stimuli, 5, cap=100_000)
            assert not runs.truncated
            assert len(runs) == len(dfs_system_runs(model, stimuli, 5)), f"seed {seed}"
            counts.append(len(runs))
    print(f"exhaustive run counts: {counts}")
    assert max(counts) > 1


def _codes(verdict):
    return {v.rule for v in verdict.violations}


@pytest.mark.criterion(9, "technical-step conformance corpus (3 x 24 cases)")
def test_conformance_corpus():
    def doc(kind, text, name):
        return parse(kind, text, name)

    table = class_table_of([doc(DocKind.CLASS, ACCOUNT_CD, "account.cd")])
    assert len(CD_ACCEPT) == len(CD_REJECT) == len(SD_ACCEPT) == len(SD_REJECT) \
        == len(QD_ACCEPT) == len(QD_REJECT) == 12
    failures = []
    with Timer(10):
        for name, old, new in CD_ACCEPT:
            v = refine_class_diagram(doc(DocKind.CLASS, old, "old.cd"),
                                     doc(DocKind.CLASS, new, "new.cd"))
            if not v.accepted:
                failures.append(("cd accept", name, _codes(v)))
        for name, old, new, codes in CD_REJECT:
            v = refine_class_diagram(doc(DocKind.CLASS, old, "old.cd"),
                                     doc(DocKind.CLASS, new, "new.cd"))
            if _codes(v) != codes:
                failures.append(("cd reject", name, _codes(v)))
        for name, old, new, mapping in SD_ACCEPT:
            v = refine_state_diagram(doc(DocKind.STATE, old, "old.sd"),
                                     doc(DocKind.STATE, new, "new.sd"), mapping, table)
            if not v.accepted:
                failures.append(("sd accept", name, _codes(v)))
        for name, old, new, mapping, codes in SD_REJECT:
            v = refine_state_diagram(doc(DocKind.STATE, old, "old.sd"),
                                     doc(DocKind.STATE, new, "new.sd"), mapping, table)
            if _codes(v) != codes:
                failures.append(("sd reject", name, _codes(v)))
        for name, qd, sd in QD_ACCEPT:
            v = check_seq_against_state(doc(DocKind.SEQUENCE, qd, "s.qd"),
                                        doc(DocKind.STATE, sd, "account.sd"), table)
            if not v.accepted:
                failures.append(("qd accept", name, _codes(v)))
        for name, qd, sd, codes in QD_REJECT:
            v = check_seq_against_state(doc(DocKind.SEQUENCE, qd, "s.qd"),
                                        doc(DocKind.STATE, sd, "account.sd"), table)
            if _codes(v) != codes:
                failures.append(("qd reject", name, _codes(v)))
    assert not failures, failures
