import json
import random
from dataclasses import replace
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import system_model
from oracles import dfs_system_runs
from sysmodel.core import TICK, Message
from sysmodel.dsl import DocKind, parse, parse_file
from sysmodel.errors import CreationViolation, InvalidStimulus, MessageNotAccepted
from sysmodel.semantics import elaborate
from sysmodel.simulator import (ExhaustiveEnumeration, MediumState, RoundRobin, RunSet,
                                SeededRandom, enumerate_runs, init_run, run, step)

MODELS = Path(__file__).resolve().parent.parent / "demos" / "models"


def pingpong():
    return elaborate([parse_file(MODELS / f"pingpong.{ext}", f"pingpong.{ext}")
                      for ext in ("cd", "sd", "od")])


SERVE = [(0, Message("env", "alice", "serve"))]


def test_no_stimuli_gives_pure_ticks():
    tr = run(pingpong(), [], rounds=3)
    for obj in tr.objects():
        assert tr.input[obj].events == (TICK,) * 3
        assert tr.output[obj].events == (TICK,) * 3
    assert tr.state["alice"].ticks() == 3 and len(tr.state["alice"].items()) == 3


def test_rally_matches_hand_execution():
    # serve -> ping(0) -> pong(1) -> ping(2) -> pong(3) -> ping(4) -> pong(5), which
    # alice swallows because her guard n < 5 fails
    tr = run(pingpong(), SERVE, rounds=8)
    delivered = [(r, o, str(m)) for r in range(8) for o in ("alice", "bob")
                 for m in tr.input[o].rounds()[r]]
    assert delivered == [
        (0, "alice", "env->alice.serve()"),
        (1, "bob", "alice->bob.ping(0)"),
        (2, "alice", "bob->alice.pong(1)"),
        (3, "bob", "alice->bob.ping(2)"),
        (4, "alice", "bob->alice.pong(3)"),
        (5, "bob", "alice->bob.ping(4)"),
        (6, "alice", "bob->alice.pong(5)")]
    assert tr.output["alice"].rounds()[6] == []
    last = {o: tr.state[o].rounds()[7][0] for o in ("alice", "bob")}
    assert last["alice"].values["hits"] == 2 and last["bob"].values["hits"] == 3
    assert "round=6 obj=alice in=bob->alice.pong(5)" in tr.lines()


def test_messages_to_env_are_recorded_immediately():
    m = pingpong()
    tr = run(m, [(0, Message("env", "alice", "ping", (7,)))], rounds=1)
    assert [str(x) for x in tr.input["env"].items()] == ["alice->env.pong(8)"]


def test_invalid_stimuli():
    m = pingpong()
    for bad in [(-1, Message("env", "alice", "serve")),
                (0, Message("carol", "alice", "serve")),
                (0, Message("env", "ghost", "serve")),
                (0, Message("env", "alice", "ping")),
                (0, Message("env", "alice", "shout"))]:
        with pytest.raises(InvalidStimulus):
            init_run(m, [bad])


def creation_model(owner):
    cd = parse(DocKind.CLASS, "class P {\n attr n: Int\n method go(k: Int): Int\n"
                              " method hi(k: Int): Int\n}", "p.cd")
    sd = parse(DocKind.STATE, "statemachine P {\n states S\n initial S\n"
                              " trans S -> S on go(k) / emit hi(k) to @kid\n"
                              " trans S -> S on hi(k) / n := k\n}", "p.sd")
    od = parse(DocKind.OBJECT, f"objects {{\n a: P\n b: P\n creatable kid: P by {owner}\n}}",
               "p.od")
    return elaborate([cd, sd, od])


def test_creation_on_first_delivery():
    m = creation_model("a")
    tr = run(m, [(0, Message("env", "a", "go", (4,)))], rounds=2)
    assert tr.objects() == ["a", "b", "env", "kid"]
    assert [str(x) for x in tr.input["kid"].items()] == ["a->kid.hi(4)"]
    assert tr.state["kid"].rounds()[0] == []  # not alive yet in round 0
    assert tr.state["kid"].rounds()[1][0].values["n"] == 4


def test_creation_by_wrong_owner():
    m = creation_model("b")
    rs = init_run(m, [(0, Message("env", "a", "go", (1,)))])
    rs, _ = step(rs)
    with pytest.raises(CreationViolation):
        step(rs)


def test_message_outside_interface_at_delivery():
    m = creation_model("a")
    rs = init_run(m)
    rs = replace(rs, medium=MediumState().send(Message("a", "b", "nope")))
    with pytest.raises(MessageNotAccepted):
        step(rs)


def two_servers():
    m = pingpong()
    stim = [(0, Message("env", "alice", "ping", (1,))), (0, Message("env", "bob", "ping", (2,))),
            (0, Message("bob", "alice", "pong", (0,)))]
    return m, stim


def test_round_robin_rotates_over_pairs():
    m, stim = two_servers()
    rs = init_run(m, stim, RoundRobin())
    picked = []
    for _ in range(3):
        rs, ev = step(rs)
        picked.append((ev.receiver, ev.message.sender))
    assert picked == [("alice", "bob"), ("alice", "env"), ("bob", "alice")]


def test_seeded_runs_are_reproducible():
    m, stim = two_servers()
    runs = {run(m, stim, 6, SeededRandom(3)).to_text() for _ in range(3)}
    assert len(runs) == 1
    seeds = {run(m, stim, 6, SeededRandom(s)).to_text() for s in range(20)}
    assert len(seeds) > 1


def test_exhaustive_against_oracle():
    m, stim = two_servers()
    runs = run(m, stim, 4, ExhaustiveEnumeration())
    assert isinstance(runs, RunSet) and not runs.truncated
    assert len(runs) == len(dfs_system_runs(m, stim, 4))
    assert run(m, stim, 4, RoundRobin()).to_text() in runs.texts()


def test_exhaustive_cap_truncates():
    m, stim = two_servers()
    runs = enumerate_runs(m, stim, 6, cap=3)
    assert runs.truncated and runs.cap == 3
    with pytest.raises(ValueError):
        enumerate_runs(m, stim, 2, cap=0)


def test_rounds_must_be_positive():
    with pytest.raises(ValueError):
        run(pingpong(), [], rounds=0)


def test_structured_records():
    tr = run(pingpong(), SERVE, rounds=2)
    data = json.loads(tr.to_json())
    assert data["rounds"] == 2
    assert len(data["events"]) == len(tr.lines())
    assert data["events"][0] == {"round": 0, "obj": "alice", "kind": "in",
                                 "value": "env->alice.serve()"}
    assert {"round": 1, "obj": "bob", "kind": "tick"} in data["events"]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_every_seeded_run_is_an_exhaustive_run(seed):
    model, stim = system_model(random.Random(seed), max_objects=3)
    runs = enumerate_runs(model, stim, 4, cap=100_000)
    assert not runs.truncated
    assert run(model, stim, 4, SeededRandom(seed)).to_text() in runs.texts()
    assert len(runs) == len(dfs_system_runs(model, stim, 4))
