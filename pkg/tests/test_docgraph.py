import random
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import doc_graph
from sysmodel import docgraph
from sysmodel.docgraph import REFERS, TRANSFORM, DocNode
from sysmodel.dsl import DocKind
from sysmodel.errors import (CycleError, DuplicatePath, ManifestFormatError, UnknownNode,
                             UnsupportedTransformShape)

CD = """class Account {
  attr balance: Int
  method deposit(n: Int): Int
  method close(): Int
}
"""
SD = """statemachine Account {
  states Open, Closed
  initial Open
  trans Open -> Open on deposit(n) if n > 0 / balance := balance + n
  trans Open -> Closed on close()
}
"""
QD = "sequence s {\n  objects c: Customer, a: Account\n  c -> a : deposit(3)\n}\n"
NOW = "2024-05-01T00:00:00Z"


@pytest.fixture
def ws(tmp_path):
    files = {"bank.cd": CD, "bank_v2.cd": CD.replace("}\n", "  attr owner: ObjectRef\n}\n"),
             "account.sd": SD, "account_v2.sd": SD.replace("on close()", "on deposit(n)"),
             "buy.qd": QD, "pay.qd": QD.replace("deposit(3)", "deposit(0)"),
             "team.od": "objects { a: Account }\n", "notes.txt": "free text\n"}
    for name, text in files.items():
        (tmp_path / name).write_text(text)
    g = docgraph.new_graph(tmp_path / docgraph.MANIFEST_NAME)
    ids = {name: docgraph.add_document(g, tmp_path / name, author="ada", now=NOW)
           for name in sorted(files)}
    return g, ids


def test_new_node_has_all_flags_cleared(ws):
    g, ids = ws
    n = g.node(ids["bank.cd"])
    assert (n.validated, n.verified, n.tested, n.consistent, n.redundant) == (
        False, False, False, None, None)
    assert n.kind is DocKind.CLASS and n.path == "bank.cd" and n.created == NOW


def test_duplicate_path_and_parse_failures(ws, tmp_path):
    g, _ = ws
    before = dict(g.nodes)
    with pytest.raises(DuplicatePath):
        docgraph.add_document(g, tmp_path / "bank.cd")
    (tmp_path / "broken.cd").write_text("class {")
    with pytest.raises(Exception):
        docgraph.add_document(g, tmp_path / "broken.cd")
    assert g.nodes == before


def test_cycles_are_refused(ws):
    g, ids = ws
    a, b, c = ids["bank.cd"], ids["account.sd"], ids["buy.qd"]
    docgraph.link(g, REFERS, [b], [a])
    docgraph.link(g, REFERS, [c], [b])
    with pytest.raises(CycleError):
        docgraph.link(g, REFERS, [a], [c])
    with pytest.raises(CycleError):
        docgraph.link(g, TRANSFORM, [a], [a])
    # the other edge kind has its own acyclicity
    docgraph.link(g, TRANSFORM, [a], [c])
    assert docgraph.is_acyclic(g, REFERS) and len(g.edges) == 3


def test_multi_source_edges_and_unknown_nodes(ws):
    g, ids = ws
    e = docgraph.link(g, TRANSFORM, [ids["buy.qd"], ids["pay.qd"]], [ids["account.sd"]])
    assert e.sources == tuple(sorted([ids["buy.qd"], ids["pay.qd"]]))
    with pytest.raises(UnknownNode):
        docgraph.link(g, REFERS, ["ghost"], [ids["bank.cd"]])
    with pytest.raises(ValueError):
        docgraph.link(g, "depends", [ids["buy.qd"]], [ids["bank.cd"]])


def test_class_diagram_transform(ws):
    g, ids = ws
    good = docgraph.link(g, TRANSFORM, [ids["bank.cd"]], [ids["bank_v2.cd"]])
    assert docgraph.validate_transform(g, good, now=NOW).accepted
    assert g.node(ids["bank_v2.cd"]).consistent is True
    bad = docgraph.link(g, TRANSFORM, [ids["bank_v2.cd"]], [ids["notes.txt"]])
    with pytest.raises(UnsupportedTransformShape):
        docgraph.validate_transform(g, bad)


def test_state_diagram_transform_records_violations(ws):
    g, ids = ws
    src = ids["account.sd"]
    before = (g.root / "account.sd").read_text()
    e = docgraph.link(g, TRANSFORM, [src], [ids["account_v2.sd"]])
    v = docgraph.validate_transform(g, e)
    assert not v.accepted and "R-SD-DELETE" in v.rules()
    node = g.node(ids["account_v2.sd"])
    assert node.consistent is False and node.violations == v.violations
    assert (g.root / "account.sd").read_text() == before


def test_sequence_transform_uses_context(ws):
    g, ids = ws
    docgraph.link(g, REFERS, [ids["account.sd"]], [ids["bank.cd"]])
    e = docgraph.link(g, TRANSFORM, [ids["buy.qd"], ids["pay.qd"]], [ids["account.sd"]])
    v = docgraph.validate_transform(g, e)
    assert v.rules() == ["R-QD-PATH"]  # pay deposits 0, which the guard refuses


def test_unsupported_shape(ws):
    g, ids = ws
    e = docgraph.link(g, TRANSFORM, [ids["team.od"]], [ids["buy.qd"]])
    with pytest.raises(UnsupportedTransformShape):
        docgraph.validate_transform(g, e)
    with pytest.raises(UnsupportedTransformShape):
        docgraph.validate_transform(g, docgraph.link(g, REFERS, [ids["buy.qd"]],
                                                     [ids["bank.cd"]]))


def test_mark_redundant(ws):
    g, ids = ws
    assert docgraph.mark_redundant(g, ids["buy.qd"]) is True
    # account_v2 has an unguarded deposit, so even deposit(0) is admitted somewhere
    assert docgraph.mark_redundant(g, ids["pay.qd"]) is True
    (g.root / "late.qd").write_text(QD.replace("c -> a : deposit(3)",
                                               "c -> a : close()\n  c -> a : deposit(1)"))
    late = docgraph.add_document(g, g.root / "late.qd")
    assert docgraph.mark_redundant(g, late) is False
    assert g.node(ids["buy.qd"]).redundant is True
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert docgraph.mark_redundant(g, ids["bank.cd"]) is None
    assert caught and g.node(ids["bank.cd"]).redundant is None


def test_manual_flags_and_invariants(ws):
    g, ids = ws
    docgraph.set_flag(g, ids["bank.cd"], validated=True, verified=True)
    assert g.node(ids["bank.cd"]).verified
    with pytest.raises(ValueError):
        docgraph.set_flag(g, ids["bank.cd"], tested=True)
    with pytest.raises(ValueError):
        docgraph.set_flag(g, ids["notes.txt"], verified=True)
    with pytest.raises(ValueError):
        DocNode("x.cd", DocKind.CLASS, "", NOW, NOW, tested=True)


def test_save_and_load(ws):
    g, ids = ws
    docgraph.link(g, REFERS, [ids["account.sd"]], [ids["bank.cd"]])
    docgraph.mark_redundant(g, ids["buy.qd"], now=NOW)
    docgraph.save(g)
    text = g.manifest_path.read_text()
    assert "edge refers account -> bank\n" in text
    assert "node buy SequenceDiagram buy.qd author=ada" in text and "r:1" in text
    assert docgraph.load(g.manifest_path) == g
    assert not list(g.root.glob(".manifest.*"))


def test_empty_graph_round_trip(tmp_path):
    g = docgraph.new_graph(tmp_path / docgraph.MANIFEST_NAME)
    docgraph.save(g)
    assert g.manifest_path.read_text() == ""
    assert docgraph.load(g.manifest_path) == g


@pytest.mark.parametrize("text", [
    "edge depends a -> b\n",
    "node a class a.cd author= created=x updated=y\n",
    "node a class a.cd author= created=x updated=y flags=v:0,V:0,t:0,c:2,r:u\n",
    "node a class a.cd author= created=x updated=y flags=v:0,V:0,t:1,c:u,r:u\n",
    "node a text a.txt author= created=x updated=y flags=v:0,V:1,t:0,c:u,r:u\n",
    "edge refers a -> b\n",
    "bogus\n",
])
def test_bad_manifests(text, tmp_path):
    with pytest.raises(ManifestFormatError):
        docgraph.parse_manifest(text, tmp_path / docgraph.MANIFEST_NAME)


def test_manifest_cycle_is_rejected(tmp_path):
    node = "node {0} class {0}.cd author= created=x updated=y flags=v:0,V:0,t:0,c:u,r:u\n"
    text = node.format("a") + node.format("b") + "edge refers a -> b\nedge refers b -> a\n"
    with pytest.raises(ManifestFormatError):
        docgraph.parse_manifest(text, tmp_path / docgraph.MANIFEST_NAME)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9))
def test_random_graph_round_trip(tmp_path_factory, seed):
    root = tmp_path_factory.mktemp("g")
    g = doc_graph(random.Random(seed), root)
    docgraph.save(g)
    back = docgraph.load(g.manifest_path)
    assert back == g
    assert docgraph.render_manifest(back) == g.manifest_path.read_text()
    assert all(not n.tested for n in back.nodes.values())
