"""Track documents in a document graph: add, link, validate a transform,
save the manifest and print it."""

import tempfile
from pathlib import Path

from sysmodel import docgraph

V1 = """class Account {
  attr balance: Int
  method deposit(n: Int): Int
}
"""
V2 = V1.replace("}\n", "  method close(): Int\n}\n")
V3 = V1.replace("balance: Int", "balance: String")

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    for name, text in {"v1.cd": V1, "v2.cd": V2, "v3.cd": V3}.items():
        (root / name).write_text(text)
    g = docgraph.new_graph(root / docgraph.MANIFEST_NAME)
    v1, v2, v3 = (docgraph.add_document(g, root / n, author="demo") for n in
                  ("v1.cd", "v2.cd", "v3.cd"))
    for target in (v2, v3):
        edge = docgraph.link(g, docgraph.TRANSFORM, [v1], [target])
        print(edge.render())
        print(docgraph.validate_transform(g, edge).render())
    try:
        docgraph.link(g, docgraph.TRANSFORM, [v2], [v1])
    except docgraph.CycleError as exc:
        print("refused:", exc)
    docgraph.save(g)
    print((root / docgraph.MANIFEST_NAME).read_text())
