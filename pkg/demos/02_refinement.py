"""Refine an account state diagram: one accepted step, one rejected step,
and a bounded trace comparison that finds a concrete witness."""

from sysmodel.core import Message
from sysmodel.dsl import DocKind, parse
from sysmodel.refinement import refine_state_diagram, trace_refinement_check
from sysmodel.semantics import class_table_of, elaborate

CD = parse(DocKind.CLASS, """class Account {
  attr balance: Int
  method deposit(n: Int): Int
  method ack(n: Int): Int
  method close(): Int
}""", "account.cd")

OLD = parse(DocKind.STATE, """statemachine Account {
  states Open, Closed
  initial Open
  trans Open -> Open on deposit(n) if n > 0 / balance := balance + n, emit ack(n) to sender
  trans Open -> Closed on close()
}""", "v1.sd")

# Closed is split into Archived; the mapping says which old state it refines.
SPLIT = parse(DocKind.STATE, """statemachine Account {
  states Open, Closed, Archived
  initial Open
  trans Open -> Open on deposit(n) if n > 0 / balance := balance + n, emit ack(n) to sender
  trans Open -> Archived on close()
}""", "v2.sd")

# Accepting deposits of zero widens the guard.
LAX = parse(DocKind.STATE, """statemachine Account {
  states Open, Closed
  initial Open
  trans Open -> Open on deposit(n) if n >= 0 / balance := balance + n, emit ack(n) to sender
  trans Open -> Closed on close()
}""", "v3.sd")

table = class_table_of([CD])
print("v1 -> v2 (Archived refines Closed):")
print(refine_state_diagram(OLD, SPLIT, {"Archived": "Closed"}, table).render())
print("v1 -> v3 (weaker guard):")
print(refine_state_diagram(OLD, LAX, class_table=table).render())

od = parse(DocKind.OBJECT, "objects { acct: Account }", "bank.od")
stimuli = [(0, Message("env", "acct", "deposit", (0,)))]
verdict = trace_refinement_check(elaborate([CD, OLD, od]), elaborate([CD, LAX, od]),
                                 stimuli, rounds=2)
print("bounded trace check of v3 against v1 (2 rounds):")
print(verdict.render())
