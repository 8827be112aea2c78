"""Synthesize a state diagram from two scenarios that share a prefix,
then check that it admits both scenarios."""

from sysmodel.dsl import DocKind, parse, serialize
from sysmodel.refinement import SynthesisOptions, check_seq_against_state, synthesize_state_diagram

BUY = parse(DocKind.SEQUENCE, """sequence buy {
  objects c: Customer, a: Account
  c -> a : deposit(5)
  a -> c : ack(5)
  c -> a : close()
}""", "buy.qd")

TOPUP = parse(DocKind.SEQUENCE, """sequence topup {
  objects c: Customer, a: Account
  c -> a : deposit(5)
  a -> c : ack(5)
  c -> a : deposit(1)
  a -> c : ack(1)
}""", "topup.qd")

sd = synthesize_state_diagram([BUY, TOPUP], SynthesisOptions("Account"))
print(serialize(sd))
for qd in (BUY, TOPUP):
    print(qd.id, "ACCEPTED" if check_seq_against_state(qd, sd).accepted else "REJECTED")
