"""Semantics kernel for a UML-like modeling language.

Diagram documents are parsed (``dsl``), elaborated into a system model
of objects, messages and automata (``core``, ``semantics``), executed as
bounded system runs over a message medium (``simulator``), checked for
refinement and consistency (``refinement``) and organised in a
persistent document graph (``docgraph``).
"""

from .core import (ENV, TICK, Automaton, ClassTable, Message, ObjectId, ObjectState,
                   Signature, SystemModel, TimedStream, Transition, accepts, black_box,
                   check_class_table, effective_signature, enabled_steps)
from .dsl import DocKind, Document, parse, parse_file, serialize
from .errors import ModelError
from .refinement import (RefinementVerdict, SynthesisOptions, check_seq_against_state,
                         consistency_intersection, refine_class_diagram,
                         refine_state_diagram, synthesize_state_diagram,
                         trace_refinement_check)
from .report import ValidationReport
from .semantics import (check_object_diagram, check_sequence_diagram, classify_view,
                        elaborate)
from .simulator import (ExhaustiveEnumeration, RoundRobin, RunTrace, SeededRandom,
                        enumerate_runs, init_run, run, step)

__version__ = "0.1.0"
