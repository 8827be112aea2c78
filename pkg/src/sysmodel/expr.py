"""Values, value types and the small expression language used by guards,
actions, invariants and message arguments.

Expressions are immutable trees. ``typecheck`` works against a map of
name -> type; ``evaluate`` against a map of name -> value.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Mapping, Union

from .errors import EvaluationError, ExprTypeError

INT = "Int"
BOOL = "Bool"
STRING = "String"
OBJREF = "ObjectRef"
VALUE_TYPES = (INT, BOOL, STRING, OBJREF)


@dataclass(frozen=True, order=True)
class Ref:
    """An object reference value; ``target`` is None for the null reference."""

    target: str | None = None

    def __str__(self):
        return "null" if self.target is None else "@" + self.target


NULL = Ref(None)

Value = Union[int, bool, str, Ref]

DEFAULTS = {INT: 0, BOOL: False, STRING: "", OBJREF: NULL}


def type_of(value) -> str:
    # bool before int: bool is an int subclass
    if isinstance(value, bool):
        return BOOL
    if isinstance(value, int):
        return INT
    if isinstance(value, str):
        return STRING
    if isinstance(value, Ref):
        return OBJREF
    raise TypeError(f"not a model value: {value!r}")


def has_type(value, vtype: str) -> bool:
    try:
        return type_of(value) == vtype
    except TypeError:
        return False


def format_value(value) -> str:
    t = type_of(value)
    if t == BOOL:
        return "true" if value else "false"
    if t == INT:
        return str(value)
    if t == STRING:
        return json.dumps(value)
    return str(value)


# -- AST --------------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "not"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Lit, Var, Unary, Binary]

TRUE = Lit(True)

# binding strength; comparisons are non-associative
PRECEDENCE = {
    "or": 1,
    "and": 2,
    "not": 3,
    "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "div": 6,
    "neg": 7,
}
COMPARISONS = frozenset({"==", "!=", "<", "<=", ">", ">="})
ARITH = frozenset({"+", "-", "*", "div"})
LOGIC = frozenset({"and", "or"})


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return PRECEDENCE[e.op]
    if isinstance(e, Unary):
        return PRECEDENCE["not" if e.op == "not" else "neg"]
    return 100


def format_expr(e: Expr) -> str:
    """Render with the minimum parentheses needed to re-parse the same tree."""
    if isinstance(e, Lit):
        return format_value(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        inner = format_expr(e.operand)
        if _prec(e.operand) < _prec(e):
            inner = f"({inner})"
        if e.op == "not":
            return f"not {inner}"
        if isinstance(e.operand, Lit) and not inner.startswith("-"):
            # "-5" would re-parse as the literal -5
            inner = f"({inner})"
        return f"-{inner}"
    p = PRECEDENCE[e.op]
    left, right = format_expr(e.left), format_expr(e.right)
    lp, rp = _prec(e.left), _prec(e.right)
    if lp < p or (lp == p and e.op in COMPARISONS):
        left = f"({left})"
    if rp <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Unary):
        return free_vars(e.operand)
    if isinstance(e, Binary):
        return free_vars(e.left) | free_vars(e.right)
    return set()


def literals(e: Expr) -> list:
    if isinstance(e, Lit):
        return [e.value]
    if isinstance(e, Unary):
        return literals(e.operand)
    if isinstance(e, Binary):
        return literals(e.left) + literals(e.right)
    return []


def conjuncts(e: Expr | None) -> list[Expr]:
    if e is None:
        return []
    if isinstance(e, Binary) and e.op == "and":
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]


def conjoin(exprs) -> Expr | None:
    result = None
    for e in exprs:
        result = e if result is None else Binary("and", result, e)
    return result


def disjoin(exprs) -> Expr | None:
    result = None
    for e in exprs:
        result = e if result is None else Binary("or", result, e)
    return result


# -- static typing ------------------------------------------------------------


def typecheck(e: Expr, env: Mapping[str, str]) -> str:
    """Return the type of ``e`` under ``env`` or raise ExprTypeError."""
    if isinstance(e, Lit):
        return type_of(e.value)
    if isinstance(e, Var):
        if e.name not in env:
            raise ExprTypeError(f"unknown name {e.name!r}")
        return env[e.name]
    if isinstance(e, Unary):
        t = typecheck(e.operand, env)
        want = BOOL if e.op == "not" else INT
        if t != want:
            raise ExprTypeError(f"operand of {e.op!r} must be {want}, got {t}")
        return want
    lt, rt = typecheck(e.left, env), typecheck(e.right, env)
    if e.op in LOGIC:
        if lt != BOOL or rt != BOOL:
            raise ExprTypeError(f"operands of {e.op!r} must be Bool, got {lt} and {rt}")
        return BOOL
    if e.op in ("==", "!="):
        if lt != rt:
            raise ExprTypeError(f"cannot compare {lt} with {rt}")
        return BOOL
    if lt != INT or rt != INT:
        raise ExprTypeError(f"operands of {e.op!r} must be Int, got {lt} and {rt}")
    return BOOL if e.op in COMPARISONS else INT


# -- evaluation ---------------------------------------------------------------


def _int(v, op):
    if type_of(v) != INT:
        raise EvaluationError(f"{op!r} expects Int, got {format_value(v)}")
    return v


def _bool(v, op):
    if type_of(v) != BOOL:
        raise EvaluationError(f"{op!r} expects Bool, got {format_value(v)}")
    return v


def evaluate(e: Expr, env: Mapping[str, Value]) -> Value:
    """Evaluate ``e``. ``and``/``or`` short-circuit; ``div`` truncates toward zero."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvaluationError(f"unbound name {e.name!r}") from None
    if isinstance(e, Unary):
        v = evaluate(e.operand, env)
        if e.op == "not":
            return not _bool(v, "not")
        return -_int(v, "-")
    op = e.op
    if op == "and":
        return _bool(evaluate(e.left, env), op) and _bool(evaluate(e.right, env), op)
    if op == "or":
        return _bool(evaluate(e.left, env), op) or _bool(evaluate(e.right, env), op)
    a, b = evaluate(e.left, env), evaluate(e.right, env)
    if op in ("==", "!="):
        if type_of(a) != type_of(b):
            raise EvaluationError(f"cannot compare {format_value(a)} with {format_value(b)}")
        return (a == b) if op == "==" else (a != b)
    a, b = _int(a, op), _int(b, op)
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "div":
        if b == 0:
            raise EvaluationError("division by zero")
        q = abs(a) // abs(b)
        return q if (a >= 0) == (b >= 0) else -q
    raise EvaluationError(f"unknown operator {op!r}")


def holds(e: Expr | None, env: Mapping[str, Value]) -> bool:
    """Truth of an optional boolean expression; None means ``true``."""
    if e is None:
        return True
    v = evaluate(e, env)
    if type_of(v) != BOOL:
        raise EvaluationError(f"condition evaluated to non-Bool {format_value(v)}")
    return v


# -- bounded implication --------------------------------------------------------

INT_DOMAIN = range(-32, 33)
MAX_IMPLICATION_VARS = 3


def value_domain(vtype: str, extra=()) -> list:
    """Finite stand-in domain for bounded checks of a given type."""
    if vtype == INT:
        vals = list(INT_DOMAIN)
    elif vtype == BOOL:
        vals = [False, True]
    elif vtype == STRING:
        vals = ["", "\x00other"]
    else:
        vals = [NULL, Ref("\x00other")]
    for x in extra:
        if has_type(x, vtype) and x not in vals:
            vals.append(x)
    return vals


def _safe_holds(e, env):
    try:
        return holds(e, env)
    except EvaluationError:
        return False


def bounded_implies(premise: Expr | None, conclusion: Expr | None,
                    types: Mapping[str, str]):
    """Check ``premise => conclusion`` by exhaustive evaluation.

    Int variables range over [-32..32]; other types over a small domain
    seeded with the literals that occur in either expression. A failing
    evaluation counts as false. Returns ``(result, counterexample)``, or
    None when more than ``MAX_IMPLICATION_VARS`` variables are free.
    """
    names = set()
    lits = []
    for e in (premise, conclusion):
        if e is not None:
            names |= free_vars(e)
            lits += literals(e)
    names = sorted(names)
    if len(names) > MAX_IMPLICATION_VARS:
        return None
    domains = []
    for n in names:
        if n not in types:
            # an unknown name makes evaluation fail; a single dummy value suffices
            domains.append([NULL])
        else:
            domains.append(value_domain(types[n], lits))
    for combo in itertools.product(*domains):
        env = dict(zip(names, combo))
        if _safe_holds(premise, env) and not _safe_holds(conclusion, env):
            return False, env
    return True, None
