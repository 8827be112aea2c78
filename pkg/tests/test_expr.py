import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import expr as random_expr
from oracles import OracleEvalError, oeval
from sysmodel.errors import EvaluationError, ExprTypeError
from sysmodel.expr import (NULL, TRUE, Binary, Lit, Ref, Unary, Var, bounded_implies, conjoin,
                           conjuncts, evaluate, format_expr, format_value, free_vars, holds,
                           typecheck, type_of)
from sysmodel.syntax import parse_expr


def test_div_truncates_toward_zero():
    assert evaluate(parse_expr("7 div 2"), {}) == 3
    assert evaluate(parse_expr("-7 div 2"), {}) == -3
    assert evaluate(parse_expr("7 div -2"), {}) == -3
    assert evaluate(parse_expr("-7 div -2"), {}) == 3


def test_div_by_zero():
    with pytest.raises(EvaluationError):
        evaluate(parse_expr("1 div 0"), {})


def test_short_circuit():
    assert evaluate(parse_expr("false and 1 div 0 == 1"), {}) is False
    assert evaluate(parse_expr("true or 1 div 0 == 1"), {}) is True


def test_comparisons_do_not_chain():
    with pytest.raises(Exception):
        parse_expr("1 < 2 < 3")


def test_precedence():
    assert evaluate(parse_expr("1 + 2 * 3"), {}) == 7
    assert evaluate(parse_expr("(1 + 2) * 3"), {}) == 9
    assert evaluate(parse_expr("not 1 == 2 and true"), {}) is True
    assert evaluate(parse_expr("10 - 3 - 2"), {}) == 5


def test_references_and_null():
    env = {"peer": Ref("bob"), "none": NULL}
    assert evaluate(parse_expr("peer == @bob"), env) is True
    assert evaluate(parse_expr("none == null"), env) is True
    assert format_value(Ref("bob")) == "@bob"
    assert format_value(NULL) == "null"


def test_bool_is_not_int():
    assert type_of(True) == "Bool"
    assert type_of(1) == "Int"
    with pytest.raises(ExprTypeError):
        typecheck(parse_expr("x + true"), {"x": "Int"})


def test_typecheck():
    env = {"x": "Int", "s": "String", "p": "ObjectRef"}
    assert typecheck(parse_expr("x > 0 and s != \"\""), env) == "Bool"
    assert typecheck(parse_expr("x * 2 div 3"), env) == "Int"
    assert typecheck(parse_expr("p == null"), env) == "Bool"
    with pytest.raises(ExprTypeError):
        typecheck(parse_expr("y > 0"), env)
    with pytest.raises(ExprTypeError):
        typecheck(parse_expr("s < 1"), env)


def test_holds_none_is_true():
    assert holds(None, {})


def test_conjuncts():
    e = parse_expr("a and b and (c or d)")
    assert [format_expr(c) for c in conjuncts(e)] == ["a", "b", "c or d"]
    assert conjoin([]) is None
    assert free_vars(e) == {"a", "b", "c", "d"}


def test_bounded_implies_matches_brute_force():
    p, q = parse_expr("x >= 0 and x <= 10"), parse_expr("x >= 0")
    assert bounded_implies(p, q, {"x": "Int"})[0]
    holds_everywhere = all(not (0 <= x <= 10) or x >= 0 for x in range(-32, 33))
    assert holds_everywhere
    ok, cex = bounded_implies(q, p, {"x": "Int"})
    assert not ok and cex["x"] > 10


def test_bounded_implies_gives_up_beyond_three_variables():
    p = parse_expr("a > 0 and b > 0 and c > 0 and d > 0")
    assert bounded_implies(p, TRUE, dict.fromkeys("abcd", "Int")) is None


def test_negative_literals_round_trip():
    for text in ("-5", "-(5)", "- x", "3 - -2", "-(-3)"):
        e = parse_expr(text)
        assert parse_expr(format_expr(e)) == e
    assert parse_expr("-5") == Lit(-5)
    assert parse_expr("-(5)") == Unary("-", Lit(5))


def test_format_minimal_parentheses():
    assert format_expr(parse_expr("(a + b) + c")) == "a + b + c"
    assert format_expr(parse_expr("a + (b + c)")) == "a + (b + c)"
    assert format_expr(parse_expr("(a or b) and c")) == "(a or b) and c"
    assert format_expr(Binary("==", Binary("<", Var("a"), Var("b")), Lit(True))) == "(a < b) == true"


@settings(max_examples=300, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_format_parse_round_trip(seed):
    e = random_expr(random.Random(seed), depth=4)
    assert parse_expr(format_expr(e)) == e


@settings(max_examples=300, deadline=None)
@given(st.integers(min_value=0, max_value=10**6), st.integers(-20, 20), st.integers(-20, 20))
def test_evaluate_agrees_with_reference(seed, x, n):
    rng = random.Random(seed)
    ints = ("x", "n")
    e = random_int_expr(rng, 3, ints)
    env = {"x": x, "n": n}
    try:
        want = oeval(e, env)
    except OracleEvalError:
        with pytest.raises(EvaluationError):
            evaluate(e, env)
        return
    assert evaluate(e, env) == want


def random_int_expr(rng, depth, names):
    if depth == 0 or rng.random() < 0.3:
        return Lit(rng.randint(-5, 5)) if rng.random() < 0.5 else Var(rng.choice(names))
    if rng.random() < 0.15:
        return Unary("-", random_int_expr(rng, depth - 1, names))
    op = rng.choice(("+", "-", "*", "div"))
    return Binary(op, random_int_expr(rng, depth - 1, names),
                  random_int_expr(rng, depth - 1, names))
