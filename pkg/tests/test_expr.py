"""Parser, evaluator and structural-derivative checks for the expression core."""

import math

import numpy as np
import pytest

from cgsys.expr import (
    Atan2, Binary, Const, DomainError, ParseError, UnboundVariableError,
    UnknownFunctionError, Var, diff, evaluate, free_vars, parse_expr, subst,
    to_string,
)


def central_difference(e, name, env, h=1e-5):
    """Independent derivative oracle: symmetric difference of evaluate."""
    lo = dict(env)
    hi = dict(env)
    lo[name] = env[name] - h
    hi[name] = env[name] + h
    return (evaluate(e, hi) - evaluate(e, lo)) / (2.0 * h)


# --- parsing ---------------------------------------------------------------


def test_parse_sum_of_products_shape():
    e = parse_expr("y3 + x1*y2")
    assert e == Binary("add", Var("y3"), Binary("mul", Var("x1"), Var("y2")))


def test_parse_atan_quotient_shape():
    e = parse_expr("atan(y1/x1)")
    assert e == parse_expr("atan(y1 / x1)")
    assert to_string(e) == "atan(y1/x1)"


def test_parse_error_offset():
    with pytest.raises(ParseError) as err:
        parse_expr("x1 + ")
    assert err.value.offset == 5


def test_parse_unknown_function():
    with pytest.raises(UnknownFunctionError):
        parse_expr("sinh(x1)")


def test_parse_precedence_and_associativity():
    # pow binds above unary minus, which binds above * and /
    assert parse_expr("-x^2") == -(Var("x") ** 2)
    assert parse_expr("(-x)^2") == (-Var("x")) ** 2
    assert parse_expr("a - b - c") == (Var("a") - Var("b")) - Var("c")
    assert parse_expr("a / b / c") == (Var("a") / Var("b")) / Var("c")
    assert parse_expr("a ^ b ^ c") == Var("a") ** (Var("b") ** Var("c"))
    assert parse_expr("a + b*c") == Var("a") + Var("b") * Var("c")


def test_parse_atan2():
    e = parse_expr("atan2(y1, x1)")
    assert e == Atan2(Var("y1"), Var("x1"))
    assert evaluate(e, {"y1": 1.0, "x1": 1.0}) == pytest.approx(math.pi / 4)


def test_parse_numbers():
    assert parse_expr("2.5e-3") == Const(2.5e-3)
    assert parse_expr(".5") == Const(0.5)
    assert parse_expr("3") == Const(3.0)


# --- evaluation ------------------------------------------------------------


def test_eval_product():
    assert evaluate(parse_expr("x1*y2"), {"x1": 2.0, "y2": 3.0}) == 6.0


def test_eval_atan_quarter_pi():
    v = evaluate(parse_expr("atan(y1/x1)"), {"x1": 1.0, "y1": 1.0})
    assert v == pytest.approx(0.78539816, abs=1e-8)


def test_eval_division_by_zero_is_domain_error():
    with pytest.raises(DomainError) as err:
        evaluate(parse_expr("x1/x2"), {"x1": 1.0, "x2": 0.0})
    assert "x1/x2" in str(err.value)


def test_eval_log_nonpositive_is_domain_error():
    with pytest.raises(DomainError):
        evaluate(parse_expr("log(x1)"), {"x1": -1.0})
    with pytest.raises(DomainError):
        evaluate(parse_expr("log(x1)"), {"x1": 0.0})


def test_eval_sqrt_negative_is_domain_error():
    with pytest.raises(DomainError):
        evaluate(parse_expr("sqrt(x1)"), {"x1": -4.0})


def test_eval_unbound_variable():
    with pytest.raises(UnboundVariableError):
        evaluate(parse_expr("x1 + q"), {"x1": 1.0})


def test_eval_deterministic():
    e = parse_expr("sin(x1)*exp(y1) - atan2(y1, x1)^3 / (1 + x1^2)")
    env = {"x1": 0.7315, "y1": -1.25}
    first = evaluate(e, env)
    assert all(evaluate(e, env) == first for _ in range(5))


# --- differentiation -------------------------------------------------------


def test_diff_product_drops_to_partner():
    assert diff(parse_expr("x1*y2"), "x1") == Var("y2")


def test_diff_constant_is_zero():
    assert diff(parse_expr("3"), "x1") == Const(0.0)
    assert to_string(diff(parse_expr("3"), "x1")) == "0"


def test_diff_atan_quotient_frozen_value():
    # oracle: central difference of evaluate at (1, 1) gives 0.5
    e = parse_expr("atan(y1/x1)")
    env = {"x1": 1.0, "y1": 1.0}
    oracle = central_difference(e, "y1", env)
    assert oracle == pytest.approx(0.5, abs=1e-9)
    assert evaluate(diff(e, "y1"), env) == pytest.approx(0.5, abs=1e-12)


def test_diff_variables_subset_of_input():
    exprs = [
        "x1*y2 + sin(x1)",
        "atan2(y1, x1) / y2",
        "exp(-y1) - 1",
        "sqrt(x1^2 + y1^2)",
        "log(x1) * tan(y1)",
    ]
    for s in exprs:
        e = parse_expr(s)
        for v in free_vars(e):
            assert free_vars(diff(e, v)) <= free_vars(e)


def test_diff_linearity_exact():
    rng = np.random.default_rng(3)
    a = parse_expr("sin(x1)*y1 + x1^3")
    b = parse_expr("atan2(y1, x1) - exp(x1*y1)")
    s = a + b
    for _ in range(100):
        env = {"x1": rng.uniform(0.1, 2.0), "y1": rng.uniform(-2.0, 2.0)}
        lhs = evaluate(diff(s, "x1"), env)
        rhs = evaluate(diff(a, "x1"), env) + evaluate(diff(b, "x1"), env)
        assert abs(lhs - rhs) < 1e-12


@pytest.mark.parametrize("text", [
    "sin(x1)", "cos(x1)", "tan(x1)", "atan(x1)", "exp(x1)", "log(x1)",
    "sqrt(x1)", "x1^3", "x1^y1", "x1/y1", "atan2(y1, x1)", "-x1*y1",
])
def test_diff_matches_central_difference(text):
    rng = np.random.default_rng(11)
    e = parse_expr(text)
    for _ in range(25):
        env = {"x1": rng.uniform(0.2, 1.4), "y1": rng.uniform(0.2, 1.4)}
        for v in sorted(free_vars(e)):
            cd = central_difference(e, v, env)
            got = evaluate(diff(e, v), env)
            assert abs(got - cd) / (1.0 + abs(cd)) < 1e-6


def test_second_derivatives_match_oracle():
    # nested structural derivative against a second-order difference stencil
    e = parse_expr("atan(y1/x1)")
    env = {"x1": 0.8, "y1": 1.3}
    h = 1e-4
    up = dict(env, y1=env["y1"] + h)
    dn = dict(env, y1=env["y1"] - h)
    oracle = (evaluate(e, up) - 2 * evaluate(e, env) + evaluate(e, dn)) / h**2
    got = evaluate(diff(diff(e, "y1"), "y1"), env)
    assert abs(got - oracle) < 1e-6


# --- printing and substitution ---------------------------------------------


@pytest.mark.parametrize("text", [
    "y3 + x1*y2",
    "atan(y1/x1)",
    "-x1^2 + (a - b) - c",
    "x1*(y1 + y2)*(-y3)",
    "atan2(y1, x1)/(1 + x1^2)",
    "exp(-y1) - 1",
    "2^-3 * x1",
    "sqrt(x1^2 + y1^2)",
])
def test_print_parse_roundtrip(text):
    t = parse_expr(text)
    assert parse_expr(to_string(t)) == t


def test_roundtrip_of_derivatives():
    for s in ["atan(y1/x1)", "x1*y2 - y3", "exp(-y1) - 1", "atan2(y1, x1)"]:
        e = parse_expr(s)
        for v in sorted(free_vars(e)):
            d = diff(e, v)
            assert parse_expr(to_string(d)) == d


def test_subst_composes():
    e = parse_expr("x1*y1 + sin(x1)")
    out = subst(e, {"x1": parse_expr("s^2"), "y1": parse_expr("2*s")})
    env = {"s": 0.7}
    expect = evaluate(e, {"x1": 0.49, "y1": 1.4})
    assert evaluate(out, env) == pytest.approx(expect, abs=1e-15)


def test_operator_overloading_builds_trees():
    x, y = Var("x"), Var("y")
    e = (x + 1) * y - x / y
    assert evaluate(e, {"x": 2.0, "y": 4.0}) == pytest.approx(11.5)
    assert evaluate(e + 0, {"x": 2.0, "y": 4.0}) == pytest.approx(11.5)
