import math

import numpy as np
import pytest
from hypothesis import given, settings

from wcchaos import expr as E
from wcchaos.errors import DomainError, ExpressionSyntaxError

from exprgen import finite_difference, random_tree, trees


def test_parse_variable():
    assert E.parse("x") == E.Var()


def test_parse_example_d_structure():
    x = E.Var()
    expected = E.Neg(E.Mul(E.Pow(x, E.Num(3.0)), E.Func("sin", E.Div(E.Num(1.0), x))))
    assert E.parse("-x^3*sin(1/x)") == expected


def test_power_is_right_associative_and_tighter_than_minus():
    x = E.Var()
    assert E.parse("2^3^2") == E.Pow(E.Num(2.0), E.Pow(E.Num(3.0), E.Num(2.0)))
    assert E.parse("-x^2") == E.Neg(E.Pow(x, E.Num(2.0)))


def test_binary_minus_is_left_associative():
    x = E.Var()
    assert E.parse("x - 1 - 2") == E.Sub(E.Sub(x, E.Num(1.0)), E.Num(2.0))
    assert E.parse("-x - 1") == E.Sub(E.Neg(x), E.Num(1.0))
    assert E.parse("x - -1") == E.Sub(x, E.Neg(E.Num(1.0)))
    assert E.parse("2*-x") == E.Mul(E.Num(2.0), E.Neg(x))
    assert E.parse("2^-x") == E.Pow(E.Num(2.0), E.Neg(x))


def test_whitespace_insensitive():
    assert E.parse(" x * ( 1 -x ) ") == E.parse("x*(1-x)")


@pytest.mark.parametrize(
    "source, position",
    [("exp(2*", 7), ("(x", 3), ("x)", 2), ("x+", 3), ("foo(x)", 1), ("sin x", 5), ("x $ 1", 3)],
)
def test_syntax_errors_report_position(source, position):
    with pytest.raises(ExpressionSyntaxError) as info:
        E.parse(source)
    assert info.value.position == position
    assert f"position {position}" in str(info.value)


def test_empty_source_rejected():
    with pytest.raises(ExpressionSyntaxError):
        E.parse("   ")


def test_numbers_and_constants():
    assert E.evaluate(E.parse("1.5e2 + .5"), 0.0) == 150.5
    assert E.evaluate(E.parse("pi"), 0.0) == math.pi
    assert E.evaluate(E.parse("e"), 0.0) == math.e
    assert E.evaluate(E.parse("2e1"), 0.0) == 20.0


def test_differentiate_examples():
    assert E.differentiate(E.parse("x^2")) == E.parse("2*x")
    assert E.to_string(E.differentiate(E.parse("x^2"))) == "2 * x"
    assert E.differentiate(E.parse("-x")) == E.Num(-1.0)
    assert E.to_string(E.differentiate(E.parse("-x"))) == "(-1)"


def test_differentiate_example_d_against_finite_difference():
    e = E.parse("-x^3*sin(1/x)")
    d = E.compile_expr(E.differentiate(e))
    f = E.compile_expr(e)
    fd = finite_difference(f, 0.1)
    assert d(0.1) == pytest.approx(fd, rel=1e-6)


def test_differentiate_logistic():
    d = E.differentiate(E.parse("-x*(1-x)"))
    for x in (0.0, 0.3, 0.9):
        assert E.evaluate(d, x) == pytest.approx(-1 + 2 * x, abs=1e-15)


@pytest.mark.parametrize(
    "source, x, value",
    [("exp(0)", 12.3, 1.0), ("-x*(1-x)", 0.5, -0.25), ("abs(x)", -2.0, 2.0), ("(-8)^(1/3)", None, None)],
)
def test_evaluate_examples(source, x, value):
    e = E.parse(source)
    if value is None:
        with pytest.raises(DomainError):
            E.evaluate(e, 0.0)
    else:
        assert E.evaluate(e, x) == value


@pytest.mark.parametrize("source, x", [("1/x", 0.0), ("log(x)", 0.0), ("log(x)", -1.0), ("sqrt(x)", -1e-300), ("0^(-x)", 1.0)])
def test_domain_errors(source, x):
    e = E.parse(source)
    with pytest.raises(DomainError) as info:
        E.evaluate(e, x)
    assert info.value.x == x
    with pytest.raises(DomainError):
        E.compile_expr(e)(x)
    with pytest.raises(DomainError):
        E.compile_expr(e).vec(np.array([1.0, x]))


def test_domain_error_names_subexpression():
    with pytest.raises(DomainError) as info:
        E.evaluate(E.parse("x + log(x - 1)"), 0.5)
    assert info.value.subexpr == "log(x - 1)"


def test_overflow_is_inf_not_error():
    assert E.evaluate(E.parse("exp(x)"), 1000.0) == math.inf
    assert E.evaluate(E.parse("x^3"), -1e200) == -math.inf
    assert E.compile_expr(E.parse("exp(x)")).vec(np.array([0.0, 1000.0]))[1] == math.inf
    with pytest.raises(DomainError):
        E.evaluate(E.parse("exp(x) - exp(x)"), 1000.0)


def test_negative_base_integer_exponent():
    assert E.evaluate(E.parse("x^3"), -2.0) == -8.0
    with pytest.raises(DomainError):
        E.evaluate(E.parse("x^0.5"), -2.0)


def test_compiled_matches_tree_walk_bitwise():
    rng = np.random.default_rng(7)
    for _ in range(200):
        e = random_tree(rng)
        c = E.compile_expr(e)
        for x in rng.uniform(-3, 3, size=10):
            try:
                ref = E.evaluate(e, x)
            except DomainError:
                with pytest.raises(DomainError):
                    c(x)
                continue
            got = c(x)
            assert got == ref or (math.isnan(got) and math.isnan(ref))


def test_vector_matches_scalar():
    rng = np.random.default_rng(3)
    xs = np.linspace(0.1, 3.0, 50)
    for _ in range(100):
        e = random_tree(rng)
        c = E.compile_expr(e)
        try:
            ref = np.array([c(v) for v in xs])
        except DomainError:
            continue
        got = c.vec(xs)
        np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-300)


def test_constant_vec_broadcasts():
    c = E.compile_expr(E.parse("2"))
    assert c.constant
    np.testing.assert_array_equal(c.vec(np.zeros(4)), np.full(4, 2.0))


@settings(max_examples=300, deadline=None)
@given(trees)
def test_round_trip(tree):
    text = E.to_string(tree)
    parsed = E.parse(text)
    assert parsed == tree
    assert E.parse(E.to_string(parsed)) == parsed


@pytest.mark.parametrize(
    "source",
    ["-x^3*sin(1/x)", "x - (1 - x)", "(-x)*2", "-(x*2)", "2^3^2", "(2^3)^2", "x/(x*x)", "-(-x)", "x*-(1+x)", "1e-10*x"],
)
def test_round_trip_examples(source):
    tree = E.parse(source)
    assert E.parse(E.to_string(tree)) == tree


def test_derivative_matches_finite_difference_on_random_expressions():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(1000):
        e = random_tree(rng)
        f = E.compile_expr(e)
        d = E.compile_expr(E.differentiate(e))
        for x in rng.uniform(-3.0, 3.0, size=100):
            try:
                fd = finite_difference(f, x)
                dv = d(x)
                h = 1e-6 * max(1.0, abs(x))
                values = [f(x + k * h) for k in (-2, -1, 1, 2)]
            except DomainError:
                continue
            if not all(math.isfinite(v) and abs(v) < 1e6 for v in values + [fd, dv]):
                continue
            # skip points where the difference quotient itself is ill-conditioned
            h2 = 4e-6 * max(1.0, abs(x))
            try:
                fd_wide = (4 * (f(x + h2 / 2) - f(x - h2 / 2)) / h2 - (f(x + h2) - f(x - h2)) / (2 * h2)) / 3
            except DomainError:
                continue
            if abs(fd_wide - fd) > 1e-7 * (1 + abs(fd)):
                continue
            assert abs(dv - fd) <= 1e-5 * (1 + abs(fd)), (E.to_string(e), x, dv, fd)
            checked += 1
    assert checked > 20000
