import numpy as np
import pytest

from fracostro._errors import (
    DomainError,
    EvaluationError,
    IndexOutOfRangeError,
    ParseError,
    UnboundVariableError,
    UnknownIdentifierError,
)
from fracostro.lagrangian_dsl import (
    LEFT,
    RIGHT,
    Binary,
    Const,
    Coord,
    Deriv,
    Mom,
    Param,
    Time,
    Unary,
    XDeriv,
    binary,
    coordinates,
    evaluate,
    is_coordinate_free,
    parameters,
    parse,
    parse_lagrangian,
    partial,
    simplify,
    substitute,
    to_text,
    unary,
)


def test_precedence():
    assert parse("q0 + q1*q2^2") == Binary("+", Coord(0), Binary("*", Coord(1), Binary("^", Coord(2), Const(2))))
    assert parse("-q0^2") == Unary("neg", Binary("^", Coord(0), Const(2)))
    assert parse("q0 - q1 - q2") == Binary("-", Binary("-", Coord(0), Coord(1)), Coord(2))


def test_constants_fold_while_parsing():
    assert parse("2*i") == Const(2j)
    assert parse("2^3 - 1") == Const(7)
    assert parse("-(1.5e1)") == Const(-15)


def test_names():
    assert parse("t") == Time()
    assert parse("k") == Param("k")
    assert parse("p1") == Mom(1)
    assert parse("x[1.5]") == XDeriv(1.5)
    assert parse("Da[0.5](q0)") == Deriv(0.5, Coord(0), LEFT)
    assert parse("Db[1](q0*k)") == Deriv(1.0, Binary("*", Coord(0), Param("k")), RIGHT)
    assert parse("q_half", ladder=[0, 0.5, 1]) == Coord(1)
    assert parse("sin(t)") == Unary("sin", Time())


@pytest.mark.parametrize(
    ("text", "position"),
    [("q0 + * q1", 5), ("q0 $", 3), ("(q0", 3), ("q0^1.5", 3), ("q0/0", 2), ("x[k]", 2), ("", 0)],
)
def test_syntax_errors_carry_position(text, position):
    with pytest.raises(ParseError) as excinfo:
        parse(text)
    assert excinfo.value.position == position


def test_identifier_errors():
    with pytest.raises(IndexOutOfRangeError):
        parse("q2", ladder=[0, 1])
    with pytest.raises(IndexOutOfRangeError):
        parse("p1", ladder=[0, 1])
    with pytest.raises(UnknownIdentifierError):
        parse("k*q0", params={"m"})
    with pytest.raises(UnknownIdentifierError):
        parse("q_half", ladder=[0, 1])


@pytest.mark.parametrize(
    "text",
    [
        "0.5*m*q1^2 - 0.5*k*q0^2",
        "0.5*(1+eps^2*w^2)*q1^2 - 0.5*w^2*q0^2 - 0.5*eps^2*q2^2",
        "0.5*m*q2^2 + i*(g/2)*q1^2 - 0.5*k*q0^2",
        "q0 - (q1 - q2)",
        "q0/(q1*q2)",
        "(-q0)^2 + --q1",
        "q0*(-2) + (1-2*i)*q1 - (2*i)*t",
        "exp(-t)*Db[0.5](q0^2) + x[2.5]",
    ],
)
def test_printed_text_parses_back(text):
    expr = parse(text)
    assert parse(to_text(expr)) == expr


def _random_tree(rng, depth):
    leaves = [Coord(0), Coord(1), Param("k"), Time(), Const(2.5), Const(-3), Const(1j)]
    if depth == 0 or rng.random() < 0.25:
        return leaves[rng.integers(len(leaves))]
    choice = rng.integers(6)
    if choice == 0:
        return unary("neg", _random_tree(rng, depth - 1))
    if choice == 1:
        return unary("sin", _random_tree(rng, depth - 1))
    if choice == 2:
        return binary("^", _random_tree(rng, depth - 1), Const(int(rng.integers(4))))
    op = ("+", "-", "*")[choice - 3]
    return binary(op, _random_tree(rng, depth - 1), _random_tree(rng, depth - 1))


def test_random_trees_print_and_parse_back():
    rng = np.random.default_rng(11)
    for _ in range(200):
        expr = _random_tree(rng, 4)
        assert parse(to_text(expr)) == expr


def test_partial_matches_finite_differences():
    rng = np.random.default_rng(3)
    params = {"k": 0.7 - 0.2j}
    h = 1e-6
    for _ in range(100):
        expr = _random_tree(rng, 3)
        point = {"q0": 0.3 + 0.1j, "q1": -0.4 + 0.2j, "t": 0.9 + 0j}
        for l, name in enumerate(("q0", "q1")):
            up = evaluate(expr, {**point, name: point[name] + h}, params)
            down = evaluate(expr, {**point, name: point[name] - h}, params)
            exact = evaluate(partial(expr, l), point, params)
            assert exact == pytest.approx((up - down) / (2 * h), rel=1e-5, abs=1e-5)


def test_partial_is_simplified():
    assert partial(parse("q1^2"), 1) == parse("2*q1")
    assert partial(parse("k*q0*q1"), 0) == parse("k*q1")
    assert partial(parse("k*q0"), 1) == Const(0)


def test_simplify():
    assert simplify(parse("0*q0 + 1*q1")) == Coord(1)
    assert simplify(Unary("neg", Unary("neg", Coord(0)))) == Coord(0)
    assert simplify(Binary("*", Const(2), Binary("*", Const(3), Coord(0)))) == Binary("*", Const(6), Coord(0))
    assert simplify(Binary("*", Const(-1), Coord(0))) == Unary("neg", Coord(0))
    assert simplify(Binary("^", Coord(0), Const(0))) == Const(1)


def test_substitute():
    assert substitute(parse("q0*q1"), {Coord(1): Const(2)}) == parse("q0*2")
    assert substitute(parse("q0 + q1"), {Coord(0): Const(0)}) == Coord(1)


def test_tree_queries():
    expr = parse("q0*q2 + k*sin(t)")
    assert coordinates(expr) == {0, 2}
    assert parameters(expr) == {"k"}
    assert not is_coordinate_free(expr)
    assert is_coordinate_free(parse("k*t"))


@pytest.mark.parametrize(
    ("text", "bindings", "expected"),
    [
        ("2*q0 + q1", {"q0": 2, "q1": 2}, 6),
        ("q0 - q1", {"q0": 1, "q1": 3}, -2),
        ("i*q0", {"q0": 1}, 1j),
        ("k*x[1.5]", {"x[1.5]": 2}, 3),
    ],
)
def test_evaluate(text, bindings, expected):
    assert evaluate(parse(text), bindings, {"k": 1.5}) == pytest.approx(expected)


def test_evaluate_arrays():
    values = evaluate(parse("q0^2 + t"), {"q0": np.array([1.0, 2.0]), "t": np.array([0.5, 0.5])})
    np.testing.assert_allclose(values, [1.5, 4.5])


def test_evaluate_errors():
    with pytest.raises(EvaluationError):
        evaluate(parse("1/q0"), {"q0": 0})
    with pytest.raises(UnboundVariableError):
        evaluate(parse("k*q0"), {"q0": 1})
    with pytest.raises(UnboundVariableError):
        evaluate(parse("q1"), {"q0": 1})
    with pytest.raises(EvaluationError):
        evaluate(parse("Db[0.5](q0)"), {"q0": 1})


def test_evaluate_passes_derivatives_to_operator():
    def operator(node, values):
        return node.order * values

    assert evaluate(parse("Db[0.5](3*q0)"), {"q0": 2}, operator=operator) == pytest.approx(3)


@pytest.mark.parametrize(
    ("value", "text"),
    [(2, "2"), (-2, "(-2)"), (2.5, "2.5"), (2j, "(2*i)"), (1 - 2j, "(1+-2*i)"), (1j, "i"), (-1j, "(-i)")],
)
def test_constant_printing(value, text):
    assert to_text(Const(value)) == text
    assert parse(text) == Const(value)


def test_lagrangian_spec_validation():
    lag = parse_lagrangian("0.5*m*q1^2 - 0.5*k*q0^2", [0, 1], {"m": 1, "k": 2}, alpha=1.0)
    assert lag.degree == 1
    assert lag.params == {"m": 1 + 0j, "k": 2 + 0j}
    assert lag.json()["lagrangian"] == "0.5*m*q1^2-0.5*k*q0^2"

    with pytest.raises(DomainError):
        parse_lagrangian("q0", [0], {}, alpha=1.0)
    with pytest.raises(DomainError):
        parse_lagrangian("q0", [0, 1], {}, alpha=0.0)
    with pytest.raises(DomainError):
        parse_lagrangian("q0", [0, 1, 0.5], {}, alpha=0.5)
    with pytest.raises(IndexOutOfRangeError):
        parse_lagrangian("q2", [0, 1], {}, alpha=1.0)
    with pytest.raises(UnknownIdentifierError):
        parse_lagrangian("k*q0", [0, 1], {}, alpha=1.0)
