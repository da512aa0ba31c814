"""Expression language for Lagrangians L(t, q0, ..., qn).

Precedence, tightest first: ``^`` (non-negative integer literal exponents),
unary minus, ``*`` ``/``, ``+`` ``-``. ``i`` is the imaginary unit, ``t`` the
time, ``q<l>`` the coordinate of ladder order ``ladder[l]`` (``q_half`` names the
half-order rung), ``p<l>`` its momentum, ``x[β]`` the left derivative of x of
total order β, and ``Da[β](e)`` / ``Db[β](e)`` left / right derivatives of an
expression. Any other identifier is a parameter. Grammar in docs/DSL.md.
"""

import re
from collections.abc import Callable, Iterator, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from fracostro._errors import (
    DomainError,
    EvaluationError,
    IndexOutOfRangeError,
    ParseError,
    UnboundVariableError,
    UnknownIdentifierError,
)

FUNCTIONS = ("sin", "cos", "exp")
LEFT = "left"
RIGHT = "right"


@dataclass(frozen=True)
class Const:
    value: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Time:
    pass


@dataclass(frozen=True)
class Coord:
    index: int


@dataclass(frozen=True)
class Mom:
    index: int


@dataclass(frozen=True)
class XDeriv:
    """ₐD_t^order x, for composite orders outside the ladder."""

    order: float


@dataclass(frozen=True)
class Deriv:
    order: float
    arg: "Expr"
    side: str = RIGHT


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Const | Param | Time | Coord | Mom | XDeriv | Deriv | Unary | Binary

ZERO = Const(0)
ONE = Const(1)

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()\[\]]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN.match(text, pos)
        if not match:
            offset = len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"Unexpected character {text[pos + offset]!r}", pos + offset)
        kind = match.lastgroup or "op"
        tokens.append(_Token(kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, ladder: Sequence[float] | None, params: set[str] | None) -> None:
        self.tokens = _tokenize(text)
        self.at = 0
        self.ladder = tuple(ladder) if ladder is not None else None
        self.params = params

    @property
    def token(self) -> _Token:
        return self.tokens[self.at]

    def _advance(self) -> _Token:
        token = self.token
        self.at += 1
        return token

    def _expect(self, text: str) -> _Token:
        if self.token.text != text or self.token.kind == "end":
            found = self.token.text or "end of input"
            raise ParseError(f"Expected {text!r}, found {found!r}", self.token.pos)
        return self._advance()

    def parse(self) -> Expr:
        expr = self._expr()
        if self.token.kind != "end":
            raise ParseError(f"Unexpected {self.token.text!r}", self.token.pos)
        return expr

    def _expr(self) -> Expr:
        node = self._term()
        while self.token.text in ("+", "-") and self.token.kind == "op":
            op = self._advance().text
            node = binary(op, node, self._term())
        return node

    def _term(self) -> Expr:
        node = self._unary()
        while self.token.text in ("*", "/") and self.token.kind == "op":
            op_token = self._advance()
            right = self._unary()
            if op_token.text == "/" and right == ZERO:
                raise ParseError("Division by literal zero", op_token.pos)
            node = binary(op_token.text, node, right)
        return node

    def _unary(self) -> Expr:
        if self.token.text == "-" and self.token.kind == "op":
            self._advance()
            return unary("neg", self._unary())
        return self._power()

    def _power(self) -> Expr:
        node = self._primary()
        while self.token.text == "^":
            self._advance()
            exponent = self.token
            if exponent.kind != "number" or not exponent.text.isdigit():
                raise ParseError("Exponent must be a non-negative integer literal", exponent.pos)
            self._advance()
            node = binary("^", node, Const(int(exponent.text)))
        return node

    def _bracket_order(self) -> float:
        self._expect("[")
        token = self.token
        if token.kind != "number":
            raise ParseError("Expected a derivative order", token.pos)
        self._advance()
        self._expect("]")
        return float(token.text)

    def _primary(self) -> Expr:
        token = self.token
        if token.kind == "number":
            self._advance()
            return Const(float(token.text))
        if token.text == "(":
            self._advance()
            node = self._expr()
            self._expect(")")
            return node
        if token.kind != "name":
            found = token.text or "end of input"
            raise ParseError(f"Unexpected {found!r}", token.pos)

        self._advance()
        name = token.text
        if name == "i":
            return Const(1j)
        if name == "t":
            return Time()
        if name == "x" and self.token.text == "[":
            return XDeriv(self._bracket_order())
        if name in ("Da", "Db") and self.token.text == "[":
            order = self._bracket_order()
            self._expect("(")
            arg = self._expr()
            self._expect(")")
            return Deriv(order, arg, LEFT if name == "Da" else RIGHT)
        if name in FUNCTIONS:
            self._expect("(")
            arg = self._expr()
            self._expect(")")
            return unary(name, arg)

        indexed = re.fullmatch(r"([qp])(\d+|_half)", name)
        if indexed:
            return self._indexed(indexed.group(1), indexed.group(2), token)

        if self.params is not None and name not in self.params:
            raise UnknownIdentifierError(f"Unknown identifier {name!r} at position {token.pos}")
        return Param(name)

    def _indexed(self, kind: str, suffix: str, token: _Token) -> Expr:
        if suffix == "_half":
            if self.ladder is None or 0.5 not in self.ladder:
                raise UnknownIdentifierError(f"{token.text!r} needs a ladder containing 1/2 (position {token.pos})")
            index = self.ladder.index(0.5)
        else:
            index = int(suffix)

        if self.ladder is not None:
            limit = len(self.ladder) - 1 if kind == "q" else len(self.ladder) - 2
            if index > limit:
                raise IndexOutOfRangeError(
                    f"{token.text!r} exceeds the ladder (max index {limit}) at position {token.pos}"
                )
        return Coord(index) if kind == "q" else Mom(index)


def parse(text: str, ladder: Sequence[float] | None = None, params: set[str] | None = None) -> Expr:
    """Parse DSL text; constant sub-expressions are folded as they are built."""
    return _Parser(text, ladder, params).parse()


def _apply(op: str, *values: complex | np.ndarray) -> complex | np.ndarray:
    if op == "neg":
        return -values[0]
    if op in FUNCTIONS:
        return getattr(np, op)(values[0])
    left, right = values
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        if np.any(np.asarray(right) == 0):
            raise EvaluationError("Division by zero")
        return left / right
    return left ** int(np.real(right))


def unary(op: str, arg: Expr) -> Expr:
    if isinstance(arg, Const):
        return Const(complex(_apply(op, arg.value)))
    return Unary(op, arg)


def binary(op: str, left: Expr, right: Expr) -> Expr:
    if isinstance(left, Const) and isinstance(right, Const):
        return Const(complex(_apply(op, left.value, right.value)))
    return Binary(op, left, right)


def children(expr: Expr) -> tuple[Expr, ...]:
    if isinstance(expr, Binary):
        return (expr.left, expr.right)
    if isinstance(expr, Unary | Deriv):
        return (expr.arg,)
    return ()


def walk(expr: Expr) -> Iterator[Expr]:
    yield expr
    for child in children(expr):
        yield from walk(child)


def coordinates(expr: Expr) -> set[int]:
    return {node.index for node in walk(expr) if isinstance(node, Coord)}


def parameters(expr: Expr) -> set[str]:
    return {node.name for node in walk(expr) if isinstance(node, Param)}


def is_coordinate_free(expr: Expr) -> bool:
    return not any(isinstance(node, Coord | Mom | XDeriv | Deriv) for node in walk(expr))


def _rebuild(expr: Expr, kids: Sequence[Expr]) -> Expr:
    if isinstance(expr, Binary):
        return Binary(expr.op, kids[0], kids[1])
    if isinstance(expr, Unary):
        return Unary(expr.op, kids[0])
    if isinstance(expr, Deriv):
        return Deriv(expr.order, kids[0], expr.side)
    return expr


def simplify(expr: Expr) -> Expr:
    """Constant folding plus zero/one elimination, bottom-up."""
    if isinstance(expr, Unary):
        arg = simplify(expr.arg)
        if expr.op == "neg" and isinstance(arg, Unary) and arg.op == "neg":
            return arg.arg
        return unary(expr.op, arg)
    if isinstance(expr, Deriv):
        arg = simplify(expr.arg)
        return ZERO if arg == ZERO else Deriv(expr.order, arg, expr.side)
    if not isinstance(expr, Binary):
        return expr

    left, right = simplify(expr.left), simplify(expr.right)
    op = expr.op
    if isinstance(left, Const) and isinstance(right, Const) and not (op == "/" and right == ZERO):
        return binary(op, left, right)
    if op == "+":
        if left == ZERO:
            return right
        if right == ZERO:
            return left
    elif op == "-":
        if right == ZERO:
            return left
        if left == ZERO:
            return unary("neg", right)
    elif op == "*":
        if left == ZERO or right == ZERO:
            return ZERO
        if left == ONE:
            return right
        if right == ONE:
            return left
        if left == Const(-1):
            return simplify(Unary("neg", right))
        if isinstance(left, Const) and isinstance(right, Binary) and right.op == "*" and isinstance(right.left, Const):
            return simplify(Binary("*", binary("*", left, right.left), right.right))
    elif op == "/":
        if right == ONE:
            return left
        if left == ZERO and right != ZERO:
            return ZERO
    elif op == "^":
        if right == ZERO:
            return ONE
        if right == ONE:
            return left
    return Binary(op, left, right)


def partial(expr: Expr, l: int) -> Expr:
    """Exact ∂expr/∂q_l, simplified by constant folding and zero/one elimination."""
    return simplify(_diff(expr, l))


def _diff(expr: Expr, l: int) -> Expr:
    if isinstance(expr, Coord):
        return ONE if expr.index == l else ZERO
    if isinstance(expr, Const | Param | Time | Mom | XDeriv):
        return ZERO
    if isinstance(expr, Deriv):
        return Deriv(expr.order, _diff(expr.arg, l), expr.side)
    if isinstance(expr, Unary):
        inner = _diff(expr.arg, l)
        if expr.op == "neg":
            return Unary("neg", inner)
        if expr.op == "sin":
            return Binary("*", Unary("cos", expr.arg), inner)
        if expr.op == "cos":
            return Binary("*", Unary("neg", Unary("sin", expr.arg)), inner)
        return Binary("*", Unary("exp", expr.arg), inner)

    u, v = expr.left, expr.right
    if expr.op in ("+", "-"):
        return Binary(expr.op, _diff(u, l), _diff(v, l))
    if expr.op == "*":
        return Binary("+", Binary("*", _diff(u, l), v), Binary("*", u, _diff(v, l)))
    if expr.op == "/":
        numerator = Binary("-", Binary("*", _diff(u, l), v), Binary("*", u, _diff(v, l)))
        return Binary("/", numerator, Binary("^", v, Const(2)))
    n = int(v.value.real)
    if n == 0:
        return ZERO
    return Binary("*", Binary("*", Const(n), Binary("^", u, Const(n - 1))), _diff(u, l))


def substitute(expr: Expr, mapping: Mapping[Expr, Expr]) -> Expr:
    if expr in mapping:
        return mapping[expr]
    kids = children(expr)
    if not kids:
        return expr
    return simplify(_rebuild(expr, [substitute(kid, mapping) for kid in kids]))


# Printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


def _number(x: float) -> str:
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _const_text(value: complex) -> str:
    re_, im = value.real, value.imag
    if im == 0:
        return _number(re_) if re_ >= 0 and not str(re_).startswith("-") else f"({_number(re_)})"
    if re_ == 0:
        if im == 1:
            return "i"
        if im == -1:
            return "(-i)"
        return f"({_number(im)}*i)"
    return f"({_number(re_)}+{_number(im)}*i)"


def _prec(expr: Expr) -> int:
    if isinstance(expr, Binary):
        return _PREC[expr.op]
    if isinstance(expr, Unary) and expr.op == "neg":
        return _PREC["neg"]
    return _ATOM


def _wrap(expr: Expr, parens: bool) -> str:
    text = to_text(expr)
    return f"({text})" if parens else text


def to_text(expr: Expr) -> str:
    """Render an expression in the DSL; parse(to_text(e)) rebuilds e."""
    if isinstance(expr, Const):
        return _const_text(expr.value)
    if isinstance(expr, Param):
        return expr.name
    if isinstance(expr, Time):
        return "t"
    if isinstance(expr, Coord):
        return f"q{expr.index}"
    if isinstance(expr, Mom):
        return f"p{expr.index}"
    if isinstance(expr, XDeriv):
        return f"x[{_number(float(expr.order))}]"
    if isinstance(expr, Deriv):
        name = "Da" if expr.side == LEFT else "Db"
        return f"{name}[{_number(float(expr.order))}]({to_text(expr.arg)})"
    if isinstance(expr, Unary):
        if expr.op == "neg":
            return "-" + _wrap(expr.arg, _prec(expr.arg) < _PREC["neg"])
        return f"{expr.op}({to_text(expr.arg)})"
    if expr.op == "^":
        return f"{_wrap(expr.left, _prec(expr.left) < _PREC['^'])}^{int(expr.right.value.real)}"
    prec = _PREC[expr.op]
    left = _wrap(expr.left, _prec(expr.left) < prec)
    right = _wrap(expr.right, _prec(expr.right) <= prec)
    return f"{left}{expr.op}{right}"


# Evaluation

Operator = Callable[[Deriv, complex | np.ndarray], complex | np.ndarray]


def evaluate(
    expr: Expr,
    bindings: Mapping[str, complex | np.ndarray],
    params: Mapping[str, complex] | None = None,
    operator: Operator | None = None,
) -> complex | np.ndarray:
    """Evaluate with variables bound by their DSL names (``q0``, ``p1``, ``t``, ``x[1.5]``).

    Values may be scalars or numpy arrays. ``Deriv`` nodes need ``operator``,
    which receives the node and its evaluated argument.
    """
    params = params or {}
    result = _evaluate(expr, bindings, params, operator)
    if np.ndim(result) == 0:
        return complex(result)
    return np.asarray(result, dtype=complex)


def _evaluate(
    expr: Expr,
    bindings: Mapping[str, complex | np.ndarray],
    params: Mapping[str, complex],
    operator: Operator | None,
) -> complex | np.ndarray:
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Param):
        if expr.name not in params:
            raise UnboundVariableError(f"Parameter {expr.name!r} is not bound")
        return complex(params[expr.name])
    if isinstance(expr, Time | Coord | Mom | XDeriv):
        name = to_text(expr)
        if name not in bindings:
            raise UnboundVariableError(f"Variable {name!r} is not bound")
        return bindings[name]
    if isinstance(expr, Deriv):
        if operator is None:
            raise EvaluationError(f"{to_text(expr)} needs a sampled path to evaluate")
        return operator(expr, _evaluate(expr.arg, bindings, params, operator))
    if isinstance(expr, Unary):
        return _apply(expr.op, _evaluate(expr.arg, bindings, params, operator))
    return _apply(
        expr.op,
        _evaluate(expr.left, bindings, params, operator),
        _evaluate(expr.right, bindings, params, operator),
    )


@dataclass(frozen=True)
class LagrangianSpec:
    """Parsed Lagrangian L(t, q0, ..., qn) on an explicit ladder of orders.

    ``riewe`` switches right derivatives to the reflected left form
    ₜD_b^β -> (-1)^β ₐD_t^β.
    """

    expr: Expr
    ladder: tuple[float, ...]
    params: Mapping[str, complex]
    alpha: float
    riewe: bool = False
    name: str = "custom"

    def __post_init__(self) -> None:
        ladder = tuple(float(order) for order in self.ladder)
        if len(ladder) < 2:
            raise DomainError("Ladder needs at least two orders")
        if ladder[0] < 0 or any(b <= a for a, b in zip(ladder, ladder[1:], strict=False)):
            raise DomainError(f"Ladder must be non-negative and strictly increasing, got {list(ladder)}")
        if not 0 < self.alpha <= 1:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")

        out_of_range = sorted(index for index in coordinates(self.expr) if index >= len(ladder))
        if out_of_range:
            raise IndexOutOfRangeError(f"q{out_of_range[0]} exceeds the ladder of {len(ladder)} orders")
        if any(isinstance(node, Mom | XDeriv | Deriv) for node in walk(self.expr)):
            raise UnknownIdentifierError("A Lagrangian may only use t, q<l> and parameters")
        unbound = sorted(parameters(self.expr) - set(self.params))
        if unbound:
            raise UnboundVariableError(f"Parameter {unbound[0]!r} is not bound")

        object.__setattr__(self, "ladder", ladder)
        object.__setattr__(self, "params", {name: complex(value) for name, value in self.params.items()})

    @property
    def degree(self) -> int:
        return len(self.ladder) - 1

    def json(self) -> dict:
        return {
            "name": self.name,
            "lagrangian": to_text(self.expr),
            "ladder": list(self.ladder),
            "alpha": self.alpha,
            "riewe": self.riewe,
            "params": {name: [value.real, value.imag] for name, value in sorted(self.params.items())},
        }


def parse_lagrangian(
    text: str,
    ladder: Sequence[float],
    params: Mapping[str, complex],
    alpha: float,
    riewe: bool = False,
    name: str = "custom",
) -> LagrangianSpec:
    expr = parse(text, ladder=ladder, params=set(params))
    return LagrangianSpec(expr=expr, ladder=tuple(ladder), params=params, alpha=alpha, riewe=riewe, name=name)
