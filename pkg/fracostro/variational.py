"""Fractional Euler-Lagrange equations, Ostrogradski momenta and reduced Hamiltonians.

For a Lagrangian L(t, q0, ..., qN) with q_l = ₐD_t^{α_l} x:

    Σ_l ₜD_b^{α_l} ∂L/∂q_l = 0                            (Euler-Lagrange)
    p_n = Σ_{m=n}^{N-1} ₜD_b^{α_{m-n}} ∂L/∂q_{m+1}        (momenta, n = 0..N-1)
    H = Σ_{m=0}^{N-1} p_m q_{m+1} - L                      (q_N eliminated through p_{N-1})

Everything is built symbolically first, then sampled along a trajectory.
Composite orders such as ₐD_t^{3α} x are single GL applications of the total
order, never compositions of lower ones.
"""

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from fracostro._errors import DomainError, SingularLegendreError
from fracostro._types import ORDER_TOLERANCE, SampledPath
from fracostro.fracops import left_rl_deriv, reflection_phase, right_rl_deriv
from fracostro.lagrangian_dsl import (
    LEFT,
    RIGHT,
    ZERO,
    Binary,
    Const,
    Coord,
    Deriv,
    Expr,
    LagrangianSpec,
    Mom,
    Time,
    Unary,
    XDeriv,
    children,
    coordinates,
    evaluate,
    is_coordinate_free,
    partial,
    simplify,
    substitute,
    to_text,
    walk,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoordinateStack:
    """x(t) and its left derivatives, ``derived[l]`` of order ``ladder[l]``."""

    base: SampledPath
    derived: tuple[SampledPath, ...]
    ladder: tuple[float, ...]

    def bindings(self) -> dict[str, np.ndarray]:
        values = {f"q{index}": path.values for index, path in enumerate(self.derived)}
        values["t"] = self.base.grid.times()
        return values

    def low_accuracy(self) -> tuple[int, ...]:
        return tuple(sorted({i for path in self.derived for i in path.low_accuracy}))

    def json(self) -> dict:
        return {"ladder": list(self.ladder), "derived": [path.json() for path in self.derived]}


@dataclass(frozen=True)
class MomentumSet:
    """Momenta p_0..p_{N-1}; ``sampled[n]`` evaluates ``symbolic[n]`` on a stack."""

    lagrangian: LagrangianSpec
    symbolic: tuple[Expr, ...]
    sampled: tuple[SampledPath, ...]

    def display(self) -> tuple[Expr, ...]:
        return tuple(display(self.lagrangian, expr) for expr in self.symbolic)

    def json(self) -> dict:
        return {"momenta": [to_text(expr) for expr in self.display()]}


@dataclass(frozen=True)
class HamiltonianSpec:
    """``scale`` is max Σ|term| over the summands of H, nonzero when positive and negative energies cancel."""

    symbolic: Expr
    sampled: SampledPath
    lagrangian: SampledPath
    scale: float = 0.0

    def json(self) -> dict:
        return {"hamiltonian": to_text(self.symbolic), "values": self.sampled.json(), "scale": self.scale}


# Symbolic construction


def ladder_coordinate(lag: LagrangianSpec, order: float) -> Expr:
    """q_l when the order sits on the ladder, otherwise x[order]."""
    order = round(order, 12)
    for index, rung in enumerate(lag.ladder):
        if abs(rung - order) < ORDER_TOLERANCE:
            return Coord(index)
    return XDeriv(order)


def _coordinate_order(lag: LagrangianSpec, node: Expr) -> float:
    return lag.ladder[node.index] if isinstance(node, Coord) else node.order


def _linear_terms(expr: Expr) -> list[tuple[Expr, Expr]] | None:
    """Pairs (c_k, y_k) with expr = Σ c_k y_k over coordinates y_k, constant c_k; None otherwise."""
    variables = sorted({node for node in walk(expr) if isinstance(node, Coord | XDeriv)}, key=to_text)
    if any(isinstance(node, Deriv | Mom) for node in walk(expr)):
        return None

    terms = []
    for variable in variables:
        # Differentiate with respect to an XDeriv by renaming it to a fresh coordinate.
        fresh = Coord(-1)
        renamed = substitute(expr, {variable: fresh})
        coefficient = partial(renamed, -1)
        if not is_coordinate_free(coefficient) or any(isinstance(node, Time) for node in walk(coefficient)):
            return None
        terms.append((coefficient, variable))
    if substitute(expr, dict.fromkeys(variables, ZERO)) != ZERO:
        return None
    return terms


def _add(terms: Sequence[Expr]) -> Expr:
    total: Expr = ZERO
    for term in terms:
        total = simplify(Binary("+", total, term))
    return total


def left_push(lag: LagrangianSpec, order: float, expr: Expr) -> Expr:
    """ₐD_t^order of a linear form in the coordinates, moved onto the coordinates.

    Anything that is not Σ c_k q_k with constant c_k stays wrapped in a Da node.
    """
    if order == 0:
        return expr
    terms = _linear_terms(expr)
    if terms is None:
        return Deriv(order, expr, LEFT)
    return _add(
        [Binary("*", c, ladder_coordinate(lag, _coordinate_order(lag, variable) + order)) for c, variable in terms]
    )


def right_derivative(lag: LagrangianSpec, order: float, expr: Expr) -> Expr:
    """ₜD_b^order, or (-1)^order ₐD_t^order under the Riewe convention."""
    if order == 0:
        return expr
    if lag.riewe:
        return simplify(Binary("*", Const(reflection_phase(order)), left_push(lag, order, expr)))
    if expr == ZERO:
        return ZERO
    return Deriv(order, expr, RIGHT)


def display(lag: LagrangianSpec, expr: Expr) -> Expr:
    """Rewrite integer-order right derivatives through ₜD_b^n = (-1)^n dⁿ/dtⁿ."""
    kids = children(expr)
    if not kids:
        return expr
    rebuilt = [display(lag, kid) for kid in kids]
    if isinstance(expr, Deriv):
        if expr.side == RIGHT and float(expr.order).is_integer():
            pushed = left_push(lag, expr.order, rebuilt[0])
            return simplify(Binary("*", Const((-1) ** int(expr.order)), pushed))
        return Deriv(expr.order, rebuilt[0], expr.side)
    if isinstance(expr, Binary):
        return simplify(Binary(expr.op, rebuilt[0], rebuilt[1]))
    return simplify(Unary(expr.op, rebuilt[0]))


def euler_lagrange_expr(lag: LagrangianSpec) -> Expr:
    """Σ_l ₜD_b^{α_l} ∂L/∂q_l."""
    return _add([right_derivative(lag, order, partial(lag.expr, index)) for index, order in enumerate(lag.ladder)])


def momentum_exprs(lag: LagrangianSpec) -> tuple[Expr, ...]:
    n_top = lag.degree
    gradients = [partial(lag.expr, index) for index in range(n_top + 1)]
    return tuple(
        _add([right_derivative(lag, lag.ladder[m - n], gradients[m + 1]) for m in range(n, n_top)])
        for n in range(n_top)
    )


def hamiltonian_expr(lag: LagrangianSpec) -> Expr:
    """Reduced H in q_0..q_{N-1} and p_0..p_{N-1}, with q_N solved from p_{N-1} = ∂L/∂q_N."""
    n_top = lag.degree
    gradient = partial(lag.expr, n_top)
    curvature = partial(gradient, n_top)
    if curvature == ZERO or not is_coordinate_free(curvature):
        raise SingularLegendreError(
            f"∂²L/∂q{n_top}² = {to_text(curvature)} is not a nonzero constant; q{n_top} cannot be eliminated"
        )

    rest = substitute(gradient, {Coord(n_top): ZERO})
    top = simplify(Binary("/", Binary("-", Mom(n_top - 1), rest), curvature))
    pairing = _add([Binary("*", Mom(m), Coord(m + 1)) for m in range(n_top)])
    return substitute(simplify(Binary("-", pairing, lag.expr)), {Coord(n_top): top})


# Sampling


def coordinate_stack(lag: LagrangianSpec, x: SampledPath) -> CoordinateStack:
    needed = math.ceil(lag.ladder[-1]) + 1
    if x.grid.n < needed:
        raise DomainError(f"Grid of {x.grid.n} samples is too short for order {lag.ladder[-1]}")
    derived = tuple(left_rl_deriv(x, order) for order in lag.ladder)
    return CoordinateStack(base=x, derived=derived, ladder=lag.ladder)


def sample(
    lag: LagrangianSpec,
    expr: Expr,
    stack: CoordinateStack,
    momenta: Sequence[SampledPath] = (),
) -> SampledPath:
    """Evaluate an expression along a stack; x[β] and Da/Db nodes run GL on the grid."""
    grid = stack.base.grid
    bindings: dict[str, np.ndarray] = stack.bindings()
    flagged = set(stack.low_accuracy())
    for index, path in enumerate(momenta):
        bindings[f"p{index}"] = path.values
        flagged.update(path.low_accuracy)
    for node in walk(expr):
        if isinstance(node, XDeriv) and to_text(node) not in bindings:
            derived = left_rl_deriv(stack.base, node.order)
            bindings[to_text(node)] = derived.values
            flagged.update(derived.low_accuracy)

    def apply(node: Deriv, values: complex | np.ndarray) -> np.ndarray:
        path = SampledPath(grid, values)
        derived = left_rl_deriv(path, node.order) if node.side == LEFT else right_rl_deriv(path, node.order)
        flagged.update(derived.low_accuracy)
        return derived.values

    values = evaluate(expr, bindings, lag.params, operator=apply)
    return SampledPath(grid, values, tuple(sorted(flagged)))


def euler_lagrange_residual(lag: LagrangianSpec, x: SampledPath) -> SampledPath:
    return sample(lag, euler_lagrange_expr(lag), coordinate_stack(lag, x))


def momenta(lag: LagrangianSpec, x: SampledPath) -> MomentumSet:
    stack = coordinate_stack(lag, x)
    symbolic = momentum_exprs(lag)
    sampled = tuple(sample(lag, expr, stack) for expr in symbolic)
    return MomentumSet(lagrangian=lag, symbolic=symbolic, sampled=sampled)


def reduced_hamiltonian(lag: LagrangianSpec, x: SampledPath) -> HamiltonianSpec:
    stack = coordinate_stack(lag, x)
    moms = momenta(lag, x)
    symbolic = hamiltonian_expr(lag)
    sampled = sample(lag, symbolic, stack, moms.sampled)
    magnitude = sum(np.abs(sample(lag, term, stack, moms.sampled).values) for term in _summands(symbolic))
    interior = sampled.interior()
    return HamiltonianSpec(
        symbolic=symbolic,
        sampled=sampled,
        lagrangian=sample(lag, lag.expr, stack),
        scale=float(np.max(magnitude[interior])) if len(interior) else 0.0,
    )


def _summands(expr: Expr) -> list[Expr]:
    if isinstance(expr, Binary) and expr.op in ("+", "-"):
        return _summands(expr.left) + _summands(expr.right)
    if isinstance(expr, Unary) and expr.op == "-":
        return _summands(expr.arg)
    return [expr]


def energy_drift(h: SampledPath, scale: float | None = None) -> float:
    """max |H(t) - H(t₀)| / scale over accurate interior samples, t₀ the first of them.

    ``scale`` defaults to |H(t₀)|.
    """
    interior = h.interior()
    if len(interior) < 2:
        raise DomainError("Energy drift needs at least two accurate interior samples")
    reference = h.values[interior[0]]
    scale = abs(reference) if scale is None else scale
    if scale == 0:
        raise DomainError("Energy drift is undefined for a zero reference energy")
    drift = float(np.max(np.abs(h.values[interior] - reference)) / scale)
    logger.debug(f"Energy drift {drift:.3e} over {len(interior)} samples")
    return drift


def derivation(lag: LagrangianSpec) -> Mapping[str, object]:
    """Printable Euler-Lagrange expression, momenta and Hamiltonian."""
    return {
        "system": lag.name,
        "ladder": list(lag.ladder),
        "riewe": lag.riewe,
        "lagrangian": to_text(lag.expr),
        "euler_lagrange": to_text(display(lag, euler_lagrange_expr(lag))),
        "momenta": [to_text(display(lag, expr)) for expr in momentum_exprs(lag)],
        "hamiltonian": to_text(hamiltonian_expr(lag)),
    }
