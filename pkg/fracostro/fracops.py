"""Discrete Riemann-Liouville derivatives on uniform grids.

Both operators use the first-order Grünwald-Letnikov scheme

    ₐD_t^α f(t_i) ≈ dt^{-α} Σ_{k=0..i} w_k f(t_{i-k})          (left, lower limit a)
    ₜD_b^α f(t_i) ≈ dt^{-α} Σ_{k=0..n-1-i} w_k f(t_{i+k})      (right, upper limit b)

with w_k = (-1)^k binom(α, k). For α = 1 the right operator is the forward
difference with a minus sign, i.e. it approximates -f'.
"""

import enum
import logging

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy import special

from fracostro._errors import DomainError
from fracostro._types import FracOrder, GLWeights, SampledPath, UniformGrid, as_order

logger = logging.getLogger(__name__)

# GL sums with fewer terms than this are flagged as low accuracy.
MIN_ACCURATE_TERMS = 4


class Side(enum.Enum):
    """Side of a fractional derivative."""

    #: Lower limit a, history sum over past samples.
    Left = "left"
    #: Upper limit b, sum over future samples.
    Right = "right"


def gl_weights(order: FracOrder | float, count: int) -> GLWeights:
    order = as_order(order)
    if count < 1:
        raise DomainError(f"Weight count must be >= 1, got {count}")

    k = np.arange(1, count, dtype=float)
    w = np.concatenate(([1.0], np.cumprod((k - 1.0 - order.total) / k)))
    w.setflags(write=False)
    return GLWeights(order=order, w=w)


def _history_sum(values: np.ndarray, order: FracOrder, dt: float) -> np.ndarray:
    weights = gl_weights(order, len(values)).w
    return np.convolve(weights, values)[: len(values)] * dt ** (-order.total)


def left_rl_deriv(path: SampledPath, order: FracOrder | float) -> SampledPath:
    order = as_order(order)
    if order.total == 0:
        return path

    values = _history_sum(path.values, order, path.grid.dt)
    flagged = tuple(range(min(MIN_ACCURATE_TERMS - 1, path.grid.n)))
    return path.with_values(values, flagged)


def right_rl_deriv(path: SampledPath, order: FracOrder | float) -> SampledPath:
    order = as_order(order)
    if order.total == 0:
        return path

    values = _history_sum(path.values[::-1], order, path.grid.dt)[::-1]
    n = path.grid.n
    flagged = tuple(range(max(n - MIN_ACCURATE_TERMS + 1, 0), n))
    return path.with_values(values, flagged)


def rl_deriv(path: SampledPath, order: FracOrder | float, side: Side) -> SampledPath:
    if side is Side.Left:
        return left_rl_deriv(path, order)
    return right_rl_deriv(path, order)


def rl_power_rule(beta: float, order: FracOrder | float, s: float) -> complex:
    """Analytic RL derivative of (t - a)^β evaluated at t - a = s."""
    order = as_order(order)
    if beta <= -1:
        raise DomainError(f"Power rule requires beta > -1, got {beta}")
    if s <= 0:
        raise DomainError(f"Power rule requires s > 0, got {s}")

    # rgamma is exactly 0 at the poles of Gamma.
    scale = special.gamma(beta + 1.0) * special.rgamma(beta - order.total + 1.0)
    if scale == 0:
        return 0j
    return complex(scale * s ** (beta - order.total))


def reflection_phase(beta: float) -> complex:
    """(-1)^β on the principal branch, exact for integer and half-integer β."""
    if float(beta).is_integer():
        return complex((-1) ** int(beta))
    if float(2 * beta).is_integer():
        return complex(1j ** int(2 * beta))
    return complex(np.exp(1j * np.pi * beta))


def gl_matrix(
    order: FracOrder | float, grid: UniformGrid, side: Side = Side.Left
) -> np.ndarray | scipy.sparse.csr_matrix:
    """Matrix form of the GL operator; banded sparse for integer orders, dense otherwise.

    The right operator is the transpose of the left one, and products of left
    operators equal the left operator of the summed order.
    """
    order = as_order(order)
    n = grid.n
    scale = grid.dt ** (-order.total)

    if order.is_integer:
        p = min(order.m, n - 1)
        weights = gl_weights(order, p + 1).w * scale
        matrix = scipy.sparse.diags(list(weights), offsets=[-k for k in range(p + 1)], shape=(n, n), format="csr")
    else:
        weights = gl_weights(order, n).w * scale
        matrix = scipy.linalg.toeplitz(weights, np.zeros(n))

    logger.debug(f"GL operator of order {order.total} on {n} samples ({type(matrix).__name__})")
    return matrix.T if side is Side.Right else matrix
