"""Discretize-then-optimize solver for quadratic Lagrangians.

The action S[x] = dt Σ_i L(t_i, q(t_i)) with q_l = G_l x (G_l the GL matrix of
order α_l) is a quadratic form in the samples of x. Boundary pairs pin single
samples, so x = T x_free + s, and the stationary trajectory solves A x_free = -b.

Under the Riewe convention the Euler-Lagrange equations are not the
stationarity conditions of a symmetric form; they are assembled directly as a
square linear system on shifted rows instead.
"""

import logging
import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from fracostro._config import SolveConfig
from fracostro._errors import BoundaryError, NonQuadraticError, SingularSystemError, SystemTooLargeError
from fracostro._filesystem import write_csv
from fracostro._types import ORDER_TOLERANCE, SampledPath, UniformGrid
from fracostro.fracops import gl_matrix, reflection_phase
from fracostro.lagrangian_dsl import (
    ZERO,
    Coord,
    Expr,
    LagrangianSpec,
    evaluate,
    is_coordinate_free,
    parse,
    partial,
    substitute,
    to_text,
)
from fracostro.variational import CoordinateStack

logger = logging.getLogger(__name__)

# Relative bound on ‖Ax + b‖∞ after a direct solve.
RESIDUAL_TOLERANCE = 1e-9
# Relative size below which a coefficient component counts as zero.
SNAP_TOLERANCE = 1e-14

Matrix = np.ndarray | scipy.sparse.spmatrix


def required_pairs(lag: LagrangianSpec) -> int:
    """Boundary pairs needed per side: one per started unit of the highest order."""
    return max(1, math.ceil(lag.ladder[-1] - ORDER_TOLERANCE))


@dataclass(frozen=True)
class BoundaryData:
    """Pairs (l, v): on the left q_l(t_l) = v, on the right q_l(t_{n-1}) = v."""

    left: tuple[tuple[int, complex], ...]
    right: tuple[tuple[int, complex], ...]

    def __post_init__(self) -> None:
        for side, pairs in (("left", self.left), ("right", self.right)):
            normalized = tuple((int(l), complex(v)) for l, v in pairs)
            indices = [l for l, _ in normalized]
            if len(set(indices)) != len(indices):
                raise BoundaryError(f"Duplicate {side} boundary order in {indices}")
            if any(l < 0 for l in indices):
                raise BoundaryError(f"Negative {side} boundary order in {indices}")
            object.__setattr__(self, side, tuple(sorted(normalized)))

    @classmethod
    def dirichlet_zero(cls, lag: LagrangianSpec) -> "BoundaryData":
        pairs = tuple((l, 0j) for l in range(required_pairs(lag)))
        return cls(left=pairs, right=pairs)

    @classmethod
    def from_path(cls, lag: LagrangianSpec, x: SampledPath) -> "BoundaryData":
        """Pairs read off the discrete stack of x, so x itself satisfies them exactly."""
        n = x.grid.n
        count = required_pairs(lag)
        left, right = [], []
        for l in range(count):
            q = gl_matrix(lag.ladder[l], x.grid) @ x.values
            left.append((l, q[l]))
            right.append((l, q[n - 1]))
        return cls(left=tuple(left), right=tuple(right))

    @classmethod
    def from_profile(cls, lag: LagrangianSpec, grid: UniformGrid, profile: str | Callable) -> "BoundaryData":
        """Profile given as a DSL expression in t or a vectorized function of the times."""
        times = grid.times()
        if callable(profile):
            values = profile(times)
        else:
            values = evaluate(parse(profile, params=set(lag.params)), {"t": times}, lag.params)
        return cls.from_path(lag, SampledPath(grid, values))

    def validate(self, lag: LagrangianSpec) -> None:
        expected = list(range(required_pairs(lag)))
        for side, pairs in (("left", self.left), ("right", self.right)):
            indices = [l for l, _ in pairs]
            if indices != expected:
                raise BoundaryError(
                    f"{side} boundary must fix orders {expected} of ladder {list(lag.ladder)}, got {indices}"
                )

    def json(self) -> dict:
        return {
            "left": [[l, [v.real, v.imag]] for l, v in self.left],
            "right": [[l, [v.real, v.imag]] for l, v in self.right],
        }


@dataclass(frozen=True)
class Elimination:
    """x = T x_free + s over the full grid."""

    free: np.ndarray
    T: scipy.sparse.csr_matrix
    s: np.ndarray

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        return self.T @ x_free + self.s


@dataclass(frozen=True)
class QuadraticForm:
    """S(x_free) = ½ xᵀAx + bᵀx + c over the free samples of a grid."""

    A: Matrix
    b: np.ndarray
    c: complex = 0j
    grid: UniformGrid | None = None
    elimination: Elimination | None = None
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.b)

    def dense(self) -> np.ndarray:
        return self.A.toarray() if scipy.sparse.issparse(self.A) else np.asarray(self.A)

    def value(self, x_free: np.ndarray) -> complex:
        return complex(0.5 * x_free @ (self.A @ x_free) + self.b @ x_free + self.c)

    def system(self) -> "LinearSystem":
        if self.elimination is None or self.grid is None:
            raise SingularSystemError("Form has no grid to solve on")
        return LinearSystem(matrix=self.A, rhs=-self.b, grid=self.grid, elimination=self.elimination)

    def json(self) -> dict:
        grid = self.grid.json() if self.grid is not None else None
        return {"grid": grid, "unknowns": self.size, **self.meta}


@dataclass(frozen=True)
class LinearSystem:
    matrix: Matrix
    rhs: np.ndarray
    grid: UniformGrid
    elimination: Elimination


@dataclass(frozen=True)
class QuadraticParts:
    """L = ½ Σ H[l][l'] q_l q_l' + Σ g[l] q_l + c0, coefficients sampled on the grid."""

    H: tuple[tuple[np.ndarray, ...], ...]
    g: tuple[np.ndarray, ...]
    c0: np.ndarray


def _on_grid(lag: LagrangianSpec, expr: Expr, times: np.ndarray) -> np.ndarray:
    values = np.broadcast_to(np.asarray(evaluate(expr, {"t": times}, lag.params), dtype=complex), times.shape)
    # Rotation phases such as (e^{iπ/4})² leave round-off in the other component.
    scale = SNAP_TOLERANCE * np.abs(values)
    real = np.where(np.abs(values.real) <= scale, 0.0, values.real)
    imag = np.where(np.abs(values.imag) <= scale, 0.0, values.imag)
    return real + 1j * imag


def quadratic_parts(lag: LagrangianSpec, grid: UniformGrid) -> QuadraticParts:
    """Split a quadratic Lagrangian into Hessian, gradient at q = 0 and constant."""
    size = len(lag.ladder)
    origin = {Coord(l): ZERO for l in range(size)}
    times = grid.times()

    hessian = []
    for l in range(size):
        gradient = partial(lag.expr, l)
        row = []
        for lp in range(size):
            second = partial(gradient, lp)
            if not is_coordinate_free(second):
                raise NonQuadraticError(f"∂²L/∂q{l}∂q{lp} = {to_text(second)} depends on the coordinates")
            row.append(_on_grid(lag, second, times))
        hessian.append(tuple(row))

    g = tuple(_on_grid(lag, substitute(partial(lag.expr, l), origin), times) for l in range(size))
    c0 = _on_grid(lag, substitute(lag.expr, origin), times)
    return QuadraticParts(H=tuple(hessian), g=g, c0=c0)


def _is_real(*arrays: np.ndarray) -> bool:
    return all(not np.any(np.imag(a)) for a in arrays)


def _matmul(a: Matrix, b: Matrix) -> Matrix:
    if scipy.sparse.issparse(a) or not scipy.sparse.issparse(b):
        return a @ b
    return (b.T @ a.T).T


def _accumulate(terms: Sequence[Matrix], n: int, dtype: type) -> Matrix:
    if all(scipy.sparse.issparse(term) for term in terms):
        total = scipy.sparse.csr_matrix((n, n), dtype=dtype)
        for term in terms:
            total = total + term
        return total.tocsr()
    total = np.zeros((n, n), dtype=dtype)
    for term in terms:
        total += term.toarray() if scipy.sparse.issparse(term) else term
    return total


def _check_size(n: int, max_unknowns: int | None) -> None:
    limit = SolveConfig().max_unknowns if max_unknowns is None else max_unknowns
    if n > limit:
        raise SystemTooLargeError(f"{n} unknowns exceed the limit of {limit}")


def eliminate(lag: LagrangianSpec, grid: UniformGrid, bc: BoundaryData) -> Elimination:
    """Solve the boundary constraints for their pivot samples in terms of the free ones."""
    bc.validate(lag)
    n = grid.n
    # (ladder index, constrained row, pivot sample, value)
    conditions = [(l, l, l, v) for l, v in bc.left]
    conditions += [(l, n - 1, n - 1 - l, v) for l, v in bc.right]
    pivots = [pivot for _, _, pivot, _ in conditions]
    if len(set(pivots)) != len(pivots) or max(pivots) >= n or min(pivots) < 0:
        raise BoundaryError(f"Grid of {n} samples is too short for {len(pivots)} boundary conditions")
    free = np.array([i for i in range(n) if i not in set(pivots)], dtype=int)
    if len(free) == 0:
        raise BoundaryError(f"Boundary conditions fix every one of the {n} samples")

    constraints = np.array([_operator_row(lag.ladder[l], grid, row) for l, row, _, _ in conditions])
    values = np.array([v for _, _, _, v in conditions])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            pivot_block = scipy.linalg.lu_factor(constraints[:, pivots])
            coupling = scipy.linalg.lu_solve(pivot_block, constraints[:, free])
            offset = scipy.linalg.lu_solve(pivot_block, values)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError) as e:
        raise BoundaryError(f"Boundary conditions are not independent: {e}") from e

    rows = list(free)
    cols = list(range(len(free)))
    data = [1.0] * len(free)
    for k, pivot in enumerate(pivots):
        (nonzero,) = np.nonzero(coupling[k])
        rows += [pivot] * len(nonzero)
        cols += list(nonzero)
        data += list(-coupling[k, nonzero])
    transform = scipy.sparse.coo_matrix((data, (rows, cols)), shape=(n, len(free))).tocsr()

    s = np.zeros(n, dtype=complex)
    s[pivots] = offset
    if not np.any(np.imag(s)):
        s = s.real
    return Elimination(free=free, T=transform, s=s)


def _operator_row(order: float, grid: UniformGrid, row: int) -> np.ndarray:
    operator = gl_matrix(order, grid)
    if scipy.sparse.issparse(operator):
        return operator[[row], :].toarray().ravel()
    return np.asarray(operator[row])


def _cast(values: np.ndarray, dtype: type) -> np.ndarray:
    return values.real.copy() if dtype is float else values.astype(complex)


def assemble_action(
    lag: LagrangianSpec,
    grid: UniformGrid,
    bc: BoundaryData,
    max_unknowns: int | None = None,
) -> QuadraticForm:
    """Quadratic form of the discrete action over the free samples, A exactly symmetric."""
    _check_size(grid.n, max_unknowns)
    parts = quadratic_parts(lag, grid)
    elimination = eliminate(lag, grid, bc)
    dt = grid.dt
    n = grid.n
    size = len(lag.ladder)
    dtype = float if _is_real(*[h for row in parts.H for h in row], *parts.g, parts.c0, elimination.s) else complex

    operators = [gl_matrix(order, grid) for order in lag.ladder]
    terms = []
    for l in range(size):
        for lp in range(size):
            h = _cast(parts.H[l][lp], dtype)
            if not np.any(h):
                continue
            weighted = _matmul(scipy.sparse.diags(h * dt), operators[lp])
            terms.append(_matmul(operators[l].T, weighted))
    A_full = _accumulate(terms, n, dtype)
    b_full = np.zeros(n, dtype=dtype)
    for l in range(size):
        b_full += operators[l].T @ (_cast(parts.g[l], dtype) * dt)
    c_full = complex(np.sum(parts.c0) * dt)

    T, s = elimination.T, elimination.s
    A_s = A_full @ s
    A = _matmul(T.T, _matmul(A_full, T))
    A = (A + A.T) / 2
    A = A.tocsr() if scipy.sparse.issparse(A) else np.asarray(A)
    b = np.asarray(T.T @ (A_s + b_full))
    c = complex(0.5 * s @ A_s + b_full @ s + c_full)

    layout = "sparse" if scipy.sparse.issparse(A) else "dense"
    logger.debug(f"Assembled action for {lag.name}: {len(b)} unknowns, {layout}")
    return QuadraticForm(A=A, b=b, c=c, grid=grid, elimination=elimination, meta={"kind": "action"})


def euler_lagrange_system(
    lag: LagrangianSpec,
    grid: UniformGrid,
    bc: BoundaryData,
    max_unknowns: int | None = None,
) -> LinearSystem:
    """Σ_l (-1)^{α_l} ₐD_t^{α_l} ∂L/∂q_l = 0 as a square system in the free samples.

    Equations sit on the free indices shifted towards the right boundary by up to
    half the highest order, which centres the backward stencils.
    """
    _check_size(grid.n, max_unknowns)
    parts = quadratic_parts(lag, grid)
    elimination = eliminate(lag, grid, bc)
    n = grid.n
    size = len(lag.ladder)

    terms = []
    rhs = np.zeros(n, dtype=complex)
    for l in range(size):
        phase = reflection_phase(lag.ladder[l])
        outer = gl_matrix(lag.ladder[l], grid)
        for lp in range(size):
            h = parts.H[l][lp]
            if not np.any(h):
                continue
            if np.all(h == h[0]):
                terms.append(gl_matrix(lag.ladder[l] + lag.ladder[lp], grid) * (phase * h[0]))
            else:
                inner = _matmul(scipy.sparse.diags(h), gl_matrix(lag.ladder[lp], grid))
                terms.append(_matmul(outer, inner) * phase)
        rhs += phase * (outer @ parts.g[l])
    M = _accumulate(terms, n, complex)

    shift = min(math.floor(lag.ladder[-1] + ORDER_TOLERANCE), len(bc.right))
    rows = elimination.free + shift
    T, s = elimination.T, elimination.s
    reduced = _matmul(M, T)
    reduced = reduced[rows, :]
    rhs = -(np.asarray(M @ s) + rhs)[rows]
    if scipy.sparse.issparse(reduced):
        reduced = reduced.tocsr()
    return LinearSystem(matrix=reduced, rhs=rhs, grid=grid, elimination=elimination)


def _direct_solve(matrix: Matrix, rhs: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        warnings.simplefilter("error", scipy.sparse.linalg.MatrixRankWarning)
        try:
            if scipy.sparse.issparse(matrix):
                solution = scipy.sparse.linalg.spsolve(matrix.tocsc(), rhs)
            else:
                solution = scipy.linalg.solve(matrix, rhs)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, scipy.sparse.linalg.MatrixRankWarning) as e:
            raise SingularSystemError(f"Stationarity system is singular (resonant boundary data?): {e}") from e

    solution = np.atleast_1d(solution)
    if not np.all(np.isfinite(solution)):
        raise SingularSystemError("Stationarity system is singular (resonant boundary data?)")
    residual = np.max(np.abs(matrix @ solution - rhs)) if len(rhs) else 0.0
    scale = np.max(np.abs(rhs)) if len(rhs) else 0.0
    if residual > RESIDUAL_TOLERANCE * max(scale, np.finfo(float).tiny):
        raise SingularSystemError(
            f"Solve residual {residual:.3e} exceeds {RESIDUAL_TOLERANCE:g} of ‖b‖ = {scale:.3e}"
        )
    return solution


def solve_stationary(
    lag: LagrangianSpec,
    grid: UniformGrid,
    bc: BoundaryData,
    options: SolveConfig | None = None,
) -> SampledPath:
    """Stationary trajectory including the boundary samples."""
    options = options or SolveConfig()
    if lag.riewe:
        system = euler_lagrange_system(lag, grid, bc, options.max_unknowns)
    else:
        system = assemble_action(lag, grid, bc, options.max_unknowns).system()

    if system.matrix.shape[0] > options.max_unknowns:
        raise SystemTooLargeError(f"{system.matrix.shape[0]} unknowns exceed the limit of {options.max_unknowns}")
    logger.info(f"Solving {lag.name} on {grid.n} samples ({system.matrix.shape[0]} unknowns, riewe={lag.riewe})")

    x_free = _direct_solve(system.matrix, system.rhs)
    return SampledPath(grid, system.elimination.expand(x_free))


def write_trajectory(path: str, stack: CoordinateStack, digits: int = 17) -> None:
    """CSV with t, re(x), im(x) and re/im columns per ladder order."""
    header = ["t", "re_x", "im_x"]
    columns = [stack.base.grid.times(), stack.base.values.real, stack.base.values.imag]
    for index, derived in enumerate(stack.derived):
        header += [f"re_q{index}", f"im_q{index}"]
        columns += [derived.values.real, derived.values.imag]
    write_csv(path, header, zip(*columns, strict=True), digits=digits)
