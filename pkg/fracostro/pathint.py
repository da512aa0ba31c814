"""Euclidean Gaussian path integrals for quadratic actions.

Real-time kernels are only formal, so every quantity here is computed after the
continuation t -> -iτ, under which q_l -> i^{α_l} q_l and exp(iS) -> exp(-S_E)
with L_E = -L(rotated). Gaussian integrals then reduce to linear algebra:

    ∫ dx exp(-½ xᵀAx) = (2π)^{N/2} det(A)^{-1/2}
    ⟨x_i x_j⟩ = (A⁻¹)_{ij}
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from fracostro._config import KernelConfig, get_defaults
from fracostro._errors import DomainError, NotPositiveDefiniteError, SingularSystemError, UnsupportedError
from fracostro._filesystem import write_csv
from fracostro._types import UniformGrid
from fracostro.fracops import reflection_phase
from fracostro.lagrangian_dsl import (
    ZERO,
    Binary,
    Const,
    Coord,
    LagrangianSpec,
    Unary,
    parse_lagrangian,
    simplify,
    substitute,
)
from fracostro.solver import BoundaryData, QuadraticForm, assemble_action, quadratic_parts

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Mode:
    """One oscillator factor s + mu of a factorized quartic operator."""

    mu: float
    weight: float
    form: QuadraticForm

    @property
    def rate(self) -> float:
        return math.sqrt(self.mu)

    @property
    def ghost(self) -> bool:
        return self.weight < 0

    def json(self) -> dict:
        return {"mu": self.mu, "rate": self.rate, "weight": self.weight, "ghost": self.ghost}


@dataclass(frozen=True)
class SpectralReport:
    log_det: float
    correlator: tuple[tuple[float, float], ...]
    gap_estimates: tuple[float, ...]
    grid: dict
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not math.isfinite(self.log_det):
            raise SingularSystemError(f"Kernel log-determinant is not finite: {self.log_det}")
        if len(self.correlator) < 2:
            raise DomainError(f"Correlator needs at least two separations, got {len(self.correlator)}")

    def json(self) -> dict:
        return {
            "log_det": self.log_det,
            "correlator": [[tau, value] for tau, value in self.correlator],
            "gap_estimates": list(self.gap_estimates),
            "grid": self.grid,
            **self.extra,
        }

    def write_correlator(self, path: str, digits: int = 17) -> None:
        write_csv(path, ["tau", "value"], self.correlator, digits=digits)


def wick_rotate(lag: LagrangianSpec) -> LagrangianSpec:
    """Euclidean Lagrangian L_E = -L(i^{α_l} q_l)."""
    rotation = {
        Coord(l): Binary("*", Const(reflection_phase(order / 2)), Coord(l)) for l, order in enumerate(lag.ladder)
    }
    expr = simplify(Unary("neg", substitute(lag.expr, rotation)))
    return LagrangianSpec(expr=expr, ladder=lag.ladder, params=lag.params, alpha=lag.alpha, riewe=False, name=lag.name)


def euclidean_quadratic_form(
    lag: LagrangianSpec, grid: UniformGrid, bc: BoundaryData | None = None, max_unknowns: int | None = None
) -> QuadraticForm:
    """Wick-rotated action as a quadratic form, with the Hessian diagonal signs in ``meta``."""
    euclidean = wick_rotate(lag)
    bc = bc or BoundaryData.dirichlet_zero(lag)
    form = assemble_action(euclidean, grid, bc, max_unknowns)

    parts = quadratic_parts(euclidean, grid)
    signs = {}
    for l in range(len(lag.ladder)):
        diagonal = parts.H[l][l]
        if np.any(diagonal):
            signs[f"q{l}"] = int(np.sign(np.real(diagonal[0])))
    negative = [name for name, sign in signs.items() if sign < 0]
    if negative:
        logger.warning(f"Euclidean action of {lag.name} has negative weight on {negative}")
    meta = {**form.meta, "kind": "euclidean", "hessian_signs": signs}
    return QuadraticForm(A=form.A, b=form.b, c=form.c, grid=grid, elimination=form.elimination, meta=meta)


def kernel_log_det(form: QuadraticForm) -> float:
    """-½ log|det A| + (N/2) log 2π."""
    sign, logabs = np.linalg.slogdet(form.dense())
    if not np.isfinite(logabs):
        raise SingularSystemError("Kernel matrix is singular")
    if not np.isclose(sign, 1.0):
        logger.warning(f"Kernel determinant has phase {complex(sign):.6g}; reporting log|det|")
    return float(-0.5 * logabs + 0.5 * form.size * math.log(2 * math.pi))


def covariance(form: QuadraticForm) -> tuple[np.ndarray, float]:
    """A⁻¹ through a Cholesky factorization, with the matching kernel log-determinant."""
    A = form.dense()
    if np.iscomplexobj(A) and not np.allclose(A, A.conj().T):
        raise NotPositiveDefiniteError("Kernel matrix is not Hermitian")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(f"Kernel matrix is not positive definite: {e}") from e
    inverse = scipy.linalg.cho_solve(factor, np.eye(len(A)))
    log_det = float(-np.sum(np.log(np.abs(np.diag(factor[0])))) + 0.5 * len(A) * math.log(2 * math.pi))
    return inverse, log_det


def fit_gap(
    taus: np.ndarray, values: np.ndarray, window: tuple[float, float] | None = None, floor: float | None = None
) -> float | None:
    """Decay rate from a log-linear fit of C(τ) ~ exp(-rate·τ)."""
    floor = float(get_defaults().get("fit_floor", 1e-12)) if floor is None else floor
    values = np.real(values)
    keep = values > floor * abs(values[0])
    if window is not None:
        keep &= (taus >= window[0]) & (taus <= window[1])
    if np.count_nonzero(keep) < 2 or np.ptp(taus[keep]) == 0:
        logger.warning("Too few correlator values above the fit floor for a gap estimate")
        return None
    slope, _ = np.polyfit(taus[keep], np.log(values[keep]), 1)
    return float(-slope)


def correlator(
    form: QuadraticForm,
    pairs: Sequence[tuple[int, int]] | None = None,
    kernel: KernelConfig | None = None,
) -> SpectralReport:
    """⟨x_i x_j⟩ over free-sample pairs; by default from the midpoint outwards.

    Separations τ = (j - i)·dt; without a grid the sample distance is the unit.
    """
    kernel = kernel or KernelConfig()
    inverse, log_det = covariance(form)
    dt = form.grid.dt if form.grid is not None else 1.0
    size = form.size

    if pairs is None:
        count = max(2, min(size, int(kernel.max_separation * size)))
        start = max(0, size // 2 - count // 2)
        count = min(count, size - start)
        pairs = [(start, start + k) for k in range(count)]
    for i, j in pairs:
        if not (0 <= i < size and 0 <= j < size):
            raise DomainError(f"Correlator pair ({i}, {j}) is outside the {size} free samples")

    taus = np.array([(j - i) * dt for i, j in pairs])
    values = np.array([float(np.real(inverse[i, j])) for i, j in pairs])
    rate = fit_gap(taus, values, kernel.fit_window)
    return SpectralReport(
        log_det=log_det,
        correlator=tuple(zip(taus.tolist(), values.tolist(), strict=True)),
        gap_estimates=() if rate is None else (rate,),
        grid=form.json(),
    )


def _auxiliary_index(lag: LagrangianSpec) -> int:
    fractional = [l for l, order in enumerate(lag.ladder) if not float(order).is_integer()]
    if len(fractional) != 1:
        raise UnsupportedError(f"Expected exactly one fractional rung to integrate out, ladder is {list(lag.ladder)}")
    return fractional[0]


def _auxiliary_weight(lag: LagrangianSpec, grid: UniformGrid) -> tuple[int, float]:
    """Index and Euclidean weight c of a decoupled auxiliary block ½ c q_aux²."""
    if not lag.riewe:
        raise UnsupportedError("The auxiliary block couples to x unless the Riewe convention is on")
    aux = _auxiliary_index(lag)
    parts = quadratic_parts(wick_rotate(lag), grid)
    coupled = [l for l in range(len(lag.ladder)) if l != aux and np.any(parts.H[aux][l])]
    if coupled or np.any(parts.g[aux]):
        raise UnsupportedError(f"Auxiliary coordinate q{aux} couples to {[f'q{l}' for l in coupled]}")
    weight = parts.H[aux][aux]
    if not np.allclose(weight, weight[0]) or weight[0].imag != 0 or weight[0].real <= 0:
        raise UnsupportedError(f"Auxiliary weight must be a positive constant, got {complex(weight[0])}")
    return aux, float(weight[0].real)


def _without_auxiliary(lag: LagrangianSpec, aux: int) -> LagrangianSpec:
    expr = substitute(lag.expr, {Coord(aux): ZERO})
    return LagrangianSpec(expr=expr, ladder=lag.ladder, params=lag.params, alpha=lag.alpha, riewe=False, name=lag.name)


def marginalize_auxiliary(
    lag: LagrangianSpec, grid: UniformGrid, bc: BoundaryData | None = None
) -> tuple[QuadraticForm, float]:
    """Integrate out a decoupled Gaussian auxiliary field.

    Returns the Euclidean form of the remaining Lagrangian and
    log C = (N/2) log(2π / (c·dt)), one auxiliary sample per free sample.
    """
    aux, weight = _auxiliary_weight(lag, grid)
    effective = euclidean_quadratic_form(_without_auxiliary(lag, aux), grid, bc)
    log_c = 0.5 * effective.size * math.log(2 * math.pi / (weight * grid.dt))
    logger.debug(f"Integrated out q{aux} with weight {weight:g}: log C = {log_c:.12g}")
    return effective, log_c


def independent_field_form(lag: LagrangianSpec, grid: UniformGrid, bc: BoundaryData | None = None) -> QuadraticForm:
    """Joint form over x and an independent auxiliary field, block diagonal."""
    aux, weight = _auxiliary_weight(lag, grid)
    effective = euclidean_quadratic_form(_without_auxiliary(lag, aux), grid, bc)
    size = effective.size
    A = scipy.linalg.block_diag(effective.dense(), weight * grid.dt * np.eye(size))
    b = np.concatenate([effective.b, np.zeros(size)])
    return QuadraticForm(A=A, b=b, c=effective.c, grid=grid, meta={"kind": "independent_field", "auxiliary": f"q{aux}"})


def _quartic_coefficients(lag: LagrangianSpec, grid: UniformGrid) -> tuple[float, float, float]:
    """(c0, c1, c2) of L_E = ½(c2 q2² + c1 q1² + c0 q0²) on the integer ladder {0, 1, 2}."""
    if lag.ladder != (0.0, 1.0, 2.0):
        raise UnsupportedError(f"Mode split needs the ladder [0, 1, 2], got {list(lag.ladder)}")
    parts = quadratic_parts(wick_rotate(lag), grid)
    for l in range(3):
        for lp in range(3):
            if l != lp and np.any(parts.H[l][lp]):
                raise UnsupportedError("Mode split needs a diagonal Hessian")
    coefficients = [parts.H[l][l] for l in range(3)]
    if any(not np.allclose(c, c[0]) or np.any(np.imag(c)) for c in coefficients):
        raise UnsupportedError("Mode split needs constant real coefficients")
    c0, c1, c2 = (float(c[0].real) for c in coefficients)
    if c2 == 0:
        raise UnsupportedError("Mode split needs a fourth-order operator")
    return c0, c1, c2


def mode_split(lag: LagrangianSpec, grid: UniformGrid, bc: BoundaryData | None = None) -> tuple[Mode, Mode]:
    """Factor c2 s² + c1 s + c0 = c2 (s + mu1)(s + mu2), s = -∂², into two oscillator modes.

    The propagator splits as w1/(s + mu1) + w2/(s + mu2) with w2 = -w1; the mode
    with negative weight is the ghost.
    """
    c0, c1, c2 = _quartic_coefficients(lag, grid)
    roots = np.roots([c2, c1, c0])
    if np.any(np.abs(np.imag(roots)) > 0) or np.any(np.real(roots) >= 0):
        raise UnsupportedError(f"Quartic symbol roots {roots} are not distinct negative reals")
    mu1, mu2 = sorted(float(-r.real) for r in roots)
    if math.isclose(mu1, mu2):
        raise UnsupportedError("Quartic symbol has a double root")
    weight = 1.0 / (c2 * (mu2 - mu1))

    modes = []
    for mu, w in ((mu1, weight), (mu2, -weight)):
        oscillator = parse_lagrangian(
            "0.5*q1^2 - 0.5*mu*q0^2", ladder=(0.0, 1.0), params={"mu": mu}, alpha=1.0, name=f"{lag.name}-mode"
        )
        modes.append(Mode(mu=mu, weight=w, form=euclidean_quadratic_form(oscillator, grid, None)))
    logger.debug(f"Mode split of {lag.name}: mu = {mu1:g}, {mu2:g}; weights {weight:g}, {-weight:g}")
    return modes[0], modes[1]


def factorization_residual(lag: LagrangianSpec, grid: UniformGrid) -> float:
    """max |quartic - c2 (s+mu1)(s+mu2)| / max |quartic| over the discrete Fourier symbols."""
    c0, c1, c2 = _quartic_coefficients(lag, grid)
    first, second = mode_split(lag, grid)
    size = grid.n - 2
    theta = np.pi * np.arange(1, size + 1) / (size + 1)
    s = (2 - 2 * np.cos(theta)) / grid.dt**2
    quartic = c2 * s**2 + c1 * s + c0
    factored = c2 * (s + first.mu) * (s + second.mu)
    return float(np.max(np.abs(quartic - factored)) / np.max(np.abs(quartic)))


def discrete_oscillator_log_det(omega: float, dt: float, size: int, m: float = 1.0) -> float:
    """Kernel log-determinant of (m/dt)·tridiag(-1, 2 + ω²dt², -1) by the determinant recursion.

    d_{i+1} = (2 + ω²dt²) d_i - d_{i-1}, carried as ratios d_i/d_{i-1}.
    """
    if size < 1:
        raise DomainError(f"Oscillator determinant needs at least one sample, got {size}")
    diagonal = 2 + omega**2 * dt**2
    ratio = diagonal
    log_d = math.log(ratio)
    for _ in range(size - 1):
        ratio = diagonal - 1.0 / ratio
        log_d += math.log(ratio)
    log_det_a = log_d + size * math.log(m / dt)
    return -0.5 * log_det_a + 0.5 * size * math.log(2 * math.pi)


def spectral_report(
    lag: LagrangianSpec,
    grid: UniformGrid,
    bc: BoundaryData | None = None,
    kernel: KernelConfig | None = None,
) -> SpectralReport:
    """Kernel report; integrates out an auxiliary rung or splits a quartic into modes when present."""
    kernel = kernel or KernelConfig()
    if lag.riewe and any(not float(order).is_integer() for order in lag.ladder):
        effective, log_c = marginalize_auxiliary(lag, grid, bc)
        report = correlator(effective, kernel=kernel)
        full = kernel_log_det(independent_field_form(lag, grid, bc))
        extra = {"method": "auxiliary", "log_C": log_c, "log_det_full": full}
        return SpectralReport(report.log_det, report.correlator, report.gap_estimates, report.grid, extra)

    form = euclidean_quadratic_form(lag, grid, bc)
    if lag.ladder == (0.0, 1.0, 2.0):
        try:
            modes = mode_split(lag, grid, bc)
        except UnsupportedError as e:
            logger.info(f"No mode split for {lag.name}: {e}")
        else:
            report = correlator(form, kernel=kernel)
            rates = tuple(gap for mode in modes for gap in correlator(mode.form, kernel=kernel).gap_estimates)
            extra = {
                "method": "mode_split",
                "modes": [mode.json() for mode in modes],
                "factorization_residual": factorization_residual(lag, grid),
                "hessian_signs": form.meta["hessian_signs"],
            }
            return SpectralReport(report.log_det, report.correlator, rates, report.grid, extra)

    report = correlator(form, kernel=kernel)
    return SpectralReport(report.log_det, report.correlator, report.gap_estimates, report.grid, {"method": "direct"})
