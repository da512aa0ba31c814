"""Generalized fractional Taylor basis e_{α_m}(λ) = (λ - λ₀)^{α_m} / Γ(α_m + 1) and its dual.

The dual family e^{α_m} = D_λ^{α_m} δ(λ - λ₀) is a distribution and is never
materialized; every pairing goes through the RL power rule.
"""

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from fracostro._config import get_defaults
from fracostro._errors import DomainError, OffLadderError
from fracostro._types import ORDER_TOLERANCE, FracOrder, as_order


# |m| bound for analytic dual pairings.
PAIRING_WINDOW = 12


def default_window() -> tuple[int, int]:
    low, high = get_defaults().get("basis_window", [-4, 12])
    return int(low), int(high)


@dataclass(frozen=True)
class BasisElement:
    order: FracOrder
    center: float = 0.0


@dataclass(frozen=True)
class FracSeries:
    """Truncated series Σ_m coeffs[m] · e_{α_m}(λ) with α_m = m + alpha."""

    alpha: float
    center: float = 0.0
    coeffs: Mapping[int, complex] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0 <= self.alpha < 1:
            raise DomainError(f"Series alpha must lie in [0, 1), got {self.alpha}")
        coeffs = {int(m): complex(c) for m, c in self.coeffs.items()}
        if not all(np.isfinite(c) for c in coeffs.values()):
            raise DomainError("Series coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    def order(self, m: int) -> float:
        return m + self.alpha

    def json(self) -> dict:
        return {
            "alpha": self.alpha,
            "center": self.center,
            "coeffs": {str(m): [c.real, c.imag] for m, c in sorted(self.coeffs.items())},
        }


def eval_basis(elem: BasisElement, lam: float) -> complex:
    if lam < elem.center:
        raise DomainError(f"Basis is evaluated right of its center {elem.center}, got lambda={lam}")
    total = elem.order.total
    return complex((lam - elem.center) ** total * special.rgamma(total + 1.0))


def dual_pairing(m: int, m_prime: int, alpha: float) -> complex:
    """∫ dλ e^{α_m}(λ) e_{α_m'}(λ), evaluated through D^{α_m} applied to e_{α_m'} at λ₀.

    The power rule gives Γ(α_m'+1)/Γ(α_m'-α_m+1) · (λ-λ₀)^{m'-m} / Γ(α_m'+1); the Gamma
    normalization cancels, leaving (λ-λ₀)^{m'-m} / Γ(m'-m+1) at λ = λ₀.
    """
    if abs(m) > PAIRING_WINDOW or abs(m_prime) > PAIRING_WINDOW:
        raise DomainError(f"Pairing indices must satisfy |m| <= {PAIRING_WINDOW}, got ({m}, {m_prime})")
    if not 0 <= alpha < 1:
        raise DomainError(f"Pairing alpha must lie in [0, 1), got {alpha}")

    shift = m_prime - m
    # Gamma pole for shift < 0, vanishing power for shift > 0.
    coefficient = special.rgamma(shift + 1.0)
    if coefficient == 0:
        return 0j
    return complex(coefficient * (0.0**shift))


def bracket_matrix(window: tuple[int, int], alpha: float) -> np.ndarray:
    """Gram matrix of dual pairings over an index window (identity when biorthogonal)."""
    low, high = window
    indices = range(low, high + 1)
    return np.array([[dual_pairing(m, mp, alpha) for mp in indices] for m in indices])


def canonical_pairs(q_series: FracSeries, p_series: FracSeries) -> list[tuple[int, complex, complex]]:
    """Match q-slot m with p-slot m; the slot keys must correspond one-to-one."""
    if q_series.alpha != p_series.alpha or q_series.center != p_series.center:
        raise DomainError("Coordinate and momentum series must share alpha and center")
    if set(q_series.coeffs) != set(p_series.coeffs):
        missing = set(q_series.coeffs) ^ set(p_series.coeffs)
        raise DomainError(f"Unpaired canonical slots: {sorted(missing)}")
    return [(m, q_series.coeffs[m], p_series.coeffs[m]) for m in sorted(q_series.coeffs)]


def reconstruct(series: FracSeries, lam: float, include_negative: bool = False) -> complex:
    if lam < series.center:
        raise DomainError(f"Series is evaluated right of its center {series.center}, got lambda={lam}")

    offset = lam - series.center
    total = 0j
    for m, c in sorted(series.coeffs.items()):
        if m < 0:
            if not include_negative:
                continue
            if offset == 0:
                raise DomainError(f"Negative-index term m={m} is singular at the center")
            total += c * offset ** series.order(m) * special.rgamma(series.order(m) + 1.0)
            continue
        total += c * eval_basis(BasisElement(as_order(series.order(m)), series.center), lam)
    return total


def project(
    f_powers: Mapping[float, complex],
    alpha: float,
    window: tuple[int, int] | None = None,
    center: float = 0.0,
) -> FracSeries:
    """Recover basis coefficients from a fractional polynomial Σ c_e (λ-λ₀)^e."""
    low, high = window or default_window()
    coeffs: dict[int, complex] = {}

    for exponent, c in f_powers.items():
        m = round(exponent - alpha)
        if abs(exponent - (m + alpha)) > ORDER_TOLERANCE or not low <= m <= high:
            raise OffLadderError(f"Exponent {exponent} is not on the ladder m + {alpha}, m in [{low}, {high}]")
        scale = special.gamma(m + alpha + 1.0)
        if not np.isfinite(scale):
            raise DomainError(f"Exponent {exponent} sits on a Gamma pole")
        coeffs[m] = coeffs.get(m, 0j) + complex(c) * scale

    return FracSeries(alpha=alpha, center=center, coeffs=coeffs)


def classical_series(coeffs: Mapping[int, complex], center: float = 0.0) -> FracSeries:
    """Integer Taylor limit: e_m(λ) = λ^m / m!."""
    return FracSeries(alpha=0.0, center=center, coeffs=coeffs)
