import math

import numpy as np
import pytest

from fracostro._config import KernelConfig
from fracostro._errors import DomainError, NotPositiveDefiniteError, SingularSystemError, UnsupportedError
from fracostro._types import UniformGrid
from fracostro.lagrangian_dsl import evaluate
from fracostro.pathint import (
    SpectralReport,
    correlator,
    covariance,
    discrete_oscillator_log_det,
    euclidean_quadratic_form,
    factorization_residual,
    fit_gap,
    independent_field_form,
    kernel_log_det,
    marginalize_auxiliary,
    mode_split,
    spectral_report,
    wick_rotate,
)
from fracostro.solver import QuadraticForm
from fracostro.systems import custom, damped_oscillator, harmonic_oscillator, pais_uhlenbeck

LONG_GRID = UniformGrid(0.0, 40.0, 2000)


def _form(A):
    A = np.asarray(A, dtype=float)
    return QuadraticForm(A=A, b=np.zeros(len(A)))


def test_gaussian_normalization():
    assert kernel_log_det(_form(np.eye(3))) == pytest.approx(1.5 * math.log(2 * math.pi))
    assert kernel_log_det(_form(2 * np.eye(2))) == pytest.approx(-math.log(2) + math.log(2 * math.pi))

    inverse, log_det = covariance(_form([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(inverse, np.linalg.inv([[2.0, 1.0], [1.0, 2.0]]))
    assert log_det == pytest.approx(-0.5 * math.log(3) + math.log(2 * math.pi))


def test_singular_and_indefinite_kernels():
    with pytest.raises(SingularSystemError):
        kernel_log_det(_form(np.zeros((2, 2))))
    with pytest.raises(NotPositiveDefiniteError):
        covariance(_form(-np.eye(2)))
    with pytest.raises(NotPositiveDefiniteError):
        covariance(QuadraticForm(A=np.array([[1.0, 1j], [0.0, 1.0]]), b=np.zeros(2)))


def test_wick_rotation():
    euclidean = wick_rotate(harmonic_oscillator(m=2.0, k=3.0))
    assert not euclidean.riewe
    assert evaluate(euclidean.expr, {"q0": 1.0, "q1": 0.0}, euclidean.params) == pytest.approx(1.5)
    assert evaluate(euclidean.expr, {"q0": 0.0, "q1": 1.0}, euclidean.params) == pytest.approx(1.0)
    form = euclidean_quadratic_form(pais_uhlenbeck(), UniformGrid(0.0, 1.0, 20))
    assert form.meta["kind"] == "euclidean"
    assert form.meta["hessian_signs"] == {"q0": 1, "q1": 1, "q2": 1}

    restoring = custom("-0.5*c*q0^2", ladder=[0, 1], params={"c": 10})
    identity = euclidean_quadratic_form(restoring, UniformGrid(0.0, 0.4, 5))
    np.testing.assert_allclose(identity.dense(), np.eye(3), atol=1e-12)


def test_harmonic_determinant_matches_recursion():
    grid = UniformGrid(0.0, 5.0, 200)
    form = euclidean_quadratic_form(harmonic_oscillator(), grid)
    expected = discrete_oscillator_log_det(1.0, grid.dt, grid.n - 2)
    assert kernel_log_det(form) == pytest.approx(expected, abs=1e-8)
    assert covariance(form)[1] == pytest.approx(expected, abs=1e-8)

    with pytest.raises(DomainError):
        discrete_oscillator_log_det(1.0, 0.1, 0)


def test_harmonic_correlator_gap():
    report = spectral_report(harmonic_oscillator(), LONG_GRID)
    assert report.extra["method"] == "direct"
    assert report.gap_estimates[0] == pytest.approx(1.0, rel=0.02)
    assert report.correlator[0][0] == 0.0
    assert report.correlator[0][1] == pytest.approx(0.5, rel=0.01)


def test_pais_uhlenbeck_splits_into_oscillator_and_ghost():
    lag = pais_uhlenbeck(w=1.0, eps=0.1)
    first, second = mode_split(lag, LONG_GRID)
    assert (first.mu, second.mu) == (pytest.approx(1.0), pytest.approx(100.0))
    assert not first.ghost
    assert second.ghost
    assert first.weight == pytest.approx(-second.weight)
    assert factorization_residual(lag, LONG_GRID) < 1e-8

    report = spectral_report(lag, LONG_GRID)
    assert report.extra["method"] == "mode_split"
    assert report.extra["hessian_signs"]["q2"] == 1
    assert [mode["ghost"] for mode in report.extra["modes"]] == [False, True]
    rates = sorted(report.gap_estimates)
    assert rates[0] == pytest.approx(1.0, rel=0.02)
    assert rates[1] == pytest.approx(10.0, rel=0.02)


def test_mode_split_needs_integer_quartic():
    with pytest.raises(UnsupportedError):
        mode_split(harmonic_oscillator(), LONG_GRID)
    with pytest.raises(UnsupportedError):
        mode_split(custom("q0*q2 + q1^2 - q2^2", ladder=[0, 1, 2]), LONG_GRID)


def test_auxiliary_field_integrates_out():
    grid = UniformGrid(0.0, 0.9, 10)
    lag = damped_oscillator(g=2.0)
    effective, log_c = marginalize_auxiliary(lag, grid)
    assert effective.size == 8
    assert log_c == pytest.approx(4 * math.log(2 * math.pi / 0.2))
    assert log_c == pytest.approx(13.78926, abs=1e-5)
    assert marginalize_auxiliary(damped_oscillator(g=2.0, k=3.0), grid)[1] == pytest.approx(log_c)

    harmonic = euclidean_quadratic_form(harmonic_oscillator(), grid)
    np.testing.assert_allclose(effective.dense(), harmonic.dense(), atol=1e-12)

    joint = kernel_log_det(independent_field_form(lag, grid))
    assert joint == pytest.approx(kernel_log_det(effective) + log_c, abs=1e-10)

    report = spectral_report(lag, grid)
    assert report.extra["method"] == "auxiliary"
    assert report.extra["log_det_full"] == pytest.approx(report.log_det + report.extra["log_C"], abs=1e-10)


def test_auxiliary_field_needs_riewe_convention():
    with pytest.raises(UnsupportedError):
        marginalize_auxiliary(damped_oscillator(riewe=False), UniformGrid(0.0, 1.0, 10))


def test_inverted_potential_is_not_positive_definite():
    with pytest.raises(NotPositiveDefiniteError):
        spectral_report(custom("0.5*q0^2", ladder=[0, 1]), UniformGrid(0.0, 1.0, 10))


def test_fit_gap():
    taus = np.arange(6) * 0.5
    assert fit_gap(taus, np.exp(-2 * taus)) == pytest.approx(2.0)
    assert fit_gap(taus, np.exp(-2 * taus), window=(0.5, 2.0)) == pytest.approx(2.0)
    assert fit_gap(taus, np.array([1.0, 0, 0, 0, 0, 0])) is None
    assert fit_gap(np.zeros(3), np.ones(3)) is None


def test_correlator_pairs_and_output(tmp_path):
    form = euclidean_quadratic_form(harmonic_oscillator(), UniformGrid(0.0, 4.0, 41))
    report = correlator(form, pairs=[(10, 10), (10, 12)], kernel=KernelConfig())
    assert [tau for tau, _ in report.correlator] == pytest.approx([0.0, 0.2])
    with pytest.raises(DomainError):
        correlator(form, pairs=[(0, 39)])

    path = tmp_path / "correlator.csv"
    report.write_correlator(str(path))
    assert path.read_text().splitlines()[0] == "tau,value"
    assert set(report.json()) >= {"log_det", "correlator", "gap_estimates", "grid"}


def test_report_validation():
    with pytest.raises(SingularSystemError):
        SpectralReport(log_det=float("inf"), correlator=((0.0, 1.0), (1.0, 0.5)), gap_estimates=(), grid={})
    with pytest.raises(DomainError):
        SpectralReport(log_det=0.0, correlator=((0.0, 1.0),), gap_estimates=(), grid={})
