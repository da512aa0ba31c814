import math

import numpy as np
import pytest
import scipy.sparse

from fracostro._config import SolveConfig
from fracostro._errors import BoundaryError, NonQuadraticError, SingularSystemError, SystemTooLargeError
from fracostro._types import SampledPath, UniformGrid
from fracostro.fracops import gl_matrix
from fracostro.lagrangian_dsl import evaluate
from fracostro.solver import (
    BoundaryData,
    assemble_action,
    eliminate,
    euler_lagrange_system,
    quadratic_parts,
    required_pairs,
    solve_stationary,
    write_trajectory,
)
from fracostro.systems import custom, damped_oscillator, harmonic_oscillator, pais_uhlenbeck
from fracostro.variational import coordinate_stack, euler_lagrange_residual

DAMPED_FREQUENCY = math.sqrt(1.0 - 0.2**2 / 4)


def test_required_pairs():
    assert required_pairs(harmonic_oscillator()) == 1
    assert required_pairs(harmonic_oscillator(alpha=0.6)) == 1
    assert required_pairs(pais_uhlenbeck()) == 2
    assert required_pairs(damped_oscillator()) == 1


def test_boundary_data_validation():
    with pytest.raises(BoundaryError):
        BoundaryData(left=((0, 0), (0, 1)), right=((0, 0),))
    with pytest.raises(BoundaryError):
        BoundaryData(left=((-1, 0),), right=((0, 0),))
    with pytest.raises(BoundaryError):
        BoundaryData(left=((0, 0),), right=((0, 0),)).validate(pais_uhlenbeck())

    bc = BoundaryData.dirichlet_zero(pais_uhlenbeck())
    assert bc.left == ((0, 0j), (1, 0j))
    assert bc.json() == {"left": [[0, [0.0, 0.0]], [1, [0.0, 0.0]]], "right": [[0, [0.0, 0.0]], [1, [0.0, 0.0]]]}


def test_boundary_from_path_is_satisfied_by_the_path():
    lag = pais_uhlenbeck()
    grid = UniformGrid(0.0, 1.0, 21)
    x = SampledPath.from_function(grid, np.cos)
    bc = BoundaryData.from_path(lag, x)
    q1 = gl_matrix(1.0, grid) @ x.values
    assert bc.left == ((0, x.values[0]), (1, q1[1]))
    assert bc.right == ((0, x.values[-1]), (1, q1[-1]))
    assert BoundaryData.from_profile(lag, grid, "cos(t)") == bc
    assert BoundaryData.from_profile(lag, grid, np.cos) == bc


def test_free_particle_form():
    lag = custom("0.5*q1^2", ladder=[0, 1])
    form = assemble_action(lag, UniformGrid(0.0, 3.0, 4), BoundaryData.dirichlet_zero(lag))
    np.testing.assert_allclose(form.dense(), [[2.0, -1.0], [-1.0, 2.0]])
    np.testing.assert_allclose(form.b, 0.0)
    assert form.json()["unknowns"] == 2
    assert form.meta["kind"] == "action"


def test_zero_lagrangian_form():
    lag = custom("0*q1", ladder=[0, 1])
    form = assemble_action(lag, UniformGrid(0.0, 1.0, 6), BoundaryData.dirichlet_zero(lag))
    np.testing.assert_allclose(form.dense(), 0.0)
    np.testing.assert_allclose(form.b, 0.0)


def test_harmonic_form_is_tridiagonal():
    lag = harmonic_oscillator()
    grid = UniformGrid(0.0, 1.0, 8)
    form = assemble_action(lag, grid, BoundaryData.dirichlet_zero(lag))
    assert scipy.sparse.issparse(form.A)
    assert form.A.dtype == np.float64
    size = grid.n - 2
    tridiag = 2 * np.eye(size) - np.eye(size, k=1) - np.eye(size, k=-1)
    np.testing.assert_allclose(form.dense(), tridiag / grid.dt - grid.dt * np.eye(size), atol=1e-12)


def test_form_value_is_discrete_action():
    lag = custom("0.5*q1^2 - 0.5*k*q0^2 + sin(t)*q0 + 1", ladder=[0, 0.7], params={"k": 2.0})
    grid = UniformGrid(0.0, 2.0, 25)
    bc = BoundaryData(left=((0, 0.3),), right=((0, -0.2),))
    form = assemble_action(lag, grid, bc)
    np.testing.assert_allclose(form.dense(), form.dense().T)

    rng = np.random.default_rng(5)
    for _ in range(3):
        x_free = rng.normal(size=form.size)
        x = form.elimination.expand(x_free)
        bindings = {"q0": x, "q1": gl_matrix(0.7, grid) @ x, "t": grid.times()}
        action = grid.dt * np.sum(evaluate(lag.expr, bindings, lag.params))
        assert form.value(x_free) == pytest.approx(action, rel=1e-10)


def test_quadratic_parts():
    lag = custom("0.5*m*q1^2 - 0.5*k*q0^2 + t*q0 + 3", ladder=[0, 1], params={"m": 2.0, "k": 5.0})
    grid = UniformGrid(0.0, 1.0, 3)
    parts = quadratic_parts(lag, grid)
    np.testing.assert_allclose(parts.H[1][1], 2.0)
    np.testing.assert_allclose(parts.H[0][0], -5.0)
    np.testing.assert_allclose(parts.H[0][1], 0.0)
    np.testing.assert_allclose(parts.g[0], grid.times())
    np.testing.assert_allclose(parts.c0, 3.0)

    with pytest.raises(NonQuadraticError):
        quadratic_parts(custom("q0^3", ladder=[0, 1]), grid)


def test_elimination_pins_boundary_samples():
    lag = pais_uhlenbeck()
    grid = UniformGrid(0.0, 1.0, 12)
    x = SampledPath.from_function(grid, np.sin)
    bc = BoundaryData.from_path(lag, x)
    elimination = eliminate(lag, grid, bc)
    assert list(elimination.free) == list(range(2, 10))
    expanded = elimination.expand(x.values[elimination.free])
    np.testing.assert_allclose(expanded, x.values, atol=1e-12)


def test_short_grid_is_a_boundary_error():
    lag = pais_uhlenbeck()
    with pytest.raises(BoundaryError):
        eliminate(lag, UniformGrid(0.0, 1.0, 3), BoundaryData.dirichlet_zero(lag))
    with pytest.raises(BoundaryError):
        eliminate(lag, UniformGrid(0.0, 1.0, 4), BoundaryData.dirichlet_zero(lag))


def _max_error(path, exact):
    return np.max(np.abs(path.values - exact(path.grid.times())))


def test_harmonic_oscillator_solution():
    lag = harmonic_oscillator()
    grid = UniformGrid(0.0, 3.25 * 2 * np.pi, 2000)
    path = solve_stationary(lag, grid, BoundaryData.from_profile(lag, grid, "sin(t)"))
    assert _max_error(path, np.sin) < 5e-3


def test_pais_uhlenbeck_solution():
    lag = pais_uhlenbeck()
    grid = UniformGrid(0.0, 3.3, 4000)

    def exact(t):
        return np.sin(t) + 0.1 * np.sin(10 * t)

    path = solve_stationary(lag, grid, BoundaryData.from_profile(lag, grid, exact))
    assert _max_error(path, exact) < 2e-2


def test_damped_oscillator_solution():
    lag = damped_oscillator()
    grid = UniformGrid(0.0, 8.0, 4000)

    def exact(t):
        return np.exp(-0.1 * t) * np.sin(DAMPED_FREQUENCY * t)

    path = solve_stationary(lag, grid, BoundaryData.from_profile(lag, grid, exact))
    assert _max_error(path, exact) < 2e-2
    assert np.max(np.abs(path.values.imag)) < 1e-6 * np.max(np.abs(path.values.real))


@pytest.mark.parametrize("alpha", [1.0, 0.7])
def test_solution_is_stationary_for_the_sampled_equations(alpha):
    lag = harmonic_oscillator(alpha=alpha)
    for n in (400, 800):
        grid = UniformGrid(0.0, 6.0, n)
        path = solve_stationary(lag, grid, BoundaryData.from_profile(lag, grid, "sin(t)"))
        residual = euler_lagrange_residual(lag, path)
        assert np.max(np.abs(residual.values[residual.interior()])) < 1e-8


def test_riewe_system_is_square():
    lag = damped_oscillator()
    grid = UniformGrid(0.0, 1.0, 30)
    system = euler_lagrange_system(lag, grid, BoundaryData.dirichlet_zero(lag))
    assert system.matrix.shape == (28, 28)
    np.testing.assert_allclose(system.rhs, 0.0)


def test_resonant_boundary_data_is_singular():
    lag = custom("0.5*q1^2 - 0.5*k*q0^2", ladder=[0, 1], params={"k": 2.0})
    bc = BoundaryData(left=((0, 0.0),), right=((0, 1.0),))
    with pytest.raises(SingularSystemError):
        solve_stationary(lag, UniformGrid(0.0, 2.0, 3), bc)


def test_system_size_limit():
    lag = harmonic_oscillator()
    grid = UniformGrid(0.0, 1.0, 20)
    with pytest.raises(SystemTooLargeError):
        solve_stationary(lag, grid, BoundaryData.dirichlet_zero(lag), SolveConfig(max_unknowns=10))
    with pytest.raises(SystemTooLargeError):
        assemble_action(lag, grid, BoundaryData.dirichlet_zero(lag), max_unknowns=10)


def test_solution_moves_continuously_with_alpha():
    grid = UniformGrid(0.0, 5.0, 400)

    def solve(alpha):
        lag = harmonic_oscillator(alpha=alpha)
        return solve_stationary(lag, grid, BoundaryData.from_profile(lag, grid, "sin(t)")).values

    reference = solve(1.0)
    distances = [np.max(np.abs(solve(alpha) - reference)) for alpha in (0.99, 0.95, 0.9)]
    assert 0 < distances[0] < distances[1] < distances[2]


def test_write_trajectory(tmp_path):
    lag = harmonic_oscillator()
    grid = UniformGrid(0.0, 1.0, 5)
    stack = coordinate_stack(lag, SampledPath.from_function(grid, np.sin))
    path = tmp_path / "trajectory.csv"
    write_trajectory(str(path), stack)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,re_x,im_x,re_q0,im_q0,re_q1,im_q1"
    assert len(lines) == 6
    assert lines[1].split(",")[:3] == ["0", "0", "0"]
