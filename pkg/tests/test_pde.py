import numpy as np
import pytest

from mlmnet.activations import Activation
from mlmnet.network import NetworkArch, NetworkParams
from mlmnet.pde import (
    PdeProblem,
    ResidualSystem,
    build_training_set,
    exp_nonlinear_2d,
    helmholtz_1d,
    helmholtz_2d,
    poisson_1d,
    poisson_2d,
    sine_nonlinear_1d,
)

from conftest import fd_gradient, fd_jacobian, rel_err

ALL_PROBLEMS = [
    poisson_1d(nu=3),
    poisson_2d(nu=2),
    helmholtz_1d(nu=3),
    helmholtz_2d(nu=2, velocity="constant"),
    helmholtz_2d(nu=2, velocity="two-layers"),
    helmholtz_2d(nu=2, velocity="four-layers"),
    helmholtz_2d(nu=2, velocity="sine"),
    sine_nonlinear_1d(nu=3),
    exp_nonlinear_2d(nu=1),
]


def small_system(problem, r=8, kind="sigmoid"):
    return ResidualSystem(problem, NetworkArch(r, problem.dim, Activation(kind)))


def constant_solution_problem(operator, dim, value):
    """A problem whose exact solution is the constant `value`."""
    rhs = {
        "poisson": lambda z: np.zeros(z.shape[0]),
        "sine_nonlinear": lambda z: np.full(z.shape[0], np.sin(value)),
        "exp_nonlinear": lambda z: np.full(z.shape[0], np.exp(value)),
    }[operator]
    return PdeProblem(
        name=f"const-{operator}",
        dim=dim,
        operator=operator,
        nu=2,
        rhs_interior=rhs,
        rhs_boundary=lambda z: np.full(z.shape[0], value),
        penalty=0.5,
        true_solution=lambda z: np.full(z.shape[0], value),
    )


def constant_network(system, value):
    r, dim = system.arch.n_hidden, system.arch.dim
    return NetworkParams(np.zeros(r), np.ones((dim, r)), np.zeros(r), value)


# -- training grids -------------------------------------------------------------


def test_training_grid_1d_nu20():
    ts = build_training_set(poisson_1d(nu=20))
    assert ts.total == 41
    assert ts.boundary.shape == (2, 1)
    spacing = np.diff(np.sort(np.vstack([ts.interior, ts.boundary])[:, 0]))
    assert np.allclose(spacing, 0.025)


def test_training_grid_1d_nu1():
    prob = poisson_1d(nu=1)
    ts = build_training_set(prob)
    pts = np.sort(np.vstack([ts.interior, ts.boundary])[:, 0])
    assert np.allclose(pts, [0.0, 0.5, 1.0])


def test_training_grid_2d_nu5():
    ts = build_training_set(poisson_2d(nu=5))
    assert ts.total == 121
    assert ts.boundary.shape[0] == 40
    assert ts.interior.shape[0] == 81


def test_default_penalty_is_tenth_of_grid_size():
    assert poisson_1d(nu=20).penalty == pytest.approx(0.1 * 41)
    assert poisson_2d(nu=5).penalty == pytest.approx(0.1 * 121)


# -- residual vector ------------------------------------------------------------


@pytest.mark.parametrize(
    "operator,dim,value",
    [("poisson", 1, 0.8), ("poisson", 2, -0.4), ("sine_nonlinear", 1, 0.3), ("exp_nonlinear", 2, 0.6)],
)
def test_exact_constant_solution_has_zero_residual(operator, dim, value):
    system = small_system(constant_solution_problem(operator, dim, value))
    params = constant_network(system, value)
    assert np.allclose(system.residual(params), 0.0, atol=1e-14)
    loss, grad = system.loss_and_gradient(params)
    assert loss == pytest.approx(0.0, abs=1e-25)
    assert np.allclose(grad, 0.0, atol=1e-13)


def test_loss_identity_against_direct_formula(rng):
    # 0.5*||F||^2 recomputed from the loss definition with its coefficients
    for problem in (poisson_1d(nu=3), sine_nonlinear_1d(nu=3), helmholtz_2d(nu=2)):
        system = small_system(problem)
        for _ in range(17):
            x = rng.uniform(-1, 1, system.n)
            params = system.params_from(x)
            half_norm = 0.5 * float(system.residual(x) @ system.residual(x))

            from mlmnet import network

            zi, zb = system.training.interior, system.training.boundary
            values = network.eval_batch(system.arch, params, zi)
            lap = network.laplacian_batch(system.arch, params, zi)
            op = system._operator_terms(values, lap)
            t = system.training.total
            direct = (
                np.sum((op - problem.rhs_interior(zi)) ** 2)
                + problem.penalty
                * np.sum((network.eval_batch(system.arch, params, zb) - problem.rhs_boundary(zb)) ** 2)
            ) / (2.0 * t)
            assert abs(half_norm - direct) < 1e-12 * (1.0 + direct)


def test_boundary_entries_scale_with_sqrt_penalty(rng):
    base = poisson_1d(nu=3, penalty=2.0)
    doubled = poisson_1d(nu=3, penalty=4.0)
    arch = NetworkArch(4, 1, Activation("tanh"))
    s1, s2 = ResidualSystem(base, arch), ResidualSystem(doubled, arch)
    x = rng.uniform(-1, 1, s1.n)
    r1, r2 = s1.residual(x), s2.residual(x)
    n_int = s1.training.interior.shape[0]
    assert np.allclose(r1[:n_int], r2[:n_int])
    assert np.allclose(np.sqrt(2.0) * r1[n_int:], r2[n_int:])


# -- Jacobian -------------------------------------------------------------------


@pytest.mark.parametrize("problem", ALL_PROBLEMS, ids=lambda p: p.name)
def test_jacobian_matches_finite_differences(rng, problem):
    system = small_system(problem, r=8)
    x = rng.uniform(-1, 1, system.n)
    J = system.jacobian(x)
    assert J.shape == (system.m, system.n)
    J_fd = fd_jacobian(system.residual, x, h=1e-6)
    assert rel_err(J, J_fd) < 1e-6


def test_output_bias_column_structure(rng):
    system = small_system(poisson_1d(nu=3), r=4)
    x = rng.uniform(-1, 1, system.n)
    J = system.jacobian(x)
    n_int = system.training.interior.shape[0]
    # the Laplacian kills constants on interior rows; boundary rows see the bias directly
    assert np.allclose(J[:n_int, -1], 0.0)
    expected = np.sqrt(system.problem.penalty / system.training.total)
    assert np.allclose(J[n_int:, -1], expected)


def test_gradient_matches_finite_differences(rng):
    system = small_system(sine_nonlinear_1d(nu=3), r=5)
    x = rng.uniform(-1, 1, system.n)
    loss, grad = system.loss_and_gradient(x)
    assert loss >= 0.0
    fd = fd_gradient(lambda y: system.loss(y), x, h=1e-6)
    assert rel_err(grad, fd) < 1e-6


# -- error metric ---------------------------------------------------------------


def test_rmse_zero_for_exact_solution():
    system = small_system(constant_solution_problem("poisson", 1, 0.8))
    assert system.rmse(constant_network(system, 0.8)) == pytest.approx(0.0, abs=1e-15)


def test_rmse_of_constant_offset():
    system = small_system(constant_solution_problem("poisson", 2, 0.5))
    assert system.rmse(constant_network(system, 0.6)) == pytest.approx(0.1)


def test_rmse_matches_brute_force(rng):
    system = small_system(poisson_1d(nu=3), r=4)
    x = rng.uniform(-1, 1, system.n)
    pts = system.test_grid(100)
    from mlmnet import network

    diff = network.eval_batch(system.arch, system.params_from(x), pts) - system.problem.true_solution(pts)
    brute = np.sqrt(np.mean(diff**2))
    assert abs(system.rmse(x) - brute) < 1e-12


def test_rmse_grid_excludes_training_points():
    system = small_system(poisson_1d(nu=20), r=2)
    pts = system.test_grid(100)
    assert pts.shape == (100, 1)
    train = np.vstack([system.training.interior, system.training.boundary])
    for row in train:
        assert not np.any(np.all(np.abs(pts - row) < 1e-12, axis=1))
    # a grid resolution sharing points with the training grid gets them filtered
    pts99 = system.test_grid(99)  # spacing 0.01, hits multiples of 1/40 at 0.25 steps... none
    assert pts99.shape[0] <= 99


def test_rmse_requires_reference_for_helmholtz2d(rng):
    system = small_system(helmholtz_2d(nu=2), r=4)
    x = rng.uniform(-1, 1, system.n)
    with pytest.raises(RuntimeError):
        system.rmse(x)
    # a callable reference works
    assert np.isfinite(system.rmse(x, reference=lambda z: np.zeros(z.shape[0])))


# -- validation -----------------------------------------------------------------


def test_invalid_operator_dim_combinations_rejected():
    with pytest.raises(ValueError):
        PdeProblem(
            name="bad", dim=2, operator="helmholtz1d", nu=2,
            rhs_interior=lambda z: np.zeros(z.shape[0]),
            rhs_boundary=lambda z: np.zeros(z.shape[0]),
            penalty=1.0,
        )
    with pytest.raises(ValueError):
        poisson_1d(nu=3, penalty=-1.0)


def test_dimension_mismatch_rejected(rng):
    system = small_system(poisson_1d(nu=3), r=4)
    with pytest.raises(ValueError):
        system.residual(np.zeros(7))
