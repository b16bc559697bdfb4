import numpy as np
import pytest

from dbar_solver.blaschke_engine import ADMISSIBLE_NU, BlaschkeProduct, level_components, solve_lambda
from dbar_solver.disk_geometry import PseudoDisk
from dbar_solver.errors import ConvergenceError, PreconditionError
from dbar_solver.interp_basis import (
    build_jones_basis,
    build_two_variable_basis,
    f_basis_eval,
    interpolation_matrix,
    jones_damping,
    neumann_inverse_apply,
    neumann_solve,
)
from dbar_solver.lk_pipeline import PipelineOptions, RegionSpec, build_small_width
from dbar_solver.lk_pipeline.assembly import refinement_radius
from dbar_solver.sequence_analysis import FiniteSequence, interpolation_bounds


@pytest.fixture
def square():
    return FiniteSequence(0.75 * np.exp(2j * np.pi * (np.arange(4) + 0.25) / 4))


@pytest.fixture
def two_variable(square):
    jones = build_jones_basis(square)
    sol = solve_lambda(square.delta, ADMISSIBLE_NU, refinement_radius(ADMISSIBLE_NU), jones.M)
    level = level_components(BlaschkeProduct(square), sol.r, sol.lam)
    return build_two_variable_basis(jones, level)


def test_jones_basis_interpolates_at_nodes(square):
    basis = build_jones_basis(square)
    assert np.allclose(basis.evaluate(square.points), np.eye(4), atol=1e-12)
    assert basis.damping == pytest.approx(jones_damping(square.delta))


def test_jones_sum_is_below_its_bound(square):
    basis = build_jones_basis(square)
    z = PseudoDisk(0j, 0.99).sample(16, 32)
    assert basis.sum_abs(z).max() <= basis.M
    assert basis.observed_sum <= basis.M


def test_singleton_basis_is_constant_one():
    basis = build_jones_basis(FiniteSequence.of([0.2j]))
    assert np.allclose(basis.evaluate(np.array([0.0, 0.5, -0.7j])), 1.0)


def test_neumann_matches_direct_solve(rng):
    n = 5
    P = np.eye(n) + 0.02 * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    a = rng.normal(size=(n, 2)) + 0j
    res = neumann_solve(P, a)
    assert np.allclose(res.x, np.linalg.solve(P, a), atol=1e-12)
    assert res.contraction < 0.5


def test_neumann_refuses_non_contraction():
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ConvergenceError):
        neumann_solve(P, np.ones((2, 1)))


def test_interpolation_matrix_is_near_identity(two_variable):
    w = 0.5 * two_variable.w_radius
    P = interpolation_matrix(two_variable.jones, two_variable.level, w)
    assert P.shape == (4, 4)
    assert np.max(np.sum(np.abs(np.eye(4) - P), axis=-1)) <= 0.5


def test_two_variable_basis_interpolates_on_the_fibre(two_variable):
    level = two_variable.level
    for w in 0.9 * two_variable.w_radius * np.exp(2j * np.pi * np.array([0.1, 0.4, 0.8])):
        pts = np.array([level.local_inverse(k, w) for k in range(4)])
        assert np.allclose(two_variable.evaluate(pts, w), np.eye(4), atol=1e-10)


def test_single_basis_function_matches_full_evaluation(two_variable):
    w = 0.3 * two_variable.w_radius
    z = np.array([0.1, -0.2j, 0.4 + 0.1j])
    full = two_variable.evaluate(z, w)
    assert np.allclose(f_basis_eval(two_variable, 2, z, w), full[:, 2])


def test_two_variable_sum_bound(two_variable):
    z = np.concatenate([PseudoDisk(0j, 0.99).sample(8, 16), two_variable.jones.sequence.points])
    total = np.sum(np.abs(two_variable.evaluate(z, 0.5 * two_variable.w_radius)), axis=-1)
    assert total.max() <= 2 * two_variable.jones.M


def test_neumann_apply_checks_w_radius(two_variable):
    with pytest.raises(PreconditionError):
        neumann_inverse_apply(two_variable.jones, two_variable.level, 2 * two_variable.w_radius, np.ones(4))


@pytest.mark.parametrize("points", [
    0.75 * np.exp(2j * np.pi * (np.arange(4) + 0.25) / 4),
    np.array([-0.6, 0.6]),
])
def test_one_interpolation_constant_throughout(points):
    seq = FiniteSequence(points)
    jones = build_jones_basis(seq)
    bounds = interpolation_bounds(seq.delta)
    assert jones.observed_sum <= jones.M <= bounds.jones

    eps_nu = refinement_radius(ADMISSIBLE_NU)
    sol = solve_lambda(seq.delta, ADMISSIBLE_NU, eps_nu, jones.M)
    assert sol.M == jones.M
    assert sol.r / (6.0 * jones.M) == pytest.approx(eps_nu, rel=1e-8)

    tvb = build_two_variable_basis(jones, level_components(BlaschkeProduct(seq), sol.r, sol.lam))
    assert tvb.M == jones.M
    assert tvb.w_radius == pytest.approx(sol.r / (3.0 * jones.M))

    options = PipelineOptions(n_r=4, n_theta=8, contour_q=16, nmax=4)
    swo = build_small_width(seq, RegionSpec.around(seq, 1e-5), eps_nu, options=options)
    assert swo.M == swo.jones.M == jones.M
    assert swo.contour_radius == pytest.approx(swo.r / (4.0 * jones.M))
