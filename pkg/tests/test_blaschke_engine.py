import math
import warnings

import numpy as np
import pytest

from dbar_solver.blaschke_engine import (
    ADMISSIBLE_NU,
    BlaschkeProduct,
    blaschke_derivative,
    blaschke_eval,
    high_separation_parameters,
    lambda_for_radius,
    level_components,
    level_samples,
    perturb_within,
    radius_r,
    separation_after_perturbation,
    solve_lambda,
)
from dbar_solver.disk_geometry import pseudo_distance
from dbar_solver.errors import PreconditionError
from dbar_solver.lk_pipeline.assembly import refinement_radius
from dbar_solver.sequence_analysis import FiniteSequence


@pytest.fixture
def triangle():
    return FiniteSequence(0.7 * np.exp(2j * np.pi * np.arange(3) / 3))


def test_zero_at_origin_gives_identity():
    b = BlaschkeProduct(FiniteSequence.of([0.0]))
    z = np.array([0.1 + 0.2j, -0.5, 0.9j])
    assert np.allclose(b(z), z)
    assert np.allclose(b.derivative(z), 1.0)


def test_unimodular_on_the_circle_and_vanishes_at_zeros(triangle):
    b = BlaschkeProduct(triangle)
    circle = np.exp(2j * np.pi * np.arange(32) / 32)
    assert np.allclose(np.abs(b(circle)), 1.0)
    assert np.allclose(b(triangle.points), 0.0, atol=1e-15)


def test_derivative_matches_difference_quotient(triangle, rng):
    b = BlaschkeProduct(triangle)
    z = 0.6 * np.sqrt(rng.uniform(size=8)) * np.exp(2j * np.pi * rng.uniform(size=8))
    h = 1e-6
    numeric = (b(z + h) - b(z - h)) / (2 * h)
    assert np.allclose(b.derivative(z), numeric, rtol=1e-6, atol=1e-8)


def test_empty_product_rejected():
    with pytest.raises(PreconditionError):
        BlaschkeProduct(FiniteSequence.of([]))


def test_radius_and_lambda_are_inverse():
    r = radius_r(0.8, 0.1)
    assert r == pytest.approx(0.7 * 0.1 / 0.92)
    assert lambda_for_radius(0.8, r) == pytest.approx(0.1)


def test_radius_needs_small_lambda():
    with pytest.raises(PreconditionError):
        radius_r(0.5, 0.5)


def test_solve_lambda_hits_refinement_radius():
    eps_nu = refinement_radius(ADMISSIBLE_NU)
    sol = solve_lambda(1.0, ADMISSIBLE_NU, eps_nu)
    assert sol.M == pytest.approx(1.0)
    assert 0.0 < sol.lam < ADMISSIBLE_NU
    assert sol.r / (6 * sol.M) == pytest.approx(eps_nu, rel=1e-8)
    # delta = 1 makes r equal to lambda
    assert sol.r == pytest.approx(sol.lam)


def test_solve_lambda_needs_separation_above_half():
    with pytest.raises(PreconditionError):
        solve_lambda(0.5, ADMISSIBLE_NU, 1e-3)


def test_high_separation_parameters_are_consistent():
    p = high_separation_parameters(0.1)
    assert p.eps_star == 0.5
    assert p.r > p.eps_star
    assert p.delta_m > 0.5
    assert p.r == pytest.approx(radius_r(p.delta, p.lam))


def test_local_inverses_land_in_their_components(triangle, rng):
    sol = solve_lambda(triangle.delta, ADMISSIBLE_NU, refinement_radius(ADMISSIBLE_NU))
    level = level_components(BlaschkeProduct(triangle), sol.r, sol.lam)
    w = 0.9 * sol.r * np.sqrt(rng.uniform(size=12)) * np.exp(2j * np.pi * rng.uniform(size=12))
    for n in range(3):
        z = level.local_inverse(n, w)
        assert np.max(np.abs(level.product(z) - w)) < 1e-12
        assert np.all(pseudo_distance(z, triangle.points[n]) < sol.lam)
        assert np.all(level.nearest_zero_index(z) == n)


def test_local_inverse_refuses_large_values(triangle):
    sol = solve_lambda(triangle.delta, ADMISSIBLE_NU, refinement_radius(ADMISSIBLE_NU))
    level = level_components(BlaschkeProduct(triangle), sol.r, sol.lam)
    with pytest.raises(PreconditionError):
        level.local_inverse(0, np.array([1.01 * sol.r]))


def test_singleton_component_is_a_pseudo_disk():
    seq = FiniteSequence.of([0.3 + 0.3j])
    level = level_components(BlaschkeProduct(seq), 0.2)
    z = level.local_inverse(0, np.array([0.1, 0.15j]))
    assert np.allclose(pseudo_distance(z, seq.points[0]), [0.1, 0.15])


def test_level_samples_rows():
    rows = level_samples(BlaschkeProduct(FiniteSequence.of([0.0])), 4, 8)
    assert rows.shape == (32, 3)
    assert np.allclose(rows[:, 2], np.hypot(rows[:, 0], rows[:, 1]))


def test_perturbation_keeps_separation_bound(triangle, rng):
    lam = 0.05
    moved = FiniteSequence(perturb_within(triangle.points, lam, rng))
    assert np.all(pseudo_distance(moved.points, triangle.points) < lam)
    assert moved.delta >= separation_after_perturbation(triangle.delta, lam)


def test_admissible_nu_value():
    assert ADMISSIBLE_NU == pytest.approx(2 - math.sqrt(3))


def test_function_forms_match_the_product(triangle):
    b = BlaschkeProduct(triangle)
    z = np.array([0.1j, -0.4 + 0.2j])
    assert np.array_equal(blaschke_eval(b, z), b(z))
    assert np.array_equal(blaschke_derivative(b, z), b.derivative(z))


def test_flow_membership_agrees_with_routing(triangle, rng):
    sol = solve_lambda(triangle.delta, ADMISSIBLE_NU, refinement_radius(ADMISSIBLE_NU))
    level = level_components(BlaschkeProduct(triangle), sol.r, sol.lam)
    w = 0.9 * sol.r * np.sqrt(rng.uniform(size=8)) * np.exp(2j * np.pi * rng.uniform(size=8))
    z = np.concatenate([level.local_inverse(n, w) for n in range(3)])
    assert np.array_equal(level.component_index(z), level.nearest_zero_index(z))
    assert np.array_equal(level.component_index(z), np.repeat([0, 1, 2], 8))
    assert level.component_index(np.array([0j]))[0] == -1


def test_membership_off_the_level_set_stays_quiet(triangle, rng):
    sol = solve_lambda(triangle.delta, ADMISSIBLE_NU, refinement_radius(ADMISSIBLE_NU))
    level = level_components(BlaschkeProduct(triangle), sol.r, sol.lam)
    spread = 0.98 * np.sqrt(rng.uniform(size=64)) * np.exp(2j * np.pi * rng.uniform(size=64))
    z = np.concatenate([[0j, 0.999, -0.999j], spread])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        idx = level.component_index(z)
    assert idx[0] == -1
    outside = np.abs(level.product(z)) >= sol.r
    assert np.all(idx[outside] == -1)
