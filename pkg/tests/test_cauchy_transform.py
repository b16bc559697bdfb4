import json

import numpy as np
import pytest

from dbar_solver.cauchy_transform import (
    Bump,
    GridField,
    PolarGrid,
    QuadratureConfig,
    cauchy_solve,
    cauchy_solve_field,
    bump_nodes,
    continuity_check,
    indicator_transform,
    load_grid_field,
    omega,
    save_grid_field,
    weak_residual,
)
from dbar_solver.errors import DiskDomainError, InputFormatError, PreconditionError

S = 0.5
INSIDE = np.array([0.1, 0.25j, -0.4 + 0.0j, 0.3 * np.exp(1j)])
OUTSIDE = np.array([0.6, -0.75j, 0.9 * np.exp(2j), -0.8 + 0.1j])


def indicator(n: int = 32) -> GridField:
    return GridField.sample(lambda z: np.ones(z.shape), PolarGrid(n, n, S))


def relative_error(got, exact) -> float:
    return float(np.max(np.abs(got - exact)) / np.max(np.abs(exact)))


def test_indicator_oracle_inside_and_outside():
    z = np.concatenate([INSIDE, OUTSIDE])
    got = cauchy_solve_field(indicator(), z)[:, 0]
    assert relative_error(got, indicator_transform(S, z)) <= 2.56 / 32


@pytest.mark.parametrize("n, bound", [(256, 1e-2), (512, 3e-3)])
def test_indicator_oracle_at_fine_grids(n, bound):
    z = np.concatenate([INSIDE, OUTSIDE])
    got = cauchy_solve_field(indicator(n), z)[:, 0]
    assert relative_error(got, indicator_transform(S, z)) < bound


def test_node_sum_is_sharp_away_from_the_support():
    got = cauchy_solve_field(indicator(), OUTSIDE)[:, 0]
    assert relative_error(got, indicator_transform(S, OUTSIDE)) < 1e-2


def test_polar_far_field_agrees_with_node_sum():
    polar = QuadratureConfig(far_field="polar")
    a = cauchy_solve_field(indicator(), OUTSIDE)[:, 0]
    b = cauchy_solve_field(indicator(), OUTSIDE, polar)[:, 0]
    assert relative_error(b, a) < 0.1


def test_sabotaged_quadrature_flips_the_sign():
    z = np.concatenate([INSIDE, OUTSIDE])
    got = cauchy_solve_field(indicator(), z, QuadratureConfig(sabotage=True))[:, 0]
    assert relative_error(got, indicator_transform(S, z)) > 1.0


def test_indicator_transform_is_continuous_on_the_circle():
    z = S * np.exp(2j * np.pi * np.arange(8) / 8)
    inside = indicator_transform(S, z * (1 - 1e-12))
    outside = indicator_transform(S, z * (1 + 1e-12))
    assert np.allclose(inside, outside, atol=1e-10)


def test_transform_is_linear(rng):
    grid = PolarGrid(12, 12, 0.4)
    full = np.ones((12, 12), dtype=bool)
    a = GridField(grid, rng.normal(size=(12, 12, 2)) + 0j, full)
    b = GridField(grid, rng.normal(size=(12, 12, 2)) + 1j * rng.normal(size=(12, 12, 2)), full)
    z = np.array([0.0, 0.2 + 0.1j, 0.7j])
    lhs = cauchy_solve_field(a * 2.0 + b * (1 - 3j), z)
    rhs = 2.0 * cauchy_solve_field(a, z) + (1 - 3j) * cauchy_solve_field(b, z)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_zero_field_gives_zero():
    out = cauchy_solve_field(GridField.zeros(PolarGrid(8, 8, 0.3), 3), np.array([0.0, 0.5]))
    assert out.shape == (2, 3)
    assert not out.any()


def test_parallel_chunks_match_serial():
    z = 0.8 * np.exp(2j * np.pi * np.arange(40) / 40) * np.linspace(0.1, 1.0, 40)
    serial = cauchy_solve_field(indicator(16), z)
    threaded = cauchy_solve_field(indicator(16), z, QuadratureConfig(parallel=3, chunk=7))
    assert np.allclose(serial, threaded, rtol=1e-13, atol=1e-15)


def test_single_target_helper():
    assert cauchy_solve(indicator(16), 0.7)[0] == pytest.approx(S * S / 0.7, rel=1e-2)


def test_targets_must_be_inside_the_disk():
    with pytest.raises(DiskDomainError):
        cauchy_solve_field(indicator(8), np.array([1.0]))


def test_sup_bound_on_random_fields(rng):
    grid = PolarGrid(16, 16, S)
    z = np.concatenate([INSIDE, OUTSIDE, [0.0]])
    for _ in range(3):
        vals = rng.normal(size=(16, 16, 1)) + 1j * rng.normal(size=(16, 16, 1))
        h = GridField(grid, vals, np.ones((16, 16), dtype=bool))
        assert np.abs(cauchy_solve_field(h, z)).max() <= 1.1 * 2 * S * h.sup_norm()


def test_continuity_of_the_indicator_transform(rng):
    a = 0.8 * np.sqrt(rng.uniform(size=20)) * np.exp(2j * np.pi * rng.uniform(size=20))
    b = a + rng.uniform(0.05, 0.1, 20) * np.exp(2j * np.pi * rng.uniform(size=20))
    report = continuity_check(indicator(16), zip(a, b))
    assert report.passed
    assert 0.0 < report.max_ratio < 1.0


def test_omega_domain():
    assert omega(2.0) == pytest.approx(2 * np.log(4))
    with pytest.raises(PreconditionError):
        omega(0.0)


class TestGridField:
    def test_values_outside_mask_must_vanish(self):
        grid = PolarGrid(2, 2, 0.5)
        mask = np.array([[True, False], [True, True]])
        with pytest.raises(PreconditionError):
            GridField(grid, np.ones((2, 2, 1)), mask)

    def test_shape_checked(self):
        with pytest.raises(PreconditionError):
            GridField(PolarGrid(2, 2, 0.5), np.ones((2, 3, 1)), np.ones((2, 2), dtype=bool))

    def test_lookup_is_zero_off_the_grid(self):
        h = indicator(8)
        assert np.allclose(h.lookup(np.array([0.1, 0.49j, 0.51, -0.9])), [[1], [1], [0], [0]])

    def test_bilinear_keeps_constants(self):
        h = indicator(8)
        pts = 0.45 * np.exp(2j * np.pi * np.arange(10) / 10)
        assert np.allclose(h.lookup(pts, "bilinear"), 1.0)

    def test_unknown_interpolation(self):
        with pytest.raises(PreconditionError):
            indicator(4).lookup(np.array([0.1]), "cubic")

    def test_file_round_trip(self, tmp_path, rng):
        grid = PolarGrid(3, 4, 0.2)
        h = GridField(grid, rng.normal(size=(3, 4, 2)) + 1j * rng.normal(size=(3, 4, 2)),
                      np.ones((3, 4), dtype=bool))
        path = str(tmp_path / "h.json")
        save_grid_field(h, path)
        back = load_grid_field(path)
        assert back.grid == grid
        assert np.array_equal(back.values, h.values)

    def test_short_values_rejected(self, tmp_path):
        path = tmp_path / "h.json"
        path.write_text(json.dumps({"grid": {"n_r": 2, "n_theta": 2, "radius": 0.3}, "dim": 1, "values": [1, 0]}))
        with pytest.raises(InputFormatError, match="values"):
            load_grid_field(str(path))


class TestBump:
    def test_support_must_fit(self):
        with pytest.raises(DiskDomainError):
            Bump(0.9, 0.2)

    def test_dbar_matches_difference_quotients(self):
        bump = Bump(0.1 + 0.1j, 0.3)
        z = np.array([0.15 + 0.05j, 0.0 + 0.2j, 0.25 + 0.1j])
        h = 1e-6
        dx = (bump.value(z + h) - bump.value(z - h)) / (2 * h)
        dy = (bump.value(z + 1j * h) - bump.value(z - 1j * h)) / (2 * h)
        assert np.allclose(bump.dbar(z), 0.5 * (dx + 1j * dy), atol=1e-6)

    def test_weak_residual_of_an_exact_solution(self):
        bump = Bump(0.2j, 0.25)

        def solution(z):
            return np.conj(z)

        def rhs(z):
            return np.ones(z.shape)

        def nothing(z):
            return np.zeros(z.shape)

        size = weak_residual(nothing, rhs, bump)
        assert size > 0
        assert weak_residual(solution, rhs, bump) < 1e-3 * size

    def test_weak_residual_relative_to_the_source(self):
        bump = Bump(-0.1, 0.3)

        def solution(z):
            return np.conj(z) + z ** 2

        def rhs(z):
            return np.ones(z.shape)

        assert weak_residual(solution, rhs, bump, relative=True) < 1e-5
        with pytest.raises(PreconditionError):
            weak_residual(solution, lambda z: np.zeros(z.shape), bump, relative=True)

    def test_bump_nodes_cover_the_support(self):
        bump = Bump(0.3j, 0.2)
        z, w = bump_nodes(bump, 8, 16)
        assert z.shape == w.shape == (128,)
        assert np.all(np.abs(z - bump.center) < bump.radius)
        assert w.sum() == pytest.approx(np.pi * bump.radius ** 2)
