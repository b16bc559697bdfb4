import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbar_solver.disk_geometry import (
    DiskPoint,
    Neighbourhood,
    PseudoDisk,
    hyperbolic_area,
    neighbourhood_contains,
    mobius_inverse,
    mobius_shift,
    polar_nodes,
    pseudo_distance,
    pseudo_sum,
)
from dbar_solver.errors import DiskDomainError

inside = st.builds(
    lambda r, t: r * complex(math.cos(t), math.sin(t)),
    st.floats(min_value=0.0, max_value=0.95),
    st.floats(min_value=0.0, max_value=2 * math.pi),
)


@given(inside, inside)
@settings(max_examples=200, deadline=None)
def test_distance_symmetric_and_below_one(z, w):
    d = float(pseudo_distance(z, w))
    assert 0.0 <= d < 1.0
    assert d == pytest.approx(float(pseudo_distance(w, z)), abs=1e-12)


@given(inside, inside, inside)
@settings(max_examples=200, deadline=None)
def test_mobius_shift_is_an_isometry(c, z, w):
    before = float(pseudo_distance(z, w))
    after = float(pseudo_distance(mobius_shift(c, z), mobius_shift(c, w)))
    assert after == pytest.approx(before, abs=1e-9)


@given(inside, inside)
def test_mobius_inverse_undoes_shift(c, w):
    assert complex(mobius_inverse(c, mobius_shift(c, w))) == pytest.approx(w, abs=1e-9)


@given(inside, inside, inside)
@settings(max_examples=200, deadline=None)
def test_triangle_inequality_in_pseudo_sum_form(x, y, z):
    a = float(pseudo_distance(x, y))
    b = float(pseudo_distance(y, z))
    assert float(pseudo_distance(x, z)) <= float(pseudo_sum(a, b)) + 1e-12


def test_distance_to_self_is_zero():
    z = np.array([0.3 + 0.4j, -0.5j])
    assert np.all(pseudo_distance(z, z) == 0.0)


@pytest.mark.parametrize("bad", [1.0, 1j, -0.99999999999999, complex("nan")])
def test_disk_point_rejects_boundary_and_nan(bad):
    with pytest.raises(DiskDomainError):
        DiskPoint(bad)


def test_pseudo_disk_contains_its_samples():
    d = PseudoDisk(0.4 + 0.2j, 0.3)
    pts = d.sample(6, 12)
    assert pts.shape == (72,)
    assert d.contains(pts).all()
    assert not d.contains(np.array([-0.6]))[0]


def test_pseudo_disk_radius_checked():
    with pytest.raises(DiskDomainError):
        PseudoDisk(0j, 1.0)


def test_hyperbolic_area_does_not_move_with_the_center():
    assert hyperbolic_area(PseudoDisk(0j, 0.5)) == pytest.approx(hyperbolic_area(PseudoDisk(0.7, 0.5)))
    assert hyperbolic_area(0.5) == pytest.approx(math.pi * 0.25 / 0.75)


def test_neighbourhood_of_a_point_is_a_pseudo_disk():
    n = Neighbourhood.around_points([0.5], 0.2)
    assert n.contains(mobius_shift(0.5, 0.19))
    assert not n.contains(mobius_shift(0.5, 0.21))
    z = np.array([0.5, mobius_shift(0.5, 0.19), -0.5])
    assert neighbourhood_contains(n, z).tolist() == [True, True, False]


def test_neighbourhood_of_a_disk_grows_by_pseudo_sum():
    n = Neighbourhood.around_disks([PseudoDisk(0j, 0.3)], 0.2)
    reach = float(pseudo_sum(0.3, 0.2))
    assert n.contains(np.array([reach - 1e-6]))[0]
    assert not n.contains(np.array([reach + 1e-6]))[0]


def test_polar_nodes_weights_sum_to_area():
    nodes, weights = polar_nodes(0.5, 8, 16)
    assert nodes.shape == weights.shape == (8, 16)
    assert weights.sum() == pytest.approx(math.pi * 0.25)
    assert np.abs(nodes).max() < 0.5
