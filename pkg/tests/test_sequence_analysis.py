import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbar_solver.disk_geometry import PseudoDisk, pseudo_distance
from dbar_solver.errors import CertificateError, DiskDomainError, PreconditionError, SequenceError
from dbar_solver.sequence_analysis import (
    FiniteSequence,
    PartitionKind,
    chain_count_bounds,
    characteristic,
    characteristic_via_blaschke,
    earl_bound,
    greedy_chain,
    interpolation_bounds,
    interpolation_constant_bound,
    jones_bound,
    refine_partition,
    separation_threshold,
    split_depth,
    split_recursively,
    split_sqrt_delta,
)


def ring(n: int, radius: float, phase: float = 0.0) -> FiniteSequence:
    return FiniteSequence(radius * np.exp(1j * (phase + 2 * np.pi * np.arange(n) / n)))


def test_singleton_has_characteristic_one():
    assert FiniteSequence.of([0.3j]).delta == 1.0


def test_two_points_characteristic_is_their_distance():
    seq = FiniteSequence.of([0.0, 0.5])
    assert seq.delta == pytest.approx(0.5)


def test_empty_and_repeated_sequences_rejected():
    with pytest.raises(SequenceError):
        characteristic(FiniteSequence.of([]))
    with pytest.raises(SequenceError):
        FiniteSequence.of([0.1, 0.1])
    with pytest.raises(DiskDomainError):
        FiniteSequence.of([1.0])


@given(st.lists(st.tuples(st.floats(0.0, 0.9), st.floats(0.0, 2 * math.pi)), min_size=2, max_size=8,
                unique=True))
@settings(max_examples=100, deadline=None)
def test_characteristic_matches_blaschke_derivative(polar):
    pts = np.array([r * np.exp(1j * t) for r, t in polar])
    rho = pseudo_distance(pts[:, None], pts[None, :])
    np.fill_diagonal(rho, 1.0)
    if rho.min() < 1e-3:
        return
    seq = FiniteSequence(pts)
    a, b = characteristic(seq), characteristic_via_blaschke(seq)
    assert a == pytest.approx(b, rel=1e-9)


def test_interpolation_bounds_at_full_separation():
    b = interpolation_bounds(1.0)
    assert b.lower == 1.0
    assert b.earl == pytest.approx(1.0)
    assert b.jones == pytest.approx(2 * math.e)
    assert b.upper == pytest.approx(1.0)


def test_earl_bound_for_half_separation():
    assert earl_bound(0.5) == pytest.approx((2 + math.sqrt(3)) ** 2)
    assert jones_bound(0.5) > earl_bound(0.5) > 1 / 0.5
    assert interpolation_constant_bound(0.5) == pytest.approx(earl_bound(0.5))


@pytest.mark.parametrize("delta", [0.0, -0.1, 1.5])
def test_bounds_need_delta_in_unit_interval(delta):
    with pytest.raises(PreconditionError):
        interpolation_bounds(delta)


def test_greedy_chain_is_separated_and_covers():
    disk = PseudoDisk(0.2 + 0.1j, 0.4)
    candidates = disk.sample(24, 48)
    eps = 0.15
    chain = greedy_chain(candidates, eps)
    rho = pseudo_distance(chain.points[:, None], chain.points[None, :])
    np.fill_diagonal(rho, 1.0)
    assert rho.min() >= eps
    gap = pseudo_distance(candidates[:, None], chain.points[None, :]).min(axis=1)
    assert gap.max() < eps


def test_greedy_chain_keeps_first_candidate():
    chain = greedy_chain([0.1, 0.1001, 0.6], 0.2)
    assert list(chain) == [0.1, 0.6]


def test_greedy_chain_checks_eps():
    with pytest.raises(PreconditionError):
        greedy_chain([0.0], 1.0)


def test_chain_count_window_contains_greedy_chain():
    R, L = 0.4, 0.2
    chain = greedy_chain(PseudoDisk(0j, R).sample(96, 192), L)
    lo, hi = chain_count_bounds(R, L)
    assert lo <= len(chain) <= hi


def test_split_reaches_square_root_of_delta():
    seq = ring(6, 0.7)
    part = split_sqrt_delta(seq)
    assert part.kind == PartitionKind.DELTA_BOOST
    assert len(part) == 2
    assert sorted(np.concatenate(part.indices).tolist()) == list(range(6))
    assert part.certificate >= math.sqrt(seq.delta)
    for p in part.parts:
        assert p.delta >= math.sqrt(seq.delta)


def test_split_of_two_points_gives_singletons():
    part = split_sqrt_delta(FiniteSequence.of([0.0, 0.5]))
    assert [len(p) for p in part.parts] == [1, 1]
    assert part.certificate == 1.0


def test_split_needs_two_points():
    with pytest.raises(SequenceError):
        split_sqrt_delta(FiniteSequence.of([0.0]))


def test_split_depth_reaches_threshold():
    eps = 0.1
    threshold = separation_threshold(eps)
    assert split_depth(1.0, eps) == 0
    for delta in (0.9, 0.5, 0.01):
        depth = split_depth(delta, eps)
        assert delta ** (0.5 ** depth) >= threshold * (1 - 1e-15)
        assert depth == 0 or delta ** (0.5 ** (depth - 1)) < threshold


def test_recursive_split_keeps_every_point():
    seq = ring(5, 0.6)
    leaves = split_recursively(seq, 3)
    got = np.sort_complex(np.concatenate([leaf.points for leaf in leaves]))
    assert np.array_equal(got, np.sort_complex(seq.points))


def test_refinement_partition_meets_each_cell_once():
    zeta = FiniteSequence.of([0.0, 0.5])
    zeta_nu = greedy_chain(np.concatenate([PseudoDisk(0j, 0.1).sample(6, 12), PseudoDisk(0.5, 0.1).sample(6, 12)]),
                           0.05)
    part = refine_partition(zeta, zeta_nu, 0.12)
    assert part.kind == PartitionKind.REFINEMENT
    for p in part.parts:
        cells = pseudo_distance(p.points[:, None], zeta.points[None, :]) < 0.12
        assert cells.sum(axis=0).max() <= 1


def test_refinement_rejects_uncovered_points():
    with pytest.raises(SequenceError):
        refine_partition(FiniteSequence.of([0.0]), FiniteSequence.of([0.0, 0.5]), 0.1)


def test_split_certificate_failure_is_a_certificate_error(monkeypatch):
    import dbar_solver.sequence_analysis as sa

    seq = ring(4, 0.5)
    monkeypatch.setattr(sa, "_exhaustive_split", lambda L: np.array([True, True, True, False]))
    with pytest.raises(CertificateError):
        sa.split_sqrt_delta(seq)
