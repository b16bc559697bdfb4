import numpy as np
import pytest

from dbar_solver.config import RunConfig

SMALL = dict(
    grid_nr=16,
    grid_ntheta=16,
    contour_q=64,
    nmax=16,
    n_samples=6,
    n_pairs=10,
    n_fields=2,
    n_sequences=8,
    n_split=4,
    n_basis=2,
    n_triples=2,
    containment_samples=60,
    oracle_grids=[32, 64],
    ladder=[16, 32],
    bump_nodes=16,
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config(tmp_path):
    """Single anchor at 0, constant density, coarse grids."""
    return RunConfig(density={"kind": "constant"}, out=str(tmp_path / "runs"), **SMALL)


@pytest.fixture
def two_point_config(tmp_path):
    """Two anchors far apart: characteristic close to 1, one split round at most."""
    return RunConfig(
        anchors=[[-0.3, 0.0], [0.3, 0.0]],
        density={"kind": "smooth"},
        out=str(tmp_path / "runs"),
        **SMALL,
    )


@pytest.fixture
def ledger_path(tmp_path):
    return str(tmp_path / "ledger" / "runs.db")
