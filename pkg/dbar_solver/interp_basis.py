"""
Interpolation bases on a finite sequence.

Jones-type functions

    g_j(z) = B_j(z)/B_j(z_j) * ((1 - |z_j|^2)/(1 - conj(z_j) z))^2
             * exp(-c * (S_j(z) - S_j(z_j)))
    S_j(z) = sum_{|z_k| >= |z_j|} (1 + conj(z_k) z)/(1 - conj(z_k) z) * (1 - |z_k|^2)

with B_j the product without the j-th factor and c = 1/(2 log(e/delta^2)).
g_j(z_k) = [j == k] by construction; the sum bound sum_j |g_j| <= M is
checked on a sample grid when the basis is built. M is the smaller of the
Jones and Earl terms when the sampled sum stays under it, the Jones term
otherwise; lambda, the level radii and P(w) all use this M.

The two-variable basis f_j(z, w) = sum_k (P(w)^-1)_{kj} g_k(z),
P(w)_{kj} = g_j(b_k(w)), is obtained by a Neumann series for P(w)^-1.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from .blaschke_engine import BlaschkeProduct, LevelComponents, exclusive_products
from .disk_geometry import as_complex, polar_nodes
from .errors import CertificateError, ConvergenceError, PreconditionError
from .sequence_analysis import FiniteSequence, interpolation_bounds

logger = logging.getLogger(__name__)

SAMPLE_GRID = 64
SAMPLE_RADIUS = 0.999
SUM_BOUND_SLACK = 1e-9
NEUMANN_TOL = 1e-13
NEUMANN_MAX_TERMS = 400


@dataclass(eq=False)
class JonesBasis:
    sequence: FiniteSequence
    M: float
    damping: float
    observed_sum: float = float("nan")
    product: BlaschkeProduct = field(init=False, repr=False)

    def __post_init__(self):
        z = self.sequence.points
        self.product = BlaschkeProduct(self.sequence)
        self._conj = np.conj(z)
        self._weight = 1.0 - np.abs(z) ** 2
        mod = np.abs(z)
        # outer[j, k]: z_k enters S_j
        self._outer = mod[None, :] >= mod[:, None]
        self._norm = exclusive_products(self.product.factors(z))[np.arange(z.size), np.arange(z.size)]
        self._s_at_zero = self._s(z)[np.arange(z.size), np.arange(z.size)]

    def __len__(self) -> int:
        return len(self.sequence)

    def _s(self, z: np.ndarray) -> np.ndarray:
        """S_j(z) for every j, shape z.shape + (n,)."""
        zk = z[..., None]
        herglotz = (1.0 + self._conj * zk) / (1.0 - self._conj * zk) * self._weight
        return herglotz @ self._outer.T.astype(float)

    def evaluate(self, z: npt.ArrayLike) -> np.ndarray:
        """g_j(z) for all j, shape z.shape + (n,)."""
        z = as_complex(z)
        n = len(self)
        if n == 1:
            return np.ones(z.shape + (1,), dtype=complex)
        blaschke_part = exclusive_products(self.product.factors(z)) / self._norm
        zk = z[..., None]
        kernel = (self._weight / (1.0 - self._conj * zk)) ** 2
        damp = np.exp(-self.damping * (self._s(z) - self._s_at_zero))
        return blaschke_part * kernel * damp

    def sum_abs(self, z: npt.ArrayLike) -> np.ndarray:
        return np.sum(np.abs(self.evaluate(z)), axis=-1)


def jones_damping(delta: float) -> float:
    return 1.0 / (2.0 * math.log(math.e / delta ** 2))


def build_jones_basis(seq: FiniteSequence, n_sample: int = SAMPLE_GRID) -> JonesBasis:
    if len(seq) == 0:
        raise PreconditionError("interpolation basis of an empty sequence")
    delta = seq.delta
    bounds = interpolation_bounds(delta)
    basis = JonesBasis(sequence=seq, M=bounds.jones, damping=jones_damping(delta))

    at_zeros = basis.evaluate(seq.points)
    defect = np.max(np.abs(at_zeros - np.eye(len(seq))))
    if defect > 1e-12:
        raise CertificateError(f"interpolation defect {defect:.3g} at the nodes",
                               reference="g_j(z_k) = [j == k]")

    nodes, _ = polar_nodes(SAMPLE_RADIUS, n_sample, n_sample)
    sample = np.concatenate([nodes.ravel(), seq.points])
    observed = float(np.max(basis.sum_abs(sample)))
    if observed > bounds.jones + SUM_BOUND_SLACK:
        raise CertificateError(
            f"sampled sum |g_j| = {observed:.6g} exceeds {bounds.jones:.6g}",
            reference="sum_j |g_j| <= (2e/delta) log(e/delta^2)",
        )
    if observed <= bounds.upper + SUM_BOUND_SLACK:
        basis.M = bounds.upper
    else:
        logger.info("sampled sum %.6g above the Earl term %.6g; M is the Jones term", observed, bounds.earl)
    basis.observed_sum = observed
    logger.info("Jones basis: n=%d delta=%.6g M=%.6g sampled sum=%.6g", len(seq), delta, basis.M, observed)
    return basis


# ==============================================================================
# Neumann series for P(w)^-1
# ==============================================================================

class NeumannResult(NamedTuple):
    x: np.ndarray
    terms: int
    contraction: float


def neumann_solve(P: np.ndarray, a: np.ndarray, tol: float = NEUMANN_TOL,
                  max_terms: int = NEUMANN_MAX_TERMS) -> NeumannResult:
    """x = sum_m (I - P)^m a for stacked P (..., n, n) and a (..., n, d)."""
    n = P.shape[-1]
    D = np.eye(n) - P
    q = float(np.max(np.sum(np.abs(D), axis=-1))) if n else 0.0
    if q >= 1.0:
        raise ConvergenceError(f"|I - P(w)| = {q:.4g} is not a contraction",
                               reference="|P(w) - I| <= 1/2")
    if q > 0.5:
        logger.warning("Neumann contraction %.4g above 1/2", q)
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    term = a.copy()
    x = a.copy()
    prev = float(np.max(np.abs(term))) if term.size else 0.0
    for m in range(1, max_terms + 1):
        term = D @ term
        size = float(np.max(np.abs(term))) if term.size else 0.0
        x = x + term
        if size < tol * scale:
            return NeumannResult(x, m, q)
        if size > prev * (1.0 + 1e-9) and size > tol * scale:
            raise ConvergenceError("Neumann terms grow", reference="|P(w) - I| <= 1/2")
        prev = size
    raise ConvergenceError(f"Neumann series did not settle in {max_terms} terms")


def interpolation_matrix(basis: JonesBasis, level: LevelComponents, w: npt.ArrayLike) -> np.ndarray:
    """P(w)_{kj} = g_j(b_k(w)), shape w.shape + (n, n)."""
    w = as_complex(w)
    pts = np.stack([level.local_inverse(k, w) for k in range(len(basis))], axis=-1)
    return basis.evaluate(pts)


def neumann_inverse_apply(basis: JonesBasis, level: LevelComponents, w: complex, a: npt.ArrayLike) -> np.ndarray:
    M = basis.M
    if abs(w) > level.r / (3.0 * M) * (1.0 + 1e-12):
        raise PreconditionError(f"|w| = {abs(w):.4g} above r/(3M) = {level.r / (3 * M):.4g}")
    a = as_complex(a)
    if a.shape[0] != len(basis):
        raise PreconditionError("coefficient vector length differs from the sequence length")
    vec = a.ndim == 1
    rhs = a[:, None] if vec else a
    x = neumann_solve(interpolation_matrix(basis, level, w), rhs).x
    return x[:, 0] if vec else x


@dataclass(eq=False)
class TwoVariableBasis:
    jones: JonesBasis
    level: LevelComponents

    @property
    def M(self) -> float:
        return self.jones.M

    @property
    def w_radius(self) -> float:
        return self.level.r / (3.0 * self.M)

    def coefficients(self, w: complex) -> np.ndarray:
        """P(w)^-1 column by column; column j expands f_j(., w) in g."""
        return neumann_inverse_apply(self.jones, self.level, w, np.eye(len(self.jones), dtype=complex))

    def evaluate(self, z: npt.ArrayLike, w: complex) -> np.ndarray:
        """f_j(z, w) for every j, shape z.shape + (n,)."""
        return self.jones.evaluate(z) @ self.coefficients(w)


def build_two_variable_basis(jones: JonesBasis, level: LevelComponents) -> TwoVariableBasis:
    return TwoVariableBasis(jones=jones, level=level)


def f_basis_eval(tvb: TwoVariableBasis, j: int, z: npt.ArrayLike, w: complex) -> np.ndarray:
    e_j = np.zeros(len(tvb.jones), dtype=complex)
    e_j[j] = 1.0
    coeff = neumann_inverse_apply(tvb.jones, tvb.level, w, e_j)
    return tvb.jones.evaluate(z) @ coeff
