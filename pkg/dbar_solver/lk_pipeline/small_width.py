"""
The solver for supports of small width, K inside B^-1(D_{r/6M}).

E_K pulls f back to each zero by the Moebius map g_n and applies the Cauchy
transform there. The Laurent splitting of

    G(z, xi) = sum_j f_j(z, xi) (E_K f)(b_j(xi)) = sum_k g_k(z) C_k(xi),
    C(xi) = P(xi)^-1 U(xi),  U_j(xi) = (E_K f)(b_j(xi)),

on |xi| = r/(4M) gives a_m(z) = sum_k c_{k,m} g_k(z), and

    T1 f = sum_{m<0} a_m B^m    on |B| > r/(6M)
    T2 f = sum_{m>=0} a_m B^m   on |B| < r/(3M)
    L_K f = E_K f - T2 f  or  T1 f, the two agreeing where both apply.
"""
import logging
import weakref
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt

from ..blaschke_engine import (
    ADMISSIBLE_NU,
    BlaschkeProduct,
    LevelComponents,
    level_components,
    radius_r,
    solve_lambda,
)
from ..cauchy_transform import DEFAULT_QUADRATURE, GridField, PolarGrid, QuadratureConfig, cauchy_solve_field
from ..disk_geometry import as_complex, mobius_inverse, mobius_shift, pseudo_sum
from ..errors import CertificateError, ConvergenceError, PreconditionError
from ..interp_basis import JonesBasis, build_jones_basis, neumann_solve
from ..sequence_analysis import FiniteSequence
from .regions import Density, RegionSpec

logger = logging.getLogger(__name__)

ESCAPE_RINGS = 8
ESCAPE_ANGLES = 64
MAX_DECAY = 0.99


@dataclass(frozen=True)
class PipelineOptions:
    n_r: int = 32
    n_theta: int = 32
    quadrature: QuadratureConfig = DEFAULT_QUADRATURE
    contour_q: int = 256
    nmax: int = 64
    tail_tol: float = 1e-10
    branch_tol: float = 1e-8
    h_margin_fraction: float = 0.25
    region_grid: Tuple[int, int] = (8, 32)

    def __post_init__(self):
        if self.contour_q < 8:
            raise PreconditionError("contour needs at least 8 nodes")
        if self.nmax < 1:
            raise PreconditionError("nmax must be at least 1")
        if self.tail_tol <= 0 or self.branch_tol <= 0:
            raise PreconditionError("tolerances must be positive")
        if not 0.0 < self.h_margin_fraction < 0.5:
            raise PreconditionError("h_margin_fraction must lie in (0, 1/2)")


DEFAULT_OPTIONS = PipelineOptions()


def small_width_constant(eps: float, r: float, lam: float, M: float) -> float:
    """c(eps): eps when eps <= r/(6M), else lambda/(6M)."""
    # bisected r/(6M) may sit a rounding error below eps_nu
    return float(eps) if eps <= r / (6.0 * M) * (1.0 + 1e-9) else lam / (6.0 * M)


# ==============================================================================
# Pullback and E_K
# ==============================================================================

def pullback_density(f: Density, center: complex, c_eps: float, n_r: int = 32, n_theta: int = 32,
                     escape_radius: Optional[float] = None) -> GridField:
    """f~(w) = (1 + conj(z_n) w)/(1 + z_n conj(w)) f(g_n(w)) / (1 - |w|^2) on D_{c_eps}.

    The annulus c_eps <= |w| < escape_radius is sampled for support; any hit
    means K_n is not inside D(z_n, c_eps).
    """
    center = complex(center)
    if not 0.0 < c_eps < 1.0:
        raise PreconditionError(f"pullback radius {c_eps} not in (0, 1)")
    outer = pseudo_sum(c_eps, c_eps) if escape_radius is None else float(escape_radius)
    if outer > c_eps:
        rings = np.linspace(c_eps * (1.0 + 1e-9), outer, ESCAPE_RINGS, endpoint=False)
        angles = np.exp(2j * np.pi * np.arange(ESCAPE_ANGLES) / ESCAPE_ANGLES)
        ring = mobius_shift(center, (rings[:, None] * angles[None, :]).ravel())
        hit = f.supported(ring)
        if hit.any():
            raise PreconditionError(
                f"support reaches {ring[hit][0]:.6g}, outside D({center:.6g}, {c_eps:.6g})",
                reference="K_n inside D(z_n, c(eps))",
            )

    def pulled(w):
        z = mobius_shift(center, w)
        twist = (1.0 + np.conj(center) * w) / (1.0 + center * np.conj(w))
        return (twist / (1.0 - np.abs(w) ** 2))[..., None] * f(z)

    def support(w):
        return f.supported(mobius_shift(center, w))

    return GridField.sample(pulled, PolarGrid(n_r, n_theta, c_eps), f.dim, support)


# ==============================================================================
# Laurent data
# ==============================================================================

@dataclass(frozen=True, eq=False)
class LaurentOperatorData:
    """sum_m a_m(z) w^m with a_m = sum_k c_{k,m} g_k, stored as c_{k,m} rho^m."""

    product: BlaschkeProduct
    basis: JonesBasis
    contour_radius: float
    indices: np.ndarray
    scaled: np.ndarray
    term_sizes: np.ndarray
    tail: float = 0.0
    decay: float = 0.5
    contraction: float = 0.0

    @property
    def dim(self) -> int:
        return self.scaled.shape[-1]

    @property
    def n_min(self) -> int:
        return int(self.indices.min()) if self.indices.size else 0

    @property
    def n_max(self) -> int:
        return int(self.indices.max()) if self.indices.size else 0

    @property
    def only_negative(self) -> bool:
        return bool(np.all(self.indices < 0))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.scaled)

    @property
    def coefficients(self) -> np.ndarray:
        """c_{k,m}, shape (len(indices), n, d)."""
        return self.scaled / np.power(self.contour_radius, self.indices.astype(float))[:, None, None]

    def coefficient_fields(self, z: npt.ArrayLike) -> np.ndarray:
        """a_m(z), shape z.shape + (len(indices), d)."""
        return np.einsum("...k,mkd->...md", self.basis.evaluate(z), self.coefficients)

    def evaluate(self, z: npt.ArrayLike, w: Optional[npt.ArrayLike] = None) -> np.ndarray:
        z = as_complex(z)
        w = self.product(z) if w is None else np.broadcast_to(as_complex(w), z.shape)
        if self.indices.size == 0:
            return np.zeros(z.shape + (self.dim,), dtype=complex)
        g = self.basis.evaluate(z)
        powers = (w / self.contour_radius)[..., None] ** self.indices
        return np.einsum("...k,mkd,...m->...d", g, self.scaled, powers)

    def tail_bound(self, absw: npt.ArrayLike) -> np.ndarray:
        """Rough size of the truncated terms at |w| = absw."""
        a = np.asarray(absw, dtype=float)
        ratio = np.maximum(self.contour_radius / a, a / self.contour_radius)
        q = np.minimum(MAX_DECAY, self.decay * ratio)
        n = max(abs(self.n_min), abs(self.n_max)) + 1
        return self.tail * ratio ** n / (1.0 - q)

    def _select(self, keep: np.ndarray) -> "LaurentOperatorData":
        return replace(self, indices=self.indices[keep], scaled=self.scaled[keep], term_sizes=self.term_sizes[keep])

    def negative(self) -> "LaurentOperatorData":
        return self._select(self.indices < 0)

    def nonnegative(self) -> "LaurentOperatorData":
        return self._select(self.indices >= 0)

    def manifest(self) -> dict:
        return {
            "contour_radius": self.contour_radius,
            "n_min": self.n_min,
            "n_max": self.n_max,
            "tail": self.tail,
            "contraction": self.contraction,
        }


def _truncate(F: np.ndarray, observed_sum: float, nmax: int, threshold: float, negative_only: bool):
    """Pick the index window from the contour spectrum F (Q, n, d)."""
    Q = F.shape[0]
    N = min(nmax, Q // 2 - 1)
    m = np.arange(-N, N + 1)
    sizes = observed_sum * np.max(np.linalg.norm(F[m % Q], axis=-1), axis=-1)
    if negative_only:
        sizes = np.where(m < 0, sizes, 0.0)
    level = np.zeros(N + 1)
    np.maximum.at(level, np.abs(m), sizes)

    if threshold <= 0.0 or not np.any(level):
        return m, sizes, 0, 0.0, 0.5

    below = level < threshold
    suffix_ok = np.flip(np.logical_and.accumulate(np.flip(below)))
    hits = np.flatnonzero(suffix_ok)
    if hits.size:
        n_keep = int(hits[0])
    else:
        n_keep = N
        head = float(level[: N // 2 + 1].max())
        edge = float(level[N])
        if edge > 0.1 * head:
            raise ConvergenceError(
                f"Laurent terms do not decay (edge {edge:.3g}, head {head:.3g})",
                reference="sum a_n B^n converges on the annulus",
            )
        logger.warning("Laurent tail %.3g above tolerance %.3g at n = %d", edge, threshold, N)

    first = float(level[1]) if N >= 1 else 0.0
    last = float(level[max(n_keep, 1)]) if N >= 1 else 0.0
    if n_keep >= 2 and first > 0.0 and last > 0.0:
        decay = min(MAX_DECAY, (last / first) ** (1.0 / (n_keep - 1)))
    else:
        decay = 0.5
    tail = float(level[n_keep + 1:].sum())
    if n_keep == N:
        tail += float(level[N]) * decay / (1.0 - decay)
    return m, sizes, n_keep, tail, decay


# ==============================================================================
# Operator
# ==============================================================================

@dataclass(eq=False)
class SmallWidthOperator:
    sequence: FiniteSequence
    region: RegionSpec
    eps: float
    level: LevelComponents
    jones: JonesBasis
    options: PipelineOptions = DEFAULT_OPTIONS
    _bound: "weakref.WeakKeyDictionary" = field(init=False, repr=False)

    def __post_init__(self):
        self._bound = weakref.WeakKeyDictionary()

    @property
    def product(self) -> BlaschkeProduct:
        return self.level.product

    @property
    def M(self) -> float:
        return self.jones.M

    @property
    def r(self) -> float:
        return self.level.r

    @property
    def lam(self) -> float:
        return self.level.lam

    @property
    def inner_radius(self) -> float:
        return self.r / (6.0 * self.M)

    @property
    def contour_radius(self) -> float:
        return self.r / (4.0 * self.M)

    @property
    def outer_radius(self) -> float:
        return self.r / (3.0 * self.M)

    @property
    def h_radius(self) -> float:
        return self.inner_radius * (1.0 + self.options.h_margin_fraction)

    @cached_property
    def c_eps(self) -> float:
        return small_width_constant(self.eps, self.r, self.lam, self.M)

    @property
    def certificates(self) -> dict:
        c = self.c_eps
        return {
            "ek": 2.0 * c / (1.0 - c * c),
            "t1": 6.0 * self.M,
            "t2": 4.0 * self.M,
            "l": 12.0 * c * self.M / (1.0 - c * c),
        }

    def check_region(self) -> None:
        pts = self.region.candidates(*self.options.region_grid)
        if pts.size == 0:
            logger.warning("region of the small-width part has no sample points")
            return
        worst = float(np.max(np.abs(self.product(pts))))
        if worst >= self.inner_radius * (1.0 + 1e-9):
            raise PreconditionError(
                f"sampled |B| reaches {worst:.6g} on K, above r/(6M) = {self.inner_radius:.6g}",
                reference="K inside B^-1(D_{r/6M})",
            )

    def bind(self, f: Density) -> "BoundSmallWidth":
        bound = self._bound.get(f)
        if bound is None:
            bound = BoundSmallWidth.build(self, f)
            self._bound[f] = bound
        return bound

    def evaluate(self, f: Density, z: npt.ArrayLike) -> np.ndarray:
        return self.bind(f).evaluate(z)

    def iter_small_width(self, f: Density):
        yield self, f

    def manifest(self) -> dict:
        opt = self.options
        return {
            "zeros": self.sequence.to_pairs(),
            "delta": self.sequence.delta,
            "lambda": self.lam,
            "r": self.r,
            "M": self.M,
            "eps": self.eps,
            "c_eps": self.c_eps,
            "contour_radius": self.contour_radius,
            "h_radius": self.h_radius,
            "contour_q": opt.contour_q,
            "nmax": opt.nmax,
            "grid": [opt.n_r, opt.n_theta],
            "certificates": self.certificates,
        }


def build_small_width(sequence: FiniteSequence, region: RegionSpec, eps: float, lam: Optional[float] = None,
                      nu: float = ADMISSIBLE_NU, radius: Optional[float] = None,
                      options: PipelineOptions = DEFAULT_OPTIONS) -> SmallWidthOperator:
    """Small-width operator for K = region with chain `sequence`.

    M is the constant the Jones basis is certified for. Without lam, lambda is
    solved so that r/(6M) = radius (default eps; needs delta > 1/2).
    """
    if not isinstance(sequence, FiniteSequence):
        sequence = FiniteSequence.of(sequence)
    delta = sequence.delta
    jones = build_jones_basis(sequence)
    if lam is None:
        sol = solve_lambda(delta, nu, eps if radius is None else radius, jones.M)
        lam, r = sol.lam, sol.r
    else:
        r = radius_r(delta, lam)
    level = level_components(BlaschkeProduct(sequence), r, lam)
    swo = SmallWidthOperator(sequence=sequence, region=region, eps=float(eps), level=level,
                             jones=jones, options=options)
    swo.check_region()
    if swo.c_eps >= swo.inner_radius * (1.0 + 1e-9):
        logger.warning("c(eps) = %.4g above r/(6M) = %.4g; contour nodes may meet the pullback grid",
                       swo.c_eps, swo.inner_radius)
    logger.info("small-width part: n=%d lambda=%.6g r=%.6g M=%.6g c=%.6g",
                len(sequence), lam, r, swo.M, swo.c_eps)
    return swo


@dataclass(eq=False)
class BoundSmallWidth:
    """A small-width operator applied to one density; holds the pullbacks and Laurent data."""

    operator: SmallWidthOperator
    density: Density
    fields: Tuple[GridField, ...]
    scale: float

    @classmethod
    def build(cls, swo: SmallWidthOperator, f: Density) -> "BoundSmallWidth":
        f = f.restrict(swo.region)
        opt = swo.options
        fields = tuple(
            pullback_density(f, zn, swo.c_eps, opt.n_r, opt.n_theta, escape_radius=swo.lam)
            for zn in swo.sequence.points
        )
        scale = max((h.sup_norm() for h in fields), default=0.0)
        return cls(operator=swo, density=f, fields=fields, scale=scale)

    # --- E_K -----------------------------------------------------------------

    def _route(self, z: np.ndarray) -> np.ndarray:
        level = self.operator.level
        idx = level.nearest_zero_index(z)
        missing = idx < 0
        if missing.any():
            idx = idx.copy()
            idx[missing] = level.component_index(z[missing])
        if np.any(idx < 0):
            bad = z[idx < 0][0]
            raise PreconditionError(f"{bad:.6g} lies in no level component",
                                    reference="z in B^-1(D_r)")
        return idx

    def ek(self, z: npt.ArrayLike) -> np.ndarray:
        z = as_complex(z)
        shape = z.shape
        flat = np.atleast_1d(z).ravel()
        out = np.zeros((flat.size, self.density.dim), dtype=complex)
        if flat.size == 0:
            return out.reshape(shape + (self.density.dim,))
        idx = self._route(flat)
        quad = self.operator.options.quadrature
        for n in np.unique(idx):
            sel = idx == n
            zn = self.operator.sequence.points[n]
            out[sel] = cauchy_solve_field(self.fields[n], mobius_inverse(zn, flat[sel]), quad)
        return out.reshape(shape + (self.density.dim,))

    # --- contour data ----------------------------------------------------------

    def contour_solution(self, radius: float) -> Tuple[np.ndarray, float]:
        """C(xi_q) = P(xi_q)^-1 U(xi_q) at Q nodes of |xi| = radius, shape (Q, n, d)."""
        swo = self.operator
        Q = swo.options.contour_q
        xi = radius * np.exp(2j * np.pi * np.arange(Q) / Q)
        pts = np.stack([swo.level.local_inverse(k, xi) for k in range(len(swo.sequence))], axis=-1)
        U = np.empty(pts.shape + (self.density.dim,), dtype=complex)
        for j, zj in enumerate(swo.sequence.points):
            U[:, j] = cauchy_solve_field(self.fields[j], mobius_inverse(zj, pts[:, j]), swo.options.quadrature)
        P = swo.jones.evaluate(pts)
        res = neumann_solve(P, U)
        return res.x, res.contraction

    def _laurent(self, radius: float, negative_only: bool) -> LaurentOperatorData:
        swo = self.operator
        opt = swo.options
        n = len(swo.sequence)
        d = self.density.dim
        if self.scale == 0.0:
            idx = np.array([-1]) if negative_only else np.array([0])
            return LaurentOperatorData(swo.product, swo.jones, radius, idx,
                                       np.zeros((1, n, d), dtype=complex), np.zeros(1))
        C, contraction = self.contour_solution(radius)
        Q = C.shape[0]
        F = np.fft.fft(C, axis=0) / Q
        m, sizes, n_keep, tail, decay = _truncate(
            F, swo.jones.observed_sum, opt.nmax, opt.tail_tol * self.scale, negative_only)
        keep = np.abs(m) <= n_keep
        if negative_only:
            keep &= m < 0
            if not keep.any():
                keep = m == -1
        indices = m[keep]
        logger.info("Laurent data: radius=%.6g indices [%d, %d] tail=%.3g contraction=%.3g",
                    radius, indices.min(), indices.max(), tail, contraction)
        return LaurentOperatorData(
            product=swo.product, basis=swo.jones, contour_radius=radius, indices=indices,
            scaled=F[indices % Q], term_sizes=sizes[keep], tail=tail, decay=decay,
            contraction=contraction,
        )

    @cached_property
    def laurent(self) -> LaurentOperatorData:
        return self._laurent(self.operator.contour_radius, negative_only=False)

    @cached_property
    def split(self) -> Tuple[LaurentOperatorData, LaurentOperatorData]:
        return self.laurent.negative(), self.laurent.nonnegative()

    @cached_property
    def h_data(self) -> LaurentOperatorData:
        return self._laurent(self.operator.h_radius, negative_only=True)

    def t1(self, z: npt.ArrayLike) -> np.ndarray:
        return self.split[0].evaluate(z)

    def t2(self, z: npt.ArrayLike) -> np.ndarray:
        return self.split[1].evaluate(z)

    # --- glued operator --------------------------------------------------------

    def branches(self, z: npt.ArrayLike):
        """(absw, first, second) with NaN where a branch does not apply."""
        swo = self.operator
        flat = np.atleast_1d(as_complex(z)).ravel()
        d = self.density.dim
        absw = np.abs(swo.product(flat))
        in1 = absw > swo.inner_radius
        in2 = absw < swo.outer_radius
        first = np.full((flat.size, d), np.nan + 0j)
        second = np.full((flat.size, d), np.nan + 0j)
        if in1.any():
            first[in1] = self.t1(flat[in1])
        if in2.any():
            second[in2] = self.ek(flat[in2]) - self.t2(flat[in2])
        return absw, first, second

    def agreement_tolerance(self, absw: np.ndarray) -> np.ndarray:
        tol = self.operator.options.branch_tol * max(1.0, self.scale)
        return tol + self.laurent.tail_bound(absw)

    def evaluate(self, z: npt.ArrayLike) -> np.ndarray:
        z = as_complex(z)
        shape = z.shape
        absw, first, second = self.branches(z)
        swo = self.operator
        both = (absw > swo.inner_radius) & (absw < swo.outer_radius)
        if both.any():
            gap = np.linalg.norm(first[both] - second[both], axis=-1)
            tol = self.agreement_tolerance(absw[both])
            if np.any(gap > tol):
                k = int(np.argmax(gap - tol))
                raise CertificateError(
                    f"branches differ by {gap[k]:.3g} (allowed {tol[k]:.3g}) at |B| = {absw[both][k]:.6g}",
                    reference="E_K f - T2 f = T1 f on A_zeta",
                )
        primary = absw >= swo.contour_radius
        out = np.where(primary[:, None], first, second)
        return out.reshape(shape + (self.density.dim,))

    def manifest(self) -> dict:
        return {"scale": self.scale, "laurent": self.laurent.manifest()}


# ==============================================================================
# Module-level operations
# ==============================================================================

def ek_solve(swo: SmallWidthOperator, f: Density, z: npt.ArrayLike) -> np.ndarray:
    return swo.bind(f).ek(z)


def laurent_split(swo: SmallWidthOperator, f: Density) -> Tuple[LaurentOperatorData, LaurentOperatorData]:
    """(T1 data, T2 data): the negative and non-negative halves of the contour expansion."""
    return swo.bind(f).split


def small_width_eval(swo: SmallWidthOperator, f: Density, z: npt.ArrayLike) -> np.ndarray:
    return swo.bind(f).evaluate(z)


def h_representation(swo: SmallWidthOperator, f: Density) -> LaurentOperatorData:
    """H(w) f as negative-index Laurent data on |w| > r/(6M); L_K f(z) = (H(B(z)) f)(z) there."""
    return swo.bind(f).h_data
