"""
Finite Blaschke products, their level components and local inverses.

Factor convention: (|a|/a) (a - z)/(1 - conj(a) z), and z itself when a = 0.
Only |B|, |B'| at zeros and level sets enter the construction, so the
convention does not matter downstream.

For r < 1 built from an admissible lambda, {|B| < r} splits into disjoint
components V_n, one per zero, each inside D(z_n, lambda) and mapped onto
D_r biholomorphically. Local inverses b_n: D_r -> V_n are computed by Newton
iteration with ray continuation 0 -> w.
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import numpy.typing as npt
from scipy.optimize import bisect

from .disk_geometry import as_complex, mobius_shift, polar_nodes, pseudo_distance
from .errors import ConvergenceError, PreconditionError
from .sequence_analysis import FiniteSequence, interpolation_constant_bound, separation_threshold

logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-13
NEWTON_MAX_STEPS = 50
MAX_SEGMENTS = 64
BISECT_MAX_ITER = 200
BISECT_RESIDUAL_TOL = 1e-13
ADMISSIBLE_NU = 2.0 - math.sqrt(3.0)


class BlaschkeProduct:
    def __init__(self, zeros: FiniteSequence):
        if not isinstance(zeros, FiniteSequence):
            zeros = FiniteSequence(np.asarray(zeros, dtype=complex))
        if len(zeros) == 0:
            raise PreconditionError("a Blaschke product needs at least one zero")
        self.zeros = zeros
        a = zeros.points
        self._a = a
        self._abar = np.conj(a)
        unimodular = np.where(a == 0, -1.0 + 0j, np.abs(a) / np.where(a == 0, 1.0, a))
        self._u = unimodular

    def __len__(self) -> int:
        return len(self.zeros)

    def factors(self, z: npt.ArrayLike) -> np.ndarray:
        """Individual factors, shape z.shape + (n,)."""
        z = as_complex(z)[..., None]
        return self._u * (self._a - z) / (1.0 - self._abar * z)

    def factor_derivatives(self, z: npt.ArrayLike) -> np.ndarray:
        z = as_complex(z)[..., None]
        return self._u * (np.abs(self._a) ** 2 - 1.0) / (1.0 - self._abar * z) ** 2

    def __call__(self, z: npt.ArrayLike) -> np.ndarray:
        return np.prod(self.factors(z), axis=-1)

    def derivative(self, z: npt.ArrayLike) -> np.ndarray:
        """sum_k f_k' prod_{j != k} f_j, exact at the zeros."""
        f = self.factors(z)
        return np.sum(self.factor_derivatives(z) * exclusive_products(f), axis=-1)


def exclusive_products(f: np.ndarray) -> np.ndarray:
    """out[..., k] = prod_{j != k} f[..., j] without dividing."""
    ones = np.ones(f.shape[:-1] + (1,), dtype=f.dtype)
    prefix = np.cumprod(np.concatenate([ones, f[..., :-1]], axis=-1), axis=-1)
    suffix = np.cumprod(np.concatenate([ones, f[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return prefix * suffix


def blaschke_eval(b: BlaschkeProduct, z: npt.ArrayLike) -> np.ndarray:
    return b(z)


def blaschke_derivative(b: BlaschkeProduct, z: npt.ArrayLike) -> np.ndarray:
    return b.derivative(z)


# ==============================================================================
# Radius and parameter solvers
# ==============================================================================

def radius_r(delta: float, lam: float) -> float:
    """r = (delta - lambda) lambda / (1 - lambda delta), needs 2 lambda/(1 + lambda^2) < delta."""
    delta, lam = float(delta), float(lam)
    if not 0.0 < lam < 1.0:
        raise PreconditionError(f"lambda {lam} not in (0, 1)")
    if not 2.0 * lam / (1.0 + lam * lam) < delta:
        raise PreconditionError(
            f"lambda {lam} too large for delta {delta}",
            reference="2 lambda / (1 + lambda^2) < delta",
        )
    return (delta - lam) * lam / (1.0 - lam * delta)


def lambda_for_radius(delta: float, r: float) -> float:
    """Smaller root of lambda^2 - lambda delta (1 + r) + r = 0, i.e. radius_r(delta, lambda) = r."""
    disc = (delta * (1.0 + r)) ** 2 - 4.0 * r
    if disc < 0:
        raise PreconditionError(f"no lambda gives r = {r} at delta = {delta}")
    return (delta * (1.0 + r) - math.sqrt(disc)) / 2.0


def separation_after_perturbation(delta: float, lam: float) -> float:
    """Lower bound for delta of any sequence moved by less than lambda pointwise."""
    t = 2.0 * lam / (1.0 + lam * lam)
    return (delta - t) / (1.0 - delta * t)


class HighSeparationParameters(NamedTuple):
    eps_star: float
    delta: float
    lam: float
    r: float
    delta_m: float


def high_separation_parameters(eps: float) -> HighSeparationParameters:
    """Parameter set behind the high-separation assembly; checks r > eps_* and delta_m > 1/2."""
    eps_star = max(0.5, float(eps))
    delta = separation_threshold(eps)
    lam = math.sqrt(eps_star) - (1.0 - eps_star) / 4.0
    r = radius_r(delta, lam)
    delta_m = (r / lam - lam) / (1.0 - r)
    if not r > eps_star:
        raise PreconditionError(f"r = {r} does not exceed eps_* = {eps_star}")
    if not delta_m > 0.5:
        raise PreconditionError(f"delta_m = {delta_m} does not exceed 1/2")
    return HighSeparationParameters(eps_star, delta, lam, r, delta_m)


class LambdaSolution(NamedTuple):
    lam: float
    r: float
    M: float


def solve_lambda(delta_i: float, nu: float, eps_nu: float, M: Optional[float] = None) -> LambdaSolution:
    """lambda in (0, nu) with r(lambda)/(6M) = eps_nu, by bisection.

    M defaults to interpolation_constant_bound(delta_i); pass the M of the
    interpolation basis the part is built on.
    """
    if not delta_i > 0.5:
        raise PreconditionError(f"part characteristic {delta_i} must exceed 1/2",
                                reference="delta(part) > 1/2")
    if not 0.0 < nu <= ADMISSIBLE_NU + 1e-15:
        raise PreconditionError(f"nu = {nu} outside (0, 2 - sqrt 3]")
    if not eps_nu > 0.0:
        raise PreconditionError("eps_nu must be positive")
    M = interpolation_constant_bound(delta_i) if M is None else float(M)
    if M < 1.0:
        raise PreconditionError(f"interpolation constant {M} below 1")

    def residual(lam: float) -> float:
        return (delta_i - lam) * lam / (1.0 - lam * delta_i) / (6.0 * M) - eps_nu

    if not residual(nu) > 0.0:
        raise PreconditionError(
            f"bracket [0, {nu}] does not straddle eps_nu = {eps_nu}",
            reference="r(nu) / (6M) > eps_nu",
        )
    lam = bisect(residual, 0.0, nu, xtol=1e-16, maxiter=BISECT_MAX_ITER)
    if abs(residual(lam)) >= BISECT_RESIDUAL_TOL:
        raise ConvergenceError(f"bisection residual {residual(lam):.3g} above tolerance")
    r = radius_r(delta_i, lam)
    logger.info("solve_lambda: delta=%.6g nu=%.6g -> lambda=%.6g r=%.6g M=%.6g", delta_i, nu, lam, r, M)
    return LambdaSolution(lam, r, M)


# ==============================================================================
# Level components
# ==============================================================================

@dataclass
class LevelComponents:
    product: BlaschkeProduct
    r: float
    lam: float
    newton_tol: float = NEWTON_TOL
    max_steps: int = NEWTON_MAX_STEPS
    max_segments: int = MAX_SEGMENTS

    @property
    def zeros(self) -> np.ndarray:
        return self.product.zeros.points

    def __len__(self) -> int:
        return len(self.product)

    def _newton(self, z: np.ndarray, target: np.ndarray):
        """Vectorised Newton for B(z) = target; returns (z, converged).

        An iterate that would leave the disk stops there, unconverged.
        """
        B = self.product
        done = np.abs(B(z) - target) < self.newton_tol
        escaped = np.zeros(z.shape, dtype=bool)
        for _ in range(self.max_steps):
            act = ~(done | escaped)
            if not act.any():
                break
            za = z[act]
            d = B.derivative(za)
            ok = np.abs(d) > 1e-300
            with np.errstate(over="ignore", invalid="ignore"):
                step = np.where(ok, (B(za) - target[act]) / np.where(ok, d, 1.0), 0.0)
                nxt = za - step
                out = ~(np.abs(nxt) < 1.0)
            za = np.where(out, za, nxt)
            z[act] = za
            escaped[act] = out
            res = np.abs(B(za) - target[act])
            done[act] = ok & ~out & (res < self.newton_tol)
        return z, done

    def _track(self, n: int, w: np.ndarray, segments: int):
        zn = self.zeros[n]
        z = np.full(w.shape, zn, dtype=complex)
        ok = np.ones(w.shape, dtype=bool)
        for k in range(1, segments + 1):
            target = w * (k / segments)
            z_new, conv = self._newton(z.copy(), target)
            inside = pseudo_distance(z_new, zn) < self.lam
            ok &= conv & inside
            z = np.where(ok, z_new, z)
        return z, ok

    def local_inverse(self, n: int, w: npt.ArrayLike) -> np.ndarray:
        """b_n(w): the point of V_n with B = w."""
        w = as_complex(w)
        shape = w.shape
        w = np.atleast_1d(w).ravel()
        if np.any(np.abs(w) >= self.r * (1.0 + 1e-12)):
            raise PreconditionError(f"|w| must be below r = {self.r}")
        out = np.empty(w.shape, dtype=complex)
        pending = np.arange(w.size)
        segments = 1
        while pending.size:
            if segments > self.max_segments:
                raise ConvergenceError(
                    f"Newton continuation for zero {n} failed after {self.max_segments} segments",
                    reference="b_n(w) stays in D(z_n, lambda)",
                )
            z, ok = self._track(n, w[pending], segments)
            out[pending[ok]] = z[ok]
            pending = pending[~ok]
            segments *= 2
        return out.reshape(shape)

    def nearest_zero_index(self, z: npt.ArrayLike) -> np.ndarray:
        """Index of the zero within pseudo-distance lambda, or -1."""
        z = as_complex(z)
        rho = pseudo_distance(z[..., None], self.zeros)
        idx = np.argmin(rho, axis=-1)
        hit = np.take_along_axis(rho, idx[..., None], axis=-1)[..., 0] < self.lam
        return np.where(hit & (np.abs(self.product(z)) < self.r), idx, -1)

    def component_index(self, z: npt.ArrayLike, segments: int = 16) -> np.ndarray:
        """Zero reached by following B(z(t)) = t B(z) from t = 1 down to 0; -1 off {|B| < r}."""
        z = np.atleast_1d(as_complex(z)).ravel()
        w0 = self.product(z)
        inside = np.abs(w0) < self.r
        cur = z.copy()
        ok = inside.copy()
        for k in range(segments - 1, -1, -1):
            target = w0 * (k / segments)
            cur, conv = self._newton(cur.copy(), target)
            ok &= conv
        rho = pseudo_distance(cur[:, None], self.zeros[None, :])
        idx = np.argmin(rho, axis=1)
        landed = rho[np.arange(z.size), idx] < 1e-8
        return np.where(ok & landed, idx, -1)

    def sample_component(self, n: int, radius: float, n_r: int = 8, n_theta: int = 16) -> np.ndarray:
        """b_n of a polar grid of D_radius (radius < r)."""
        nodes, _ = polar_nodes(radius, n_r, n_theta)
        return self.local_inverse(n, nodes.ravel())


def level_components(b: BlaschkeProduct, r: float, lam: Optional[float] = None) -> LevelComponents:
    """Components of {|B| < r}; lambda defaults to the one with radius_r(delta, lambda) = r."""
    if not 0.0 < r < 1.0:
        raise PreconditionError(f"level radius {r} not in (0, 1)")
    delta = b.zeros.delta
    if lam is None:
        lam = lambda_for_radius(delta, r) if len(b) > 1 else r
    if len(b) > 1:
        r_max = radius_r(delta, lam)
        if r > r_max * (1.0 + 1e-12):
            raise PreconditionError(f"r = {r} exceeds radius_r(delta, lambda) = {r_max}")
    lc = LevelComponents(product=b, r=float(r), lam=float(lam))

    check = 0.9 * r * np.exp(2j * np.pi * np.arange(8) / 8)
    for n in range(len(b)):
        lc.local_inverse(n, check)
    logger.info("level components: %d zeros, r=%.6g, lambda=%.6g", len(b), r, lam)
    return lc


def local_inverse(lc: LevelComponents, n: int, w: npt.ArrayLike) -> np.ndarray:
    return lc.local_inverse(n, w)


def level_samples(b: BlaschkeProduct, n_r: int = 64, n_theta: int = 128, radius: float = 0.999) -> np.ndarray:
    """Rows (re, im, |B|) on a polar grid, for contour plots."""
    nodes, _ = polar_nodes(radius, n_r, n_theta)
    z = nodes.ravel()
    return np.column_stack([z.real, z.imag, np.abs(b(z))])


def perturb_within(points: np.ndarray, lam: float, rng: np.random.Generator) -> np.ndarray:
    """Move each point to a random point of D(z_n, lambda)."""
    rad = lam * np.sqrt(rng.uniform(0.0, 1.0, points.shape)) * 0.999
    ang = rng.uniform(0.0, 2.0 * np.pi, points.shape)
    return mobius_shift(points, rad * np.exp(1j * ang))
