"""
Decomposition of L_K away from K:

    L_K f = E0 f + sum_i H_i(B_i(z)) f   on D minus cl([K]_nu),
    E0 := L_K - L_{K;nu},

where L_{K;nu} is the nu-refinement of the assembly and H_i are the
negative-index Laurent representations of its small-width parts.
"""
import logging
import math
import weakref
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import numpy.typing as npt

from ..blaschke_engine import ADMISSIBLE_NU
from ..disk_geometry import Neighbourhood, as_complex, polar_nodes
from ..errors import CertificateError, PreconditionError
from ..sequence_analysis import PartitionKind
from .assembly import AssembledOperator, assemble_high_separation, check_nu, refinement_radius
from .regions import Density, RegionSpec
from .small_width import LaurentOperatorData, SmallWidthOperator, h_representation

logger = logging.getLogger(__name__)

H_NORM_FACTOR = 0.6
REFINED_COUNT_CONSTANT = 194712.0
GENERAL_COUNT_CONSTANT = 1.25e7
EXTERIOR_RADIUS = 0.95
EXTERIOR_MAX_ROUNDS = 200
CONTAINMENT_SLACK = 1e-9


class HTerm(NamedTuple):
    boost: int
    part: int
    operator: SmallWidthOperator
    data: LaurentOperatorData

    def evaluate(self, z: npt.ArrayLike) -> np.ndarray:
        return self.data.evaluate(z)


@dataclass
class ContainmentReport:
    checked: Dict[str, int] = field(default_factory=dict)
    violations: Dict[str, int] = field(default_factory=dict)
    worst: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not any(self.violations.values())


def count_certificate(kind: PartitionKind, nu: float, eps: float, delta: float) -> float:
    if kind == PartitionKind.REFINEMENT:
        return REFINED_COUNT_CONSTANT / (nu * nu * (1.0 - eps))
    eps_star = max(0.5, eps)
    boost = max(1.0, math.log(1.0 / delta) / (1.0 - eps_star) ** 2)
    return GENERAL_COUNT_CONSTANT / (nu * nu * (1.0 - eps)) * boost


@dataclass(eq=False)
class ExteriorDecomposition:
    assembled: AssembledOperator
    nu: float
    eps_nu: float
    boosts: Tuple[Tuple[Optional[RegionSpec], AssembledOperator], ...]
    neighbourhood: Neighbourhood
    _inputs: "weakref.WeakKeyDictionary" = field(init=False, repr=False)

    def __post_init__(self):
        self._inputs = weakref.WeakKeyDictionary()

    @property
    def parts(self) -> List[SmallWidthOperator]:
        return [swo for _, refined in self.boosts for swo in refined.small_width_parts()]

    @property
    def k_star(self) -> int:
        return len(self.parts)

    @property
    def h_bound(self) -> float:
        return H_NORM_FACTOR * self.nu

    @property
    def k_bound(self) -> float:
        a = self.assembled
        return count_certificate(a.kind, self.nu, a.eps, a.delta)

    def _restricted(self, f: Density) -> Tuple[Density, ...]:
        pieces = self._inputs.get(f)
        if pieces is None:
            pieces = tuple(f if region is None else f.restrict(region) for region, _ in self.boosts)
            self._inputs[f] = pieces
        return pieces

    def refined_evaluate(self, f: Density, z: npt.ArrayLike) -> np.ndarray:
        """L_{K;nu} f."""
        z = as_complex(z)
        total = np.zeros(z.shape + (f.dim,), dtype=complex)
        for piece, (_, refined) in zip(self._restricted(f), self.boosts):
            total = total + refined.evaluate(piece, z)
        return total

    def e0(self, f: Density) -> Callable[[np.ndarray], np.ndarray]:
        def evaluator(z):
            return self.assembled.evaluate(f, z) - self.refined_evaluate(f, z)

        return evaluator

    def terms(self, f: Density) -> List[HTerm]:
        out: List[HTerm] = []
        for j, (piece, (_, refined)) in enumerate(zip(self._restricted(f), self.boosts)):
            for i, (swo, g) in enumerate(refined.iter_small_width(piece)):
                out.append(HTerm(j, i, swo, h_representation(swo, g)))
        return out

    def evaluate(self, f: Density, z: npt.ArrayLike) -> np.ndarray:
        """E0 f + sum_i H_i(B_i(z)) f, meant for z outside cl([K]_nu)."""
        z = as_complex(z)
        total = self.e0(f)(z)
        for term in self.terms(f):
            total = total + term.evaluate(z)
        return total

    # --- sampling --------------------------------------------------------------

    def exterior_samples(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n points of D_{0.95} outside the closure of [K]_nu."""
        grown = Neighbourhood(self.neighbourhood.centers, self.neighbourhood.radii, self.nu * (1.0 + 1e-6))
        found: List[np.ndarray] = []
        have = 0
        for _ in range(EXTERIOR_MAX_ROUNDS):
            batch = max(4 * n, 64)
            rad = EXTERIOR_RADIUS * np.sqrt(rng.uniform(0.0, 1.0, batch))
            pts = rad * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, batch))
            pts = pts[~grown.contains(pts)]
            found.append(pts)
            have += pts.size
            if have >= n:
                return np.concatenate(found)[:n]
        raise PreconditionError(f"[K]_nu leaves no room for {n} exterior samples")

    def check_containment(self, n_samples: int = 1000, rng: Optional[np.random.Generator] = None,
                          strict: bool = True) -> ContainmentReport:
        """K in the closed eps_nu lifts, the 6 eps_nu lifts in [K]_nu, exterior points far from all lifts."""
        rng = np.random.default_rng(0) if rng is None else rng
        report = ContainmentReport()
        parts = self.parts
        per = max(1, n_samples // 3)

        K = self.assembled.region
        inner = K.candidates(16, 32)
        if inner.size > per:
            inner = inner[np.sort(rng.choice(inner.size, per, replace=False))]
        lowest = np.min(np.stack([np.abs(swo.product(inner)) for swo in parts]), axis=0)
        bad = lowest > self.eps_nu * (1.0 + CONTAINMENT_SLACK)
        report.checked["inner"] = int(inner.size)
        report.violations["inner"] = int(bad.sum())
        report.worst["inner"] = float(lowest.max() / self.eps_nu) if inner.size else 0.0

        lifted_bad = 0
        lifted = 0
        n_side = max(2, int(math.sqrt(per / max(1, sum(len(swo.sequence) for swo in parts)))))
        for swo in parts:
            nodes, _ = polar_nodes(6.0 * self.eps_nu, n_side, 2 * n_side)
            for n in range(len(swo.sequence)):
                pts = swo.level.local_inverse(n, nodes.ravel())
                lifted += pts.size
                lifted_bad += int(np.sum(~self.neighbourhood.contains(pts)))
        report.checked["lift"] = lifted
        report.violations["lift"] = lifted_bad

        outer = self.exterior_samples(per, rng)
        lowest_modulus = np.min(np.stack([np.abs(swo.product(outer)) for swo in parts]), axis=0)
        far_bad = lowest_modulus < 6.0 * self.eps_nu * (1.0 - CONTAINMENT_SLACK)
        report.checked["exterior"] = int(outer.size)
        report.violations["exterior"] = int(far_bad.sum())
        report.worst["exterior"] = float(lowest_modulus.min() / (6.0 * self.eps_nu))

        if strict and not report.passed:
            raise CertificateError(
                f"containment violations {report.violations}",
                reference="K in U B_i^-1(cl D_eps_nu) in U B_i^-1(D_6eps_nu) in [K]_nu",
            )
        logger.info("containment chain: %s checked, %s violations", report.checked, report.violations)
        return report

    def manifest(self) -> dict:
        return {
            "nu": self.nu,
            "eps_nu": self.eps_nu,
            "k_star": self.k_star,
            "k_bound": self.k_bound,
            "h_bound": self.h_bound,
            "part_bounds": [swo.certificates["l"] for swo in self.parts],
            "refined": [refined.manifest() for _, refined in self.boosts],
        }


def exterior_decomposition(a: AssembledOperator, nu: float) -> ExteriorDecomposition:
    """nu-refinement of an assembly, with its E0 and H data builders."""
    nu = check_nu(nu)
    if abs(a.nu - ADMISSIBLE_NU) > 1e-15:
        raise PreconditionError("the decomposition starts from an assembly at nu = 2 - sqrt 3")
    if not a.region.is_pure:
        raise PreconditionError("the decomposition needs K as a plain union of disks")

    if a.kind == PartitionKind.DELTA_BOOST:
        sources = [(p.region, p.operator) for p in a.parts]
    else:
        sources = [(None, a)]
    boosts = []
    for region, hs in sources:
        if abs(nu - hs.nu) <= 1e-15:
            refined = hs
        else:
            refined = assemble_high_separation(hs.region, hs.sequence, hs.eps, nu, hs.options)
        boosts.append((region, refined))

    dec = ExteriorDecomposition(
        assembled=a, nu=nu, eps_nu=refinement_radius(nu), boosts=tuple(boosts),
        neighbourhood=a.region.neighbourhood(nu),
    )
    over = [b for b in (swo.certificates["l"] for swo in dec.parts) if b > dec.h_bound]
    if over:
        logger.warning("part bound %.4g above (3/5) nu = %.4g", max(over), dec.h_bound)
    logger.info("exterior decomposition: nu=%.4g k*=%d (bound %.4g)", nu, dec.k_star, dec.k_bound)
    return dec
