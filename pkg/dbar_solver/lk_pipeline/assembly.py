"""
Assembly of L_K from small-width pieces.

High separation (delta(zeta) at or above 1 - (1 - sqrt eps_*)^2 / 8):
refine zeta to a chain covering K at radius eps_nu, colour it into parts
meeting every D(z, eps) at most once, solve lambda per part so that
r/(6M) = eps_nu, and sum

    L_{K;nu} f = sum_j L_{K_nu^j} (chi_j f),   chi_j = 1 on K_nu^j minus earlier parts.

General case: split zeta by square-root separation l times and run the
high-separation assembly on each leaf, again glued by first-cover indicators.
"""
import logging
import math
import weakref
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np
import numpy.typing as npt

from ..blaschke_engine import ADMISSIBLE_NU
from ..disk_geometry import DiskPoint, PseudoDisk, as_complex, pseudo_distance
from ..errors import DbarError, PreconditionError, SequenceError, with_part
from ..sequence_analysis import (
    FiniteSequence,
    PartitionKind,
    greedy_chain,
    refine_partition,
    refinement_count_bound,
    separation_threshold,
    split_depth,
    split_recursively,
)
from .regions import Density, RegionSpec
from .small_width import DEFAULT_OPTIONS, PipelineOptions, SmallWidthOperator, build_small_width

logger = logging.getLogger(__name__)

CHAIN_GRID = (16, 32)
SMALL_CHAIN_CONSTANT = 167.0
REFINED_CHAIN_CONSTANT = 389423.0
GENERAL_CONSTANT = 25e6
COVER_MARGIN = 0.25


def refinement_radius(nu: float) -> float:
    """eps_nu = (2 - sqrt 3)^3 nu / 6."""
    return (2.0 - math.sqrt(3.0)) ** 3 * float(nu) / 6.0


def check_nu(nu: float) -> float:
    nu = float(nu)
    if not 0.0 < nu <= ADMISSIBLE_NU + 1e-15:
        raise PreconditionError(f"nu = {nu} outside (0, 2 - sqrt 3]")
    return nu


def chain_disks(seq: FiniteSequence, radius: float, within: RegionSpec) -> RegionSpec:
    """within ∩ (union of D(z, radius) over the chain)."""
    disks = tuple(PseudoDisk(DiskPoint(z), radius) for z in seq.points)
    return RegionSpec(disks, within=(within,))


def validate_chain(K: RegionSpec, zeta: FiniteSequence, eps: float, grid: Tuple[int, int] = CHAIN_GRID) -> None:
    """zeta inside K, eps-separated, and every sampled point of K within eps of zeta."""
    pts = zeta.points
    outside = ~K.contains(pts)
    if outside.any():
        raise SequenceError(f"chain point {pts[outside][0]:.6g} is not in K", reference="zeta inside K")
    if len(zeta) > 1:
        rho = pseudo_distance(pts[:, None], pts[None, :])
        np.fill_diagonal(rho, 1.0)
        if rho.min() < eps:
            raise SequenceError(f"chain points only {rho.min():.4g} apart, eps = {eps}",
                                reference="zeta is eps-separated")
    samples = K.candidates(*grid)
    if samples.size:
        gap = np.min(pseudo_distance(samples[:, None], pts[None, :]), axis=1)
        far = gap >= eps
        if far.any():
            raise SequenceError(
                f"sample {samples[far][0]:.6g} of K lies {gap[far][0]:.4g} from the chain",
                reference="every point of K within eps of zeta",
            )


def covering_chain(K: RegionSpec, zeta: FiniteSequence, eps: float, eps_nu: float) -> FiniteSequence:
    """A chain of K with every point of K within eps_nu of it, whenever zeta covers K.

    Nodes of the disks D(z, eps), z in zeta, lie within COVER_MARGIN * eps_nu of
    every point of those disks; the greedy scan keeps them (1 - COVER_MARGIN) * eps_nu
    apart, nodes inside K first. Kept nodes whose eps_nu-disk misses K are dropped.
    """
    mesh = COVER_MARGIN * eps_nu * (1.0 - eps * eps)
    n_r = max(1, math.ceil(eps / mesh))
    n_theta = max(8, math.ceil(2.0 * math.pi * eps / mesh))
    nodes = np.concatenate([PseudoDisk(DiskPoint(z), eps).sample(n_r, n_theta) for z in zeta.points])
    inside = K.contains(nodes)
    chain = greedy_chain(np.concatenate([nodes[inside], nodes[~inside]]), (1.0 - COVER_MARGIN) * eps_nu)
    keep = np.flatnonzero(~K.misses(chain.points, eps_nu))
    logger.debug("covering chain: %d nodes (%d x %d per disk), %d kept, %d meet K",
                 nodes.size, n_r, n_theta, len(chain), keep.size)
    return chain.subset(keep)


@dataclass(frozen=True, eq=False)
class AssembledPart:
    index: int
    region: RegionSpec
    operator: Union[SmallWidthOperator, "AssembledOperator"]
    sequence: FiniteSequence

    @property
    def bound(self) -> float:
        op = self.operator
        return op.certificates["l"] if isinstance(op, SmallWidthOperator) else op.parts_bound


@dataclass(eq=False)
class AssembledOperator:
    region: RegionSpec
    sequence: FiniteSequence
    eps: float
    kind: PartitionKind
    parts: Tuple[AssembledPart, ...]
    nu: float
    eps_nu: float
    certificate: Optional[float]
    delta: float
    depth: int = 0
    count_bound: float = 1.0
    options: PipelineOptions = DEFAULT_OPTIONS
    _bound: "weakref.WeakKeyDictionary" = field(init=False, repr=False)

    def __post_init__(self):
        self._bound = weakref.WeakKeyDictionary()

    def __len__(self) -> int:
        return len(self.parts)

    @property
    def parts_bound(self) -> float:
        return float(sum(p.bound for p in self.parts))

    def chi_sum(self, z: npt.ArrayLike) -> np.ndarray:
        """sum_j chi_j(z); equals 1 on K."""
        z = as_complex(z)
        return sum(p.region.contains(z).astype(int) for p in self.parts)

    def bind(self, f: Density) -> "BoundAssembled":
        bound = self._bound.get(f)
        if bound is None:
            pieces = tuple(f.restrict(p.region) for p in self.parts)
            bound = BoundAssembled(self, f, pieces)
            self._bound[f] = bound
        return bound

    def evaluate(self, f: Density, z: npt.ArrayLike) -> np.ndarray:
        return self.bind(f).evaluate(z)

    def iter_small_width(self, f: Density) -> Iterator[Tuple[SmallWidthOperator, Density]]:
        return self.bind(f).iter_small_width()

    def small_width_parts(self) -> List[SmallWidthOperator]:
        out: List[SmallWidthOperator] = []
        for p in self.parts:
            if isinstance(p.operator, SmallWidthOperator):
                out.append(p.operator)
            else:
                out.extend(p.operator.small_width_parts())
        return out

    def manifest(self, f: Optional[Density] = None) -> dict:
        data = {
            "kind": self.kind.value,
            "eps": self.eps,
            "nu": self.nu,
            "eps_nu": self.eps_nu,
            "delta": self.delta,
            "depth": self.depth,
            "certificate": self.certificate,
            "parts_bound": self.parts_bound,
            "count_bound": self.count_bound,
            "parts": [
                {
                    "index": p.index,
                    "zeros": p.sequence.to_pairs(),
                    "bound": p.bound,
                    "operator": p.operator.manifest(),
                }
                for p in self.parts
            ],
        }
        if f is not None:
            data["bound"] = [swo.bind(g).manifest() for swo, g in self.iter_small_width(f)]
        return data


@dataclass(eq=False)
class BoundAssembled:
    operator: AssembledOperator
    density: Density
    pieces: Tuple[Density, ...]

    def evaluate(self, z: npt.ArrayLike) -> np.ndarray:
        z = as_complex(z)
        total = np.zeros(z.shape + (self.density.dim,), dtype=complex)
        for part, piece in zip(self.operator.parts, self.pieces):
            total = total + part.operator.evaluate(piece, z)
        return total

    def iter_small_width(self) -> Iterator[Tuple[SmallWidthOperator, Density]]:
        for part, piece in zip(self.operator.parts, self.pieces):
            yield from part.operator.iter_small_width(piece)


# ==============================================================================
# High separation
# ==============================================================================

def assemble_high_separation(K: RegionSpec, zeta: FiniteSequence, eps: float, nu: float = ADMISSIBLE_NU,
                             options: PipelineOptions = DEFAULT_OPTIONS,
                             chain_grid: Tuple[int, int] = CHAIN_GRID) -> AssembledOperator:
    if not isinstance(zeta, FiniteSequence):
        zeta = FiniteSequence.of(zeta)
    if len(zeta) == 0:
        raise SequenceError("empty chain")
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise PreconditionError(f"eps = {eps} not in (0, 1)")
    nu = check_nu(nu)
    threshold = separation_threshold(eps)
    if zeta.delta < threshold * (1.0 - 1e-12):
        raise PreconditionError(
            f"delta(zeta) = {zeta.delta:.6g} below {threshold:.6g}",
            reference="delta(zeta) >= 1 - (1 - sqrt eps_*)^2 / 8",
        )
    validate_chain(K, zeta, eps, chain_grid)

    eps_nu = refinement_radius(nu)
    if eps <= eps_nu:
        zeta_nu, part_eps = zeta, eps
        count_bound = 1.0
    else:
        zeta_nu = covering_chain(K, zeta, eps, eps_nu)
        part_eps = eps_nu
        count_bound = refinement_count_bound(eps, (1.0 - COVER_MARGIN) * eps_nu)
    partition = refine_partition(zeta, zeta_nu, eps)

    parts: List[AssembledPart] = []
    earlier: List[RegionSpec] = []
    for i, seq in enumerate(partition.parts):
        try:
            if len(seq) > 1 and not seq.delta > 0.5:
                raise PreconditionError(f"part characteristic {seq.delta:.6g} not above 1/2",
                                        reference="delta(part) > 1/2")
            K_i = chain_disks(seq, eps_nu, K)
            swo = build_small_width(seq, K_i, part_eps, nu=nu, radius=eps_nu, options=options)
        except DbarError as e:
            raise with_part(e, i)
        chi = K_i.minus(*earlier) if earlier else K_i
        earlier.append(K_i)
        parts.append(AssembledPart(index=i, region=chi, operator=swo, sequence=seq))

    if abs(nu - ADMISSIBLE_NU) <= 1e-15:
        constant = SMALL_CHAIN_CONSTANT if eps <= refinement_radius(ADMISSIBLE_NU) else REFINED_CHAIN_CONSTANT
        certificate: Optional[float] = constant * eps / (1.0 - eps)
    else:
        certificate = None
    op = AssembledOperator(
        region=K, sequence=zeta, eps=eps, kind=PartitionKind.REFINEMENT, parts=tuple(parts),
        nu=nu, eps_nu=eps_nu, certificate=certificate, delta=zeta.delta,
        count_bound=count_bound, options=options,
    )
    logger.info("high-separation assembly: %d chain points -> %d refined -> %d parts, eps_nu=%.4g",
                len(zeta), len(zeta_nu), len(parts), eps_nu)
    return op


# ==============================================================================
# General case
# ==============================================================================

def general_certificate(eps: float, delta: float) -> float:
    eps_star = max(0.5, eps)
    return GENERAL_CONSTANT * eps / (1.0 - eps) * max(1.0, math.log(1.0 / delta) / (1.0 - eps_star) ** 2)


def assemble_general(K: RegionSpec, zeta: FiniteSequence, eps: float, delta: Optional[float] = None,
                     nu: float = ADMISSIBLE_NU, options: PipelineOptions = DEFAULT_OPTIONS,
                     chain_grid: Tuple[int, int] = CHAIN_GRID) -> AssembledOperator:
    if not isinstance(zeta, FiniteSequence):
        zeta = FiniteSequence.of(zeta)
    if len(zeta) == 0:
        raise SequenceError("empty chain")
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise PreconditionError(f"eps = {eps} not in (0, 1)")
    delta = zeta.delta if delta is None else float(delta)
    if not 0.0 < delta <= 1.0 or zeta.delta < delta * (1.0 - 1e-12):
        raise PreconditionError(f"delta(zeta) = {zeta.delta:.6g} below the declared {delta:.6g}",
                                reference="delta(zeta) >= delta > 0")
    validate_chain(K, zeta, eps, chain_grid)

    depth = split_depth(delta, eps)
    leaves = split_recursively(zeta, depth) if depth else [zeta]
    parts: List[AssembledPart] = []
    earlier: List[RegionSpec] = []
    for j, leaf in enumerate(leaves):
        K_j = chain_disks(leaf, eps, K)
        try:
            sub = assemble_high_separation(K_j, leaf, eps, nu, options, chain_grid)
        except DbarError as e:
            raise with_part(e, j)
        R_j = K_j.minus(*earlier) if earlier else K_j
        earlier.append(K_j)
        parts.append(AssembledPart(index=j, region=R_j, operator=sub, sequence=leaf))

    op = AssembledOperator(
        region=K, sequence=zeta, eps=eps, kind=PartitionKind.DELTA_BOOST, parts=tuple(parts),
        nu=check_nu(nu), eps_nu=refinement_radius(nu), certificate=general_certificate(eps, delta),
        delta=delta, depth=depth, count_bound=float(2 ** depth), options=options,
    )
    logger.info("general assembly: depth %d, %d leaves, certificate %.4g", depth, len(parts), op.certificate)
    return op
