"""
Finite sequences in the disk: the characteristic delta, interpolation-constant
bounds, epsilon-chains and the two partition schemes used by the assembly
(chain refinement and square-root separation splitting).

    delta(zeta) = min_k prod_{j != k} rho(z_j, z_k)

delta is evaluated as exp(sum log rho) so long products do not underflow.
"""
import enum
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .disk_geometry import as_complex, ensure_in_disk, pseudo_distance
from .errors import CertificateError, PreconditionError, SequenceError

logger = logging.getLogger(__name__)

EXHAUSTIVE_SPLIT_LIMIT = 18
_MASK_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class FiniteSequence:
    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_1d(as_complex(self.points)).astype(complex).ravel()
        if pts.size:
            ensure_in_disk(pts, "sequence point")
        if np.unique(pts).size != pts.size:
            raise SequenceError("sequence points must be pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def of(cls, points: Iterable[complex]) -> "FiniteSequence":
        return cls(np.array([complex(p) for p in points], dtype=complex))

    def __len__(self) -> int:
        return int(self.points.size)

    def __iter__(self):
        return iter(self.points.tolist())

    def __getitem__(self, i):
        return self.points[i]

    def subset(self, indices: Sequence[int]) -> "FiniteSequence":
        return FiniteSequence(self.points[np.asarray(indices, dtype=int)])

    def to_pairs(self) -> List[List[float]]:
        return [[float(z.real), float(z.imag)] for z in self.points]

    @cached_property
    def delta(self) -> float:
        return characteristic(self)


def log_rho_matrix(points: np.ndarray) -> np.ndarray:
    """L[j, k] = log rho(z_j, z_k), zero on the diagonal."""
    rho = pseudo_distance(points[:, None], points[None, :])
    with np.errstate(divide="ignore"):
        L = np.log(rho)
    np.fill_diagonal(L, 0.0)
    return L


def characteristic(seq: FiniteSequence) -> float:
    if not isinstance(seq, FiniteSequence):
        seq = FiniteSequence(np.asarray(seq, dtype=complex))
    n = len(seq)
    if n == 0:
        raise SequenceError("characteristic of an empty sequence")
    if n == 1:
        return 1.0
    L = log_rho_matrix(seq.points)
    return float(np.exp(np.min(L.sum(axis=0))))


def characteristic_via_blaschke(seq: FiniteSequence) -> float:
    """min_n (1 - |z_n|^2) |B'(z_n)|, the same number read off the Blaschke product."""
    from .blaschke_engine import BlaschkeProduct

    if len(seq) == 0:
        raise SequenceError("characteristic of an empty sequence")
    b = BlaschkeProduct(seq)
    z = seq.points
    return float(np.min((1.0 - np.abs(z) ** 2) * np.abs(b.derivative(z))))


# ==============================================================================
# Interpolation constant
# ==============================================================================

class InterpolationBounds(NamedTuple):
    lower: float
    jones: float
    earl: float

    @property
    def upper(self) -> float:
        return min(self.jones, self.earl)


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not 0.0 < delta <= 1.0:
        raise PreconditionError(f"characteristic {delta} not in (0, 1]")
    return delta


def jones_bound(delta: float) -> float:
    delta = _check_delta(delta)
    return (2.0 * math.e / delta) * math.log(math.e / delta ** 2)


def earl_bound(delta: float) -> float:
    delta = _check_delta(delta)
    return ((1.0 + math.sqrt(max(0.0, 1.0 - delta * delta))) / delta) ** 2


def interpolation_bounds(delta: float) -> InterpolationBounds:
    delta = _check_delta(delta)
    return InterpolationBounds(lower=1.0 / delta, jones=jones_bound(delta), earl=earl_bound(delta))


def interpolation_constant_bound(delta: float) -> float:
    return interpolation_bounds(delta).upper


# ==============================================================================
# Chains
# ==============================================================================

def greedy_chain(candidates: npt.ArrayLike, eps: float) -> FiniteSequence:
    """Scan candidates in order; keep one iff it is eps-separated from all kept."""
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise PreconditionError(f"chain parameter {eps} not in (0, 1)")
    cand = np.atleast_1d(as_complex(candidates)).ravel()
    kept = np.empty(cand.size, dtype=complex)
    k = 0
    for z in cand:
        if k == 0 or np.all(pseudo_distance(z, kept[:k]) >= eps):
            kept[k] = z
            k += 1
    return FiniteSequence(kept[:k].copy())


def chain_count_bounds(R: float, L: float) -> Tuple[float, float]:
    """Cardinality window for an L-chain of D(z, R)."""
    if not (0.0 < R < 1.0 and 0.0 < L < 1.0):
        raise PreconditionError("chain counting needs 0 < R, L < 1")
    lower = R * R * (1.0 - L * L) / ((1.0 - R * R) * L * L)
    upper = (2.0 * R + L) ** 2 / ((1.0 - R * R) * L * L)
    return lower, upper


def refinement_count_bound(eps: float, eps_nu: float) -> float:
    """Worst-case number of eps_nu-chain points in one D(z, eps)."""
    return (2.0 * eps + eps_nu) ** 2 / (eps_nu ** 2 * (1.0 - eps ** 2))


# ==============================================================================
# Partitions
# ==============================================================================

class PartitionKind(str, enum.Enum):
    REFINEMENT = "refinement"
    DELTA_BOOST = "delta-boost"


@dataclass(frozen=True)
class ChainPartition:
    parent: FiniteSequence
    source: FiniteSequence
    parts: Tuple[FiniteSequence, ...]
    indices: Tuple[np.ndarray, ...]
    kind: PartitionKind
    multiplicity: int = 1
    certificate: float = field(default=float("nan"))

    def __len__(self) -> int:
        return len(self.parts)


def refine_partition(zeta: FiniteSequence, zeta_nu: FiniteSequence, eps: float) -> ChainPartition:
    """Colour zeta_nu so that each part meets every D(z, eps), z in zeta, at most once.

    Greedy: a point takes the smallest colour not yet used in any cell that
    contains it.
    """
    if len(zeta) == 0 or len(zeta_nu) == 0:
        raise SequenceError("refinement needs nonempty sequences")
    cells = pseudo_distance(zeta_nu.points[:, None], zeta.points[None, :]) < eps
    uncovered = np.flatnonzero(~cells.any(axis=1))
    if uncovered.size:
        raise SequenceError(
            f"refinement point {zeta_nu.points[uncovered[0]]} is not within {eps} of the chain",
            reference="every refinement point lies in some D(z, eps)",
        )

    used: List[set] = [set() for _ in range(len(zeta))]
    colour = np.empty(len(zeta_nu), dtype=int)
    for p in range(len(zeta_nu)):
        owners = np.flatnonzero(cells[p])
        taken = set().union(*(used[o] for o in owners))
        c = 0
        while c in taken:
            c += 1
        colour[p] = c
        for o in owners:
            used[o].add(c)

    n_parts = int(colour.max()) + 1
    indices = tuple(np.flatnonzero(colour == c) for c in range(n_parts))
    parts = tuple(zeta_nu.subset(ix) for ix in indices)
    multiplicity = int(cells.sum(axis=0).max())
    logger.info("refinement: %d points in %d parts (max cell multiplicity %d)",
                len(zeta_nu), n_parts, multiplicity)
    return ChainPartition(
        parent=zeta, source=zeta_nu, parts=parts, indices=indices,
        kind=PartitionKind.REFINEMENT, multiplicity=multiplicity,
    )


def _part_log_deltas(member: np.ndarray, L: np.ndarray) -> np.ndarray:
    """log delta of the part selected by each boolean row of `member`."""
    sums = member.astype(float) @ L
    sums = np.where(member, sums, np.inf)
    out = sums.min(axis=1)
    return np.where(np.isinf(out), 0.0, out)


def _exhaustive_split(L: np.ndarray) -> np.ndarray:
    n = L.shape[0]
    bits = np.arange(n - 1)
    best_val, best_mask = -np.inf, None
    total = 1 << (n - 1)
    for start in range(0, total - 1, _MASK_CHUNK):
        masks = np.arange(start, min(start + _MASK_CHUNK, total - 1))
        member = np.ones((masks.size, n), dtype=bool)
        member[:, 1:] = ((masks[:, None] >> bits[None, :]) & 1).astype(bool)
        objective = np.minimum(_part_log_deltas(member, L), _part_log_deltas(~member, L))
        i = int(np.argmax(objective))
        if objective[i] > best_val:
            best_val, best_mask = objective[i], member[i].copy()
    return best_mask


def _local_search_split(L: np.ndarray, max_rounds: int = 100) -> np.ndarray:
    n = L.shape[0]
    member = np.zeros(n, dtype=bool)
    member[0] = True
    for i in range(1, n):
        a = member.copy()
        a[i] = True
        b = member.copy()
        b[i] = False
        score_a = min(_part_log_deltas(a[None], L)[0], _part_log_deltas(~a[None], L)[0])
        score_b = min(_part_log_deltas(b[None], L)[0], _part_log_deltas(~b[None], L)[0])
        member = a if score_a > score_b else b

    def score(m):
        return min(_part_log_deltas(m[None], L)[0], _part_log_deltas(~m[None], L)[0])

    current = score(member)
    for _ in range(max_rounds):
        improved = False
        for i in range(n):
            trial = member.copy()
            trial[i] = not trial[i]
            if trial.all() or not trial.any():
                continue
            s = score(trial)
            if s > current:
                member, current, improved = trial, s, True
        if not improved:
            break
    return member


def split_sqrt_delta(seq: FiniteSequence, exhaustive_limit: int = EXHAUSTIVE_SPLIT_LIMIT) -> ChainPartition:
    """Two parts, each with characteristic at least sqrt(delta(seq))."""
    n = len(seq)
    if n < 2:
        raise SequenceError("splitting needs at least two points")
    L = log_rho_matrix(seq.points)
    member = _exhaustive_split(L) if n <= exhaustive_limit else _local_search_split(L)
    idx_a = np.flatnonzero(member)
    idx_b = np.flatnonzero(~member)
    parts = (seq.subset(idx_a), seq.subset(idx_b))
    achieved = min(p.delta for p in parts)
    target = math.sqrt(seq.delta)
    if achieved < target:
        raise CertificateError(
            f"best split reaches {achieved:.6g} < sqrt(delta) = {target:.6g}",
            reference="delta(part) >= sqrt(delta(seq))",
        )
    return ChainPartition(
        parent=seq, source=seq, parts=parts, indices=(idx_a, idx_b),
        kind=PartitionKind.DELTA_BOOST, certificate=achieved,
    )


def separation_threshold(eps: float) -> float:
    """1 - (1 - sqrt(eps_*))^2 / 8 with eps_* = max(1/2, eps)."""
    eps_star = max(0.5, float(eps))
    return 1.0 - (1.0 - math.sqrt(eps_star)) ** 2 / 8.0


def split_depth(delta: float, eps: float) -> int:
    """Least l with delta^(1/2^l) at or above the separation threshold."""
    delta = _check_delta(delta)
    threshold = separation_threshold(eps)
    l = 0
    # delta = threshold^(2^l) exactly must stop at l
    while delta ** (0.5 ** l) < threshold * (1.0 - 1e-15):
        l += 1
    return l


def split_recursively(seq: FiniteSequence, depth: int) -> List[FiniteSequence]:
    """Leaves of `depth` rounds of square-root splitting (singletons stop early)."""
    leaves = [seq]
    for _ in range(depth):
        nxt: List[FiniteSequence] = []
        for part in leaves:
            if len(part) < 2:
                nxt.append(part)
            else:
                nxt.extend(split_sqrt_delta(part).parts)
        leaves = nxt
    return leaves
