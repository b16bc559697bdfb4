"""Supports K as finite unions of pseudohyperbolic disks, and densities on them."""
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Tuple

import numpy as np
import numpy.typing as npt

from ..cauchy_transform import GridField
from ..disk_geometry import DiskPoint, Neighbourhood, PseudoDisk, as_complex, pseudo_distance, pseudo_sum
from ..errors import PreconditionError
from ..sequence_analysis import FiniteSequence


@dataclass(frozen=True, eq=False)
class RegionSpec:
    """(union of `disks`) intersected with every region in `within`, minus every region in `without`."""

    disks: Tuple[PseudoDisk, ...]
    within: Tuple["RegionSpec", ...] = ()
    without: Tuple["RegionSpec", ...] = ()

    def __post_init__(self):
        if not self.disks:
            raise PreconditionError("a region needs at least one disk")
        object.__setattr__(self, "disks", tuple(self.disks))
        centers = np.array([d.center.value for d in self.disks], dtype=complex)
        radii = np.array([d.radius for d in self.disks], dtype=float)
        object.__setattr__(self, "_centers", centers)
        object.__setattr__(self, "_radii", radii)

    @classmethod
    def from_anchors(cls, anchors: Iterable[complex], radii) -> "RegionSpec":
        anchors = [complex(a) for a in anchors]
        radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(anchors),))
        if np.any(radii <= 0):
            raise PreconditionError("zero-measure support: every anchor needs a positive radius")
        return cls(tuple(PseudoDisk(DiskPoint(a), float(r)) for a, r in zip(anchors, radii)))

    @classmethod
    def around(cls, seq: FiniteSequence, radius: float) -> "RegionSpec":
        return cls.from_anchors(seq.points, radius)

    @property
    def anchors(self) -> np.ndarray:
        return self._centers

    @property
    def radii(self) -> np.ndarray:
        return self._radii

    @property
    def is_pure(self) -> bool:
        return not self.within and not self.without

    def intersect(self, other: "RegionSpec") -> "RegionSpec":
        return RegionSpec(self.disks, self.within + (other,), self.without)

    def minus(self, *others: "RegionSpec") -> "RegionSpec":
        return RegionSpec(self.disks, self.within, self.without + tuple(others))

    def union(self, other: "RegionSpec") -> "RegionSpec":
        if not (self.is_pure and other.is_pure):
            raise PreconditionError("only plain unions of disks can be merged")
        return RegionSpec(self.disks + other.disks)

    def contains(self, z: npt.ArrayLike) -> np.ndarray:
        z = as_complex(z)
        hit = np.any(pseudo_distance(z[..., None], self._centers) < self._radii, axis=-1)
        for r in self.within:
            hit &= r.contains(z)
        for r in self.without:
            hit &= ~r.contains(z)
        return hit

    def candidates(self, n_r: int = 16, n_theta: int = 32) -> np.ndarray:
        """Sample points of the region: polar grids of each disk, disk by disk."""
        pts = np.concatenate([d.sample(n_r, n_theta) for d in self.disks])
        return pts[self.contains(pts)]

    def misses(self, centers: npt.ArrayLike, radius: float) -> np.ndarray:
        """True where D(center, radius) certainly avoids the region; False means it may meet it."""
        centers = as_complex(centers)
        reach = pseudo_sum(self._radii, radius)
        out = np.all(pseudo_distance(centers[..., None], self._centers) >= reach, axis=-1)
        for r in self.within:
            out |= r.misses(centers, radius)
        return out

    def neighbourhood(self, nu: float) -> Neighbourhood:
        if not self.is_pure:
            raise PreconditionError("exact neighbourhoods need a plain union of disks")
        return Neighbourhood(self._centers, self._radii, nu)

    def describe(self) -> dict:
        return {
            "anchors": [[float(c.real), float(c.imag)] for c in self._centers],
            "radii": [float(r) for r in self._radii],
            "within": [r.describe() for r in self.within],
            "without": len(self.without),
        }


Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Density:
    """f: K -> C^d; evaluation is zero off the support."""

    fn: Evaluator
    dim: int = 1
    support: Optional[RegionSpec] = None

    def __call__(self, z: npt.ArrayLike) -> np.ndarray:
        z = as_complex(z)
        vals = np.asarray(self.fn(z), dtype=complex)
        if vals.shape == z.shape:
            vals = vals[..., None]
        vals = np.broadcast_to(vals, z.shape + (self.dim,))
        if self.support is None:
            return vals.copy()
        return np.where(self.support.contains(z)[..., None], vals, 0.0)

    def supported(self, z: npt.ArrayLike) -> np.ndarray:
        z = as_complex(z)
        if self.support is None:
            return np.ones(z.shape, dtype=bool)
        return self.support.contains(z)

    def restrict(self, region: RegionSpec) -> "Density":
        """Multiplication by the indicator of `region` (M_chi)."""
        support = region if self.support is None else self.support.intersect(region)
        return Density(self.fn, self.dim, support)

    def apply(self, T: npt.ArrayLike) -> "Density":
        T = np.asarray(T, dtype=complex)
        inner = self

        def mapped(z):
            return inner(z) @ T.T

        return Density(mapped, T.shape[0], self.support)

    def __add__(self, other: "Density") -> "Density":
        if other.dim != self.dim:
            raise PreconditionError("densities of different dimension")
        a, b = self, other

        def summed(z):
            return a(z) + b(z)

        if a.support is None or b.support is None:
            support = None
        elif a.support is b.support:
            support = a.support
        else:
            support = a.support.union(b.support)
        return Density(summed, self.dim, support)

    def __mul__(self, alpha: complex) -> "Density":
        inner = self

        def scaled(z):
            return alpha * inner(z)

        return Density(scaled, self.dim, self.support)

    __rmul__ = __mul__

    def sup_norm(self, n_r: int = 16, n_theta: int = 32) -> float:
        if self.support is None:
            raise PreconditionError("sup norm needs a support to sample")
        pts = self.support.candidates(n_r, n_theta)
        if pts.size == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self(pts), axis=-1)))

    @classmethod
    def zero(cls, support: RegionSpec, dim: int = 1) -> "Density":
        return cls(lambda z: np.zeros(np.shape(z) + (dim,), dtype=complex), dim, support)

    @classmethod
    def constant(cls, value, support: RegionSpec) -> "Density":
        value = np.atleast_1d(np.asarray(value, dtype=complex))
        return cls(lambda z: np.broadcast_to(value, np.shape(z) + value.shape), value.size, support)

    @classmethod
    def bump(cls, support: RegionSpec, value=1.0) -> "Density":
        """Sum over the disks D(a, R) of the support of exp(1 - 1/(1 - (rho(z, a)/R)^2)); smooth, zero at the edge."""
        value = np.atleast_1d(np.asarray(value, dtype=complex))
        centers, radii = support.anchors, support.radii

        def fn(z):
            t = (pseudo_distance(z[..., None], centers) / radii) ** 2
            inside = t < 1.0
            s = np.where(inside, np.exp(1.0 - 1.0 / np.where(inside, 1.0 - t, 1.0)), 0.0).sum(axis=-1)
            return s[..., None] * value

        return cls(fn, value.size, support)

    @classmethod
    def from_grid(cls, h: GridField, support: Optional[RegionSpec] = None, method: str = "nearest") -> "Density":
        return cls(lambda z: h.lookup(z, method), h.dim, support)
