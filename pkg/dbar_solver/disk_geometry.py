"""
Pseudohyperbolic geometry of the unit disk.

    rho(z, w) = |(z - w) / (1 - conj(w) z)|
    g_c(w)    = (w + c) / (1 + conj(c) w)        (g_c(0) = c, an isometry of rho)

All functions accept python complex numbers, DiskPoints or numpy arrays and
broadcast like numpy ufuncs.
"""
from dataclasses import dataclass
from typing import Iterable, Tuple, Union

import numpy as np
import numpy.typing as npt

from .errors import DiskDomainError

BOUNDARY_MARGIN = 1e-12

ComplexLike = Union[complex, float, "DiskPoint", npt.ArrayLike]


@dataclass(frozen=True)
class DiskPoint:
    value: complex

    def __post_init__(self):
        v = complex(self.value)
        if not np.isfinite(v) or abs(v) >= 1.0 - BOUNDARY_MARGIN:
            raise DiskDomainError(f"point {v} is not strictly inside the unit disk")
        object.__setattr__(self, "value", v)

    def __complex__(self) -> complex:
        return self.value


def as_complex(z: ComplexLike) -> np.ndarray:
    if isinstance(z, DiskPoint):
        return np.asarray(z.value, dtype=complex)
    return np.asarray(z, dtype=complex)


def ensure_in_disk(z: ComplexLike, what: str = "point") -> np.ndarray:
    arr = as_complex(z)
    if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) >= 1.0 - BOUNDARY_MARGIN):
        raise DiskDomainError(f"{what} not strictly inside the unit disk")
    return arr


def pseudo_distance(z: ComplexLike, w: ComplexLike) -> np.ndarray:
    z = as_complex(z)
    w = as_complex(w)
    rho = np.abs((z - w) / (1.0 - np.conj(w) * z))
    return np.where(z == w, 0.0, rho)


def pseudo_sum(a: npt.ArrayLike, b: npt.ArrayLike) -> np.ndarray:
    """Upper bound for rho(x, z) given rho(x, y) = a and rho(y, z) = b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (a + b) / (1.0 + a * b)


def mobius_shift(center: ComplexLike, w: ComplexLike) -> np.ndarray:
    c = as_complex(center)
    w = as_complex(w)
    return (w + c) / (1.0 + np.conj(c) * w)


def mobius_inverse(center: ComplexLike, z: ComplexLike) -> np.ndarray:
    c = as_complex(center)
    z = as_complex(z)
    return (z - c) / (1.0 - np.conj(c) * z)


def _check_radius(radius: float) -> float:
    radius = float(radius)
    if not 0.0 < radius < 1.0:
        raise DiskDomainError(f"pseudohyperbolic radius {radius} not in (0, 1)")
    return radius


@dataclass(frozen=True)
class PseudoDisk:
    center: DiskPoint
    radius: float

    def __post_init__(self):
        if not isinstance(self.center, DiskPoint):
            object.__setattr__(self, "center", DiskPoint(self.center))
        object.__setattr__(self, "radius", _check_radius(self.radius))

    def contains(self, z: ComplexLike) -> np.ndarray:
        return pseudo_distance(z, self.center.value) < self.radius

    def sample(self, n_r: int, n_theta: int) -> np.ndarray:
        """Midpoint polar nodes of the disk, pushed forward from D_radius by g_center."""
        nodes, _ = polar_nodes(self.radius, n_r, n_theta)
        return mobius_shift(self.center.value, nodes).ravel()


def hyperbolic_area(d: Union[PseudoDisk, float]) -> float:
    """Area of D(x, s) for the density (1 - |z|^2)^-2; independent of the center."""
    s = d.radius if isinstance(d, PseudoDisk) else _check_radius(d)
    return float(np.pi * s * s / (1.0 - s * s))


class Neighbourhood:
    """[S]_nu: points at pseudo-distance < nu from a finite union of disks or points.

    Membership reduces to one test per disk: rho(z, D(c, s)) < nu exactly when
    rho(z, c) < (s + nu) / (1 + s nu). A point is a disk of radius 0.
    """

    def __init__(self, centers: npt.ArrayLike, radii: npt.ArrayLike, nu: float):
        self.centers = ensure_in_disk(np.atleast_1d(centers), "neighbourhood base")
        self.radii = np.broadcast_to(np.asarray(radii, dtype=float), self.centers.shape).copy()
        self.nu = _check_radius(nu)
        if np.any(self.radii < 0) or np.any(self.radii >= 1):
            raise DiskDomainError("neighbourhood base radii must lie in [0, 1)")
        self.reach = pseudo_sum(self.radii, self.nu)

    @classmethod
    def around_points(cls, points: Iterable[complex], nu: float) -> "Neighbourhood":
        pts = np.array([complex(p) for p in points], dtype=complex)
        return cls(pts, np.zeros(pts.shape), nu)

    @classmethod
    def around_disks(cls, disks: Iterable[PseudoDisk], nu: float) -> "Neighbourhood":
        disks = list(disks)
        return cls([d.center.value for d in disks], [d.radius for d in disks], nu)

    def contains(self, z: ComplexLike) -> np.ndarray:
        z = as_complex(z)
        rho = pseudo_distance(z[..., None], self.centers)
        return np.any(rho < self.reach, axis=-1)


def neighbourhood_contains(n: Neighbourhood, z: ComplexLike) -> np.ndarray:
    return n.contains(z)


def polar_nodes(radius: float, n_r: int, n_theta: int) -> Tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes of D_radius, radial-major, and their area weights r dr dtheta."""
    dr = radius / n_r
    dt = 2.0 * np.pi / n_theta
    r = (np.arange(n_r) + 0.5) * dr
    t = (np.arange(n_theta) + 0.5) * dt
    nodes = r[:, None] * np.exp(1j * t)[None, :]
    weights = np.broadcast_to((r * dr * dt)[:, None], nodes.shape).copy()
    return nodes, weights
