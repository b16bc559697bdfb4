"""
The Cauchy transform on the disk

    (Eh)(z) = 1/(2 pi i) iint h(w)/(w - z) dw ^ d(conj w),   dw ^ d(conj w) = -2i dA
            = -(1/pi) int_0^{2pi} e^{-i phi} int_0^{R} h(z + r e^{i phi}) dr dphi

for h supported in D_s. The second line is the polar frame centred at the
singularity: the integrand is bounded, so a plain midpoint rule works.

Targets outside D_s are by default evaluated with the node sum
(1/pi) sum_i h_i A_i / (z - w_i) of the source grid. That sum is exactly
holomorphic off the support, which contour splitting downstream relies on.
"""
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np
import numpy.typing as npt

from .disk_geometry import as_complex, ensure_in_disk, polar_nodes
from .errors import DiskDomainError, InputFormatError, PreconditionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolarGrid:
    n_r: int
    n_theta: int
    radius: float

    def __post_init__(self):
        if self.n_r < 1 or self.n_theta < 1:
            raise PreconditionError("grid counts must be positive")
        if not 0.0 < self.radius <= 1.0:
            raise DiskDomainError(f"grid radius {self.radius} not in (0, 1]")

    @property
    def dr(self) -> float:
        return self.radius / self.n_r

    @property
    def dtheta(self) -> float:
        return 2.0 * math.pi / self.n_theta

    def nodes(self) -> Tuple[np.ndarray, np.ndarray]:
        return polar_nodes(self.radius, self.n_r, self.n_theta)


@dataclass(frozen=True, eq=False)
class GridField:
    """Values of h: D_s -> C^d at the midpoint nodes of a polar grid."""

    grid: PolarGrid
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        shape = (self.grid.n_r, self.grid.n_theta)
        values = np.asarray(self.values, dtype=complex)
        if values.shape[:2] != shape or values.ndim != 3:
            raise PreconditionError(f"values must have shape {shape} + (d,), got {values.shape}")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != shape:
            raise PreconditionError(f"mask must have shape {shape}")
        if not np.all(np.isfinite(values)):
            raise PreconditionError("grid values must be finite")
        if np.any(values[~mask] != 0):
            raise PreconditionError("values outside the support mask must vanish")
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    @classmethod
    def sample(cls, fn: Callable[[np.ndarray], np.ndarray], grid: PolarGrid, dim: int = 1,
               support: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> "GridField":
        nodes, _ = grid.nodes()
        mask = np.ones(nodes.shape, dtype=bool) if support is None else np.asarray(support(nodes), dtype=bool)
        vals = _as_field_values(fn(nodes), nodes.shape, dim)
        vals = np.where(mask[..., None], vals, 0.0)
        return cls(grid, vals, mask)

    @classmethod
    def zeros(cls, grid: PolarGrid, dim: int = 1) -> "GridField":
        shape = (grid.n_r, grid.n_theta)
        return cls(grid, np.zeros(shape + (dim,), dtype=complex), np.zeros(shape, dtype=bool))

    def sup_norm(self) -> float:
        if not self.mask.any():
            return 0.0
        return float(np.max(np.linalg.norm(self.values, axis=-1)[self.mask]))

    def __add__(self, other: "GridField") -> "GridField":
        if other.grid != self.grid:
            raise PreconditionError("fields live on different grids")
        return GridField(self.grid, self.values + other.values, self.mask | other.mask)

    def __mul__(self, alpha: complex) -> "GridField":
        return GridField(self.grid, self.values * alpha, self.mask)

    __rmul__ = __mul__

    def apply(self, T: npt.ArrayLike) -> "GridField":
        """Componentwise linear map, T of shape (d_out, d)."""
        T = np.asarray(T, dtype=complex)
        return GridField(self.grid, self.values @ T.T, self.mask)

    def lookup(self, points: npt.ArrayLike, method: str = "nearest") -> np.ndarray:
        """h at arbitrary points, zero outside D_s; shape points.shape + (d,)."""
        p = as_complex(points)
        g = self.grid
        rad = np.abs(p)
        inside = rad < g.radius
        theta = np.mod(np.angle(p), 2.0 * math.pi)
        out_shape = p.shape + (self.dim,)
        if method == "nearest":
            i = np.clip((rad / g.dr).astype(int), 0, g.n_r - 1)
            j = np.floor(theta / g.dtheta).astype(int) % g.n_theta
            vals = self.values[i, j]
        elif method == "bilinear":
            x = rad / g.dr - 0.5
            y = theta / g.dtheta - 0.5
            i0 = np.clip(np.floor(x).astype(int), 0, g.n_r - 1)
            i1 = np.clip(i0 + 1, 0, g.n_r - 1)
            tx = np.clip(x - i0, 0.0, 1.0)[..., None]
            j0 = np.floor(y).astype(int)
            ty = (y - j0)[..., None]
            j0 %= g.n_theta
            j1 = (j0 + 1) % g.n_theta
            v = self.values
            vals = ((1 - tx) * ((1 - ty) * v[i0, j0] + ty * v[i0, j1])
                    + tx * ((1 - ty) * v[i1, j0] + ty * v[i1, j1]))
        else:
            raise PreconditionError(f"unknown interpolation {method!r}")
        return np.where(inside[..., None], vals, 0.0).reshape(out_shape)

    def to_json(self) -> dict:
        inter = np.stack([self.values.real, self.values.imag], axis=-1).ravel()
        return {
            "grid": {"n_r": self.grid.n_r, "n_theta": self.grid.n_theta, "radius": self.grid.radius},
            "dim": self.dim,
            "byte_order": "little",
            "values": inter.tolist(),
            "mask": self.mask.astype(int).ravel().tolist(),
        }

    @classmethod
    def from_json(cls, data: dict, where: str = "<grid field>") -> "GridField":
        try:
            grid = PolarGrid(int(data["grid"]["n_r"]), int(data["grid"]["n_theta"]), float(data["grid"]["radius"]))
            dim = int(data["dim"])
            flat = np.asarray(data["values"], dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise InputFormatError(f"{where}: bad header or values ({e})") from e
        expected = grid.n_r * grid.n_theta * dim * 2
        if flat.size != expected:
            raise InputFormatError(f"{where}: field 'values' has {flat.size} numbers, expected {expected}")
        pairs = flat.reshape(grid.n_r, grid.n_theta, dim, 2)
        values = pairs[..., 0] + 1j * pairs[..., 1]
        if "mask" in data:
            mask = np.asarray(data["mask"], dtype=bool)
            if mask.size != grid.n_r * grid.n_theta:
                raise InputFormatError(f"{where}: field 'mask' has wrong length")
            mask = mask.reshape(grid.n_r, grid.n_theta)
        else:
            mask = np.any(values != 0, axis=-1)
        return cls(grid, values, mask)


def _as_field_values(raw, shape, dim: int) -> np.ndarray:
    vals = np.asarray(raw, dtype=complex)
    if vals.shape == tuple(shape):
        vals = vals[..., None]
    return np.broadcast_to(vals, tuple(shape) + (dim,)).copy()


# ==============================================================================
# Quadrature
# ==============================================================================

@dataclass(frozen=True)
class QuadratureConfig:
    radial_factor: int = 2
    interpolation: str = "nearest"
    far_field: str = "nodes"
    parallel: int = 1
    chunk: int = 16
    sabotage: bool = False


DEFAULT_QUADRATURE = QuadratureConfig()


def _polar_frame(h: GridField, z: np.ndarray, cfg: QuadratureConfig) -> np.ndarray:
    """Midpoint rule in the frame centred at each target; z is 1-d."""
    g = h.grid
    s = g.radius
    n_phi = g.n_theta
    n_rad = cfg.radial_factor * g.n_r
    az = np.abs(z)
    far = az > s
    half = np.where(far, np.arcsin(np.clip(s / np.where(far, az, 1.0), 0.0, 1.0)), math.pi)
    centre = np.where(far, np.angle(-z), math.pi)
    lo = np.where(far, az - s, 0.0)
    hi = az + s
    k = (np.arange(n_phi) + 0.5) / n_phi
    phi = centre[:, None] + half[:, None] * (2.0 * k[None, :] - 1.0)
    dphi = 2.0 * half / n_phi
    m = (np.arange(n_rad) + 0.5) / n_rad
    r = lo[:, None] + (hi - lo)[:, None] * m[None, :]
    dr = (hi - lo) / n_rad
    pts = z[:, None, None] + r[:, None, :] * np.exp(1j * phi)[:, :, None]
    vals = h.lookup(pts, cfg.interpolation)
    radial = vals.sum(axis=2) * dr[:, None, None]
    angular = np.sum(np.exp(-1j * phi)[..., None] * radial, axis=1) * dphi[:, None]
    sign = 1.0 if cfg.sabotage else -1.0
    return sign / math.pi * angular


def _node_sum(h: GridField, z: np.ndarray, cfg: QuadratureConfig) -> np.ndarray:
    nodes, weights = h.grid.nodes()
    sel = h.mask
    src = nodes[sel]
    charge = h.values[sel] * weights[sel][:, None]
    diff = z[:, None] - src[None, :]
    sign = -1.0 if cfg.sabotage else 1.0
    return sign / math.pi * ((1.0 / diff) @ charge)


def _solve_chunk(h: GridField, z: np.ndarray, cfg: QuadratureConfig) -> np.ndarray:
    out = np.zeros((z.size, h.dim), dtype=complex)
    if not h.mask.any():
        return out
    if cfg.far_field == "nodes":
        outside = np.abs(z) >= h.grid.radius
    elif cfg.far_field == "polar":
        outside = np.zeros(z.shape, dtype=bool)
    else:
        raise PreconditionError(f"unknown far-field mode {cfg.far_field!r}")
    if outside.any():
        out[outside] = _node_sum(h, z[outside], cfg)
    if (~outside).any():
        out[~outside] = _polar_frame(h, z[~outside], cfg)
    return out


def cauchy_solve_field(h: GridField, targets: npt.ArrayLike,
                       config: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """(Eh)(z) for every target; shape targets.shape + (d,)."""
    z = as_complex(targets)
    shape = z.shape
    z = np.atleast_1d(z).ravel()
    ensure_in_disk(z, "Cauchy target")
    chunks = [z[i:i + config.chunk] for i in range(0, z.size, config.chunk)]
    if config.parallel > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=config.parallel) as pool:
            parts = list(pool.map(lambda c: _solve_chunk(h, c, config), chunks))
    else:
        parts = [_solve_chunk(h, c, config) for c in chunks]
    out = np.concatenate(parts, axis=0) if parts else np.zeros((0, h.dim), dtype=complex)
    return out.reshape(shape + (h.dim,))


def cauchy_solve(h: GridField, z: complex, config: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    return cauchy_solve_field(h, np.asarray([complex(z)]), config)[0]


def indicator_transform(s: float, z: npt.ArrayLike) -> np.ndarray:
    """Closed form of E applied to the indicator of D_s."""
    z = as_complex(z)
    inside = np.abs(z) <= s
    safe = np.where(inside, 1.0, z)
    return np.where(inside, np.conj(z), s * s / safe)


# ==============================================================================
# Modulus of continuity and checks
# ==============================================================================

class ModulusOmega:
    """omega(t) = t log(8/t) on (0, 2]."""

    def __call__(self, t: npt.ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0) or np.any(t > 2.0):
            raise PreconditionError("omega is defined on (0, 2]")
        return t * np.log(8.0 / t)


_omega = ModulusOmega()


def omega(t: npt.ArrayLike) -> np.ndarray:
    return _omega(t)


@dataclass
class ContinuityReport:
    ratios: List[float] = field(default_factory=list)
    slack: float = 0.02

    @property
    def max_ratio(self) -> float:
        return max(self.ratios, default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_ratio <= 1.0 + self.slack


def continuity_check(h: GridField, pairs: Iterable[Tuple[complex, complex]], slack: float = 0.02,
                     config: QuadratureConfig = DEFAULT_QUADRATURE) -> ContinuityReport:
    """|Eh(z1) - Eh(z2)| against 3 omega(|z1 - z2|) |h|."""
    pairs = [(complex(a), complex(b)) for a, b in pairs]
    report = ContinuityReport(slack=slack)
    if not pairs:
        return report
    norm = h.sup_norm()
    first = cauchy_solve_field(h, np.array([p[0] for p in pairs]), config)
    second = cauchy_solve_field(h, np.array([p[1] for p in pairs]), config)
    for (a, b), ea, eb in zip(pairs, first, second):
        t = abs(a - b)
        if t == 0.0 or norm == 0.0:
            report.ratios.append(0.0)
            continue
        report.ratios.append(float(np.linalg.norm(ea - eb) / (3.0 * omega(t) * norm)))
    return report


@dataclass(frozen=True)
class Bump:
    """rho(z) = exp(-a^2/(a^2 - |z - c|^2)) on D_a(c), zero outside."""

    center: complex
    radius: float

    def __post_init__(self):
        if self.radius <= 0 or abs(complex(self.center)) + self.radius >= 1.0:
            raise DiskDomainError("bump support escapes the unit disk")

    def value(self, z: np.ndarray) -> np.ndarray:
        t = np.abs(z - self.center) ** 2
        a2 = self.radius ** 2
        inside = t < a2
        return np.where(inside, np.exp(-a2 / np.where(inside, a2 - t, 1.0)), 0.0)

    def dbar(self, z: np.ndarray) -> np.ndarray:
        t = np.abs(z - self.center) ** 2
        a2 = self.radius ** 2
        inside = t < a2
        gap = np.where(inside, a2 - t, 1.0)
        return np.where(inside, -self.value(z) * a2 * (z - self.center) / gap ** 2, 0.0)


def _evaluate_vector(fn: Callable[[np.ndarray], np.ndarray], z: np.ndarray) -> np.ndarray:
    out = np.asarray(fn(z), dtype=complex)
    if out.shape == z.shape:
        out = out[..., None]
    return out


def bump_nodes(bump: Bump, n_r: int = 32, n_theta: int = 64) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre in r times trapezoid in theta over the bump support; spectral for smooth integrands."""
    x, wx = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * bump.radius * (x + 1.0)
    wr = 0.5 * bump.radius * wx * r
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    z = bump.center + (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    w = np.repeat(wr * (2.0 * np.pi / n_theta), n_theta)
    return z, w


def weak_residual(F: Callable[[np.ndarray], np.ndarray], rhs: Callable[[np.ndarray], np.ndarray],
                  bump: Bump, n_r: int = 32, n_theta: int = 64, relative: bool = False) -> float:
    """|iint F drho/dzbar dz^dzbar + iint rhs rho dz^dzbar|, optionally over |iint rhs rho dz^dzbar|."""
    z, w = bump_nodes(bump, n_r, n_theta)
    w = w[:, None]
    lhs = np.sum(_evaluate_vector(F, z) * bump.dbar(z)[:, None] * w, axis=0)
    src = np.sum(_evaluate_vector(rhs, z) * bump.value(z)[:, None] * w, axis=0)
    residual = float(np.linalg.norm(-2j * (lhs + src)))
    if not relative:
        return residual
    scale = float(np.linalg.norm(-2j * src))
    if scale == 0.0:
        raise PreconditionError("the source term vanishes against this bump")
    return residual / scale


def load_grid_field(path: str) -> GridField:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise InputFormatError(f"{path}: {e}") from e
    return GridField.from_json(data, where=path)


def save_grid_field(h: GridField, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(h.to_json(), fh)
