"""
RunConfig: the numerical description of a run, kept in a JSON file.

`dbarsolver init` writes one with every default spelled out. Loading
validates each field and reports the first bad one by name. CLI flags are
applied with `override`, which returns a new config.
"""
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Optional

import numpy as np

from .blaschke_engine import ADMISSIBLE_NU
from .cauchy_transform import QuadratureConfig, load_grid_field
from .errors import InputFormatError
from .io_formats import canonical_json, parse_sequence
from .lk_pipeline import Density, PipelineOptions, RegionSpec
from .sequence_analysis import FiniteSequence

logger = logging.getLogger(__name__)

DENSITY_KINDS = ("zero", "constant", "indicator", "smooth", "bump", "file")
INTERPOLATIONS = ("nearest", "bilinear")
FAR_FIELDS = ("nodes", "polar")


def _default_density() -> Dict[str, Any]:
    return {"kind": "indicator"}


@dataclass(frozen=True)
class RunConfig:
    # support K = union of D(anchor, radius) and its chain
    anchors: List[List[float]] = field(default_factory=lambda: [[0.0, 0.0]])
    radius: float = 2e-4
    sequence: Optional[List[List[float]]] = None
    eps: float = 5e-4
    delta: Optional[float] = None
    nu: float = ADMISSIBLE_NU
    density: Dict[str, Any] = field(default_factory=_default_density)
    dim: int = 1

    # quadrature and contour
    grid_nr: int = 32
    grid_ntheta: int = 32
    radial_factor: int = 2
    interpolation: str = "nearest"
    far_field: str = "nodes"
    contour_q: int = 256
    nmax: int = 64
    tol: float = 1e-10
    branch_tol: float = 1e-8

    # sampling
    seed: int = 0
    n_samples: int = 50
    n_pairs: int = 100
    n_fields: int = 50
    n_sequences: int = 100
    n_split: int = 50
    n_basis: int = 10
    n_triples: int = 20
    containment_samples: int = 1000
    oracle_grids: List[int] = field(default_factory=lambda: [256, 512])
    ladder: List[int] = field(default_factory=lambda: [64, 128, 256, 512])
    bump_nodes: int = 32

    parallel: int = 1
    out: str = "runs"
    sabotage: bool = False

    def __post_init__(self):
        if not self.anchors:
            raise InputFormatError("config field 'anchors': at least one anchor is needed")
        for name in ("radius", "eps", "tol", "branch_tol"):
            if not getattr(self, name) > 0:
                raise InputFormatError(f"config field '{name}' must be positive")
        if not 0.0 < self.eps < 1.0:
            raise InputFormatError("config field 'eps' must lie in (0, 1)")
        if not 0.0 < self.radius < 1.0:
            raise InputFormatError("config field 'radius' must lie in (0, 1)")
        if self.delta is not None and not 0.0 < self.delta <= 1.0:
            raise InputFormatError("config field 'delta' must lie in (0, 1]")
        if not 0.0 < self.nu <= ADMISSIBLE_NU + 1e-15:
            raise InputFormatError("config field 'nu' must lie in (0, 2 - sqrt 3]")
        for name in ("dim", "grid_nr", "grid_ntheta", "radial_factor", "nmax", "n_samples",
                     "n_pairs", "n_fields", "n_sequences", "n_split", "n_basis", "n_triples", "containment_samples",
                     "bump_nodes", "parallel"):
            if getattr(self, name) < 1:
                raise InputFormatError(f"config field '{name}' must be at least 1")
        for name in ("oracle_grids", "ladder"):
            grids = getattr(self, name)
            if not grids or any(not isinstance(n, int) or n < 1 for n in grids):
                raise InputFormatError(f"config field '{name}' must be a nonempty list of positive grid sizes")
        if self.contour_q < 8:
            raise InputFormatError("config field 'contour_q' must be at least 8")
        if self.interpolation not in INTERPOLATIONS:
            raise InputFormatError(f"config field 'interpolation' must be one of {INTERPOLATIONS}")
        if self.far_field not in FAR_FIELDS:
            raise InputFormatError(f"config field 'far_field' must be one of {FAR_FIELDS}")
        kind = self.density.get("kind") if isinstance(self.density, dict) else None
        if kind not in DENSITY_KINDS:
            raise InputFormatError(f"config field 'density.kind' must be one of {DENSITY_KINDS}")
        if kind == "file" and not self.density.get("path"):
            raise InputFormatError("config field 'density.path' is required for a file density")

    # ==========================================================================
    # Construction
    # ==========================================================================

    @classmethod
    def from_dict(cls, data: Dict[str, Any], where: str = "<config>") -> "RunConfig":
        if not isinstance(data, dict):
            raise InputFormatError(f"{where}: expected a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InputFormatError(f"{where}: unknown config field '{unknown[0]}'")
        try:
            return cls(**data)
        except InputFormatError as e:
            raise InputFormatError(f"{where}: {e}") from None
        except (TypeError, ValueError) as e:
            raise InputFormatError(f"{where}: {e}") from e

    def override(self, **changes: Any) -> "RunConfig":
        """New config with every non-None change applied."""
        changes = {k: v for k, v in changes.items() if v is not None}
        if not changes:
            return self
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode("utf-8")).hexdigest()

    # ==========================================================================
    # Pipeline objects
    # ==========================================================================

    def to_quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(
            radial_factor=self.radial_factor,
            interpolation=self.interpolation,
            far_field=self.far_field,
            parallel=self.parallel,
            sabotage=self.sabotage,
        )

    def to_options(self) -> PipelineOptions:
        return PipelineOptions(
            n_r=self.grid_nr,
            n_theta=self.grid_ntheta,
            quadrature=self.to_quadrature(),
            contour_q=self.contour_q,
            nmax=self.nmax,
            tail_tol=self.tol,
            branch_tol=self.branch_tol,
        )

    def region(self) -> RegionSpec:
        anchors = [complex(a[0], a[1]) for a in self.anchors]
        return RegionSpec.from_anchors(anchors, self.radius)

    def chain(self) -> FiniteSequence:
        pairs = self.sequence if self.sequence is not None else self.anchors
        return parse_sequence(pairs, where="config field 'sequence'")

    def build_density(self, region: Optional[RegionSpec] = None) -> Density:
        region = self.region() if region is None else region
        spec = self.density
        kind = spec["kind"]
        value = np.ones(self.dim, dtype=complex)
        if "value" in spec:
            try:
                raw = np.asarray(spec["value"], dtype=float).reshape(-1, 2)
                value = np.broadcast_to(raw[:, 0] + 1j * raw[:, 1], (self.dim,)).copy()
            except (TypeError, ValueError):
                raise InputFormatError(
                    f"config field 'density.value' must be one [re, im] pair or {self.dim} of them"
                ) from None
        if kind == "zero":
            return Density.zero(region, self.dim)
        if kind in ("constant", "indicator"):
            return Density.constant(value if kind == "constant" else np.ones(self.dim), region)
        if kind == "smooth":
            def smooth(z):
                return (np.exp(-np.abs(z) ** 2) * (1.0 + z))[..., None] * value

            return Density(smooth, self.dim, region)
        if kind == "bump":
            return Density.bump(region, value)
        h = load_grid_field(spec["path"])
        if h.dim != self.dim:
            raise InputFormatError(f"{spec['path']}: field has dim {h.dim}, config has {self.dim}")
        return Density.from_grid(h, region, self.interpolation)


DEFAULT_CONFIG = RunConfig()


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return DEFAULT_CONFIG
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise InputFormatError(f"{path}: line {e.lineno}: {e.msg}") from e
    except OSError as e:
        raise InputFormatError(f"{path}: {e}") from e
    cfg = RunConfig.from_dict(data, where=path)
    logger.info("loaded config %s (digest %s)", path, cfg.digest[:12])
    return cfg


def save_config(cfg: RunConfig, path: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(cfg.to_dict()))
        fh.write("\n")
