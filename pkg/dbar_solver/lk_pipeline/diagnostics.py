"""Empirical rho-continuity of L_K f: oscillation per pseudohyperbolic scale and seam jumps."""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from ..disk_geometry import mobius_shift
from .assembly import AssembledOperator
from .regions import Density
from .small_width import SmallWidthOperator

logger = logging.getLogger(__name__)

SEAM_STEP = 1e-6


@dataclass
class OscillationReport:
    scales: List[float] = field(default_factory=list)
    oscillation: List[float] = field(default_factory=list)
    seam_jump: float = 0.0
    seam_tolerance: float = 0.0
    slack: float = 1e-9

    @property
    def monotone(self) -> bool:
        osc = self.oscillation
        return all(b <= a * (1.0 + 1e-6) + self.slack for a, b in zip(osc, osc[1:]))

    @property
    def seam_ok(self) -> bool:
        return self.seam_jump <= self.seam_tolerance

    def to_dict(self) -> dict:
        return {
            "scales": self.scales,
            "oscillation": self.oscillation,
            "monotone": self.monotone,
            "seam_jump": self.seam_jump,
            "seam_tolerance": self.seam_tolerance,
            "slack": self.slack,
        }


def _base_points(op: Union[AssembledOperator, SmallWidthOperator], n_random: int, spread: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Anchors, points within `spread` of random anchors, and points of D_0.9."""
    anchors = op.region.anchors
    n_near = n_random - n_random // 2
    near_rad = spread * np.sqrt(rng.uniform(0.0, 1.0, n_near))
    near = mobius_shift(anchors[rng.integers(0, anchors.size, n_near)],
                        near_rad * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n_near)))
    n_free = n_random // 2
    rad = 0.9 * np.sqrt(rng.uniform(0.0, 1.0, n_free))
    free = rad * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n_free))
    return np.concatenate([op.sequence.points, near, free])


def continuity_report(a: Union[AssembledOperator, SmallWidthOperator], f: Density, n_scales: int = 6,
                      top_scale: Optional[float] = None, n_random: int = 16,
                      rng: Optional[np.random.Generator] = None) -> OscillationReport:
    """max |L f(z) - L f(z')| over rho(z, z') = top_scale 2^-k, one fixed direction per base point.

    top_scale defaults to the smallest radius of the support, where L f varies most.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if top_scale is None:
        top_scale = float(np.min(a.region.radii))
    report = OscillationReport()
    base = _base_points(a, n_random, 2.0 * top_scale, rng)
    direction = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, base.size))
    at_base = a.evaluate(f, base)
    for k in range(n_scales):
        s = top_scale * 2.0 ** (-k)
        partner = mobius_shift(base, s * direction)
        diff = np.linalg.norm(a.evaluate(f, partner) - at_base, axis=-1)
        report.scales.append(s)
        report.oscillation.append(float(diff.max()) if diff.size else 0.0)

    jumps = [0.0]
    tolerances = [0.0]
    floor = report.slack
    for swo, g in a.iter_small_width(f):
        bound = swo.bind(g)
        # nearest-node lookups resolve E_K f to about one pullback cell
        floor = max(floor, 2.0 * swo.c_eps / swo.options.n_r * bound.scale)
        rho = swo.contour_radius
        angles = np.exp(2j * np.pi * np.arange(16) / 16)
        for n in range(len(swo.sequence)):
            inside = swo.level.local_inverse(n, rho * (1.0 - SEAM_STEP) * angles)
            outside = swo.level.local_inverse(n, rho * (1.0 + SEAM_STEP) * angles)
            jump = np.linalg.norm(a.evaluate(f, inside) - a.evaluate(f, outside), axis=-1)
            jumps.append(float(jump.max()))
        tolerances.append(float(np.max(bound.agreement_tolerance(np.array([rho])))))
    report.slack = floor
    report.seam_jump = max(jumps)
    # the seam step itself moves L f by O(step |grad|)
    report.seam_tolerance = max(tolerances) + 1e3 * SEAM_STEP * max(report.oscillation + [0.0])
    logger.info("continuity: oscillation %s, seam jump %.3g", report.oscillation, report.seam_jump)
    return report
