"""The L_K operator: small-width pieces, their assembly and the exterior decomposition."""
from .assembly import AssembledOperator, assemble_general, assemble_high_separation
from .decomposition import ExteriorDecomposition, exterior_decomposition
from .diagnostics import OscillationReport, continuity_report
from .regions import Density, RegionSpec
from .small_width import (
    DEFAULT_OPTIONS,
    LaurentOperatorData,
    PipelineOptions,
    SmallWidthOperator,
    build_small_width,
    ek_solve,
    h_representation,
    laurent_split,
    pullback_density,
    small_width_eval,
)

__all__ = [
    "AssembledOperator",
    "DEFAULT_OPTIONS",
    "Density",
    "ExteriorDecomposition",
    "LaurentOperatorData",
    "OscillationReport",
    "PipelineOptions",
    "RegionSpec",
    "SmallWidthOperator",
    "assemble_general",
    "assemble_high_separation",
    "build_small_width",
    "continuity_report",
    "ek_solve",
    "exterior_decomposition",
    "h_representation",
    "laurent_split",
    "pullback_density",
    "small_width_eval",
]
