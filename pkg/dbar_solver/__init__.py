"""
dbar_solver - bounded solution operators for the dbar-equation on the unit disk.

    dF/dzbar = f / (1 - |z|^2),  f supported on a quasi-interpolating set K.

The package is layered bottom-up: disk geometry, sequences and their
characteristic, finite Blaschke products, interpolation bases, the Cauchy
transform, and finally the operator pipeline in `lk_pipeline`.
"""

__version__ = "1.0.0"
