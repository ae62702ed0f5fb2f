"""Transfer matrices, lattice dynamics and transport exponents for one-dimensional Dirac operators."""

from .algebra import MatClass, classify, operator_norm, rotation_angle
from .transfer import DiracParams, NumericalGuardError, cocycle, window_norm
from .lattice import build_operator, abel_moment_direct
from .greens import abel_moment_green, borel_transform, green_pair

__version__ = "0.1.0"

__all__ = [
    "MatClass", "classify", "operator_norm", "rotation_angle",
    "DiracParams", "NumericalGuardError", "cocycle", "window_norm",
    "build_operator", "abel_moment_direct",
    "abel_moment_green", "borel_transform", "green_pair",
]
