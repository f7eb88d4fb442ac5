"""Heat kernel oracles and derivative estimates on Damek-Ricci spaces."""

__version__ = "0.1.0"

from .geometry import SpaceParams
from .htype import HTypeAlgebra, InfeasibleDimensionError, build_htype

__all__ = ["SpaceParams", "HTypeAlgebra", "InfeasibleDimensionError", "build_htype", "__version__"]
