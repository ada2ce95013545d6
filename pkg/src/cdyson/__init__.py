"""Complex-time Dyson series, Fock-space toolkit and Gell-Mann-Low ratios for finite models."""
__version__ = "0.1.0"

from .contour import Contour, QuadratureRule, gml_contour, integrate, order_compare
from .dyson import (
    C0Certificate,
    DysonSeries,
    InteractionSystem,
    certify_c0,
    compute_Vn,
    dyson_series,
    exact_propagator,
    group_law_defects,
    majorant,
    propagate,
)
from .errors import *  # noqa: F401,F403
from .gml import GmlSweep, ground_state, gml_ratio, gml_sweep
from .operator_core import HermitianOperator, eig_hermitian, evolve, spectral_projector

__all__ = [
    "__version__", "Contour", "QuadratureRule", "gml_contour", "integrate", "order_compare",
    "C0Certificate", "DysonSeries", "InteractionSystem", "certify_c0", "compute_Vn", "dyson_series",
    "exact_propagator", "group_law_defects", "majorant", "propagate", "GmlSweep", "ground_state",
    "gml_ratio", "gml_sweep", "HermitianOperator", "eig_hermitian", "evolve", "spectral_projector",
]
