"""Numerical lab for parabolic flowers of tangent-to-identity germs x_i(1 + x^M(a_i + A_i))."""
from .germ import Germ, Polynomial, germ_from_terms, normalize, evaluate, evaluate_inverse, orbit
from .lattice import LatticeData, lattice_data
from .domains import PetalSpec, SectorSpec, FittedConstants, CalibrationConfig, calibrate_petal, calibrate_backward

__all__ = [
    "Germ",
    "Polynomial",
    "germ_from_terms",
    "normalize",
    "evaluate",
    "evaluate_inverse",
    "orbit",
    "LatticeData",
    "lattice_data",
    "PetalSpec",
    "SectorSpec",
    "FittedConstants",
    "CalibrationConfig",
    "calibrate_petal",
    "calibrate_backward",
]
__version__ = "0.1.0"
