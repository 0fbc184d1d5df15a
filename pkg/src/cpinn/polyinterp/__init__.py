from .interpolant import (
    Interpolant,
    LocalPolynomial,
    build_interpolant,
    cell_nodes,
    interpolate_cell,
    l2h1_error,
    mixed_lebesgue_norm,
    mixed_norm_error,
    sup_error,
)
from .rates import RateStudy, rate_fit
from .smoothness import (
    BesovClass,
    Bump,
    bump,
    modulus_of_smoothness,
    predicted_exponents,
    predicted_level_slope,
)

__all__ = [
    "BesovClass",
    "Bump",
    "Interpolant",
    "LocalPolynomial",
    "RateStudy",
    "build_interpolant",
    "cell_nodes",
    "bump",
    "interpolate_cell",
    "l2h1_error",
    "mixed_lebesgue_norm",
    "mixed_norm_error",
    "modulus_of_smoothness",
    "predicted_exponents",
    "predicted_level_slope",
    "rate_fit",
    "sup_error",
]
