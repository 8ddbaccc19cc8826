"""Modular Groebner-basis ideal operations: quotients, saturations, double
ideal quotients, prime-divisor tests and intermediate primary decomposition
over Q and prime fields."""

from .errors import (
    DeadlineExceeded,
    HypothesisViolated,
    InvalidMIS,
    ModdiqError,
    ModularFailure,
    NotWeakPermissible,
    ParseError,
    UnitIdeal,
)
from .groebner import GroebnerBasis, Ideal, buchberger, is_reduced_gb, normal_form
from .polycore import GREVLEX, LEX, MonomialOrder, Poly, Ring, coeff_norm, reduce_mod_p

__version__ = "0.1.0"

__all__ = [
    "DeadlineExceeded", "HypothesisViolated", "InvalidMIS", "ModdiqError", "ModularFailure",
    "NotWeakPermissible", "ParseError", "UnitIdeal", "GroebnerBasis", "Ideal", "buchberger",
    "is_reduced_gb", "normal_form", "GREVLEX", "LEX", "MonomialOrder", "Poly", "Ring",
    "coeff_norm", "reduce_mod_p",
]
