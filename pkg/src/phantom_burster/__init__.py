"""Four-dimensional phantom-bursting model: geometry, reductions, folded-node analysis, MMO orbits and continuation."""

from .model import PAPER_PARAMETERS, DomainError, ParameterSet, check_hypotheses, geometry, x_sing
from .reductions import FieldTag, build_field
from .integrator import Tolerances, integrate, integrate_to_section

__version__ = "0.1.0"

__all__ = [
    "PAPER_PARAMETERS",
    "DomainError",
    "ParameterSet",
    "check_hypotheses",
    "geometry",
    "x_sing",
    "FieldTag",
    "build_field",
    "Tolerances",
    "integrate",
    "integrate_to_section",
    "__version__",
]
