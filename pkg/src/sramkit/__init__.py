"""Workflow for aggregated selection data over families of binary polytopes.

Three steps: check whether data admits a separable representative agent
model (a consistency LP), fit the closest representable assignment when
it does not (a mixed binary program plus a recovery LP), and bound any
functional of a new, unseen instance over all models consistent with the
data (a pair of mixed binary programs).
"""

from .config import DEFAULT_TOL, Tolerances
from .model import (
    Dataset,
    DimensionError,
    InstancePattern,
    Observation,
    PolytopeFamily,
    ReducedCostView,
    Violation,
    reduced_costs,
    validate_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOL",
    "Tolerances",
    "PolytopeFamily",
    "InstancePattern",
    "Observation",
    "Dataset",
    "ReducedCostView",
    "Violation",
    "DimensionError",
    "validate_dataset",
    "reduced_costs",
    "__version__",
]
