"""Expected Threat (xT) toolchain.

Builds xT Markov models from football event data, quantifies their model
error (concentration bounds, bootstrap simulation, lognormal fit), and
turns the fitted error law into planning rules and validated player
ratings.
"""

__version__ = "0.1.0"

from xtq.errors import (
    CohortError,
    FitError,
    InfeasibleModelError,
    ParseError,
    PlanError,
    XtqError,
)

__all__ = [
    "XtqError",
    "ParseError",
    "InfeasibleModelError",
    "FitError",
    "PlanError",
    "CohortError",
    "__version__",
]
