"""Exception hierarchy shared by all xtq modules."""


class XtqError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(XtqError):
    """Malformed input data (event files, model files, CSV ledgers)."""


class InfeasibleModelError(XtqError):
    """A transition matrix with ``max row sum >= 1``; xT values undefined."""

    def __init__(self, message, states=()):
        super().__init__(message)
        self.states = tuple(states)


class FitError(XtqError):
    """The error-law regression cannot be carried out on the given records."""


class PlanError(XtqError):
    """No admissible plan exists for the requested grid/data constraints."""


class CohortError(XtqError):
    """A player cohort too small or ill-formed for quartile analysis."""
