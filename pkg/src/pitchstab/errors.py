"""Exception taxonomy shared by the library and the CLI exit-code mapping."""


class ValidationError(ValueError):
    """Bad inputs, malformed configs, or violated structural invariants."""


class NumericalError(RuntimeError):
    """Numerical failure: divergence, non-convergence, singular systems."""


class InsufficientExcitationError(NumericalError):
    """Identification data does not excite the system enough to solve for it."""
