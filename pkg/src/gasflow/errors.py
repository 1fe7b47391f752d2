"""Exception types shared across the solver.

Exit-code mapping used by the CLI: ConfigError -> 2, SolverError -> 3,
InvariantViolationError / AdmissibilityError / VacuumError -> 4.
"""


class GasflowError(Exception):
    """Base class for all solver errors."""


class ConfigError(GasflowError):
    """Invalid configuration: unknown keys, bad values, inconsistent setup."""


class MeshError(GasflowError):
    """Degenerate or inconsistent mesh."""


class AdmissibilityError(GasflowError):
    """A state violates positivity of density or internal energy."""


class VacuumError(GasflowError):
    """Riemann data would generate vacuum; no positive intermediate pressure."""


class SolverError(GasflowError):
    """Iterative solver failed to converge."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = residual_history if residual_history is not None else []


class InvariantViolationError(GasflowError):
    """An internal invariant (conservation, local bounds, admissibility) failed."""
