"""Invariant-domain-preserving continuous-Galerkin compressible flow solver.

Subpackages follow the solver pipeline: gas-state algebra (gas), the exact
Riemann oracle and wavespeed bound (riemann), mesh/graph assembly (mesh),
the explicit limited hyperbolic step (hyperbolic), boundary post-processing
(boundary), the Crank-Nicolson viscous substep (parabolic), the Strang
driver and diagnostics (driver), and the scenario/CLI layer (scenarios,
config, cli).
"""

from .errors import (AdmissibilityError, ConfigError, GasflowError,
                     InvariantViolationError, MeshError, SolverError,
                     VacuumError)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "ConfigError",
    "GasflowError",
    "InvariantViolationError",
    "MeshError",
    "SolverError",
    "VacuumError",
    "__version__",
]
