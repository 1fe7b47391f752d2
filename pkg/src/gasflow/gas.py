"""State algebra for the ideal-gas (gamma-law) compressible flow equations.

Conserved states are stored as arrays with trailing axis ``(rho, m_1..m_d, E)``
of width ``d + 2``.  All functions broadcast over leading axes, so they accept
a single state ``(d+2,)`` or a nodal field ``(n, d+2)`` alike.

A state is admissible when ``rho > 0`` and the internal energy
``eps = E - |m|^2 / (2 rho)`` is positive.  Every thermodynamic function below
requires an admissible input; ``check=False`` skips the (vectorised) guard for
hot paths that have already validated their data.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import AdmissibilityError

__all__ = [
    "GasLaw",
    "PrimitiveState",
    "Regime",
    "internal_energy",
    "specific_internal_energy",
    "velocity",
    "is_admissible",
    "require_admissible",
    "pressure",
    "sound_speed",
    "flux",
    "from_primitive",
    "to_primitive",
    "harten_entropy_and_gradient",
    "specific_entropy_functionals",
    "characteristic_quantities",
    "classify_regime",
]


@dataclass(frozen=True)
class GasLaw:
    """Ideal gas law p = (gamma - 1) rho e.

    The ratio of specific heats must lie in (1, 3]; the upper bound is needed
    by the characteristic boundary treatment.
    """

    gamma: float = 1.4

    def __post_init__(self):
        if not 1.0 < self.gamma <= 3.0:
            raise AdmissibilityError(f"gamma must be in (1, 3], got {self.gamma}")


@dataclass(frozen=True)
class PrimitiveState:
    """Primitive description (rho, velocity, pressure) of a single state."""

    rho: float
    vel: np.ndarray
    pres: float


class Regime(str, Enum):
    SUPERSONIC_INFLOW = "supersonic_inflow"
    SUBSONIC_INFLOW = "subsonic_inflow"
    SUBSONIC_OUTFLOW = "subsonic_outflow"
    SUPERSONIC_OUTFLOW = "supersonic_outflow"


def _split(u):
    u = np.asarray(u, dtype=float)
    return u[..., 0], u[..., 1:-1], u[..., -1]


def internal_energy(u):
    """eps(u) = E - |m|^2 / (2 rho)."""
    rho, mom, ener = _split(u)
    return ener - 0.5 * np.sum(mom * mom, axis=-1) / rho


def specific_internal_energy(u):
    """e(u) = eps(u) / rho."""
    rho, _, _ = _split(u)
    return internal_energy(u) / rho


def velocity(u):
    rho, mom, _ = _split(u)
    return mom / rho[..., None]


def is_admissible(u, rho_floor=0.0, eint_floor=0.0):
    """True where rho > rho_floor and eps > eint_floor.

    The floors are diagnostic knobs only; states are never clipped.
    """
    rho, _, _ = _split(u)
    return (rho > rho_floor) & (internal_energy(u) > eint_floor)

def require_admissible(u, context=""):
    ok = is_admissible(u)
    if not np.all(ok):
        bad = int(np.count_nonzero(~np.atleast_1d(ok)))
        where = f" ({context})" if context else ""
        raise AdmissibilityError(f"{bad} non-admissible state(s){where}")


def pressure(u, law, check=True):
    """p = (gamma - 1) * eps(u); strictly positive on admissible inputs."""
    if check:
        require_admissible(u, "pressure")
    return (law.gamma - 1.0) * internal_energy(u)


def sound_speed(u, law, check=True):
    """a = sqrt(gamma p / rho)."""
    rho, _, _ = _split(u)
    return np.sqrt(law.gamma * pressure(u, law, check=check) / rho)


def flux(u, law, check=True):
    """Euler flux, shape (..., d+2, d): rows (m, v (x) m + p I, v (E + p))."""
    if check:
        require_admissible(u, "flux")
    rho, mom, ener = _split(u)
    d = mom.shape[-1]
    p = (law.gamma - 1.0) * internal_energy(u)
    v = mom / rho[..., None]
    out = np.empty(u.shape[:-1] + (d + 2, d))
    out[..., 0, :] = mom
    out[..., 1 : d + 1, :] = v[..., :, None] * mom[..., None, :]
    for k in range(d):
        out[..., 1 + k, k] += p
    out[..., d + 1, :] = v * (ener + p)[..., None]
    return out


def from_primitive(rho, vel, pres, law):
    """Conserved state from (rho, velocity, pressure); broadcasts leading axes."""
    rho = np.asarray(rho, dtype=float)
    vel = np.asarray(vel, dtype=float)
    pres = np.asarray(pres, dtype=float)
    d = vel.shape[-1]
    shape = np.broadcast_shapes(rho.shape, vel.shape[:-1], pres.shape)
    u = np.empty(shape + (d + 2,))
    u[..., 0] = rho
    u[..., 1 : d + 1] = rho[..., None] * vel
    u[..., d + 1] = pres / (law.gamma - 1.0) + 0.5 * rho * np.sum(vel * vel, axis=-1)
    return u


def to_primitive(u, law, check=True):
    """(rho, velocity, pressure) arrays from a conserved state."""
    rho, mom, _ = _split(u)
    return rho, mom / rho[..., None], pressure(u, law, check=check)


def harten_entropy_and_gradient(u, law, check=True):
    """Entropy eta = (rho^2 eps)**(1/(gamma+1)) and its state gradient.

    grad(rho^2 eps) = (2 rho E - |m|^2 / 2, -rho m, rho^2); the chain rule
    gives eta' = eta / ((gamma+1) rho^2 eps) * grad(rho^2 eps).
    """
    if check:
        require_admissible(u, "harten entropy")
    rho, mom, ener = _split(u)
    m2 = np.sum(mom * mom, axis=-1)
    q = rho * rho * ener - 0.5 * rho * m2  # rho^2 eps
    expo = 1.0 / (law.gamma + 1.0)
    eta = q**expo
    scale = expo * eta / q
    grad = np.empty_like(np.asarray(u, dtype=float))
    grad[..., 0] = scale * (2.0 * rho * ener - 0.5 * m2)
    grad[..., 1:-1] = -scale[..., None] * rho[..., None] * mom
    grad[..., -1] = scale * rho * rho
    return eta, grad


def specific_entropy_functionals(u, law, check=True):
    """(Phi, S, eps) with Phi = eps rho^-gamma and S = p rho^-gamma = (gamma-1) Phi."""
    if check:
        require_admissible(u, "entropy functionals")
    rho, _, _ = _split(u)
    eps = internal_energy(u)
    phi = eps * rho ** (-law.gamma)
    return phi, (law.gamma - 1.0) * phi, eps


def characteristic_quantities(u, n, law, check=True):
    """Riemann-invariant proxies along unit direction n.

    Returns (C1, C3, S, Vn, Vperp, a) with C1 = Vn - 2a/(gamma-1) and
    C3 = Vn + 2a/(gamma-1); Vperp is the velocity minus its normal part.
    """
    if check:
        require_admissible(u, "characteristic quantities")
    n = np.asarray(n, dtype=float)
    rho, mom, _ = _split(u)
    v = mom / rho[..., None]
    p = pressure(u, law, check=False)
    a = np.sqrt(law.gamma * p / rho)
    vn = np.sum(v * n, axis=-1)
    vperp = v - vn[..., None] * n
    two_over = 2.0 / (law.gamma - 1.0)
    c1 = vn - two_over * a
    c3 = vn + two_over * a
    s = p * rho ** (-law.gamma)
    return c1, c3, s, vn, vperp, a


def classify_regime(u, n, law, check=True):
    """One of the four inflow/outflow regimes along outward unit normal n.

    Ties follow the non-strict inequalities of the defining table:
    Vn = -a is subsonic inflow, Vn = 0 is subsonic outflow, Vn = +a is
    supersonic outflow.
    """
    _, _, _, vn, _, a = characteristic_quantities(u, n, law, check=check)
    vn = float(vn)
    a = float(a)
    if vn < 0.0:
        return Regime.SUPERSONIC_INFLOW if a < -vn else Regime.SUBSONIC_INFLOW
    return Regime.SUPERSONIC_OUTFLOW if a <= vn else Regime.SUBSONIC_OUTFLOW
