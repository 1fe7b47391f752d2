"""Explicit boundary post-processing applied after each SSPRK stage.

Four mechanisms: slip projection (momentum normal component removed),
Godunov non-reflecting (exact Riemann half-problem against a far-field
state), characteristic non-reflecting (Riemann-invariant proxies under a
locally-isentropic assumption), and strong Dirichlet replacement.  Nodes on
a slip/non-reflecting interface apply slip first, then the non-reflecting
update; Dirichlet replacement always wins last.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from . import gas, riemann
from .errors import AdmissibilityError, ConfigError, VacuumError

__all__ = [
    "slip_project",
    "godunov_postprocess",
    "characteristic_postprocess",
    "dirichlet_postprocess",
    "check_dirichlet_admissibility",
    "apply_all",
]

_NR_IDS = {"godunov": K.NR_GODUNOV, "characteristic": K.NR_CHARACTERISTIC}


def slip_project(u, n_s):
    """Remove the momentum component along the slip normal; rho, E unchanged."""
    u = np.asarray(u, dtype=float)
    n_s = np.asarray(n_s, dtype=float)
    out = u.copy()
    mom = u[..., 1:-1]
    mn = np.sum(mom * n_s, axis=-1)
    out[..., 1:-1] = mom - mn[..., None] * n_s
    return out


def godunov_postprocess(u, u_far, n_nr, law):
    """Exact-Riemann non-reflecting update: sample the half-problem at x=0.

    The interior state is the left datum, the far-field the right datum,
    along the outward normal; the result is admissible by construction.
    """
    fan = riemann.solve_exact(u, u_far, n_nr, law)
    return riemann.sample_at_zero(fan, u, u_far, n_nr, law)


def characteristic_postprocess(u, u_far, n_nr, law):
    """Characteristic non-reflecting update of a single state.

    Supersonic inflow returns the far state, supersonic outflow returns the
    interior state; the subsonic regimes impose the incoming Riemann-proxy
    invariants from the far state and keep the outgoing ones.
    """
    gas.require_admissible(u, "characteristic postprocess")
    gas.require_admissible(u_far, "characteristic far state")
    w = len(np.asarray(u))
    u_loc = np.array(u, dtype=float)
    K._characteristic_nr(u_loc, np.asarray(u_far, dtype=float),
                         np.asarray(n_nr, dtype=float), law.gamma, w)
    return u_loc


def dirichlet_postprocess(u, u_dirichlet):
    """Strong replacement by the prescribed state."""
    _ = u
    return np.array(u_dirichlet, dtype=float)


def check_dirichlet_admissibility(bmap, law):
    """Validate far-field data for the characteristic method at setup.

    Requires (gamma-1)/2 * Vn <= a for every non-reflecting node normal;
    violations are configuration errors, not runtime ones.
    """
    if bmap.n_bnodes == 0 or not np.any(bmap.has_nr):
        return
    sel = bmap.has_nr
    states = bmap.nr_states[sel]
    if not np.all(gas.is_admissible(states)):
        raise ConfigError("non-reflecting far-field state is not admissible")
    rho, v, p = gas.to_primitive(states, law)
    a = np.sqrt(law.gamma * p / rho)
    vn = np.sum(v * bmap.n_nr[sel], axis=-1)
    if np.any(0.5 * (law.gamma - 1.0) * vn > a):
        raise ConfigError(
            "far-field state violates the characteristic admissibility "
            "condition (gamma-1)/2 Vn <= a"
        )


def apply_all(u, bmap, t_stage, law, nr_method="characteristic", m=None):
    """Post-process all boundary nodes of a stage field in place.

    Returns the mass-weighted total state change sum_i m_i (U_i' - U_i)
    over the boundary nodes (zeros when no masses are supplied), which the
    run ledger uses to account for non-conservative boundary updates.
    """
    if nr_method not in _NR_IDS:
        raise ConfigError(f"unknown non-reflecting method {nr_method!r}")
    w = u.shape[1]
    if bmap.n_bnodes == 0:
        return np.zeros(w)
    before = u[bmap.nodes].copy() if m is not None else None
    dir_states = (
        bmap.dirichlet_states(t_stage)
        if np.any(bmap.has_dirichlet)
        else np.zeros((bmap.n_bnodes, w))
    )
    err = np.zeros(bmap.n_bnodes, dtype=np.uint8)
    K.boundary_postprocess_kernel(
        u, bmap.nodes, bmap.has_slip, bmap.n_slip, bmap.has_nr, bmap.n_nr,
        bmap.nr_states, bmap.has_dirichlet, dir_states, _NR_IDS[nr_method],
        law.gamma, err,
    )
    if err.any():
        raise VacuumError(
            f"Godunov boundary update generated vacuum at {int(err.sum())} node(s)"
        )
    if m is None:
        return np.zeros(w)
    delta = (m[bmap.nodes, None] * (u[bmap.nodes] - before)).sum(axis=0)
    if not np.all(gas.is_admissible(u[bmap.nodes])):
        raise AdmissibilityError("boundary post-processing produced an inadmissible state")
    return delta
