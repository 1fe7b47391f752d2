"""Explicit hyperbolic update: graph viscosity, convex limiting, SSPRK(3,3).

One forward-Euler step runs six row-parallel passes over the CSR sparsity:

1. per-node primitives/fluxes/entropy data,
2. entropy-production indicator,
3. graph-viscosity upper triangle (one wavespeed bound per interior pair,
   two for boundary/boundary pairs), mirrored lower triangle, negative
   row-sum diagonal, time-step candidates,
4. fused low-order update + bar-state bounds + high-order flux sums,
5. limiter candidates P_ij built with the approximate mass-matrix inverse,
6. per-edge limiters, symmetrised by min, applied over the configured
   number of passes (P shrinks by (1 - l) between passes).

The SSPRK(3,3) driver combines three Euler stages with the classic 3/4-1/4
and 1/3-2/3 convex weights and post-processes boundary conditions after each
stage at that stage's collocation time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import InvariantViolationError, MeshError

__all__ = [
    "HyperbolicConfig",
    "Workspace",
    "compute_indicator",
    "compute_low_order_viscosity_and_dt",
    "low_order_update_and_bounds",
    "high_order_fluxes_and_corrections",
    "compute_limiters",
    "apply_limited_update",
    "forward_euler_step",
    "ssprk33_combine",
    "ssprk33_step",
]

_INDICATORS = ("entropy_commutator", "constant_one", "constant_zero")


@dataclass
class HyperbolicConfig:
    cfl: float = 0.9
    limiter_passes: int = 2
    indicator: str = "entropy_commutator"
    consistent_mass_correction: bool = True
    validate: str = "off"  # off | record | strict
    conservation_tol: float = 1e-11
    bounds_tol: float = 1e-10

    def __post_init__(self):
        if self.cfl <= 0:
            raise MeshError("cfl must be positive")
        if self.limiter_passes < 1:
            raise MeshError("limiter passes must be >= 1")
        if self.indicator not in _INDICATORS:
            raise MeshError(f"unknown indicator {self.indicator!r}")


class Workspace:
    """Preallocated per-stage buffers plus validation statistics."""

    def __init__(self, graph):
        n = graph.n_nodes
        nnz = graph.nnz
        d = graph.dim
        w = d + 2
        self.graph = graph
        self.prim = np.empty((n, d + 3))
        self.pz = np.empty(n)
        self.phi = np.empty(n)
        self.eta = np.empty(n)
        self.deta = np.empty((n, w))
        self.alpha = np.empty(n)
        self.d_low = np.empty(nnz)
        self.d_high = np.empty(nnz)
        self.dt_cand = np.empty(n)
        self.u_low = np.empty((n, w))
        self.f_high = np.empty((n, w))
        self.bounds = np.empty((n, 3))
        self.p_ij = np.empty((nnz, w))
        self.l_raw = np.empty(nnz)
        self.l_sym = np.empty(nnz)
        self.u_stage = np.empty((n, w))
        self.scan2 = np.empty((n, 2))
        self.scan3 = np.empty((n, 3))
        self.zero_b = np.zeros(nnz)
        self.stats = {}
        self.reset_stats()

    def reset_stats(self):
        self.stats = {
            "min_rho": np.inf,
            "min_eint": np.inf,
            "max_bounds_violation": 0.0,
            "max_conservation_residual": 0.0,
            "steps": 0,
        }


def _precompute(u, graph, law, cfg, ws):
    need_entropy = cfg.indicator == "entropy_commutator"
    K.node_precompute(u, law.gamma, need_entropy, ws.prim, ws.pz,
                      ws.phi, ws.eta, ws.deta)


def compute_indicator(u, graph, law, cfg, ws, precomputed=False):
    """Entropy-production indicator alpha per node (or its forced override)."""
    if not precomputed:
        _precompute(u, graph, law, cfg, ws)
    if cfg.indicator == "constant_one":
        ws.alpha[:] = 1.0
    elif cfg.indicator == "constant_zero":
        ws.alpha[:] = 0.0
    else:
        K.indicator_kernel(u, ws.prim, graph.indptr, graph.indices, graph.cij,
                           ws.deta, ws.eta, ws.alpha)
    return ws.alpha


def compute_low_order_viscosity_and_dt(u, graph, law, cfg, ws, precomputed=False):
    """Graph viscosity d^L (symmetric, negative row-sum diagonal) and tau_n."""
    if graph.n_nodes == 0:
        raise MeshError("empty mesh")
    if not precomputed:
        _precompute(u, graph, law, cfg, ws)
    K.dij_upper_kernel(graph.indptr, graph.indices, graph.tpos, graph.cnorm,
                       graph.nij, ws.prim, ws.pz, graph.is_boundary, law.gamma,
                       ws.d_low)
    K.dij_mirror_and_dt(graph.indptr, graph.indices, graph.diag_pos, graph.tpos,
                        graph.m, ws.d_low, ws.dt_cand)
    tau = cfg.cfl * float(np.min(ws.dt_cand))
    return ws.d_low, tau


def low_order_update_and_bounds(u, graph, tau, law, cfg, ws):
    """Low-order update, limiter bounds, and (fused) high-order flux sums.

    Fills ws.u_low, ws.bounds, ws.f_high and ws.d_high; the fusion mirrors
    the single row sweep of the reference flow chart.
    """
    K.low_high_kernel(u, ws.prim, ws.phi, graph.indptr, graph.indices, graph.cij,
                      ws.d_low, ws.alpha, graph.m, tau, ws.u_low, ws.f_high,
                      ws.d_high, ws.bounds)
    return ws.u_low, ws.bounds


def high_order_fluxes_and_corrections(u, graph, tau, cfg, ws):
    """Limiter candidates P_ij from the flux sums of the fused sweep."""
    bij = graph.bij if cfg.consistent_mass_correction else ws.zero_b
    K.pij_kernel(u, ws.f_high, ws.d_low, ws.d_high, bij, graph.tpos,
                 graph.indptr, graph.indices, graph.m, graph.lam, tau, ws.p_ij)
    return ws.p_ij


def compute_limiters(u_base, p_ij, bounds, graph, law, ws):
    """Symmetrised limiters for the current baseline and candidates."""
    K.limiter_kernel(u_base, p_ij, bounds, graph.indptr, graph.indices,
                     law.gamma, ws.l_raw)
    K.sym_min_kernel(ws.l_raw, graph.tpos, ws.l_sym)
    return ws.l_sym


def apply_limited_update(u_base, p_ij, l_sym, graph, ws, out=None):
    """u_base + lam_i sum_j l_ij P_ij into ``out`` (allocated if missing)."""
    if out is None:
        out = np.empty_like(u_base)
    K.apply_limited_kernel(u_base, p_ij, l_sym, graph.lam, graph.indptr,
                           graph.indices, out)
    return out


def _validate_stage(u_low, u_new, law, cfg, ws):
    K.admissibility_scan(u_low, ws.scan2)
    low_rho = float(ws.scan2[:, 0].min())
    low_e = float(ws.scan2[:, 1].min())
    K.admissibility_scan(u_new, ws.scan2)
    new_rho = float(ws.scan2[:, 0].min())
    new_e = float(ws.scan2[:, 1].min())
    ws.stats["min_rho"] = min(ws.stats["min_rho"], low_rho, new_rho)
    ws.stats["min_eint"] = min(ws.stats["min_eint"], low_e, new_e)
    if min(low_rho, low_e, new_rho, new_e) <= 0.0:
        raise InvariantViolationError(
            f"admissibility lost: min rho {min(low_rho, new_rho):.3e}, "
            f"min internal energy {min(low_e, new_e):.3e}"
        )
    K.bounds_violation_scan(u_new, ws.bounds, law.gamma, ws.scan3)
    scale = max(float(ws.bounds[:, 1].max()), 1e-30)
    viol = max(0.0, -float(ws.scan3.min())) / scale
    ws.stats["max_bounds_violation"] = max(ws.stats["max_bounds_violation"], viol)
    if cfg.validate == "strict" and viol > cfg.bounds_tol:
        raise InvariantViolationError(f"local bounds violated by {viol:.3e} (relative)")


def forward_euler_step(u, graph, law, cfg, ws, dt_override=None, dt_max=None):
    """One limited forward-Euler step; returns (u_new, tau).

    When ``dt_override`` is given (later SSPRK stages) the viscosities are
    still recomputed from the current state but the provided step size is
    used; ``dt_max`` caps the CFL step (end-of-run landing; smaller is safe).
    """
    _precompute(u, graph, law, cfg, ws)
    compute_indicator(u, graph, law, cfg, ws, precomputed=True)
    _, tau_cfl = compute_low_order_viscosity_and_dt(u, graph, law, cfg, ws,
                                                    precomputed=True)
    tau = tau_cfl if dt_override is None else float(dt_override)
    if dt_override is None and dt_max is not None and tau > dt_max:
        tau = float(dt_max)
    low_order_update_and_bounds(u, graph, tau, law, cfg, ws)
    high_order_fluxes_and_corrections(u, graph, tau, cfg, ws)

    # The apply kernel only touches row-local data from its baseline, so
    # pass 2 and later may update ws.u_stage in place.
    baseline = ws.u_low
    for p in range(cfg.limiter_passes):
        if p > 0:
            K.shrink_p_kernel(ws.p_ij, ws.l_sym)
        compute_limiters(baseline, ws.p_ij, ws.bounds, graph, law, ws)
        baseline = apply_limited_update(baseline, ws.p_ij, ws.l_sym, graph, ws,
                                        out=ws.u_stage)
    u_new = baseline.copy()
    if cfg.validate != "off":
        _validate_stage(ws.u_low, u_new, law, cfg, ws)
    return u_new, tau


def ssprk33_combine(u0, stage_fn):
    """Generic SSPRK(3,3) combination u^{n+1} from a stage map.

    ``stage_fn(state, stage_index)`` must return the forward-Euler update of
    ``state`` with the shared step size; stage_index is 0, 1, 2.  Exposed
    separately so the tableau algebra can be exercised on scalar ODEs.
    """
    w1 = stage_fn(u0, 0)
    w2 = 0.75 * u0 + 0.25 * stage_fn(w1, 1)
    return u0 / 3.0 + (2.0 / 3.0) * stage_fn(w2, 2)


def ssprk33_step(u, t, graph, bmap, law, cfg, ws, apply_bc, dt_override=None,
                 dt_max=None, recorder=None):
    """One SSPRK(3,3) step with per-stage boundary post-processing.

    ``apply_bc(state, t_stage)`` post-processes a stage in place and returns
    the mass-weighted state change it caused (for the conservation ledger).
    The step size is computed in stage 1 and reused for stages 2 and 3;
    collocation times are t+tau, t+tau/2, t+tau.
    """

    def stage(state, idx, tau):
        out, tau_used = forward_euler_step(state, graph, law, cfg, ws,
                                           dt_override=tau,
                                           dt_max=dt_max)
        if cfg.validate != "off" and bmap is not None and bmap.n_bnodes:
            _check_stage_conservation(state, out, tau_used, graph, bmap, law, cfg, ws)
        return out, tau_used

    s1, tau = stage(u, 0, dt_override)
    flux0 = _boundary_flux(u, bmap, law) if bmap is not None else 0.0
    d1 = apply_bc(s1, t + tau)
    w1 = s1

    flux1 = _boundary_flux(w1, bmap, law) if bmap is not None else 0.0
    s2, _ = stage(w1, 1, tau)
    w2 = 0.75 * u + 0.25 * s2
    d2 = apply_bc(w2, t + 0.5 * tau)

    flux2 = _boundary_flux(w2, bmap, law) if bmap is not None else 0.0
    s3, _ = stage(w2, 2, tau)
    u_new = u / 3.0 + (2.0 / 3.0) * s3
    d3 = apply_bc(u_new, t + tau)

    if recorder is not None:
        flux = tau * (flux0 / 6.0 + flux1 / 6.0 + (2.0 / 3.0) * flux2)
        post = d1 / 6.0 + (2.0 / 3.0) * d2 + d3
        recorder.add(flux, post)
    ws.stats["steps"] += 1
    return u_new, tau


def _boundary_flux(u, bmap, law):
    """sum_{boundary nodes} m_bnd f(U_i) n_i, one (d+2,) vector."""
    from . import gas

    if bmap.n_bnodes == 0:
        return np.zeros(u.shape[1])
    ub = u[bmap.nodes]
    fl = gas.flux(ub, law, check=False)
    contr = np.einsum("brk,bk->br", fl, bmap.n_bnd)
    return (bmap.m_bnd[:, None] * contr).sum(axis=0)


def _check_stage_conservation(u_in, u_out, tau, graph, bmap, law, cfg, ws):
    m = graph.m[:, None]
    total_in = (m * u_in).sum(axis=0)
    total_out = (m * u_out).sum(axis=0)
    resid = total_out + tau * _boundary_flux(u_in, bmap, law) - total_in
    # One normalizer for all components: a zero-mean momentum field must not
    # blow up the relative residual.
    scale = max(float(np.abs(m * u_in).sum(axis=0).max()), 1e-300)
    rel = float(np.max(np.abs(resid))) / scale
    ws.stats["max_conservation_residual"] = max(
        ws.stats["max_conservation_residual"], rel
    )
    if cfg.validate == "strict" and rel > cfg.conservation_tol:
        raise InvariantViolationError(
            f"per-stage conservation residual {rel:.3e} exceeds {cfg.conservation_tol:.1e}"
        )
