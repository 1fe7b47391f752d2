"""Scenario library: meshes, initial data, boundary tables, references.

Each builder returns a fully wired RunSetup.  Scenario defaults follow the
published setups (Sod tube, traveling viscous shock verification, vortex
advection through non-reflecting boundaries, the 2D viscous shocktube
cavity at a desk-scale resolution, and an all-slip conservation box); every
number remains overridable through the configuration file.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import boundary as BC
from . import gas
from . import hyperbolic as HY
from . import mesh as MS
from . import parabolic as PB
from . import riemann
from .becker import BeckerProfile
from .driver import DiagnosticsConfig, StepContext
from .errors import ConfigError

__all__ = ["RunSetup", "scenario_initial_state", "SCENARIO_BUILDERS"]


@dataclass
class RunSetup:
    name: str
    mesh: object
    graph: object
    bmap: object
    law: object
    u0: np.ndarray
    hyp_cfg: HY.HyperbolicConfig
    nr_method: str
    t_final: float
    model: object = None
    op: object = None
    pbcs: object = None
    f_source: object = None
    diag: DiagnosticsConfig = None
    exact: object = None  # callable t -> nodal states
    extra: dict = None

    def context(self, solver_tol=1e-12, solver_maxit=500):
        ws = HY.Workspace(self.graph)
        return StepContext(
            graph=self.graph, bmap=self.bmap, law=self.law,
            hyp_cfg=self.hyp_cfg, ws=ws, nr_method=self.nr_method,
            model=self.model, op=self.op, pbcs=self.pbcs,
            f_source=self.f_source, solver_tol=solver_tol,
            solver_maxit=solver_maxit, mesh=self.mesh, t_final=self.t_final,
        )


def _hyp_cfg(cfg, default_cfl):
    return HY.HyperbolicConfig(
        cfl=cfg.cfl if cfg.cfl > 0 else default_cfl,
        limiter_passes=cfg.limiter_passes,
        indicator=cfg.indicator,
        consistent_mass_correction=cfg.consistent_mass_correction,
        validate="record" if cfg.debug_checks else "off",
    )


def _coef(value, default):
    return default if value < 0 else value


def _build_sod(cfg):
    law = gas.GasLaw(cfg.gamma)
    cells = cfg.cells if cfg.cells > 0 else 100
    msh = MS.build_structured_mesh(1, [(0.0, 1.0)], [cells])
    graph = MS.compute_b_matrix(MS.assemble_graph(msh))
    x = msh.coords[:, 0]
    left = x < 0.5
    rho = np.where(left, 1.0, 0.125)
    p = np.where(left, 1.0, 0.1)
    u0 = gas.from_primitive(rho, np.zeros((graph.n_nodes, 1)), p, law)
    u_l = gas.from_primitive(1.0, np.array([0.0]), 1.0, law)
    u_r = gas.from_primitive(0.125, np.array([0.0]), 0.1, law)
    bmap = MS.assemble_boundary_map(msh, graph, {
        "left": MS.BoundaryCondition("nonreflecting", u_l),
        "right": MS.BoundaryCondition("nonreflecting", u_r),
    })
    BC.check_dirichlet_admissibility(bmap, law)
    fan = riemann.solve_exact(u_l, u_r, np.array([1.0]), law)

    def exact(t, x_eval=x):
        if t <= 0:
            return u0.copy()
        return riemann.sample_fan(fan, u_l, u_r, np.array([1.0]), law,
                                  (x_eval - 0.5) / t)

    return RunSetup(
        name="sod", mesh=msh, graph=graph, bmap=bmap, law=law, u0=u0,
        hyp_cfg=_hyp_cfg(cfg, 0.9), nr_method=cfg.nonreflecting_method,
        t_final=cfg.t_final if cfg.t_final > 0 else 0.2,
        diag=DiagnosticsConfig(), exact=exact, extra={},
    )


def _build_becker(cfg):
    law = gas.GasLaw(cfg.gamma)
    nx = cfg.cells_x if cfg.cells_x > 0 else 64
    ny = cfg.cells_y if cfg.cells_y > 0 else nx
    profile = BeckerProfile(
        gamma=cfg.gamma,
        mu=_coef(cfg.mu, cfg.becker_mu),
        bulk_viscosity=max(cfg.bulk_viscosity, 0.0),
        velocity_left=cfg.becker_velocity_left,
        velocity_right=cfg.becker_velocity_right,
        density_left=cfg.becker_density_left,
        frame_velocity=cfg.becker_frame_velocity,
        x0=cfg.becker_x0,
    )
    msh = MS.build_structured_mesh(2, [(0.0, 1.0), (0.0, 1.0)], (nx, ny))
    graph = MS.compute_b_matrix(MS.assemble_graph(msh))
    x = msh.coords[:, 0]
    u0 = profile.state(x, 0.0, d=2)

    def dirichlet(coords, t):
        return profile.state(coords[:, 0], t, d=2)

    bmap = MS.assemble_boundary_map(msh, graph, {
        "left": MS.BoundaryCondition("dirichlet", dirichlet),
        "right": MS.BoundaryCondition("dirichlet", dirichlet),
        "bottom": MS.BoundaryCondition("slip"),
        "top": MS.BoundaryCondition("slip"),
    })
    model = PB.ViscousModel(mu=profile.mu, lam=profile.bulk_viscosity,
                            kappa_over_cv=profile.kappa_over_cv)
    op = PB.EllipticOperator(msh, graph, model)
    pbcs = PB.build_parabolic_bcs(
        msh,
        {"left": "neumann", "right": "neumann", "bottom": "slip", "top": "slip"},
        {t: "neumann" for t in msh.tag_names.values()},
    )

    def exact(t):
        return profile.state(x, t, d=2)

    return RunSetup(
        name="becker", mesh=msh, graph=graph, bmap=bmap, law=law, u0=u0,
        hyp_cfg=_hyp_cfg(cfg, 0.3), nr_method=cfg.nonreflecting_method,
        t_final=cfg.t_final if cfg.t_final > 0 else 0.25,
        model=model, op=op, pbcs=pbcs, diag=DiagnosticsConfig(),
        exact=exact, extra={"profile": profile},
    )


_VORTEX_CASES = {"i": (0.5, 0.75), "ii": (0.5, 0.25), "iii": (0.05, 0.75),
                 "iv": (0.05, 0.25)}


def _build_vortex(cfg):
    law = gas.GasLaw(cfg.gamma)
    nx = cfg.cells_x if cfg.cells_x > 0 else 80
    ny = cfg.cells_y if cfg.cells_y > 0 else nx
    mach, vbar = cfg.vortex_mach, cfg.vortex_vbar
    if cfg.vortex_case:
        mach, vbar = _VORTEX_CASES[cfg.vortex_case]
    r0 = cfg.vortex_r0
    v_inf = 1.0
    rho_inf = 1.0
    a_inf = v_inf / mach
    p_inf = rho_inf * a_inf * a_inf / cfg.gamma
    msh = MS.build_structured_mesh(2, [(-1.0, 1.0), (-1.0, 1.0)], (nx, ny))
    graph = MS.compute_b_matrix(MS.assemble_graph(msh))
    xy = msh.coords
    r = np.linalg.norm(xy, axis=1)
    psi = np.exp(0.5 * (1.0 - (r / r0) ** 2))
    vel = np.empty_like(xy)
    vel[:, 0] = v_inf + vbar / r0 * psi * (-xy[:, 1])
    vel[:, 1] = vbar / r0 * psi * (xy[:, 0])
    p = p_inf - 0.5 * rho_inf * vbar * vbar * psi * psi
    if np.any(p <= 0):
        raise ConfigError("vortex perturbation too strong: non-positive pressure")
    u0 = gas.from_primitive(np.full(graph.n_nodes, rho_inf), vel, p, law)
    far = gas.from_primitive(rho_inf, np.array([v_inf, 0.0]), p_inf, law)
    bmap = MS.assemble_boundary_map(msh, graph, {
        t: MS.BoundaryCondition("nonreflecting", far) for t in msh.tag_names.values()
    })
    BC.check_dirichlet_admissibility(bmap, law)
    diag = DiagnosticsConfig(rho_inf=rho_inf, v_inf=v_inf, p_inf=p_inf, vortex=True)
    return RunSetup(
        name="vortex", mesh=msh, graph=graph, bmap=bmap, law=law, u0=u0,
        hyp_cfg=_hyp_cfg(cfg, 0.75), nr_method=cfg.nonreflecting_method,
        t_final=cfg.t_final if cfg.t_final > 0 else 4.0,
        diag=diag, extra={"v_inf_vec": np.array([v_inf, 0.0])},
    )


def _build_shocktube2d(cfg):
    law = gas.GasLaw(cfg.gamma)
    nx = cfg.cells_x if cfg.cells_x > 0 else 512
    ny = cfg.cells_y if cfg.cells_y > 0 else nx // 2
    msh = MS.build_structured_mesh(2, [(0.0, 1.0), (0.0, 0.5)], (nx, ny))
    graph = MS.compute_b_matrix(MS.assemble_graph(msh))
    x = msh.coords[:, 0]
    left = x < 0.5
    rho = np.where(left, 120.0, 1.2)
    p = rho / cfg.gamma
    u0 = gas.from_primitive(rho, np.zeros((graph.n_nodes, 2)), p, law)
    bmap = MS.assemble_boundary_map(msh, graph, {
        t: MS.BoundaryCondition("slip") for t in msh.tag_names.values()
    })
    mu = _coef(cfg.mu, cfg.shocktube_mu)
    # Pr = mu c_p / kappa and c_p/c_v = gamma give kappa/c_v = mu gamma / Pr.
    kappa_cv = _coef(cfg.kappa_over_cv, mu * cfg.gamma / cfg.shocktube_prandtl)
    model = PB.ViscousModel(mu=mu, lam=max(cfg.bulk_viscosity, 0.0),
                            kappa_over_cv=kappa_cv)
    op = PB.EllipticOperator(msh, graph, model)
    pbcs = PB.build_parabolic_bcs(
        msh,
        {"left": "noslip", "right": "noslip", "bottom": "noslip", "top": "slip"},
        {t: "neumann" for t in msh.tag_names.values()},
    )
    diag = DiagnosticsConfig(rho_inf=1.2, v_inf=1.0, p_inf=1.2 / cfg.gamma,
                             wall_tag="bottom")
    return RunSetup(
        name="shocktube2d", mesh=msh, graph=graph, bmap=bmap, law=law, u0=u0,
        hyp_cfg=_hyp_cfg(cfg, 0.9), nr_method=cfg.nonreflecting_method,
        t_final=cfg.t_final if cfg.t_final > 0 else 1.0,
        model=model, op=op, pbcs=pbcs, diag=diag, extra={},
    )


def _build_slipbox(cfg):
    law = gas.GasLaw(cfg.gamma)
    nx = cfg.cells_x if cfg.cells_x > 0 else 48
    ny = cfg.cells_y if cfg.cells_y > 0 else nx
    msh = MS.build_structured_mesh(2, [(0.0, 1.0), (0.0, 1.0)], (nx, ny))
    graph = MS.compute_b_matrix(MS.assemble_graph(msh))
    x, y = msh.coords.T
    amp = cfg.slipbox_amplitude
    vel = np.stack([amp * np.sin(np.pi * x) * np.cos(np.pi * y),
                    -amp * np.cos(np.pi * x) * np.sin(np.pi * y)], axis=1)
    u0 = gas.from_primitive(np.ones(graph.n_nodes), vel, np.ones(graph.n_nodes), law)
    bmap = MS.assemble_boundary_map(msh, graph, {
        t: MS.BoundaryCondition("slip") for t in msh.tag_names.values()
    })
    return RunSetup(
        name="slipbox", mesh=msh, graph=graph, bmap=bmap, law=law, u0=u0,
        hyp_cfg=_hyp_cfg(cfg, 0.9), nr_method=cfg.nonreflecting_method,
        t_final=cfg.t_final if cfg.t_final > 0 else 1e9,
        diag=DiagnosticsConfig(), extra={},
    )


SCENARIO_BUILDERS = {
    "sod": _build_sod,
    "becker": _build_becker,
    "vortex": _build_vortex,
    "shocktube2d": _build_shocktube2d,
    "slipbox": _build_slipbox,
}


def scenario_initial_state(name, cfg):
    """Build run inputs for a named scenario from a validated config."""
    if name not in SCENARIO_BUILDERS:
        raise ConfigError(
            f"unknown scenario {name!r}; available: {sorted(SCENARIO_BUILDERS)}"
        )
    setup = SCENARIO_BUILDERS[name](cfg)
    gas.require_admissible(setup.u0, f"{name} initial state")
    return setup
