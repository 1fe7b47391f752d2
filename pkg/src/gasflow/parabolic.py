"""Strang parabolic substep: viscous velocity solve, heat equation, FCT.

The momentum and internal-energy updates use Crank-Nicolson midpoints with
the lumped mass matrix and matrix-free stiffness actions (cell loops with a
conflict-free gather/scatter pair).  Systems are solved by conjugate
gradients with a Jacobi preconditioner built from the exact diagonal; in the
hyperbolic-CFL regime the mass term dominates and iteration counts stay
below ~10.

Essential conditions are imposed by symmetric elimination: constrained
entries are pinned, their couplings moved to the right-hand side, which
keeps the operator symmetric positive definite.  Internal-energy positivity
is unconditional: if the extrapolated Crank-Nicolson value undershoots zero
anywhere, a backward-Euler low-order solve plus Zalesak-style flux
correction replaces it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import ConfigError, SolverError
from .mesh import element_tables

__all__ = [
    "ViscousModel",
    "EllipticOperator",
    "ParabolicBCs",
    "build_parabolic_bcs",
    "cg_solve",
    "stiffness_action_velocity",
    "velocity_substep",
    "viscous_heating",
    "energy_substep",
    "parabolic_step",
]


@dataclass(frozen=True)
class ViscousModel:
    """Constant transport coefficients: shear/bulk viscosity and c_v^-1 kappa.

    All coefficients may be zero (the parabolic step then degenerates to the
    identity, which the Euler-only equivalence test exercises); the mass
    term keeps the solves positive definite regardless.
    """

    mu: float
    lam: float = 0.0
    kappa_over_cv: float = 0.0

    def __post_init__(self):
        if self.mu < 0.0 or self.lam < 0.0 or self.kappa_over_cv < 0.0:
            raise ConfigError("transport coefficients must be non-negative")

    @property
    def is_trivial(self):
        return self.mu == 0.0 and self.lam == 0.0 and self.kappa_over_cv == 0.0


class EllipticOperator:
    """Matrix-free actions of the viscous and conduction bilinear forms.

    Holds per-cell quadrature tables, the node->cell incidence used by the
    deterministic gather pass, exact operator diagonals, and the scalar
    stiffness entries on the graph sparsity (needed by the FCT correction).
    """

    def __init__(self, mesh, graph, model, quad_points=3):
        self.mesh = mesh
        self.graph = graph
        self.model = model
        self.dim = mesh.dim
        nvals, dphi, wdet = element_tables(mesh, quad_points)
        self.nvals = nvals
        self.dphi = dphi
        self.wdet = wdet
        n = graph.n_nodes
        nc, nq, nloc, d = dphi.shape

        # On uniform meshes every cell shares one gradient table; the action
        # kernels then apply one precomputed element matrix per cell instead
        # of streaming O(n_cells) quadrature data.
        self.uniform = bool(
            nc > 1 and np.allclose(dphi, dphi[:1], rtol=1e-12, atol=1e-15)
            and np.allclose(wdet, wdet[:1], rtol=1e-12, atol=1e-15)
        )
        if self.uniform:
            self.dphi_action = np.ascontiguousarray(dphi[:1])
            self.wdet_action = np.ascontiguousarray(wdet[:1])
        else:
            self.dphi_action = dphi
            self.wdet_action = wdet

        # node -> (cell, local index) incidence in CSR layout
        flat_nodes = mesh.cells.ravel()
        order = np.argsort(flat_nodes, kind="stable")
        self._nc_cell = (order // nloc).astype(np.int32)
        self._nc_loc = (order % nloc).astype(np.int32)
        counts = np.bincount(flat_nodes, minlength=n)
        self._ncp = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=self._ncp[1:])

        self._loc_vec = np.empty((nc, nloc, d))
        self._loc_s = np.empty((nc, nloc))
        self._cells = mesh.cells.astype(np.int32)

        # Exact diagonals (setup-time einsum; shares the quadrature tables).
        mu, lam = model.mu, model.lam
        c23 = lam - 2.0 * mu / 3.0
        gg = np.einsum("cq,cqak,cqak->ca", wdet, dphi, dphi)  # grad.grad
        self.scalar_diag = np.zeros(n)
        np.add.at(self.scalar_diag, flat_nodes, (model.kappa_over_cv * gg).ravel())
        self.velocity_diag = np.zeros((n, d))
        for k in range(d):
            dk2 = np.einsum("cq,cqak,cqak->ca", wdet, dphi[..., k : k + 1], dphi[..., k : k + 1])
            diag_k = mu * (gg + dk2) + c23 * dk2
            np.add.at(self.velocity_diag[:, k], flat_nodes, diag_k.ravel())

        # Scalar stiffness entries on the graph sparsity (FCT needs them).
        loc = model.kappa_over_cv * np.einsum("cq,cqak,cqbk->cab", wdet, dphi, dphi)
        self.scalar_stiffness = np.zeros(graph.nnz)
        np.add.at(self.scalar_stiffness, graph.cell_slots.ravel(), loc.ravel())

        self._sca_local = None
        self._vel_local = None
        if self.uniform:
            self._sca_local = np.ascontiguousarray(loc[0])
            w0 = wdet[:1]
            g0 = np.einsum("cq,cqam,cqbm->ab", w0, dphi[:1], dphi[:1])
            t2 = np.einsum("cq,cqal,cqbk->akbl", w0, dphi[:1], dphi[:1])
            t3 = np.einsum("cq,cqak,cqbl->akbl", w0, dphi[:1], dphi[:1])
            c23 = model.lam - 2.0 * model.mu / 3.0
            vel_local = model.mu * t2 + c23 * t3
            for k in range(d):
                vel_local[:, k, :, k] += model.mu * g0
            self._vel_local = np.ascontiguousarray(vel_local)

    def velocity_action(self, x, out=None):
        """a(x, phi_i e_k) for all nodes/components; x and out are (n, d)."""
        if out is None:
            out = np.empty_like(x)
        if self.uniform and self.dim == 2:
            K.cell_velocity_local_2d(self._cells, self._vel_local, x, self._loc_vec)
        elif self.dim == 2:
            K.cell_velocity_action_2d(self._cells, self.dphi_action, self.wdet_action,
                                      self.model.mu, self.model.lam, x, self._loc_vec)
        else:
            K.cell_velocity_action_1d(self._cells, self.dphi_action, self.wdet_action,
                                      self.model.mu, self.model.lam, x, self._loc_vec)
        K.gather_vector(self._ncp, self._nc_cell, self._nc_loc, self._loc_vec, out)
        return out

    def scalar_action(self, e, out=None):
        """b(e, phi_i) = kappa/c_v int grad(e).grad(phi_i) for all nodes."""
        if out is None:
            out = np.empty_like(e)
        if self.uniform:
            K.cell_scalar_local(self._cells, self._sca_local, e, self._loc_s)
        else:
            K.cell_scalar_action(self._cells, self.dphi_action, self.wdet_action,
                                 self.model.kappa_over_cv, e, self._loc_s)
        K.gather_scalar(self._ncp, self._nc_cell, self._nc_loc, self._loc_s, out)
        return out

    def heating(self, v):
        """K_i = (1/m_i) int s(v):e(v) phi_i dx (pointwise non-negative in d<=3)."""
        K.cell_heating(self._cells, self.dphi_action, self.nvals, self.wdet_action,
                       self.model.mu, self.model.lam, v, self._loc_s)
        out = np.empty(self.graph.n_nodes)
        K.gather_scalar(self._ncp, self._nc_cell, self._nc_loc, self._loc_s, out)
        return out / self.graph.m

    # -- assembled oracles (independent einsum contraction path) -----------

    def assemble_velocity_matrix(self):
        """Explicit sparse velocity stiffness on (node, component) dofs."""
        from scipy.sparse import coo_matrix

        mu, lam = self.model.mu, self.model.lam
        c23 = lam - 2.0 * mu / 3.0
        d = self.dim
        n = self.graph.n_nodes
        gg = np.einsum("cq,cqam,cqbm->cab", self.wdet, self.dphi, self.dphi)
        t2 = np.einsum("cq,cqal,cqbk->cakbl", self.wdet, self.dphi, self.dphi)
        t3 = np.einsum("cq,cqak,cqbl->cakbl", self.wdet, self.dphi, self.dphi)
        nc, _, nloc, _ = self.dphi.shape
        local = np.zeros((nc, nloc, d, nloc, d))
        for k in range(d):
            local[:, :, k, :, k] += mu * gg
        local += mu * t2
        local += c23 * t3
        cells = self._cells
        rows = (cells[:, :, None, None, None] * d
                + np.arange(d)[None, None, :, None, None])
        rows = np.broadcast_to(rows, local.shape).ravel()
        cols = (cells[:, None, None, :, None] * d
                + np.arange(d)[None, None, None, None, :])
        cols = np.broadcast_to(cols, local.shape).ravel()
        mat = coo_matrix((local.ravel(), (rows, cols)), shape=(n * d, n * d))
        return mat.tocsr()

    def assemble_scalar_matrix(self):
        from scipy.sparse import coo_matrix

        n = self.graph.n_nodes
        loc = self.model.kappa_over_cv * np.einsum(
            "cq,cqak,cqbk->cab", self.wdet, self.dphi, self.dphi
        )
        nloc = self._cells.shape[1]
        rows = np.repeat(self._cells, nloc, axis=1).ravel()
        cols = np.tile(self._cells, (1, nloc)).ravel()
        return coo_matrix((loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def stiffness_action_velocity(x, op, out=None):
    """Module-level alias of the matrix-free velocity stiffness action."""
    return op.velocity_action(x, out=out)


def cg_solve(apply_a, diag, b, tol=1e-12, maxit=500, x0=None):
    """Jacobi-preconditioned conjugate gradients on a flat vector.

    Returns (x, iterations, residual_history); the convergence test is
    ||r|| <= tol * ||b|| (an all-zero right-hand side returns immediately).
    Raises SolverError when maxit is exceeded.
    """
    b = np.asarray(b, dtype=float).ravel()
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float).ravel()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, [0.0]
    diag = np.asarray(diag, dtype=float).ravel()
    r = b - apply_a(x)
    history = [float(np.linalg.norm(r))]
    if history[-1] <= tol * bnorm:
        return x, 0, history
    z = r / diag
    p = z.copy()
    rz = float(np.dot(r, z))
    for it in range(1, maxit + 1):
        q = apply_a(p)
        alpha = rz / float(np.dot(p, q))
        x += alpha * p
        r -= alpha * q
        rnorm = float(np.linalg.norm(r))
        history.append(rnorm)
        if rnorm <= tol * bnorm:
            return x, it, history
        z = r / diag
        rz_new = float(np.dot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"CG failed to reach {tol:.1e} in {maxit} iterations "
        f"(last residual {history[-1] / bnorm:.3e})",
        residual_history=history,
    )


def _solve_constrained(apply_a, diag, b, mask, values, tol, maxit, x0=None):
    """Symmetric elimination of constrained entries, then CG.

    mask/values are flat; the lifted system keeps SPD structure with unit
    diagonal rows at constrained entries.
    """
    mask = mask.ravel()
    if not mask.any():
        return cg_solve(apply_a, diag, b.ravel(), tol=tol, maxit=maxit, x0=x0)
    values = values.ravel()
    g = np.zeros_like(b.ravel())
    g[mask] = values[mask]
    b_hat = b.ravel() - apply_a(g)
    b_hat[mask] = values[mask]

    def a_hat(x):
        xf = x.copy()
        xf[mask] = 0.0
        y = apply_a(xf)
        y[mask] = x[mask]
        return y

    diag_hat = diag.ravel().copy()
    diag_hat[mask] = 1.0
    if x0 is not None:
        x0 = np.array(x0, dtype=float).ravel()
        x0[mask] = values[mask]
    return cg_solve(a_hat, diag_hat, b_hat, tol=tol, maxit=maxit, x0=x0)


@dataclass
class ParabolicBCs:
    """Essential-constraint masks/values for the velocity and energy solves."""

    vel_mask: np.ndarray  # (n, d) bool
    e_mask: np.ndarray  # (n,) bool
    e_values: np.ndarray  # (n,)


def build_parabolic_bcs(mesh, velocity_bc, energy_bc):
    """Constraint masks from per-tag condition tables.

    velocity_bc: {tag: "noslip" | "slip" | "neumann"}; slip requires the
    tag's faces to be axis-aligned (the normal component is constrained).
    energy_bc: {tag: "neumann" | ("dirichlet", value)} with the value the
    prescribed specific internal energy.
    """
    from .mesh import _face_group_integrals

    n = mesh.n_nodes
    d = mesh.dim
    vel_mask = np.zeros((n, d), dtype=bool)
    e_mask = np.zeros(n, dtype=bool)
    e_values = np.zeros(n)
    for tid, name in mesh.tag_names.items():
        if name not in velocity_bc or name not in energy_bc:
            raise ConfigError(f"missing parabolic boundary condition for tag {name!r}")
    for name, kind in velocity_bc.items():
        tid = mesh.tag_id(name)
        nodes = np.unique(mesh.face_nodes[mesh.face_tags == tid].ravel())
        if kind == "noslip":
            vel_mask[nodes, :] = True
        elif kind == "slip":
            integrals = _face_group_integrals(mesh, mesh.face_tags == tid)
            nrm = integrals[nodes]
            nrm = nrm / np.linalg.norm(nrm, axis=1)[:, None]
            axis = np.argmax(np.abs(nrm), axis=1)
            off_axis = np.abs(nrm[np.arange(len(nodes)), 1 - axis]) if d == 2 else np.zeros(len(nodes))
            if d == 2 and np.any(off_axis > 1e-10):
                raise ConfigError(
                    f"slip velocity condition on tag {name!r} requires axis-aligned faces"
                )
            vel_mask[nodes, axis] = True
        elif kind != "neumann":
            raise ConfigError(f"unknown velocity condition {kind!r}")
    for name, spec in energy_bc.items():
        tid = mesh.tag_id(name)
        nodes = np.unique(mesh.face_nodes[mesh.face_tags == tid].ravel())
        if spec == "neumann":
            continue
        kind, value = spec
        if kind != "dirichlet":
            raise ConfigError(f"unknown energy condition {kind!r}")
        if value <= 0:
            raise ConfigError("prescribed internal energy must be positive")
        e_mask[nodes] = True
        e_values[nodes] = float(value)
    return ParabolicBCs(vel_mask=vel_mask, e_mask=e_mask, e_values=e_values)


def velocity_substep(u, graph, op, bcs, f_nodal, tau_p, tol=1e-12, maxit=500):
    """Crank-Nicolson momentum update.

    Solves (rho_i m_i + tau_p/2 A) v^{1/2} = m_i M_i^n + tau_p/2 m_i F_i for
    the midpoint velocity, extrapolates v^{n+1} = 2 v^{1/2} - v^n, and forms
    the new momentum with the (unchanged) density.  Returns
    (v_half, v_new, mom_new, iterations).
    """
    d = graph.dim
    rho = u[:, 0]
    mom = u[:, 1 : 1 + d]
    v_n = mom / rho[:, None]
    mi = graph.m
    b = mi[:, None] * mom
    if f_nodal is not None:
        b = b + 0.5 * tau_p * mi[:, None] * f_nodal
    mass = rho * mi

    def apply_a(xflat):
        x = xflat.reshape(-1, d)
        y = mass[:, None] * x + 0.5 * tau_p * op.velocity_action(x)
        return y.ravel()

    diag = mass[:, None] + 0.5 * tau_p * op.velocity_diag
    values = np.zeros((graph.n_nodes, d))
    x, iters, _ = _solve_constrained(apply_a, diag, b, bcs.vel_mask, values,
                                     tol, maxit, x0=v_n)
    v_half = x.reshape(-1, d)
    v_new = 2.0 * v_half - v_n
    return v_half, v_new, rho[:, None] * v_new, iters


def viscous_heating(v_half, op):
    """Specific internal-energy production rate K_i from the midpoint velocity."""
    return op.heating(v_half)


def _zalesak_positivity(graph, mass, e_low, a_slots):
    """Symmetric Zalesak limiter enforcing e >= 0 about the low-order solution."""
    n = graph.n_nodes
    row_of = np.repeat(np.arange(n), np.diff(graph.indptr))
    col = graph.indices
    a = a_slots.copy()
    a[graph.diag_pos] = 0.0
    p_plus = np.zeros(n)
    p_minus = np.zeros(n)
    np.add.at(p_plus, row_of, np.maximum(a, 0.0))
    np.add.at(p_minus, row_of, np.minimum(a, 0.0))
    q_minus = -mass * e_low
    with np.errstate(divide="ignore", invalid="ignore"):
        r_minus = np.where(p_minus < 0.0, np.minimum(1.0, q_minus / p_minus), 1.0)
    # Strict feasibility under round-off: the correction that would land a
    # node exactly on e = 0 is held back by one part in 1e10.
    r_minus = r_minus * (1.0 - 1e-10)
    l = np.where(a >= 0.0, r_minus[col], r_minus[row_of])
    corr = np.zeros(n)
    np.add.at(corr, row_of, l * a)
    return e_low + corr / mass


def energy_substep(u, v_half, v_new, k_heat, graph, op, bcs, tau_p,
                   tol=1e-12, maxit=500):
    """Crank-Nicolson internal-energy update with unconditional positivity.

    When the extrapolated midpoint solution dips below zero anywhere, a
    backward-Euler low-order solve (full heating weight, M-matrix positive)
    plus Zalesak flux correction replaces it.  Returns
    (e_new, ener_new, fct_triggered, iterations).
    """
    d = graph.dim
    rho = u[:, 0]
    mi = graph.m
    v_n = u[:, 1 : 1 + d] / rho[:, None]
    e_n = u[:, -1] / rho - 0.5 * np.sum(v_n * v_n, axis=1)
    mass = rho * mi
    heat = mi * k_heat

    def apply_cn(e):
        return mass * e + 0.5 * tau_p * op.scalar_action(e)

    diag_cn = mass + 0.5 * tau_p * op.scalar_diag
    b = mass * e_n + 0.5 * tau_p * heat
    # Midpoint Dirichlet value (e_n + e_target)/2 lands the extrapolated
    # endpoint exactly on the target.
    mid_values = 0.5 * (e_n + bcs.e_values)
    e_half, iters, _ = _solve_constrained(apply_cn, diag_cn, b, bcs.e_mask,
                                          mid_values, tol, maxit, x0=e_n)
    e_new = 2.0 * e_half - e_n
    fct = bool(e_new.min() < 0.0)
    if fct:
        def apply_lo(e):
            return mass * e + tau_p * op.scalar_action(e)

        diag_lo = mass + tau_p * op.scalar_diag
        b_lo = mass * e_n + tau_p * heat
        e_low, it2, _ = _solve_constrained(apply_lo, diag_lo, b_lo, bcs.e_mask,
                                           bcs.e_values, tol, maxit, x0=e_n)
        iters += it2
        g = e_new + e_n - 2.0 * e_low
        row_of = np.repeat(np.arange(graph.n_nodes), np.diff(graph.indptr))
        a_slots = -0.5 * tau_p * op.scalar_stiffness * (g[graph.indices] - g[row_of])
        e_new = _zalesak_positivity(graph, mass, e_low, a_slots)
        if bcs.e_mask.any():
            e_new[bcs.e_mask] = bcs.e_values[bcs.e_mask]
    ener_new = rho * e_new + 0.5 * rho * np.sum(v_new * v_new, axis=1)
    return e_new, ener_new, fct, iters


def parabolic_step(u, graph, op, bcs, f_nodal, tau_p, tol=1e-12, maxit=500):
    """Full parabolic update: momentum, heating, internal/total energy.

    Density is unchanged; the output is admissible for any tau_p.  Returns
    (u_new, info) with solver iteration counts and the FCT flag.  With all
    transport coefficients zero and no source the operator is the identity
    and is returned bitwise (no solve round-trip).
    """
    d = graph.dim
    if op.model.is_trivial and f_nodal is None:
        info = {"velocity_iters": 0, "energy_iters": 0, "fct": False,
                "v_half": u[:, 1 : 1 + d] / u[:, 0][:, None],
                "heating": np.zeros(graph.n_nodes)}
        return u.copy(), info
    v_half, v_new, mom_new, it_v = velocity_substep(
        u, graph, op, bcs, f_nodal, tau_p, tol=tol, maxit=maxit
    )
    k_heat = viscous_heating(v_half, op)
    e_new, ener_new, fct, it_e = energy_substep(
        u, v_half, v_new, k_heat, graph, op, bcs, tau_p, tol=tol, maxit=maxit
    )
    out = np.empty_like(u)
    out[:, 0] = u[:, 0]
    out[:, 1 : 1 + d] = mom_new
    out[:, -1] = ener_new
    info = {"velocity_iters": it_v, "energy_iters": it_e, "fct": fct,
            "v_half": v_half, "heating": k_heat}
    return out, info
