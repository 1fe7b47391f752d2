"""Numba-compiled kernels for the hyperbolic update and boundary treatment.

All kernels are row-parallel over the CSR sparsity: each parallel iteration
writes only its own row's outputs and reads immutable inputs, so results are
bitwise-deterministic for any thread count.  Reductions (time step, ledger
sums) are written per node and folded sequentially by the callers.

State layout is (n, d+2) C-order with components (rho, m_1..m_d, E); the
per-stage node precomputation packs primitives as (rho, v_1..v_d, p, a).
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .riemann import _lambda_hat_pre, _sample_zero_normal, _solve_pstar

_SAFETY = 1.0 - 1e-10  # strict-feasibility shrink for solved limiter roots


@njit(parallel=True, fastmath=True, cache=True)
def node_precompute(u, gamma, need_entropy, prim, pz, phi, eta, deta):
    """Per-node primitives and entropy data consumed by the edge kernels.

    prim rows are (rho, v_1..v_d, p, a); pz holds p**((gamma-1)/(2 gamma));
    phi holds eps * rho**(-gamma).  Edge kernels contract fluxes on the fly
    from (U, p), so no flux tensor is materialised.  Entropy fields are only
    filled when need_entropy is true.
    """
    n, w = u.shape
    d = w - 2
    zexp = (gamma - 1.0) / (2.0 * gamma)
    for i in prange(n):
        rho = u[i, 0]
        m2 = 0.0
        for k in range(d):
            m2 += u[i, 1 + k] * u[i, 1 + k]
        ener = u[i, w - 1]
        eps = ener - 0.5 * m2 / rho
        p = (gamma - 1.0) * eps
        a = np.sqrt(gamma * p / rho)
        prim[i, 0] = rho
        for k in range(d):
            prim[i, 1 + k] = u[i, 1 + k] / rho
        prim[i, d + 1] = p
        prim[i, d + 2] = a
        pz[i] = p**zexp
        phi[i] = eps * rho ** (-gamma)
        if need_entropy:
            q = rho * rho * eps
            et = q ** (1.0 / (gamma + 1.0))
            eta[i] = et
            sc = et / ((gamma + 1.0) * q)
            deta[i, 0] = sc * (2.0 * rho * ener - 0.5 * m2)
            for k in range(d):
                deta[i, 1 + k] = -sc * rho * u[i, 1 + k]
            deta[i, w - 1] = sc * rho * rho


@njit(parallel=True, fastmath=True, cache=True)
def indicator_kernel(u, prim, indptr, indices, cij, deta, eta, alpha):
    """Entropy-production indicator per node, clamped to [0, 1].

    alpha_i = |sum_j t_ij| / max(D_i, floor) with
    t_ij = eta'(U_i).(f(U_j) c_ij) - (v_j eta_j).c_ij and the denominator
    D_i = sum_j |eta'(U_i).(f(U_j) c_ij)| + |(v_j eta_j).c_ij| measuring the
    magnitudes of the two entropy-flux contributions separately.  The
    numerator cancels to truncation error wherever the entropy identity
    holds, so alpha vanishes on smooth data and stays exactly 0 on constant
    states; the floor only guards the 0/0 case.
    """
    n, w = u.shape
    d = w - 2
    for i in prange(n):
        num = 0.0
        den = 0.0
        for kk in range(indptr[i], indptr[i + 1]):
            j = indices[kk]
            mc = 0.0
            for k in range(d):
                mc += u[j, 1 + k] * cij[kk, k]
            vc = mc / u[j, 0]
            p_j = prim[j, d + 1]
            # t1 = eta'(U_i) . (f(U_j) c_ij)
            t1 = deta[i, 0] * mc + deta[i, w - 1] * (u[j, w - 1] + p_j) * vc
            for k in range(d):
                t1 += deta[i, 1 + k] * (vc * u[j, 1 + k] + p_j * cij[kk, k])
            t2 = eta[j] * vc
            num += t1 - t2
            den += abs(t1) + abs(t2)
        a = abs(num) / max(den, 1e-30)
        alpha[i] = min(1.0, a)


@njit(parallel=True, fastmath=True, cache=True)
def dij_upper_kernel(indptr, indices, tpos, cnorm, nij, prim, pz, is_bnd, gamma, d_l):
    """Graph viscosity for the upper triangle (j > i).

    Interior rows evaluate one wavespeed bound per pair; rows whose pair has
    both endpoints on the boundary take the max over both orientations since
    c_ij and -c_ji then differ.
    """
    n = indptr.shape[0] - 1
    d = nij.shape[1]
    for i in prange(n):
        rho_i = prim[i, 0]
        p_i = prim[i, d + 1]
        a_i = prim[i, d + 2]
        pz_i = pz[i]
        bnd_i = is_bnd[i]
        for kk in range(indptr[i], indptr[i + 1]):
            j = indices[kk]
            if j <= i:
                continue
            val = 0.0
            cn = cnorm[kk]
            if cn > 0.0:
                vn_l = 0.0
                vn_r = 0.0
                for k in range(d):
                    vn_l += prim[i, 1 + k] * nij[kk, k]
                    vn_r += prim[j, 1 + k] * nij[kk, k]
                lam = _lambda_hat_pre(
                    rho_i, vn_l, p_i, a_i, pz_i,
                    prim[j, 0], vn_r, prim[j, d + 1], prim[j, d + 2], pz[j], gamma,
                )
                val = lam * cn
            if bnd_i and is_bnd[j]:
                kt = tpos[kk]
                cnt = cnorm[kt]
                if cnt > 0.0:
                    vn_l = 0.0
                    vn_r = 0.0
                    for k in range(d):
                        vn_l += prim[j, 1 + k] * nij[kt, k]
                        vn_r += prim[i, 1 + k] * nij[kt, k]
                    lam = _lambda_hat_pre(
                        prim[j, 0], vn_l, prim[j, d + 1], prim[j, d + 2], pz[j],
                        rho_i, vn_r, p_i, a_i, pz_i, gamma,
                    )
                    if lam * cnt > val:
                        val = lam * cnt
            d_l[kk] = val


@njit(parallel=True, fastmath=True, cache=True)
def dij_mirror_and_dt(indptr, indices, diag_pos, tpos, m, d_l, dt_cand):
    """Mirror the lower triangle, set the negative row-sum diagonal, and
    record the per-node time-step candidate -m_i / (2 d_ii)."""
    n = indptr.shape[0] - 1
    for i in prange(n):
        s = 0.0
        for kk in range(indptr[i], indptr[i + 1]):
            j = indices[kk]
            if j < i:
                d_l[kk] = d_l[tpos[kk]]
                s += d_l[kk]
            elif j > i:
                s += d_l[kk]
        d_l[diag_pos[i]] = -s
        dt_cand[i] = m[i] / (2.0 * s) if s > 0.0 else np.inf


@njit(parallel=True, fastmath=True, cache=True)
def low_high_kernel(u, prim, phi, indptr, indices, cij, d_l, alpha, m, tau,
                    u_low, f_high, d_h, bounds):
    """Fused low-order update, bar-state bounds, and high-order flux sums.

    Bar states are consumed in flight; pairs with d_ij = 0 carry no flux and
    contribute no bound.  bounds rows are (rho_min, rho_max, phi_min).
    Flux contractions f(U).c are built from (U, p) per edge:
    (m.c, (m.c)/rho m + p c, (E + p)(m.c)/rho).
    """
    n, w = u.shape
    d = w - 2
    for i in prange(n):
        a_i = alpha[i]
        rho_i = u[i, 0]
        p_i = prim[i, d + 1]
        rmin = rho_i
        rmax = rho_i
        pmin = phi[i]
        for r in range(w):
            u_low[i, r] = 0.0
            f_high[i, r] = 0.0
        for kk in range(indptr[i], indptr[i + 1]):
            j = indices[kk]
            dij = d_l[kk]
            mc_j = 0.0
            for k in range(d):
                mc_j += u[j, 1 + k] * cij[kk, k]
            vc_j = mc_j / u[j, 0]
            p_j = prim[j, d + 1]
            if j == i:
                d_h[kk] = a_i * dij
                # F_ii^H = -f(U_i) c_ii
                f_high[i, 0] -= mc_j
                for k in range(d):
                    f_high[i, 1 + k] -= vc_j * u[i, 1 + k] + p_i * cij[kk, k]
                f_high[i, w - 1] -= (u[i, w - 1] + p_i) * vc_j
                u_low[i, 0] += dij * u[i, 0]
                for r in range(1, w):
                    u_low[i, r] += dij * u[i, r]
                continue
            dh = 0.5 * (a_i + alpha[j]) * dij
            d_h[kk] = dh
            mc_i = 0.0
            for k in range(d):
                mc_i += u[i, 1 + k] * cij[kk, k]
            vc_i = mc_i / rho_i
            if dij > 0.0:
                inv2d = 0.5 / dij
                # density row
                bar = 0.5 * (u[i, 0] + u[j, 0]) - inv2d * (mc_j - mc_i)
                u_low[i, 0] += dij * bar
                if bar < rmin:
                    rmin = bar
                if bar > rmax:
                    rmax = bar
                for k in range(d):
                    fc = (vc_j * u[j, 1 + k] + p_j * cij[kk, k]) - (
                        vc_i * u[i, 1 + k] + p_i * cij[kk, k])
                    barm = 0.5 * (u[i, 1 + k] + u[j, 1 + k]) - inv2d * fc
                    u_low[i, 1 + k] += dij * barm
                fc = (u[j, w - 1] + p_j) * vc_j - (u[i, w - 1] + p_i) * vc_i
                bare = 0.5 * (u[i, w - 1] + u[j, w - 1]) - inv2d * fc
                u_low[i, w - 1] += dij * bare
            f_high[i, 0] += -mc_j + dh * (u[j, 0] - u[i, 0])
            for k in range(d):
                f_high[i, 1 + k] += -(vc_j * u[j, 1 + k] + p_j * cij[kk, k]) \
                    + dh * (u[j, 1 + k] - u[i, 1 + k])
            f_high[i, w - 1] += -(u[j, w - 1] + p_j) * vc_j \
                + dh * (u[j, w - 1] - u[i, w - 1])
            if phi[j] < pmin:
                pmin = phi[j]
        fac = 2.0 * tau / m[i]
        for r in range(w):
            u_low[i, r] = u[i, r] + fac * u_low[i, r]
        bounds[i, 0] = rmin
        bounds[i, 1] = rmax
        bounds[i, 2] = pmin


@njit(parallel=True, fastmath=True, cache=True)
def pij_kernel(u, f_high, d_l, d_h, bij, tpos, indptr, indices, m, lam, tau, p_out):
    """Limiter candidates P_ij; antisymmetric in the m_i lam_i weighting."""
    n, w = u.shape
    for i in prange(n):
        c = tau / (m[i] * lam[i])
        for kk in range(indptr[i], indptr[i + 1]):
            j = indices[kk]
            if j == i:
                for r in range(w):
                    p_out[kk, r] = 0.0
                continue
            kt = tpos[kk]
            b_ij = bij[kk]
            b_ji = bij[kt]
            dd = d_h[kk] - d_l[kk]
            for r in range(w):
                p_out[kk, r] = c * (b_ij * f_high[j, r] - b_ji * f_high[i, r]
                                    + dd * (u[j, r] - u[i, r]))


@njit(cache=True, inline="always")
def _psi_and_slope(u_b, p_vec, kk, ell, w, gamma, phi_min):
    """Internal-energy surplus psi(ell) = eps - phi_min rho^gamma and its
    derivative along the limiter direction."""
    d = w - 2
    rho = u_b[0] + ell * p_vec[kk, 0]
    ener = u_b[w - 1] + ell * p_vec[kk, w - 1]
    m2 = 0.0
    mdp = 0.0
    for k in range(d):
        mom = u_b[1 + k] + ell * p_vec[kk, 1 + k]
        m2 += mom * mom
        mdp += mom * p_vec[kk, 1 + k]
    eps = ener - 0.5 * m2 / rho
    rg = rho**gamma
    psi = eps - phi_min * rg
    deps = p_vec[kk, w - 1] - mdp / rho + 0.5 * m2 * p_vec[kk, 0] / (rho * rho)
    dpsi = deps - phi_min * gamma * (rg / rho) * p_vec[kk, 0]
    return psi, dpsi


@njit(parallel=True, fastmath=True, cache=True)
def limiter_kernel(u_base, p_vec, bounds, indptr, indices, gamma, l_raw):
    """Largest feasible per-edge step l_j^i in [0, 1].

    Zero candidates keep l = 1 exactly.  Density bounds are affine and
    solved in closed form; the quasi-concave entropy bound is solved by
    bracketed Newton/bisection returning the feasible side of the bracket,
    shrunk by (1 - 1e-10).
    """
    n, w = u_base.shape
    d = w - 2
    for i in prange(n):
        rmin = bounds[i, 0]
        rmax = bounds[i, 1]
        phi_min = bounds[i, 2]
        rho_b = u_base[i, 0]
        u_b = u_base[i]
        for kk in range(indptr[i], indptr[i + 1]):
            j = indices[kk]
            if j == i:
                l_raw[kk] = 1.0
                continue
            allzero = True
            for r in range(w):
                if p_vec[kk, r] != 0.0:
                    allzero = False
                    break
            if allzero:
                l_raw[kk] = 1.0
                continue
            ell = 1.0
            solved = False
            p_rho = p_vec[kk, 0]
            if p_rho > 0.0:
                room = rmax - rho_b
                if room < ell * p_rho:
                    ell = max(room, 0.0) / p_rho
                    solved = True
            elif p_rho < 0.0:
                room = rmin - rho_b
                if room > ell * p_rho:
                    ell = min(room, 0.0) / p_rho
                    solved = True
            if ell > 0.0:
                # Inline feasibility probe at the density-limited step.
                rho = rho_b + ell * p_rho
                ener = u_b[w - 1] + ell * p_vec[kk, w - 1]
                m2 = 0.0
                for k in range(d):
                    mom = u_b[1 + k] + ell * p_vec[kk, 1 + k]
                    m2 += mom * mom
                psi = ener - 0.5 * m2 / rho - phi_min * rho**gamma
                if psi < 0.0:
                    lo = 0.0
                    hi = ell
                    x = ell
                    for _ in range(40):
                        psi, dpsi = _psi_and_slope(u_b, p_vec, kk, x, w, gamma, phi_min)
                        if psi >= 0.0:
                            lo = x
                        else:
                            hi = x
                        if hi - lo <= 1e-10 * hi + 1e-14:
                            break
                        if dpsi != 0.0:
                            x_new = x - psi / dpsi
                            if not (lo < x_new < hi):
                                x_new = 0.5 * (lo + hi)
                        else:
                            x_new = 0.5 * (lo + hi)
                        x = x_new
                    ell = lo
                    solved = True
            l_raw[kk] = ell * _SAFETY if solved else ell


@njit(parallel=True, fastmath=True, cache=True)
def sym_min_kernel(l_raw, tpos, l_out):
    """l_ij = min(l_j^i, l_i^j); reads l_raw only, so it is race-free."""
    for kk in prange(l_raw.shape[0]):
        a = l_raw[kk]
        b = l_raw[tpos[kk]]
        l_out[kk] = a if a < b else b


@njit(parallel=True, fastmath=True, cache=True)
def apply_limited_kernel(u_base, p_vec, l_sym, lam, indptr, indices, u_out):
    """u_out_i = u_base_i + lam_i sum_j l_ij P_ij."""
    n, w = u_base.shape
    for i in prange(n):
        li = lam[i]
        for r in range(w):
            u_out[i, r] = u_base[i, r]
        for kk in range(indptr[i], indptr[i + 1]):
            if indices[kk] == i:
                continue
            c = li * l_sym[kk]
            for r in range(w):
                u_out[i, r] += c * p_vec[kk, r]


@njit(parallel=True, fastmath=True, cache=True)
def shrink_p_kernel(p_vec, l_sym):
    """P_ij <- (1 - l_ij) P_ij between limiter passes."""
    nnz, w = p_vec.shape
    for kk in prange(nnz):
        f = 1.0 - l_sym[kk]
        for r in range(w):
            p_vec[kk, r] *= f


@njit(parallel=True, fastmath=True, cache=True)
def admissibility_scan(u, out):
    """Per-node min of rho and eps, folded to two numbers by the caller."""
    n, w = u.shape
    d = w - 2
    for i in prange(n):
        rho = u[i, 0]
        m2 = 0.0
        for k in range(d):
            m2 += u[i, 1 + k] * u[i, 1 + k]
        out[i, 0] = rho
        out[i, 1] = u[i, w - 1] - 0.5 * m2 / rho


@njit(parallel=True, fastmath=True, cache=True)
def bounds_violation_scan(u, bounds, gamma, out):
    """Signed slack of the local bounds after limiting (negative = violation).

    out rows: (rho - rho_min, rho_max - rho, Phi - Phi_min)."""
    n, w = u.shape
    d = w - 2
    for i in prange(n):
        rho = u[i, 0]
        m2 = 0.0
        for k in range(d):
            m2 += u[i, 1 + k] * u[i, 1 + k]
        eps = u[i, w - 1] - 0.5 * m2 / rho
        phi = eps * rho ** (-gamma)
        out[i, 0] = rho - bounds[i, 0]
        out[i, 1] = bounds[i, 1] - rho
        out[i, 2] = phi - bounds[i, 2]


# ---------------------------------------------------------------------------
# Boundary post-processing
# ---------------------------------------------------------------------------

NR_GODUNOV = 0
NR_CHARACTERISTIC = 1


@njit(cache=True)
def _characteristic_nr(u_loc, u_far, nvec, gamma, w):
    """Characteristic non-reflecting update of one boundary state (in place)."""
    d = w - 2
    rho = u_loc[0]
    m2 = 0.0
    vn = 0.0
    for k in range(d):
        m2 += u_loc[1 + k] * u_loc[1 + k]
        vn += u_loc[1 + k] / rho * nvec[k]
    eps = u_loc[w - 1] - 0.5 * m2 / rho
    p = (gamma - 1.0) * eps
    a = np.sqrt(gamma * p / rho)
    if vn < 0.0 and a < -vn:  # supersonic inflow
        for r in range(w):
            u_loc[r] = u_far[r]
        return
    if vn >= 0.0 and a <= vn:  # supersonic outflow
        return
    rho_d = u_far[0]
    m2_d = 0.0
    vn_d = 0.0
    for k in range(d):
        m2_d += u_far[1 + k] * u_far[1 + k]
        vn_d += u_far[1 + k] / rho_d * nvec[k]
    eps_d = u_far[w - 1] - 0.5 * m2_d / rho_d
    p_d = (gamma - 1.0) * eps_d
    a_d = np.sqrt(gamma * p_d / rho_d)
    c1_d = vn_d - 2.0 * a_d / (gamma - 1.0)
    c3 = vn + 2.0 * a / (gamma - 1.0)
    a_post = 0.25 * (gamma - 1.0) * (c3 - c1_d)
    vn_post = 0.5 * (c1_d + c3)
    if vn < 0.0:  # subsonic inflow: S and Vperp from the far state
        s_ref = p_d * rho_d ** (-gamma)
    else:  # subsonic outflow: S and Vperp from the interior state
        s_ref = p * rho ** (-gamma)
    rho_post = (a_post * a_post / (gamma * s_ref)) ** (1.0 / (gamma - 1.0))
    p_post = s_ref * rho_post**gamma
    v2 = 0.0
    for k in range(d):
        if vn < 0.0:
            vperp_k = u_far[1 + k] / rho_d - vn_d * nvec[k]
        else:
            vperp_k = u_loc[1 + k] / rho - vn * nvec[k]
        vk = vperp_k + vn_post * nvec[k]
        u_loc[1 + k] = rho_post * vk
        v2 += vk * vk
    u_loc[0] = rho_post
    u_loc[w - 1] = p_post / (gamma - 1.0) + 0.5 * rho_post * v2


@njit(parallel=True, fastmath=True, cache=True)
def boundary_postprocess_kernel(u, bnodes, has_slip, n_slip, has_nr, n_nr,
                                nr_states, has_dir, dir_states, nr_method,
                                gamma, err_flag):
    """Apply slip projection, non-reflecting and Dirichlet updates in order.

    Interface nodes carrying both a slip and a non-reflecting normal apply
    slip first; Dirichlet replacement wins last.  Vacuum failures of the
    Godunov branch are flagged per node and raised by the caller.
    """
    nb = bnodes.shape[0]
    w = u.shape[1]
    d = w - 2
    for b in prange(nb):
        i = bnodes[b]
        u_loc = np.empty(w)
        u_far = np.empty(w)
        for r in range(w):
            u_loc[r] = u[i, r]
        if has_slip[b]:
            mn = 0.0
            for k in range(d):
                mn += u_loc[1 + k] * n_slip[b, k]
            for k in range(d):
                u_loc[1 + k] -= mn * n_slip[b, k]
        if has_nr[b]:
            for r in range(w):
                u_far[r] = nr_states[b, r]
            if nr_method == NR_CHARACTERISTIC:
                _characteristic_nr(u_loc, u_far, n_nr[b], gamma, w)
            else:
                rho_l = u_loc[0]
                vn_l = 0.0
                m2 = 0.0
                for k in range(d):
                    vn_l += u_loc[1 + k] / rho_l * n_nr[b, k]
                    m2 += u_loc[1 + k] * u_loc[1 + k]
                p_l = (gamma - 1.0) * (u_loc[w - 1] - 0.5 * m2 / rho_l)
                rho_r = u_far[0]
                vn_r = 0.0
                m2r = 0.0
                for k in range(d):
                    vn_r += u_far[1 + k] / rho_r * n_nr[b, k]
                    m2r += u_far[1 + k] * u_far[1 + k]
                p_r = (gamma - 1.0) * (u_far[w - 1] - 0.5 * m2r / rho_r)
                pstar, vstar, vacuum = _solve_pstar(rho_l, vn_l, p_l, rho_r, vn_r, p_r, gamma)
                if vacuum:
                    err_flag[b] = 1
                else:
                    rho_s, vn_s, p_s, side = _sample_zero_normal(
                        pstar, vstar, rho_l, vn_l, p_l, rho_r, vn_r, p_r, gamma
                    )
                    v2 = 0.0
                    for k in range(d):
                        if side == 0:
                            vperp_k = u_loc[1 + k] / rho_l - vn_l * n_nr[b, k]
                        else:
                            vperp_k = u_far[1 + k] / rho_r - vn_r * n_nr[b, k]
                        vk = vperp_k + vn_s * n_nr[b, k]
                        u_loc[1 + k] = rho_s * vk
                        v2 += vk * vk
                    u_loc[0] = rho_s
                    u_loc[w - 1] = p_s / (gamma - 1.0) + 0.5 * rho_s * v2
        if has_dir[b]:
            for r in range(w):
                u_loc[r] = dir_states[b, r]
        for r in range(w):
            u[i, r] = u_loc[r]


# ---------------------------------------------------------------------------
# Parabolic cell loops (matrix-free operator actions, two-pass gather/scatter)
# ---------------------------------------------------------------------------


@njit(parallel=True, fastmath=True, cache=True)
def cell_velocity_action_2d(cells, dphi, wdet, mu, lam_v, x, loc):
    """Per-cell contributions of w -> int s(w):e(phi_a e_k) dx, 2D."""
    nc = cells.shape[0]
    nq = dphi.shape[1]
    stride = 1 if dphi.shape[0] > 1 else 0
    c23 = lam_v - 2.0 * mu / 3.0
    for c in prange(nc):
        tc = c * stride
        n0 = cells[c, 0]
        n1 = cells[c, 1]
        n2 = cells[c, 2]
        n3 = cells[c, 3]
        v0x, v0y = x[n0, 0], x[n0, 1]
        v1x, v1y = x[n1, 0], x[n1, 1]
        v2x, v2y = x[n2, 0], x[n2, 1]
        v3x, v3y = x[n3, 0], x[n3, 1]
        o0x = 0.0
        o0y = 0.0
        o1x = 0.0
        o1y = 0.0
        o2x = 0.0
        o2y = 0.0
        o3x = 0.0
        o3y = 0.0
        for q in range(nq):
            d00 = dphi[tc, q, 0, 0]
            d01 = dphi[tc, q, 0, 1]
            d10 = dphi[tc, q, 1, 0]
            d11 = dphi[tc, q, 1, 1]
            d20 = dphi[tc, q, 2, 0]
            d21 = dphi[tc, q, 2, 1]
            d30 = dphi[tc, q, 3, 0]
            d31 = dphi[tc, q, 3, 1]
            g00 = v0x * d00 + v1x * d10 + v2x * d20 + v3x * d30
            g01 = v0x * d01 + v1x * d11 + v2x * d21 + v3x * d31
            g10 = v0y * d00 + v1y * d10 + v2y * d20 + v3y * d30
            g11 = v0y * d01 + v1y * d11 + v2y * d21 + v3y * d31
            divv = g00 + g11
            wq = wdet[tc, q]
            s00 = wq * (2.0 * mu * g00 + c23 * divv)
            s11 = wq * (2.0 * mu * g11 + c23 * divv)
            s01 = wq * (mu * (g01 + g10))
            o0x += s00 * d00 + s01 * d01
            o0y += s01 * d00 + s11 * d01
            o1x += s00 * d10 + s01 * d11
            o1y += s01 * d10 + s11 * d11
            o2x += s00 * d20 + s01 * d21
            o2y += s01 * d20 + s11 * d21
            o3x += s00 * d30 + s01 * d31
            o3y += s01 * d30 + s11 * d31
        loc[c, 0, 0] = o0x
        loc[c, 0, 1] = o0y
        loc[c, 1, 0] = o1x
        loc[c, 1, 1] = o1y
        loc[c, 2, 0] = o2x
        loc[c, 2, 1] = o2y
        loc[c, 3, 0] = o3x
        loc[c, 3, 1] = o3y


@njit(parallel=True, fastmath=True, cache=True)
def cell_velocity_action_1d(cells, dphi, wdet, mu, lam_v, x, loc):
    """Per-cell contributions of the 1D viscous form (4/3 mu + lam) v' w'."""
    nc = cells.shape[0]
    nq = dphi.shape[1]
    stride = 1 if dphi.shape[0] > 1 else 0
    coef = 4.0 * mu / 3.0 + lam_v
    for c in prange(nc):
        tc = c * stride
        v0 = x[cells[c, 0], 0]
        v1 = x[cells[c, 1], 0]
        o0 = 0.0
        o1 = 0.0
        for q in range(nq):
            d0 = dphi[tc, q, 0, 0]
            d1 = dphi[tc, q, 1, 0]
            wg = wdet[tc, q] * coef * (v0 * d0 + v1 * d1)
            o0 += wg * d0
            o1 += wg * d1
        loc[c, 0, 0] = o0
        loc[c, 1, 0] = o1


@njit(parallel=True, fastmath=True, cache=True)
def _cell_scalar_action_2d(cells, dphi, wdet, coef, e, loc):
    nc = cells.shape[0]
    nq = dphi.shape[1]
    stride = 1 if dphi.shape[0] > 1 else 0
    for c in prange(nc):
        tc = c * stride
        e0 = e[cells[c, 0]]
        e1 = e[cells[c, 1]]
        e2 = e[cells[c, 2]]
        e3 = e[cells[c, 3]]
        o0 = 0.0
        o1 = 0.0
        o2 = 0.0
        o3 = 0.0
        for q in range(nq):
            d00 = dphi[tc, q, 0, 0]
            d01 = dphi[tc, q, 0, 1]
            d10 = dphi[tc, q, 1, 0]
            d11 = dphi[tc, q, 1, 1]
            d20 = dphi[tc, q, 2, 0]
            d21 = dphi[tc, q, 2, 1]
            d30 = dphi[tc, q, 3, 0]
            d31 = dphi[tc, q, 3, 1]
            gx = e0 * d00 + e1 * d10 + e2 * d20 + e3 * d30
            gy = e0 * d01 + e1 * d11 + e2 * d21 + e3 * d31
            wq = wdet[tc, q] * coef
            o0 += wq * (gx * d00 + gy * d01)
            o1 += wq * (gx * d10 + gy * d11)
            o2 += wq * (gx * d20 + gy * d21)
            o3 += wq * (gx * d30 + gy * d31)
        loc[c, 0] = o0
        loc[c, 1] = o1
        loc[c, 2] = o2
        loc[c, 3] = o3


@njit(parallel=True, fastmath=True, cache=True)
def _cell_scalar_action_1d(cells, dphi, wdet, coef, e, loc):
    nc = cells.shape[0]
    nq = dphi.shape[1]
    stride = 1 if dphi.shape[0] > 1 else 0
    for c in prange(nc):
        tc = c * stride
        e0 = e[cells[c, 0]]
        e1 = e[cells[c, 1]]
        o0 = 0.0
        o1 = 0.0
        for q in range(nq):
            d0 = dphi[tc, q, 0, 0]
            d1 = dphi[tc, q, 1, 0]
            wg = wdet[tc, q] * coef * (e0 * d0 + e1 * d1)
            o0 += wg * d0
            o1 += wg * d1
        loc[c, 0] = o0
        loc[c, 1] = o1


def cell_scalar_action(cells, dphi, wdet, coef, e, loc):
    """Per-cell contributions of e -> coef int grad(e).grad(phi_a) dx."""
    if dphi.shape[3] == 2:
        _cell_scalar_action_2d(cells, dphi, wdet, coef, e, loc)
    else:
        _cell_scalar_action_1d(cells, dphi, wdet, coef, e, loc)


@njit(parallel=True, fastmath=True, cache=True)
def _cell_heating_2d(cells, dphi, nvals, wdet, mu, lam_v, v, loc):
    nc = cells.shape[0]
    nq = dphi.shape[1]
    stride = 1 if dphi.shape[0] > 1 else 0
    c23 = lam_v - 2.0 * mu / 3.0
    for c in prange(nc):
        tc = c * stride
        n0 = cells[c, 0]
        n1 = cells[c, 1]
        n2 = cells[c, 2]
        n3 = cells[c, 3]
        v0x, v0y = v[n0, 0], v[n0, 1]
        v1x, v1y = v[n1, 0], v[n1, 1]
        v2x, v2y = v[n2, 0], v[n2, 1]
        v3x, v3y = v[n3, 0], v[n3, 1]
        o0 = 0.0
        o1 = 0.0
        o2 = 0.0
        o3 = 0.0
        for q in range(nq):
            d00 = dphi[tc, q, 0, 0]
            d01 = dphi[tc, q, 0, 1]
            d10 = dphi[tc, q, 1, 0]
            d11 = dphi[tc, q, 1, 1]
            d20 = dphi[tc, q, 2, 0]
            d21 = dphi[tc, q, 2, 1]
            d30 = dphi[tc, q, 3, 0]
            d31 = dphi[tc, q, 3, 1]
            g00 = v0x * d00 + v1x * d10 + v2x * d20 + v3x * d30
            g01 = v0x * d01 + v1x * d11 + v2x * d21 + v3x * d31
            g10 = v0y * d00 + v1y * d10 + v2y * d20 + v3y * d30
            g11 = v0y * d01 + v1y * d11 + v2y * d21 + v3y * d31
            e01 = 0.5 * (g01 + g10)
            divv = g00 + g11
            val = 2.0 * mu * (g00 * g00 + g11 * g11 + 2.0 * e01 * e01) + c23 * divv * divv
            wq = wdet[tc, q] * val
            o0 += wq * nvals[q, 0]
            o1 += wq * nvals[q, 1]
            o2 += wq * nvals[q, 2]
            o3 += wq * nvals[q, 3]
        loc[c, 0] = o0
        loc[c, 1] = o1
        loc[c, 2] = o2
        loc[c, 3] = o3


@njit(parallel=True, fastmath=True, cache=True)
def _cell_heating_1d(cells, dphi, nvals, wdet, mu, lam_v, v, loc):
    nc = cells.shape[0]
    nq = dphi.shape[1]
    stride = 1 if dphi.shape[0] > 1 else 0
    coef = 4.0 * mu / 3.0 + lam_v
    for c in prange(nc):
        tc = c * stride
        v0 = v[cells[c, 0], 0]
        v1 = v[cells[c, 1], 0]
        o0 = 0.0
        o1 = 0.0
        for q in range(nq):
            g = v0 * dphi[tc, q, 0, 0] + v1 * dphi[tc, q, 1, 0]
            wq = wdet[tc, q] * coef * g * g
            o0 += wq * nvals[q, 0]
            o1 += wq * nvals[q, 1]
        loc[c, 0] = o0
        loc[c, 1] = o1


def cell_heating(cells, dphi, nvals, wdet, mu, lam_v, v, loc):
    """Per-cell contributions of int s(v):e(v) phi_a dx (non-negative form)."""
    if dphi.shape[3] == 2:
        _cell_heating_2d(cells, dphi, nvals, wdet, mu, lam_v, v, loc)
    else:
        _cell_heating_1d(cells, dphi, nvals, wdet, mu, lam_v, v, loc)


@njit(parallel=True, fastmath=True, cache=True)
def gather_vector(ncp, nc_cell, nc_loc, loc, out):
    """Node-parallel gather of per-cell vector contributions."""
    n, d = out.shape
    for i in prange(n):
        for r in range(d):
            s = 0.0
            for kk in range(ncp[i], ncp[i + 1]):
                s += loc[nc_cell[kk], nc_loc[kk], r]
            out[i, r] = s


@njit(parallel=True, fastmath=True, cache=True)
def gather_scalar(ncp, nc_cell, nc_loc, loc, out):
    n = out.shape[0]
    for i in prange(n):
        s = 0.0
        for kk in range(ncp[i], ncp[i + 1]):
            s += loc[nc_cell[kk], nc_loc[kk]]
        out[i] = s


@njit(parallel=True, fastmath=True, cache=True)
def cell_velocity_local_2d(cells, a_loc, x, loc):
    """Uniform-mesh velocity action: one constant 8x8 element matrix.

    a_loc has shape (4, 2, 4, 2); loc (nc, 4, 2)."""
    nc = cells.shape[0]
    for c in prange(nc):
        n0 = cells[c, 0]
        n1 = cells[c, 1]
        n2 = cells[c, 2]
        n3 = cells[c, 3]
        x0 = x[n0, 0]
        y0 = x[n0, 1]
        x1 = x[n1, 0]
        y1 = x[n1, 1]
        x2 = x[n2, 0]
        y2 = x[n2, 1]
        x3 = x[n3, 0]
        y3 = x[n3, 1]
        for a in range(4):
            for k in range(2):
                loc[c, a, k] = (a_loc[a, k, 0, 0] * x0 + a_loc[a, k, 0, 1] * y0
                                + a_loc[a, k, 1, 0] * x1 + a_loc[a, k, 1, 1] * y1
                                + a_loc[a, k, 2, 0] * x2 + a_loc[a, k, 2, 1] * y2
                                + a_loc[a, k, 3, 0] * x3 + a_loc[a, k, 3, 1] * y3)


@njit(parallel=True, fastmath=True, cache=True)
def cell_scalar_local(cells, a_loc, e, loc):
    """Uniform-mesh scalar action: constant nloc x nloc element matrix."""
    nc, nloc = cells.shape
    for c in prange(nc):
        for a in range(nloc):
            s = 0.0
            for b in range(nloc):
                s += a_loc[a, b] * e[cells[c, b]]
            loc[c, a] = s
