import numpy as np
import pytest

from gasflow import gas, riemann
from gasflow.errors import VacuumError
from conftest import random_admissible_states

N1 = np.array([1.0])


def prim(rho, v, p, law, d=1):
    vel = np.zeros(d)
    vel[0] = v
    return gas.from_primitive(rho, vel, p, law)


def pressure_function(p, rho_k, p_k, gamma):
    """Independent oracle: Toro's f_K, written from the textbook formulas."""
    a_k = np.sqrt(gamma * p_k / rho_k)
    if p <= p_k:
        return 2.0 * a_k / (gamma - 1.0) * ((p / p_k) ** ((gamma - 1) / (2 * gamma)) - 1.0)
    a_coef = 2.0 / ((gamma + 1.0) * rho_k)
    b_coef = (gamma - 1.0) / (gamma + 1.0) * p_k
    return (p - p_k) * np.sqrt(a_coef / (p + b_coef))


def pstar_bisection(rho_l, v_l, p_l, rho_r, v_r, p_r, gamma):
    """Independent bisection solver for the intermediate pressure."""

    def f(p):
        return (pressure_function(p, rho_l, p_l, gamma)
                + pressure_function(p, rho_r, p_r, gamma) + (v_r - v_l))

    lo, hi = 1e-12, max(p_l, p_r)
    while f(hi) < 0:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class TestSolveExact:
    def test_equal_states_degenerate(self, law):
        u = prim(1.3, 0.4, 0.9, law)
        fan = riemann.solve_exact(u, u, N1, law)
        assert fan.pstar == pytest.approx(0.9, rel=1e-12)
        assert fan.vstar == pytest.approx(0.4, rel=1e-12)
        a = float(gas.sound_speed(u, law))
        assert fan.left_wave_speed == pytest.approx(0.4 - a, rel=1e-12)
        assert fan.right_wave_speed == pytest.approx(0.4 + a, rel=1e-12)

    def test_sod_star_values(self, law):
        u_l = prim(1.0, 0.0, 1.0, law)
        u_r = prim(0.125, 0.0, 0.1, law)
        fan = riemann.solve_exact(u_l, u_r, N1, law)
        # Literature values for the Sod tube, cross-checked below by the
        # independent bisection oracle.
        assert fan.pstar == pytest.approx(0.30313, abs=5e-6)
        assert fan.vstar == pytest.approx(0.92745, abs=5e-6)
        assert fan.left_wave == "rarefaction"
        assert fan.right_wave == "shock"
        assert fan.right_wave_speed == pytest.approx(1.75216, abs=5e-6)
        oracle = pstar_bisection(1.0, 0.0, 1.0, 0.125, 0.0, 0.1, 1.4)
        assert fan.pstar == pytest.approx(oracle, rel=1e-10)

    def test_pressure_residual(self, law, rng):
        for _ in range(200):
            r = 10.0 ** rng.uniform(-2, 2, 2)
            p = 10.0 ** rng.uniform(-2, 2, 2)
            v = rng.normal(0, 2, 2)
            u_l = prim(r[0], v[0], p[0], law)
            u_r = prim(r[1], v[1], p[1], law)
            try:
                fan = riemann.solve_exact(u_l, u_r, N1, law)
            except VacuumError:
                continue
            resid = (pressure_function(fan.pstar, r[0], p[0], 1.4)
                     + pressure_function(fan.pstar, r[1], p[1], 1.4) + (v[1] - v[0]))
            assert abs(resid) <= 1e-10 * max(p[0], p[1])

    def test_symmetric_expansion(self, law):
        u_l = prim(1.0, -0.05, 1.0, law)
        u_r = prim(1.0, +0.05, 1.0, law)
        fan = riemann.solve_exact(u_l, u_r, N1, law)
        assert fan.vstar == pytest.approx(0.0, abs=1e-13)
        assert fan.pstar < 1.0

    def test_vacuum_detected(self, law):
        u_l = prim(1.0, -20.0, 0.01, law)
        u_r = prim(1.0, +20.0, 0.01, law)
        with pytest.raises(VacuumError):
            riemann.solve_exact(u_l, u_r, N1, law)

    def test_fan_ordering_invariant(self, law, rng):
        for _ in range(200):
            u_l = random_admissible_states(rng, 1)[0]
            u_r = random_admissible_states(rng, 1)[0]
            try:
                fan = riemann.solve_exact(u_l, u_r, N1, law)
            except VacuumError:
                continue
            assert fan.pstar > 0
            assert fan.left_wave_speed <= fan.vstar + 1e-12 * abs(fan.vstar)
            assert fan.vstar <= fan.right_wave_speed + 1e-12 * abs(fan.vstar)


def textbook_sampler(fan, rho_l, v_l, p_l, rho_r, v_r, p_r, gamma, xi=0.0):
    """Independent x/t-ray sampler following the standard case table."""
    g = gamma
    if xi <= fan.vstar:  # left of contact
        a_l = np.sqrt(g * p_l / rho_l)
        if fan.pstar > p_l:
            beta = (g - 1) / (g + 1)
            s_l = v_l - a_l * np.sqrt((g + 1) / (2 * g) * fan.pstar / p_l + (g - 1) / (2 * g))
            if xi < s_l:
                return rho_l, v_l, p_l
            return rho_l * (fan.pstar / p_l + beta) / (beta * fan.pstar / p_l + 1), fan.vstar, fan.pstar
        head = v_l - a_l
        a_star = a_l * (fan.pstar / p_l) ** ((g - 1) / (2 * g))
        tail = fan.vstar - a_star
        if xi < head:
            return rho_l, v_l, p_l
        if xi > tail:
            return rho_l * (fan.pstar / p_l) ** (1 / g), fan.vstar, fan.pstar
        v = 2 / (g + 1) * (a_l + (g - 1) / 2 * v_l + xi)
        a = v - xi
        rho = rho_l * (a / a_l) ** (2 / (g - 1))
        return rho, v, p_l * (a / a_l) ** (2 * g / (g - 1))
    a_r = np.sqrt(g * p_r / rho_r)
    if fan.pstar > p_r:
        beta = (g - 1) / (g + 1)
        s_r = v_r + a_r * np.sqrt((g + 1) / (2 * g) * fan.pstar / p_r + (g - 1) / (2 * g))
        if xi > s_r:
            return rho_r, v_r, p_r
        return rho_r * (fan.pstar / p_r + beta) / (beta * fan.pstar / p_r + 1), fan.vstar, fan.pstar
    head = v_r + a_r
    a_star = a_r * (fan.pstar / p_r) ** ((g - 1) / (2 * g))
    tail = fan.vstar + a_star
    if xi > head:
        return rho_r, v_r, p_r
    if xi < tail:
        return rho_r * (fan.pstar / p_r) ** (1 / g), fan.vstar, fan.pstar
    v = 2 / (g + 1) * (-a_r + (g - 1) / 2 * v_r + xi)
    a = xi - v
    rho = rho_r * (a / a_r) ** (2 / (g - 1))
    return rho, v, p_r * (a / a_r) ** (2 * g / (g - 1))


class TestSampleAtZero:
    def test_equal_states(self, law):
        u = prim(1.0, 0.2, 0.7, law)
        fan = riemann.solve_exact(u, u, N1, law)
        s = riemann.sample_at_zero(fan, u, u, N1, law)
        assert np.allclose(s, u, rtol=1e-12)

    def test_supersonic_fan_returns_left(self, law):
        u_l = prim(1.0, 5.0, 1.0, law)
        u_r = prim(0.5, 5.0, 0.5, law)
        fan = riemann.solve_exact(u_l, u_r, N1, law)
        assert fan.left_wave_speed > 0
        s = riemann.sample_at_zero(fan, u_l, u_r, N1, law)
        assert np.allclose(s, u_l, rtol=1e-12)

    def test_sod_star_region(self, law):
        u_l = prim(1.0, 0.0, 1.0, law)
        u_r = prim(0.125, 0.0, 0.1, law)
        fan = riemann.solve_exact(u_l, u_r, N1, law)
        s = riemann.sample_at_zero(fan, u_l, u_r, N1, law)
        rho, v, p = gas.to_primitive(s, law)
        assert rho == pytest.approx(0.42632, abs=5e-6)
        assert float(v[0]) == pytest.approx(0.92745, abs=5e-6)
        assert p == pytest.approx(0.30313, abs=5e-6)

    def test_matches_independent_sampler(self, law, rng):
        for _ in range(300):
            r = 10.0 ** rng.uniform(-1.5, 1.5, 2)
            p = 10.0 ** rng.uniform(-1.5, 1.5, 2)
            v = rng.normal(0, 2, 2)
            u_l = prim(r[0], v[0], p[0], law)
            u_r = prim(r[1], v[1], p[1], law)
            try:
                fan = riemann.solve_exact(u_l, u_r, N1, law)
            except VacuumError:
                continue
            mine = riemann.sample_at_zero(fan, u_l, u_r, N1, law)
            rho_o, v_o, p_o = textbook_sampler(fan, r[0], v[0], p[0], r[1], v[1], p[1], 1.4)
            rho_m, v_m, p_m = gas.to_primitive(mine, law)
            assert rho_m == pytest.approx(rho_o, rel=1e-10)
            assert float(v_m[0]) == pytest.approx(v_o, rel=1e-10, abs=1e-12)
            assert p_m == pytest.approx(p_o, rel=1e-10)
            assert gas.is_admissible(mine)

    def test_tangential_velocity_from_contact_side(self, law):
        u_l = gas.from_primitive(1.0, np.array([0.2, 0.7]), 1.0, law)
        u_r = gas.from_primitive(0.125, np.array([0.0, -0.4]), 0.1, law)
        n = np.array([1.0, 0.0])
        fan = riemann.solve_exact(u_l, u_r, n, law)
        assert fan.vstar > 0  # ray x=0 on the left of the contact
        s = riemann.sample_at_zero(fan, u_l, u_r, n, law)
        _, v, _ = gas.to_primitive(s, law)
        assert float(v[1]) == pytest.approx(0.7, rel=1e-12)

    def test_sample_fan_profile(self, law):
        u_l = prim(1.0, 0.0, 1.0, law)
        u_r = prim(0.125, 0.0, 0.1, law)
        fan = riemann.solve_exact(u_l, u_r, N1, law)
        xi = np.linspace(-2.0, 2.5, 301)
        states = riemann.sample_fan(fan, u_l, u_r, N1, law, xi)
        assert np.all(gas.is_admissible(states))
        for i, x in enumerate(xi):
            rho_o, v_o, p_o = textbook_sampler(fan, 1.0, 0.0, 1.0, 0.125, 0.0, 0.1, 1.4, x)
            assert states[i, 0] == pytest.approx(rho_o, rel=1e-10)


class TestWavespeedBound:
    def test_equal_state_tightness(self, law):
        u = gas.from_primitive(1.0, np.array([0.3]), 1.0 / 1.4, law)
        lam = riemann.max_wavespeed_bound(u, u, N1, law)
        assert lam >= 1.3 - 1e-13
        assert lam <= 1.1 * 1.3

    def test_sod_bound_dominates_shock(self, law):
        u_l = prim(1.0, 0.0, 1.0, law)
        u_r = prim(0.125, 0.0, 0.1, law)
        lam = riemann.max_wavespeed_bound(u_l, u_r, N1, law)
        assert lam >= 1.75216

    def test_dominance_and_tightness_fuzz(self, law, rng):
        violations = 0
        worst = 0.0
        for _ in range(20000):
            r = 10.0 ** rng.uniform(-3, 3, 2)
            p = 10.0 ** rng.uniform(-3, 3, 2)
            v = rng.normal(0, 5, 2)
            u_l = prim(r[0], v[0], p[0], law)
            u_r = prim(r[1], v[1], p[1], law)
            try:
                fan = riemann.solve_exact(u_l, u_r, N1, law)
            except VacuumError:
                continue
            lam = riemann.max_wavespeed_bound(u_l, u_r, N1, law)
            if lam < fan.max_wavespeed * (1 - 1e-12):
                violations += 1
            if fan.max_wavespeed > 0:
                worst = max(worst, lam / fan.max_wavespeed)
        assert violations == 0
        assert worst <= 5.0
