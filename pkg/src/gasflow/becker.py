"""Viscous shock-wave profile with a closed-form implicit solution.

The steady 1D Navier-Stokes traveling wave admits an exact first integral
when the effective Prandtl number is 3/4, i.e. kappa / c_v = gamma mu_eff
with mu_eff = 4 mu / 3 + bulk viscosity.  Total specific enthalpy
H = gamma e + v^2 / 2 is then constant through the wave and the wave-frame
velocity satisfies

    mu_eff/j * v dv/dx = (gamma+1)/(2 gamma) (v - v_left)(v - v_right),

whose integral is the implicit relation

    x(v) = L * [v_left ln(v_left - v) - v_right ln(v - v_right)] + const,
    L = 2 gamma mu_eff / ((gamma + 1) j (v_left - v_right)).

x(v) is strictly decreasing on (v_right, v_left), so v(x) is recovered by
bisection to machine accuracy.  The lab-frame solution adds a Galilean
frame velocity: u(x, t) = v(x - x0 - v_frame t) + v_frame, with density
j / v and internal energy (H - v^2/2) / gamma evaluated in the wave frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["BeckerProfile"]


@dataclass(frozen=True)
class BeckerProfile:
    """Exact traveling viscous shock for verification runs.

    velocity_left/right are wave-frame plateau velocities (left is the
    upstream, faster one); density_left fixes the mass flux
    j = density_left * velocity_left.
    """

    gamma: float = 1.4
    mu: float = 0.01
    bulk_viscosity: float = 0.0
    velocity_left: float = 1.0
    velocity_right: float = 7.0 / 27.0
    density_left: float = 1.0
    frame_velocity: float = 0.125
    x0: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.velocity_right < self.velocity_left:
            raise ConfigError("need 0 < velocity_right < velocity_left")
        if self.mu <= 0.0 or self.density_left <= 0.0:
            raise ConfigError("mu and density_left must be positive")

    @property
    def mu_eff(self):
        return 4.0 * self.mu / 3.0 + self.bulk_viscosity

    @property
    def kappa_over_cv(self):
        """Conductivity required by the closed form (effective Prandtl 3/4)."""
        return self.gamma * self.mu_eff

    @property
    def mass_flux(self):
        return self.density_left * self.velocity_left

    @property
    def total_enthalpy(self):
        """H with the plateau relation v_l v_r = 2 (gamma-1)/(gamma+1) H."""
        g = self.gamma
        return self.velocity_left * self.velocity_right * (g + 1.0) / (2.0 * (g - 1.0))

    @property
    def length_scale(self):
        g = self.gamma
        return (2.0 * g * self.mu_eff
                / ((g + 1.0) * self.mass_flux * (self.velocity_left - self.velocity_right)))

    def _xi_of_v(self, v):
        vl, vr = self.velocity_left, self.velocity_right
        return self.length_scale * (vl * np.log(vl - v) - vr * np.log(v - vr))

    def wave_velocity(self, xi):
        """Wave-frame velocity at wave coordinate xi, centered so that
        v = (v_left + v_right)/2 at xi = 0; vectorised bisection."""
        xi = np.asarray(xi, dtype=float)
        vl, vr = self.velocity_left, self.velocity_right
        vmid = 0.5 * (vl + vr)
        target = xi + self._xi_of_v(np.array(vmid))
        span = vl - vr
        lo = np.full(xi.shape, vr + 1e-300 + span * 1e-17)
        hi = np.full(xi.shape, vl - 1e-300 - span * 1e-17)
        # _xi_of_v is decreasing: large xi -> v near v_right.
        for _ in range(110):
            mid = 0.5 * (lo + hi)
            too_high = self._xi_of_v(mid) > target
            lo = np.where(too_high, mid, lo)
            hi = np.where(too_high, hi, mid)
        return 0.5 * (lo + hi)

    def state(self, x, t, d=2):
        """Conserved lab-frame states at positions x (1D coordinates), time t."""
        x = np.asarray(x, dtype=float)
        xi = x - self.x0 - self.frame_velocity * t
        v_wave = self.wave_velocity(xi)
        rho = self.mass_flux / v_wave
        e = (self.total_enthalpy - 0.5 * v_wave * v_wave) / self.gamma
        v_lab = v_wave + self.frame_velocity
        u = np.zeros(x.shape + (d + 2,))
        u[..., 0] = rho
        u[..., 1] = rho * v_lab
        u[..., d + 1] = rho * e + 0.5 * rho * v_lab * v_lab
        return u
