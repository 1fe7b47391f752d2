"""Flat key = value run configuration with a strict schema.

The format is plain text, one ``key = value`` per line, ``#`` comments.
Unknown keys are hard errors (no silent drift between code versions and
archived parameter files), and parse -> serialize -> parse is the identity.
Numeric sentinels (-1 for "scenario default") let scenario builders fill in
their published setups while any value remains overridable.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError

__all__ = ["ScenarioConfig", "parse_config", "parse_config_text", "serialize_config"]

_SCENARIOS = ("sod", "becker", "vortex", "shocktube2d", "slipbox")
_INDICATORS = ("entropy_commutator", "constant_one", "constant_zero")
_NR_METHODS = ("characteristic", "godunov")


@dataclass
class ScenarioConfig:
    scenario: str = "sod"
    gamma: float = 1.4
    cfl: float = -1.0  # -1: scenario default
    t_final: float = -1.0
    max_steps: int = 0  # outer (Strang) steps; 0 = until t_final
    cells: int = -1  # 1D cell count
    cells_x: int = -1
    cells_y: int = -1
    limiter_passes: int = 2
    indicator: str = "entropy_commutator"
    consistent_mass_correction: bool = True
    nonreflecting_method: str = "characteristic"
    adaptive_cfl: bool = False
    adaptive_cfl_max: float = 2.0
    threads: int = 1
    seed: int = 0
    output_dir: str = "out"
    csv_cadence: int = 1
    vtk_cadence: int = 0
    debug_checks: bool = True
    mu: float = -1.0
    bulk_viscosity: float = -1.0
    kappa_over_cv: float = -1.0
    solver_tol: float = 1e-12
    solver_maxit: int = 500
    becker_mu: float = 0.025
    becker_velocity_left: float = 1.0
    becker_velocity_right: float = 7.0 / 27.0
    becker_density_left: float = 1.0
    becker_frame_velocity: float = 0.125
    becker_x0: float = 0.46875
    vortex_mach: float = 0.5
    vortex_vbar: float = 0.25
    vortex_r0: float = 0.25
    vortex_case: str = ""  # "", "i", "ii", "iii", "iv"
    shocktube_mu: float = 1e-3
    shocktube_prandtl: float = 0.73
    slipbox_amplitude: float = 0.2

    def validate(self):
        if self.scenario not in _SCENARIOS:
            raise ConfigError(
                f"scenario: unknown scenario {self.scenario!r}; available: {_SCENARIOS}"
            )
        if not 1.0 < self.gamma <= 3.0:
            raise ConfigError(f"gamma: must be in (1, 3], got {self.gamma}")
        if self.cfl != -1.0 and self.cfl <= 0:
            raise ConfigError(f"cfl: must be positive, got {self.cfl}")
        if self.t_final != -1.0 and self.t_final <= 0:
            raise ConfigError(f"t_final: must be positive, got {self.t_final}")
        if self.limiter_passes < 1:
            raise ConfigError("limiter_passes: must be >= 1")
        if self.indicator not in _INDICATORS:
            raise ConfigError(f"indicator: unknown value {self.indicator!r}")
        if self.nonreflecting_method not in _NR_METHODS:
            raise ConfigError(
                f"nonreflecting_method: unknown value {self.nonreflecting_method!r}"
            )
        if self.threads < 1:
            raise ConfigError("threads: must be >= 1")
        if self.vortex_case not in ("", "i", "ii", "iii", "iv"):
            raise ConfigError(f"vortex_case: unknown case {self.vortex_case!r}")
        if self.solver_tol <= 0 or self.solver_maxit < 1:
            raise ConfigError("solver_tol/solver_maxit: invalid solver settings")
        return self


_FIELDS = {f.name: f.type for f in fields(ScenarioConfig)}


def _parse_value(key, text):
    ftype = _FIELDS[key]
    text = text.strip()
    if ftype == "bool":
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if ftype == "int":
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from exc
    if ftype == "float":
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from exc
    return text


def parse_config_text(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, val)
    cfg = ScenarioConfig(**values)
    return cfg.validate()


def parse_config(path):
    with open(path, "r") as fh:
        return parse_config_text(fh.read())


def serialize_config(cfg):
    """Deterministic full dump; parse(serialize(cfg)) == cfg."""
    lines = []
    for f in fields(ScenarioConfig):
        val = getattr(cfg, f.name)
        if isinstance(val, bool):
            text = "true" if val else "false"
        elif isinstance(val, float):
            text = repr(val)
        else:
            text = str(val)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"
