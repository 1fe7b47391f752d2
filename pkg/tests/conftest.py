import numpy as np
import pytest

from gasflow import gas


@pytest.fixture(scope="session")
def law():
    return gas.GasLaw(1.4)


def random_admissible_states(rng, n, d=1, log_range=3.0, v_scale=3.0):
    """Admissible conserved states with density/pressure spread 10**(+-log_range)."""
    rho = 10.0 ** rng.uniform(-log_range, log_range, n)
    p = 10.0 ** rng.uniform(-log_range, log_range, n)
    v = rng.normal(0.0, v_scale, (n, d))
    return gas.from_primitive(rho, v, p, gas.GasLaw(1.4))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
