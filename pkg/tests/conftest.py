import numpy as np
import pytest

from hillspec import potential as pot


def standard_family():
    """Six potentials covering every evaluation path of the integrator."""
    return {
        "zero": pot.zero(),
        "constant": pot.constant(2 + 1j),
        "mathieu": pot.cos2pi(),
        "complex_fourier": pot.fourier(cos=[0.5, 0.0, 1j], sin=[0.0, 2.0]),
        "b_family": pot.construct_from_q2([16, -4]),
        "samples": pot.sampled(pot.fourier(cos=[0.0, 1.0 + 0.5j], sin=[0.0, 0.0, -1.0]), 64),
    }


# 12 spectral parameters with |mu| <= 400 and |Im sqrt(mu)| <= 3: real, negative
# and complex.  Larger |Im sqrt(mu)| makes c s' grow like exp(2 |Im sqrt(mu)|),
# and an absolute Wronskian bound then drowns in roundoff (see test_ode).
MU_VALUES = np.array([0.0, 1.0, -9.0, 9.8696, 39.5, 150.0 + 2.0j, 400.0, 3.0 - 7.0j,
                      20.0 + 20.0j, 250.0 - 60.0j, 60.0 + 40.0j, 88.8])


@pytest.fixture(scope="session")
def family():
    return standard_family()


@pytest.fixture(scope="session")
def mu_values():
    return MU_VALUES
