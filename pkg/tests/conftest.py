import numpy as np
import pytest

from dropwaves.spherical import SphCoeffs, num_coeffs
from dropwaves.geometry import State


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)


def band_field(l_max, amp, rng, decay=3.0):
    """Random coefficients with an l^-decay envelope (smooth test fields)."""
    c = SphCoeffs.zeros(l_max)
    for ell in range(l_max + 1):
        for m in range(-ell, ell + 1):
            c[ell, m] = amp * rng.standard_normal() / (1.0 + ell) ** decay
    return c


def band_state(l_max, amp, rng, decay=3.0):
    return State(band_field(l_max, amp, rng, decay),
                 band_field(l_max, amp, rng, decay))
