import math

import numpy as np
import pytest

from rwacavity.bath import BathSpec

THREE_MODES = [(0.9, 0.05), (1.0, 0.05), (1.1, 0.05)]
TWO_MODES = [(0.8, 0.1), (1.3, 0.15)]


@pytest.fixture
def bath3():
    return BathSpec.from_modes(1.0, THREE_MODES, 1.0)


@pytest.fixture
def bath2():
    return BathSpec.from_modes(1.0, TWO_MODES, 1.0)


def random_bath(rng, max_modes=8, max_coupling=0.2, beta=math.inf, omega=1.0):
    """Random stable bath with couplings up to ``max_coupling * omega``."""
    while True:
        m = int(rng.integers(1, max_modes + 1))
        freqs = rng.uniform(0.5, 1.5, m) * omega
        cs = rng.uniform(0.01, max_coupling, m) * omega
        b = BathSpec(omega, freqs, cs, beta)
        if omega - np.sum(cs ** 2 / freqs) > 0.05:
            return b
