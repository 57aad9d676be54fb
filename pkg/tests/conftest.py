import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from artifact.linalg import DensityOperator, Operator

settings.register_profile(
    "default", deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_density(rng: np.random.Generator, dims=(2, 2), rank=None) -> DensityOperator:
    d = math.prod(dims)
    k = rank or d
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return DensityOperator(Operator(rho / np.trace(rho).real, tuple(dims)))


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


seeds = st.integers(min_value=0, max_value=2**32 - 1)
angles = st.floats(min_value=-2 * math.pi, max_value=2 * math.pi, allow_nan=False)


@pytest.fixture
def gen():
    return np.random.default_rng(12345)
