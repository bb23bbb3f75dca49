import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "vpfp", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("vpfp")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth(rng, n, modes=4):
    x = (np.arange(n) + 0.5) / n
    out = np.zeros(n)
    for k in range(1, modes + 1):
        a, b = rng.standard_normal(2) / k
        out += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
    return out / np.abs(out).max()
