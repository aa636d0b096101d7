import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from qflow import spectral

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

N = 256


@pytest.fixture
def theta():
    return spectral.grid(N)


def trig_poly(coeffs, n=N):
    """Field sum_k a_k cos(k x) + b_k sin(k x) from a flat list [a_1, b_1, a_2, ...]."""
    x = spectral.grid(n)
    out = np.zeros(n)
    for k in range(1, len(coeffs) // 2 + 1):
        out += coeffs[2 * k - 2] * np.cos(k * x) + coeffs[2 * k - 1] * np.sin(k * x)
    return out


small_coeffs = st.lists(
    st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False), min_size=2, max_size=12
)


@st.composite
def positive_fields(draw, n=N, amp=0.4):
    """Band-limited positive field c (1 + p) with max|p| <= amp."""
    p = trig_poly(draw(small_coeffs), n)
    peak = np.max(np.abs(p))
    if peak > 1e-6:
        p *= draw(st.floats(0.05, amp)) / peak
    else:
        p = np.zeros(n)
    return draw(st.floats(0.5, 2.0)) * (1.0 + p)


@st.composite
def band_limited(draw, n=N):
    return draw(st.floats(-2, 2)) + trig_poly(draw(small_coeffs), n)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
