import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from paraprod.series import TruncatedSeries

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

finite = st.floats(min_value=-4, max_value=4, allow_nan=False, allow_infinity=False)
complexes = st.builds(complex, finite, finite)


def series_strategy(max_degree=8, min_degree=0):
    return st.lists(complexes, min_size=min_degree + 1, max_size=max_degree + 1).map(TruncatedSeries)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_series(rng, degree, h0=False):
    c = rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1)
    if h0:
        c[0] = 0
    return TruncatedSeries(c)
