"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from nullrays import checks as ck
from nullrays import geodesics as ge
from nullrays import lightrays as lr
from nullrays import spacetime as st
from nullrays.rng import stream


@pytest.fixture
def rng():
    return stream(0, "tests")


@pytest.fixture
def flat2():
    return st.minkowski(2)


@pytest.fixture
def flat3():
    return st.minkowski(3)


@pytest.fixture
def flat4():
    return st.minkowski(4)


@pytest.fixture
def curved3():
    return ck.curved_model(3)


@pytest.fixture
def curved4():
    return ck.curved_model(4)


@pytest.fixture
def chart3(flat3):
    return lr.build_chart(flat3, [-2.0, -2.0, -2.0], [2.0, 2.0, 2.0], 0.0)


@pytest.fixture
def curved_chart3(curved3):
    return lr.build_chart(curved3, [-2.0, -2.0, -2.0], [2.0, 2.0, 2.0], 0.0)


@pytest.fixture
def null_state3(curved3, rng):
    return ck.sample_null_state(curved3, rng)


@pytest.fixture
def geodesic3(curved3, null_state3):
    x, v = null_state3
    return ge.integrate_geodesic(curved3, x, v, (0.0, 1.0))


def make_ray(chart, q, angles=()):
    coords = lr.RayCoords(np.concatenate([np.asarray(q, dtype=float),
                                          np.asarray(angles, dtype=float)]),
                          chart.dim)
    return lr.coords_to_ray(chart, coords)
