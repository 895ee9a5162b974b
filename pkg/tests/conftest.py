import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cbfshield.collision import HalfSpace, load_scene
from cbfshield.config import data_path
from cbfshield.kinematics import panda_chain

settings.register_profile("repo", derandomize=True, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def chain():
    return panda_chain()


@pytest.fixture(scope="session")
def spheres_scene():
    return load_scene(data_path("scenes", "panda_spheres.yaml"))


@pytest.fixture(scope="session")
def floor_scene(spheres_scene):
    return spheres_scene.with_obstacles([HalfSpace((0, 0, 1), 0.0, "floor")])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_q(rng, chain, n=None, shrink=0.9):
    lo, hi = chain.limits.lower, chain.limits.upper
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo) * shrink
    size = (7,) if n is None else (n, 7)
    return mid + half * rng.uniform(-1, 1, size)
