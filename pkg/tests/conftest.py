import numpy as np
import pytest

from mfcolloc.fem import Mesh1D, SolverConfig, solve_gfe
from mfcolloc.forcing import ForcingSpec, RandomPoint


def make_cfg(intervals=32, steps=20, d=3, T=0.8, mu=0.01, sigma="cos4pi", u0="expcos"):
    return SolverConfig(Mesh1D.from_intervals(intervals), mu, steps, ForcingSpec(T, d, sigma=sigma), u0=u0)


@pytest.fixture(scope="session")
def study_cfg():
    return make_cfg()


@pytest.fixture(scope="session")
def study_traj(study_cfg):
    return solve_gfe(RandomPoint([0.4, -0.7, 1.1]), study_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
