"""Shared fixtures and hypothesis profile for the suite."""
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stefansim.stepper import SolverConfig

settings.register_profile(
    "numerics",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numerics")


@pytest.fixture(scope="session")
def small_cfg():
    return SolverConfig(n_x=32, n_z=33)


@pytest.fixture(scope="session")
def small_grids(small_cfg):
    return small_cfg.grids()


@pytest.fixture(scope="session")
def small_cutoff(small_cfg):
    return small_cfg.cutoff()


@pytest.fixture(scope="session")
def smooth_state(small_grids):
    """A generic smooth, well-resolved (u, rho) pair on the small grids."""
    x = small_grids.tangential.nodes
    z = small_grids.normal.nodes[None, :]
    rho = 0.05 * np.sin(x) + 0.02 * np.cos(2 * x)
    u = (0.03 * np.cos(x)[:, None] + 0.01) * np.cos(np.pi * z) \
        + 0.02 * np.sin(x)[:, None] * z**2
    return u, rho
