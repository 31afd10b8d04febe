"""Shared fixtures: one small grid and one short viscous run reused across
modules so the cheap tests stay cheap."""

import pytest

from conslab import make_grid
from conslab.dynamics import SimConfig, make_initial_data, run


@pytest.fixture(scope="session")
def grid_small():
    return make_grid(8, 8, 48, zmax=10.0, stretch=3.0)


@pytest.fixture(scope="session")
def short_run(grid_small):
    """Ten steps of the perturbed shear at desk resolution, pressure attached."""
    cfg = SimConfig(grid=grid_small, eps=1e-2, alpha=0.5, dt=0.02, tfinal=0.2,
                    sponge_start=6.0, sponge_rate=2.0, diag_every=5, m=3)
    u0 = make_initial_data("perturbed_shear", 0.25, grid_small, 0)
    traj = run(cfg, u0)
    assert traj.failed is None
    return cfg, traj
