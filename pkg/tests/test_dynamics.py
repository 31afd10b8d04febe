"""Time stepping: configuration guards, initial data invariants, the slip
law and solenoidality along trajectories, the energy ledger, and abort
behavior. Closed-form quadrature oracles pin the ledger ingredients."""

from dataclasses import replace

import numpy as np
import pytest

from conslab import make_grid
from conslab.dynamics import (
    BC_TOL,
    DIV_TOL,
    SimConfig,
    State,
    _init_carry,
    boundary_drag,
    energy_balance,
    euler_step,
    make_initial_data,
    navier_bc_apply,
    prepared_data,
    run,
    sponge_work,
    step,
    strain_norm_sq,
)
from conslab.fields import VectorField, divergence, l2_norm, linf_norm
from conslab.layer import eta_boundary_max


def config(grid, **overrides):
    base = dict(grid=grid, eps=1e-2, alpha=0.5, dt=0.02, tfinal=0.2,
                sponge_start=6.0, sponge_rate=2.0, diag_every=5, m=3)
    base.update(overrides)
    return SimConfig(**base)


# -- configuration ---------------------------------------------------------------


@pytest.mark.parametrize("overrides, match", [
    (dict(eps=1.5), r"eps must be in \[0, 1\]"),
    (dict(eps=-0.1), r"eps must be in \[0, 1\]"),
    (dict(alpha=1.2), "at most 1"),
    (dict(dt=0.0), "dt > 0"),
    (dict(tfinal=-1.0), "dt > 0 and tfinal"),
    (dict(sponge_start=12.0), "sponge_start"),
    (dict(sponge_rate=-2.0), "sponge_rate"),
    (dict(diag_every=0), "diag_every"),
    (dict(m=7), "m must be in 1"),
])
def test_sim_config_guards(grid_small, overrides, match):
    with pytest.raises(ValueError, match=match):
        config(grid_small, **overrides)


# -- initial data -----------------------------------------------------------------


@pytest.mark.parametrize("kind", ["shear", "perturbed_shear", "vortex_pair"])
def test_initial_data_invariants(grid_small, kind):
    u = make_initial_data(kind, 0.5, grid_small, seed=1)
    assert l2_norm(divergence(u)) <= DIV_TOL
    assert np.max(np.abs(u.values[2][:, :, 0])) == 0.0
    # decays toward the lid rather than growing; the shear envelope is the
    # slowest at e^{-z/5} so this is a loose check
    top = np.max(np.abs(u.values[:, :, :, -8:]))
    assert top <= 0.5 * linf_norm(u)


def test_initial_data_deterministic_and_linear(grid_small):
    a = make_initial_data("perturbed_shear", 0.25, grid_small, seed=4)
    b = make_initial_data("perturbed_shear", 0.25, grid_small, seed=4)
    np.testing.assert_array_equal(a.values, b.values)
    double = make_initial_data("perturbed_shear", 0.5, grid_small, seed=4)
    np.testing.assert_allclose(double.values, 2.0 * a.values, rtol=1e-13)


def test_initial_data_unknown_kind(grid_small):
    with pytest.raises(ValueError, match="unknown initial data kind"):
        make_initial_data("plume", 1.0, grid_small)


def test_prepared_data_invariants():
    g = make_grid(16, 16, 96, zmax=10.0, stretch=8.0)
    cfg = SimConfig(grid=g, eps=1e-2, alpha=1.0, dt=0.02, tfinal=1.0,
                    sponge_start=6.0, sponge_rate=2.0, diag_every=5, m=3)
    u = make_initial_data("vortex_pair", 1.5, g, 1)
    up = prepared_data(u, cfg)
    assert l2_norm(divergence(up)) <= DIV_TOL
    assert eta_boundary_max(up, cfg.alpha) <= BC_TOL
    # passing through the prognostic variables is a projection: once the
    # wall rows are consistent a second pass changes nothing
    again = prepared_data(up, cfg)
    assert np.max(np.abs(again.values - up.values)) <= 1e-11


def test_navier_bc_apply(grid_small):
    rng = np.random.default_rng(9)
    vals = np.stack([rng.normal(size=grid_small.shape) * np.exp(-grid_small.z)
                     for _ in range(3)])
    u = navier_bc_apply(VectorField(grid_small, vals), alpha=0.5)
    assert np.max(np.abs(u.values[2][:, :, 0])) == 0.0
    assert eta_boundary_max(u, 0.5) <= 1e-11 * linf_norm(u)
    again = navier_bc_apply(u, alpha=0.5)
    np.testing.assert_allclose(again.values, u.values, atol=1e-13)


# -- ledger ingredients ---------------------------------------------------------------


def test_strain_norm_oracle(grid_small):
    # pure shear u = (z, 0, 0): |Su|^2 = 1/2 everywhere, the quadrature is
    # exact for constants, so the integral is l1 l2 zmax / 2
    vals = np.stack([np.broadcast_to(grid_small.z, grid_small.shape).copy(),
                     np.zeros(grid_small.shape), np.zeros(grid_small.shape)])
    got = strain_norm_sq(VectorField(grid_small, vals))
    assert got == pytest.approx(0.5 * (2 * np.pi) ** 2 * 10.0, rel=1e-12)


def test_boundary_drag_oracle(grid_small):
    vals = np.stack([np.full(grid_small.shape, 2.0),
                     np.full(grid_small.shape, -1.0),
                     np.zeros(grid_small.shape)])
    got = boundary_drag(VectorField(grid_small, vals))
    assert got == pytest.approx(5.0 * (2 * np.pi) ** 2, rel=1e-12)


def test_sponge_work_localization(grid_small):
    cfg = config(grid_small)
    bump = np.exp(-((grid_small.z - 3.0) / 0.5) ** 2)
    bump[grid_small.z > cfg.sponge_start] = 0.0
    vals = np.stack([np.broadcast_to(bump, grid_small.shape).copy(),
                     np.zeros(grid_small.shape), np.zeros(grid_small.shape)])
    u = VectorField(grid_small, vals)
    assert sponge_work(u, cfg) == 0.0
    lid = np.zeros(grid_small.shape)
    lid[:, :, -1] = 1.0
    w = sponge_work(VectorField(grid_small, np.stack([lid, 0 * lid, 0 * lid])), cfg)
    assert w > 0.0
    doubled = sponge_work(VectorField(grid_small, np.stack([lid, 0 * lid, 0 * lid])),
                          replace(cfg, sponge_rate=4.0))
    assert doubled == pytest.approx(2.0 * w, rel=1e-13)


# -- stepping ---------------------------------------------------------------------


def test_run_matches_manual_stepping(short_run):
    cfg, traj = short_run
    u0 = make_initial_data("perturbed_shear", 0.25, cfg.grid, 0)
    redo = run(cfg, u0, record_pressure=False)
    # reported states drop the carry, so rebuild it from the same raw data;
    # the run loop must then be plain iteration of step, bit for bit
    state = State(0.0, redo.states[0].u, carry=_init_carry(u0, cfg))
    for _ in range(5):
        state = step(state, cfg)
    np.testing.assert_array_equal(state.u.values, redo.states[1].u.values)
    np.testing.assert_array_equal(redo.states[1].u.values, traj.states[1].u.values)


def test_euler_step_is_inviscid_step(short_run):
    cfg, traj = short_run
    s0 = State(0.0, traj.states[0].u,
               carry=run(replace(cfg, eps=0.0, tfinal=0.0),
                         traj.states[0].u).states[0].carry)
    a = euler_step(s0, replace(cfg, eps=0.0))
    b = step(s0, replace(cfg, eps=0.0))
    np.testing.assert_array_equal(a.u.values, b.u.values)


def test_trajectory_invariants(short_run):
    cfg, traj = short_run
    assert traj.failed is None
    assert len(traj.t) == 11  # per-step ledger
    assert len(traj.states) == 3  # reports every diag_every plus t = 0
    np.testing.assert_allclose([s.t for s in traj.states], [0.0, 0.1, 0.2],
                               atol=1e-12)
    for s in traj.states:
        assert l2_norm(divergence(s.u)) <= DIV_TOL
        assert eta_boundary_max(s.u, cfg.alpha) <= BC_TOL
        assert s.p1 is not None and s.p2 is not None


def test_energy_ledger_residual_small(short_run):
    _, traj = short_run
    t, res = energy_balance(traj)
    assert len(t) == len(traj.t) - 2
    assert np.max(np.abs(res)) <= 6e-4  # measured 2.6e-4 at this dt


def test_energy_balance_needs_history(grid_small):
    cfg = config(grid_small, tfinal=0.02)
    traj = run(cfg, make_initial_data("shear", 0.1, grid_small), record_pressure=False)
    with pytest.raises(ValueError, match="three ledger entries"):
        energy_balance(traj)


def test_zero_data_stays_zero(grid_small):
    cfg = config(grid_small, tfinal=0.1)
    traj = run(cfg, VectorField(grid_small, np.zeros((3, *grid_small.shape))),
               record_pressure=False)
    assert traj.failed is None
    assert np.all(traj.ke == 0.0)
    assert linf_norm(traj.states[-1].u) == 0.0


def test_cfl_abort_is_reported(grid_small):
    cfg = config(grid_small, dt=5.0, tfinal=10.0)
    traj = run(cfg, make_initial_data("vortex_pair", 1.5, grid_small, 1),
               record_pressure=False)
    assert traj.failed is not None and "CFL" in traj.failed
    # the partial ledger up to the abort is preserved
    assert len(traj.t) >= 1


def test_viscosity_zero_runs(grid_small):
    cfg = config(grid_small, eps=0.0, tfinal=0.1)
    traj = run(cfg, make_initial_data("perturbed_shear", 0.25, grid_small),
               record_pressure=False)
    assert traj.failed is None
    assert np.all(traj.dissipation == 0.0)
    assert np.all(traj.boundary == 0.0)
