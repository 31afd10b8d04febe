"""Weighted-derivative calculus: Z-word enumeration, closed-form norms,
the commutator identities at stencil order, and the sup-norm embedding."""

import math

import numpy as np
import pytest

from conslab import make_grid
from conslab.conormal import (
    ConormalReport,
    EmbeddingSample,
    M_MAX,
    N_m,
    apply_Z,
    apply_Z_multi,
    build_conormal_report,
    check_commutator_identities,
    conormal_norm,
    conormal_sup,
    d2phi,
    dphi,
    embedding_check,
    multi_indices,
    phi,
)
from conslab.fields import ScalarField, VectorField, ddz


def scalar(grid, values):
    return ScalarField(grid, np.broadcast_to(values, grid.shape).copy())


# -- generators ------------------------------------------------------------------


def test_multi_index_counts():
    for m in range(M_MAX + 1):
        assert len(multi_indices(m)) == math.comb(m + 3, 3)
    assert multi_indices(0) == [(0, 0, 0)]
    # ordered by total order so norm accumulation can stop early
    totals = [sum(a) for a in multi_indices(3)]
    assert totals == sorted(totals)


def test_multi_indices_rejects_out_of_range():
    with pytest.raises(ValueError, match="conormal order"):
        multi_indices(M_MAX + 1)
    with pytest.raises(ValueError, match="conormal order"):
        multi_indices(-1)


def test_phi_shape():
    z = np.linspace(0.0, 50.0, 200)
    assert phi(0.0) == 0.0
    assert np.all(np.diff(phi(z)) > 0)
    assert phi(z[-1]) < 1.0
    h = 1e-6
    zc = np.array([0.5, 2.0, 7.0])
    np.testing.assert_allclose(dphi(zc), (phi(zc + h) - phi(zc - h)) / (2 * h),
                               rtol=1e-8)
    np.testing.assert_allclose(d2phi(zc), (dphi(zc + h) - dphi(zc - h)) / (2 * h),
                               rtol=1e-7)


# -- Z application ----------------------------------------------------------------


def test_apply_Z_horizontal_exact(grid_small):
    x1 = grid_small.x1[:, None, None]
    f = scalar(grid_small, np.sin(x1))
    z1 = apply_Z(f, 1)
    np.testing.assert_allclose(z1.values,
                               np.broadcast_to(np.cos(x1), grid_small.shape),
                               atol=1e-12)
    assert np.max(np.abs(apply_Z(f, 2).values)) <= 1e-12


def test_apply_Z3_closed_form():
    errs = []
    for nz in (96, 192):
        g = make_grid(8, 8, nz, zmax=10.0, stretch=3.0)
        f = scalar(g, np.exp(-g.z))
        got = apply_Z(f, 3).values[0, 0]
        want = -phi(g.z) * np.exp(-g.z)
        errs.append(np.max(np.abs(got - want)))
    assert errs[1] < 1e-3
    assert 2.5 <= errs[0] / errs[1] <= 6.0  # second-order stencils


def test_z_words_commute(grid_small):
    x1 = grid_small.x1[:, None, None]
    f = scalar(grid_small, np.sin(x1) * np.exp(-grid_small.z))
    a = apply_Z(apply_Z(f, 1), 3)
    b = apply_Z(apply_Z(f, 3), 1)
    # the horizontal derivative is a Fourier multiplier and the weighted
    # z-derivative acts along the other axis, so the order cannot matter
    np.testing.assert_allclose(a.values, b.values, atol=1e-12)
    word = apply_Z_multi(f, (1, 0, 1))
    np.testing.assert_allclose(word.values, a.values, atol=1e-12)


def test_apply_Z_multi_identity(grid_small):
    f = scalar(grid_small, np.exp(-grid_small.z))
    np.testing.assert_array_equal(apply_Z_multi(f, (0, 0, 0)).values, f.values)


# -- norms -------------------------------------------------------------------------


@pytest.mark.parametrize("m", [0, 1, 3])
def test_conormal_norm_closed_form(grid_small, m):
    # f = sin(x1): every Z-word is a pure horizontal derivative, each with
    # the same L2 norm, so ||f||_m^2 = (m + 1) l1 l2 zmax / 2
    x1 = grid_small.x1[:, None, None]
    f = scalar(grid_small, np.sin(x1))
    want = (m + 1) * 20.0 * np.pi**2
    assert conormal_norm(f, m) ** 2 == pytest.approx(want, rel=1e-12)


def test_conormal_norm_monotone(grid_small):
    x1 = grid_small.x1[:, None, None]
    f = scalar(grid_small, np.sin(x1) * grid_small.z * np.exp(-grid_small.z))
    norms = [conormal_norm(f, m) for m in range(4)]
    assert all(b >= a for a, b in zip(norms, norms[1:]))


def test_conormal_sup_constant(grid_small):
    f = scalar(grid_small, 2.5)
    assert conormal_sup(f, 3) == pytest.approx(2.5, abs=1e-12)


def test_N_m_zero_field_and_guard(grid_small):
    u = VectorField(grid_small, np.zeros((3, *grid_small.shape)))
    assert N_m(u, 2) == 0.0
    with pytest.raises(ValueError, match="m >= 1"):
        N_m(u, 0)


def test_N_m_dominates_norm(grid_small):
    rng = np.random.default_rng(3)
    vals = np.stack([
        rng.normal(size=grid_small.shape) * np.exp(-grid_small.z)
        for _ in range(3)
    ])
    u = VectorField(grid_small, vals)
    assert N_m(u, 2) >= conormal_norm(u, 2) ** 2


# -- commutator identities ------------------------------------------------------------


def _commutator_field(nz):
    g = make_grid(8, 8, nz, zmax=10.0, stretch=3.0)
    x1 = g.x1[:, None, None]
    x2 = g.x2[None, :, None]
    vals = (g.z**2) * np.exp(-g.z) * (1.0 + 0.3 * np.sin(x1) * np.cos(x2))
    return ScalarField(g, np.broadcast_to(vals, g.shape).copy())


def test_commutator_residuals_frozen():
    rep = check_commutator_identities(_commutator_field(48))
    assert rep.laplace_max == pytest.approx(1.702385e-01, rel=1e-4)
    assert rep.divergence_max == pytest.approx(9.342636e-03, rel=1e-4)


def test_commutator_residuals_second_order():
    reps = [check_commutator_identities(_commutator_field(nz))
            for nz in (48, 96, 192)]
    for pick in (lambda r: r.laplace_max, lambda r: r.divergence_max):
        seq = [pick(r) for r in reps]
        orders = np.log2(np.array(seq[:-1]) / np.array(seq[1:]))
        assert np.all(orders >= 1.7) and np.all(orders <= 2.3), orders


# -- embedding ---------------------------------------------------------------------


def test_embedding_requires_second_order(grid_small):
    f = scalar(grid_small, np.exp(-grid_small.z))
    with pytest.raises(ValueError, match="m0 >= 2"):
        embedding_check(f, m0=1)


def test_embedding_ratio_scale_invariant(grid_small):
    x1 = grid_small.x1[:, None, None]
    f = scalar(grid_small, np.sin(x1) * grid_small.z * np.exp(-grid_small.z))
    g = ScalarField(grid_small, 17.0 * f.values)
    assert embedding_check(g).ratio == pytest.approx(embedding_check(f).ratio,
                                                     rel=1e-12)


def test_embedding_sides_match_norms(grid_small):
    f = scalar(grid_small, grid_small.z * np.exp(-grid_small.z))
    s = embedding_check(f, m0=2)
    b = conormal_norm(f, 2)
    a = conormal_norm(ddz(f), 2)
    assert s.rhs == pytest.approx(a * b + b * b, rel=1e-12)
    assert s.lhs == pytest.approx(np.max(np.abs(f.values)) ** 2, rel=1e-12)
    assert isinstance(s, EmbeddingSample)


# -- report rows -----------------------------------------------------------------


def test_report_row_matches_direct_norms(grid_small):
    rng = np.random.default_rng(11)
    vals = np.stack([rng.normal(size=grid_small.shape) * np.exp(-grid_small.z)
                     for _ in range(3)])
    u = VectorField(grid_small, vals)
    rep = build_conormal_report(0.25, u, 3, 0.0)
    assert rep.t == 0.25
    for k in range(4):
        assert rep.norms[k] == pytest.approx(conormal_norm(u, k), rel=1e-10)
    assert rep.n_m == pytest.approx(N_m(u, 3), rel=1e-10)
    assert rep.sup1 == pytest.approx(conormal_sup(u, 1), rel=1e-10)


def test_report_csv_shape():
    header = ConormalReport.csv_header(3)
    row = ConormalReport(t=0.0, norms=[0.0] * 4, grad_norms=[0.0] * 3,
                         sup0=0.0, sup1=0.0, grad_sup0=0.0, grad_sup1=0.0,
                         n_m=0.0, eta_boundary_max=0.0).csv_row()
    assert len(header.split(",")) == len(row.split(","))
