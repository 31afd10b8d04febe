"""Pressure recovery on the slab.

The pressure solves a Neumann problem driven by the advection term, with the
wall flux supplied by the slip law. It splits into an advection part p1
(computed mode by mode from explicit decaying kernels) and a slip corrector
p2 proportional to alpha * eps with a closed form per mode. The same Neumann
problem is also solved by banded finite differences as an independent route;
the two must agree at truncation order, and tests hold them to that.

Kernel conventions per horizontal mode xi (k = |xi|), z_< = min(z, z'),
z_> = max(z, z'):

    horizontal forcing:  G(z, z') = -cosh(k z_<) e^{-k z_>} / k,
    vertical forcing:    -cosh(k z) e^{-k z'}   for z < z',
                         +sinh(k z') e^{-k z}   for z > z'.

The vertical kernel jumps by one across the diagonal (the delta from
integrating d_z' against F3 by parts), so its quadrature uses one-sided
trapezoid weights on each side of z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .fields import ScalarField, VectorField, advective_term, divergence, l2_norm
from .grid import Grid


@dataclass
class NeumannProblem:
    """laplace p = rhs on the slab, d_z p(., 0) = flux0, decay at the top."""

    rhs: ScalarField
    flux0: np.ndarray

    def __post_init__(self):
        g = self.rhs.grid
        self.flux0 = np.asarray(self.flux0, dtype=float)
        if self.flux0.shape != (g.n1, g.n2):
            raise ValueError(f"flux0 must have shape {(g.n1, g.n2)}")
        if not np.all(np.isfinite(self.flux0)):
            raise ValueError("flux0 must be finite")


@dataclass
class PressureSplit:
    p1: ScalarField
    p2: ScalarField


def _half_weights(z: np.ndarray):
    """One-sided trapezoid weight matrices: row i of WL integrates over
    [z_0, z_i], row i of WU over [z_i, z_top]. WL + WU is the full rule."""
    nz = z.size
    dz = np.diff(z)
    w = np.zeros(nz)
    w[:-1] += 0.5 * dz
    w[1:] += 0.5 * dz
    idx = np.arange(nz)
    wl = np.where(idx[None, :] < idx[:, None], w[None, :], 0.0)
    wu = np.where(idx[None, :] > idx[:, None], w[None, :], 0.0)
    half_lo = np.concatenate([[0.0], 0.5 * dz])
    half_hi = np.concatenate([0.5 * dz, [0.0]])
    wl[idx, idx] = half_lo
    wu[idx, idx] = half_hi
    return wl, wu


def _weighted_mean_zero(grid: Grid, profile: np.ndarray) -> np.ndarray:
    mean = np.sum(profile * grid.w) / np.sum(grid.w)
    return profile - mean


def solve_p1_kernel(force: VectorField, decay_tol: float = 0.05,
                    skip_below: float = 1e-14) -> ScalarField:
    """Advection pressure: laplace p1 = div force with d_z p1(0) = force3(0),
    by kernel quadrature per horizontal mode.

    Refuses forcings that have not decayed at the top of the slab, since the
    kernels encode decay at infinity. Modes with negligible forcing are
    skipped; the k = 0 mode integrates d_z p = force3 directly and carries
    the gauge (zero weighted mean over the slab).
    """
    g = force.grid
    fmax = float(np.max(np.abs(force.values)))
    out_hat = np.zeros((g.n1, g.n2 // 2 + 1, g.nz), dtype=np.complex128)
    if fmax == 0.0:
        return ScalarField(g, np.zeros((g.n1, g.n2, g.nz)))
    top = float(np.max(np.abs(force.values[:, :, :, -1])))
    if top > decay_tol * fmax:
        raise ValueError(
            f"forcing at the top of the slab is {top / fmax:.2e} of its peak; "
            "kernel quadrature needs decay (raise zmax or the sponge)"
        )

    fhat = np.fft.rfft2(force.values, axes=(1, 2))
    hat_max = float(np.max(np.abs(fhat)))
    z = g.z
    wl, wu = _half_weights(z)
    wfull = wl + wu
    kabs = np.sqrt(g.ksq)

    # k = 0: d_z p = mean of force3 in z, integrated from the wall.
    f3 = fhat[2, 0, 0, :]
    p0 = np.concatenate([[0.0 + 0.0j], np.cumsum(0.5 * np.diff(z) * (f3[1:] + f3[:-1]))])
    out_hat[0, 0, :] = _weighted_mean_zero(g, p0.real) + 1j * _weighted_mean_zero(g, p0.imag)

    zi = z[:, None]
    zj = z[None, :]
    zmin = np.minimum(zi, zj)
    zmax_ = np.maximum(zi, zj)
    for i in range(g.n1):
        for j in range(g.ksq.shape[1]):
            k = kabs[i, j]
            if k == 0.0:
                continue
            fvec = fhat[:, i, j, :]
            if np.max(np.abs(fvec)) <= skip_below * hat_max:
                continue
            e_diff = np.exp(-k * (zmax_ - zmin))
            e_sum = np.exp(-k * (zmax_ + zmin))
            g_hor = -(0.5 / k) * (e_diff + e_sum)
            g3_lower = 0.5 * (e_diff - e_sum)  # z' below z: sinh(k z') e^{-k z}
            g3_upper = -0.5 * (e_diff + e_sum)  # z' above z: -cosh(k z) e^{-k z'}
            s = 1j * (g.kx[i] * fvec[0] + g.ky[j] * fvec[1])
            out_hat[i, j, :] = (wfull * g_hor) @ s + (wl * g3_lower + wu * g3_upper) @ fvec[2]

    return ScalarField(g, np.fft.irfft2(out_hat, s=(g.n1, g.n2), axes=(0, 1)))


def solve_p2_closed(u: VectorField, alpha: float, eps: float) -> ScalarField:
    """Slip corrector: harmonic in the slab, wall flux -2 alpha eps div_h u_h,
    so per mode p2 = 2 i alpha eps (xi . u_h(xi, 0)) e^{-|xi| z} / |xi|."""
    g = u.grid
    if alpha == 0.0 or eps == 0.0:
        return ScalarField(g, np.zeros((g.n1, g.n2, g.nz)))
    th1 = np.fft.rfft2(u.values[0][:, :, 0])
    th2 = np.fft.rfft2(u.values[1][:, :, 0])
    kabs = np.sqrt(g.ksq)
    safe = np.where(kabs == 0.0, 1.0, kabs)
    coef = 2j * alpha * eps * (g.kx[:, None] * th1 + g.ky[None, :] * th2) / safe
    coef[0, 0] = 0.0
    p2_hat = coef[:, :, None] * np.exp(-kabs[:, :, None] * g.z[None, None, :])
    return ScalarField(g, np.fft.irfft2(p2_hat, s=(g.n1, g.n2), axes=(0, 1)))


def p2_mode_profile(kvec, trace_uh, alpha: float, eps: float, z: np.ndarray) -> np.ndarray:
    """Closed-form p2 coefficient profile for one mode; reference for tests
    and for spot checks against the solver output."""
    k1, k2 = kvec
    kabs = float(np.hypot(k1, k2))
    if kabs == 0.0:
        return np.zeros_like(z, dtype=np.complex128)
    coef = 2j * alpha * eps * (k1 * trace_uh[0] + k2 * trace_uh[1]) / kabs
    return coef * np.exp(-kabs * np.asarray(z))


def solve_neumann_fd(problem: NeumannProblem) -> ScalarField:
    """Independent route: banded finite-difference solve of the same Neumann
    problem, mode by mode, Dirichlet zero at the top for k != 0 (stand-in for
    decay) and double integration for the mean mode."""
    g = problem.rhs.grid
    nz = g.nz
    rhat = np.fft.rfft2(problem.rhs.values, axes=(0, 1))
    fluxhat = np.fft.rfft2(problem.flux0, axes=(0, 1))
    out = np.zeros_like(rhat)
    kabs = np.sqrt(g.ksq)
    z = g.z
    dz = np.diff(z)

    # mean mode: d_z p(z) = flux + int_0^z rhs
    dp = fluxhat[0, 0] + np.concatenate(
        [[0.0 + 0.0j], np.cumsum(0.5 * dz * (rhat[0, 0, 1:] + rhat[0, 0, :-1]))]
    )
    p0 = np.concatenate([[0.0 + 0.0j], np.cumsum(0.5 * dz * (dp[1:] + dp[:-1]))])
    out[0, 0, :] = _weighted_mean_zero(g, p0.real) + 1j * _weighted_mean_zero(g, p0.imag)

    ab_base = np.zeros((4, nz))
    rows = np.arange(1, nz - 1)
    for i in range(g.n1):
        for j in range(g.ksq.shape[1]):
            k = kabs[i, j]
            if k == 0.0:
                continue
            ab = ab_base.copy()
            # banded storage ab[u + r - c, c] with (l, u) = (1, 2)
            ab[2 + rows - (rows - 1), rows - 1] += g.d2[rows, rows - 1]
            ab[2, rows] += g.d2[rows, rows] - k * k
            ab[2 + rows - (rows + 1), rows + 1] += g.d2[rows, rows + 1]
            ab[2, 0] = g.d1[0, 0]
            ab[1, 1] = g.d1[0, 1]
            ab[0, 2] = g.d1[0, 2]
            ab[2, nz - 1] = 1.0
            rhs = rhat[i, j, :].copy()
            rhs[0] = fluxhat[i, j]
            rhs[nz - 1] = 0.0
            out[i, j, :] = solve_banded((1, 2), ab, rhs)

    return ScalarField(g, np.fft.irfft2(out, s=(g.n1, g.n2), axes=(0, 1)))


def pressure_split(u: VectorField, alpha: float, eps: float,
                   div_tol: float = 1e-8, tangency_tol: float = 1e-8) -> PressureSplit:
    """Full split for a velocity state: p1 from the advection forcing,
    p2 from the slip trace. Requires a solenoidal, wall-tangent input."""
    g = u.grid
    wall = float(np.max(np.abs(u.values[2][:, :, 0])))
    scale = max(float(np.max(np.abs(u.values))), 1e-300)
    if wall > tangency_tol * scale:
        raise ValueError(f"input is not wall-tangent: max |u3(.,0)| = {wall:.3e}")
    div = l2_norm(divergence(u))
    if div > div_tol * max(scale, 1.0):
        raise ValueError(f"input is not solenoidal: ||div u|| = {div:.3e}")
    force = VectorField(g, -advective_term(u).values)
    p1 = solve_p1_kernel(force)
    p2 = solve_p2_closed(u, alpha, eps)
    return PressureSplit(p1=p1, p2=p2)


def kernel_l1_norms(grid: Grid, kabs: float):
    """Discrete sup over z of the L1 norm (in z') of the two pressure-gradient
    kernels d_z G, with the vector kernel carrying its |xi| factor. Both are
    below one in the continuum uniformly in xi, which is the boundedness
    estimate behind the kernel route; the delta part of the vertical kernel
    contributes its own O(1) term outside these integrals."""
    if kabs <= 0.0:
        raise ValueError("kabs must be positive")
    z = grid.z
    zi = z[:, None]
    zj = z[None, :]
    zmin = np.minimum(zi, zj)
    zmax_ = np.maximum(zi, zj)
    e_diff = np.exp(-kabs * (zmax_ - zmin))
    e_sum = np.exp(-kabs * (zmax_ + zmin))
    wl, wu = _half_weights(z)
    # |xi d_z G|: cosh(k z') e^{-k z} below the diagonal, sinh(k z) e^{-k z'}
    # above, both times k.
    hor_rows = kabs * (
        (wl * 0.5 * (e_diff + e_sum)).sum(axis=1)
        + (wu * 0.5 * (e_diff - e_sum)).sum(axis=1)
    )
    # |d_z G3| reduces to k sinh(k z_<) e^{-k z_>} on both sides.
    vert_rows = kabs * ((wl + wu) * 0.5 * (e_diff - e_sum)).sum(axis=1)
    return float(np.max(hor_rows)), float(np.max(vert_rows))
