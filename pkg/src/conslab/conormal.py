"""Conormal (boundary-tangent) calculus on the slab.

The three generating derivations are the horizontal derivatives Z1, Z2 and
the weighted wall-normal derivative Z3 = phi(z) d/dz with phi(z) = z/(1+z),
which vanishes linearly at the wall and saturates to 1 in the interior.
Weighted Sobolev norms sum Z-words up to a given order; they control interior
regularity without demanding uniform normal derivatives at the wall.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (
    ScalarField,
    VectorField,
    _ddy_values,
    _ddz_values,
    ddz,
    ddzz,
    l2_norm,
    linf_norm,
)
from .grid import Grid

M_MAX = 6  # desk-scale cap on conormal order

MultiIndex = tuple[int, int, int]


def phi(z: np.ndarray) -> np.ndarray:
    return z / (1.0 + z)


def dphi(z: np.ndarray) -> np.ndarray:
    return (1.0 + z) ** -2


def d2phi(z: np.ndarray) -> np.ndarray:
    return -2.0 * (1.0 + z) ** -3


def multi_indices(m: int) -> list[MultiIndex]:
    """All (a1, a2, a3) with a1 + a2 + a3 <= m, ordered by total then lex."""
    if not 0 <= m <= M_MAX:
        raise ValueError(f"conormal order must be in 0..{M_MAX}, got {m}")
    out = []
    for total in range(m + 1):
        for a1 in range(total + 1):
            for a2 in range(total - a1 + 1):
                out.append((a1, a2, total - a1 - a2))
    return out


def _apply_z_values(grid: Grid, values: np.ndarray, i: int) -> np.ndarray:
    if i == 1 or i == 2:
        return _ddy_values(grid, values, i)
    if i == 3:
        return phi(grid.z) * _ddz_values(grid, values)
    raise ValueError("derivation index must be 1, 2 or 3")


def apply_Z(f: ScalarField, i: int) -> ScalarField:
    """One conormal derivation: Z1, Z2 horizontal, Z3 = phi(z) d/dz."""
    return ScalarField(f.grid, _apply_z_values(f.grid, f.values, i))


def apply_Z_multi(f: ScalarField, alpha: MultiIndex) -> ScalarField:
    """Canonical word Z1^a1 Z2^a2 Z3^a3 applied to f (the three derivations
    commute, discretely to rounding, so the order is a convention)."""
    a1, a2, a3 = alpha
    if min(alpha) < 0 or sum(alpha) > M_MAX:
        raise ValueError(f"bad multi-index {alpha}")
    vals = f.values
    for _ in range(a3):
        vals = _apply_z_values(f.grid, vals, 3)
    for _ in range(a2):
        vals = _apply_z_values(f.grid, vals, 2)
    for _ in range(a1):
        vals = _apply_z_values(f.grid, vals, 1)
    return ScalarField(f.grid, vals)


def _z_word_cache(grid: Grid, values: np.ndarray, m: int) -> dict[MultiIndex, np.ndarray]:
    """All Z-words of one array up to order m, built by extending cached
    parents; reproduces the canonical composition order exactly."""
    cache: dict[MultiIndex, np.ndarray] = {(0, 0, 0): values}
    for alpha in multi_indices(m)[1:]:
        for slot, i in ((0, 1), (1, 2), (2, 3)):
            if alpha[slot] > 0:
                parent = list(alpha)
                parent[slot] -= 1
                cache[alpha] = _apply_z_values(grid, cache[tuple(parent)], i)
                break
    return cache


def _component_arrays(u: ScalarField | VectorField) -> list[np.ndarray]:
    if isinstance(u, VectorField):
        return [u.values[i] for i in range(3)]
    return [u.values]


def conormal_norm(u: ScalarField | VectorField, m: int) -> float:
    """Weighted Sobolev norm: sqrt of the sum of squared L2 norms of all
    Z-words of order <= m over all components."""
    g = u.grid
    total = 0.0
    for arr in _component_arrays(u):
        cache = _z_word_cache(g, arr, m)
        for vals in cache.values():
            total += float(np.sum((vals * vals) @ g.w) * g.da)
    return float(np.sqrt(total))


def conormal_sup(u: ScalarField | VectorField, k: int) -> float:
    """Sum over Z-words of order <= k of the max-norm (components maxed)."""
    g = u.grid
    comps = _component_arrays(u)
    caches = [_z_word_cache(g, arr, k) for arr in comps]
    total = 0.0
    for alpha in multi_indices(k):
        total += max(float(np.max(np.abs(c[alpha]))) for c in caches)
    return total


def _gradient_arrays(u: VectorField) -> list[np.ndarray]:
    g = u.grid
    out = []
    for i in range(3):
        out.append(_ddy_values(g, u.values[i], 1))
        out.append(_ddy_values(g, u.values[i], 2))
        out.append(_ddz_values(g, u.values[i]))
    return out


def N_m(u: VectorField, m: int) -> float:
    """Scale-uniform diagnostic: ||u||_m^2 + ||grad u||_{m-1}^2 + ||grad u||_{1,inf}^2."""
    if m < 1:
        raise ValueError("need m >= 1")
    g = u.grid
    total = conormal_norm(u, m) ** 2
    grads = _gradient_arrays(u)
    caches = [_z_word_cache(g, arr, max(m - 1, 1)) for arr in grads]
    for alpha in multi_indices(m - 1):
        for c in caches:
            vals = c[alpha]
            total += float(np.sum((vals * vals) @ g.w) * g.da)
    sup1 = 0.0
    for alpha in multi_indices(1):
        sup1 += max(float(np.max(np.abs(c[alpha]))) for c in caches)
    return total + sup1 * sup1


@dataclass
class CommutatorReport:
    laplace_max: float  # max | [Z3, Lap] f - (-2 phi' dzz f - phi'' dz f) |
    divergence_max: float  # max | [Z3, div] u + phi' dz u3 |  for u = (f, f, f)


def _laplacian_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    out = _ddy_values(grid, _ddy_values(grid, values, 1), 1)
    out += _ddy_values(grid, _ddy_values(grid, values, 2), 2)
    out += values @ grid.d2.T
    return out


def check_commutator_identities(f: ScalarField) -> CommutatorReport:
    """Residuals of the exact commutator identities
    [Z3, Lap] f = -2 phi' f_zz - phi'' f_z and [Z3, div] u = -phi' dz u3,
    evaluated with the discrete operators; they vanish at stencil order."""
    g = f.grid
    z = g.z
    lap = _laplacian_values(g, f.values)
    lhs = _apply_z_values(g, lap, 3) - _laplacian_values(g, _apply_z_values(g, f.values, 3))
    rhs = -2.0 * dphi(z) * (f.values @ g.d2.T) - d2phi(z) * _ddz_values(g, f.values)
    lap_res = float(np.max(np.abs(lhs - rhs)))

    u = VectorField(g, np.stack([f.values] * 3))
    div = (
        _ddy_values(g, u.values[0], 1)
        + _ddy_values(g, u.values[1], 2)
        + _ddz_values(g, u.values[2])
    )
    lhs_d = _apply_z_values(g, div, 3)
    for i, comp in ((1, 0), (2, 1)):
        lhs_d -= _ddy_values(g, _apply_z_values(g, u.values[comp], 3), i)
    lhs_d -= _ddz_values(g, _apply_z_values(g, u.values[2], 3))
    rhs_d = -dphi(z) * _ddz_values(g, u.values[2])
    div_res = float(np.max(np.abs(lhs_d - rhs_d)))
    return CommutatorReport(lap_res, div_res)


@dataclass
class EmbeddingSample:
    lhs: float  # ||f||_inf^2
    rhs: float  # ||dz f||_{m0} ||f||_{m0} + ||f||_{m0}^2

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


def embedding_check(f: ScalarField, m0: int = 2) -> EmbeddingSample:
    """Anisotropic Sobolev bound ||f||_inf^2 <= C (||dz f||_{m0} ||f||_{m0} + ||f||_{m0}^2),
    valid for m0 > 1; returns the two sides for one sample field."""
    if m0 < 2:
        raise ValueError("embedding requires m0 >= 2")
    lhs = linf_norm(f) ** 2
    a = conormal_norm(ddz(f), m0)
    b = conormal_norm(f, m0)
    return EmbeddingSample(lhs, a * b + b * b)


@dataclass
class ConormalReport:
    """Diagnostic row for one report time."""

    t: float
    norms: list[float]  # ||u||_k, k = 0..m
    grad_norms: list[float]  # ||grad u||_k, k = 0..m-1
    sup0: float
    sup1: float
    grad_sup0: float
    grad_sup1: float
    n_m: float
    eta_boundary_max: float

    @staticmethod
    def csv_header(m: int) -> str:
        cols = ["t"]
        cols += [f"norm_{k}" for k in range(m + 1)]
        cols += [f"grad_norm_{k}" for k in range(m)]
        cols += ["sup_0", "sup_1", "grad_sup_0", "grad_sup_1", "N_m", "eta_boundary_max"]
        return ",".join(cols)

    def csv_row(self) -> str:
        vals = [self.t, *self.norms, *self.grad_norms, self.sup0, self.sup1,
                self.grad_sup0, self.grad_sup1, self.n_m, self.eta_boundary_max]
        return ",".join(repr(float(v)) for v in vals)


def build_conormal_report(
    t: float, u: VectorField, m: int, eta_boundary_max: float
) -> ConormalReport:
    """Compute every column of one diagnostic row in a single cache pass."""
    if m < 1:
        raise ValueError("need m >= 1")
    g = u.grid
    comp_caches = [_z_word_cache(g, arr, m) for arr in _component_arrays(u)]
    sq = {
        alpha: sum(float(np.sum((c[alpha] ** 2) @ g.w) * g.da) for c in comp_caches)
        for alpha in multi_indices(m)
    }
    norms = []
    for k in range(m + 1):
        norms.append(np.sqrt(sum(v for a, v in sq.items() if sum(a) <= k)))

    grads = _gradient_arrays(u)
    grad_caches = [_z_word_cache(g, arr, max(m - 1, 1)) for arr in grads]
    gsq = {
        alpha: sum(float(np.sum((c[alpha] ** 2) @ g.w) * g.da) for c in grad_caches)
        for alpha in multi_indices(m - 1)
    }
    grad_norms = []
    for k in range(m):
        grad_norms.append(np.sqrt(sum(v for a, v in gsq.items() if sum(a) <= k)))

    def sup_of(caches, k):
        tot = 0.0
        for alpha in multi_indices(k):
            tot += max(float(np.max(np.abs(c[alpha]))) for c in caches)
        return tot

    sup0 = sup_of(comp_caches, 0)
    sup1 = sup_of(comp_caches, 1)
    grad_sup0 = sup_of(grad_caches, 0)
    grad_sup1 = sup_of(grad_caches, 1)
    n_m = norms[m] ** 2 + grad_norms[m - 1] ** 2 + grad_sup1 ** 2
    return ConormalReport(
        t=float(t),
        norms=[float(v) for v in norms],
        grad_norms=[float(v) for v in grad_norms],
        sup0=sup0,
        sup1=sup1,
        grad_sup0=grad_sup0,
        grad_sup1=grad_sup1,
        n_m=float(n_m),
        eta_boundary_max=float(eta_boundary_max),
    )
