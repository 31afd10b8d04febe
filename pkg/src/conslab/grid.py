"""Slab grid: periodic in the two horizontal directions, wall-normal nodes on
[0, zmax] clustered toward the z = 0 wall by an exponential map."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TAU = 2.0 * math.pi


def fd_weights(x: np.ndarray, x0: float, m: int) -> np.ndarray:
    """Weights w such that sum_j w[j] f(x[j]) approximates the m-th derivative
    of f at x0, exact for polynomials of degree < len(x)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if m >= n:
        raise ValueError(f"need more than {n} nodes for derivative order {m}")
    a = np.vander(x - x0, n, increasing=True).T
    b = np.zeros(n)
    b[m] = math.factorial(m)
    return np.linalg.solve(a, b)


def _derivative_matrix(z: np.ndarray, order: int) -> np.ndarray:
    """Banded matrix applying the `order`-th z-derivative: second-order
    three-point stencils inside, one-sided stencils at the walls (four-point
    for the second derivative so the walls stay second order)."""
    nz = len(z)
    d = np.zeros((nz, nz))
    edge = order + 2  # one-sided stencil width for second-order accuracy
    d[0, :edge] = fd_weights(z[:edge], z[0], order)
    d[-1, -edge:] = fd_weights(z[-edge:], z[-1], order)
    for i in range(1, nz - 1):
        d[i, i - 1 : i + 2] = fd_weights(z[i - 1 : i + 2], z[i], order)
    return d


def _trapezoid_weights(z: np.ndarray) -> np.ndarray:
    w = np.zeros_like(z)
    dz = np.diff(z)
    w[0] = dz[0] / 2
    w[-1] = dz[-1] / 2
    w[1:-1] = (dz[:-1] + dz[1:]) / 2
    return w


@dataclass
class Grid:
    """Collocation grid for the slab [0, l1) x [0, l2) x [0, zmax].

    Horizontal nodes are uniform (spectral differentiation); wall-normal
    nodes follow z(s) = zmax (e^{stretch s} - 1)/(e^{stretch} - 1) on
    s = 0 .. 1, reducing to uniform spacing at stretch = 0.
    """

    l1: float
    l2: float
    n1: int
    n2: int
    nz: int
    zmax: float
    stretch: float
    z: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)  # trapezoid weights on z
    d1: np.ndarray = field(repr=False)  # first z-derivative matrix
    d2: np.ndarray = field(repr=False)  # second z-derivative matrix
    kx: np.ndarray = field(repr=False)  # angular wavenumbers, axis 0
    ky: np.ndarray = field(repr=False)  # angular wavenumbers, rfft axis 1
    mask23: np.ndarray = field(repr=False)  # two-thirds dealias mask

    @property
    def x1(self) -> np.ndarray:
        return self.l1 * np.arange(self.n1) / self.n1

    @property
    def x2(self) -> np.ndarray:
        return self.l2 * np.arange(self.n2) / self.n2

    @property
    def da(self) -> float:
        """Horizontal cell area."""
        return (self.l1 / self.n1) * (self.l2 / self.n2)

    @property
    def ksq(self) -> np.ndarray:
        return self.kx[:, None] ** 2 + self.ky[None, :] ** 2

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.nz)

    @property
    def cache_key(self) -> tuple:
        return (self.n1, self.n2, self.nz, self.l1, self.l2, self.zmax, self.stretch)


def make_grid(
    n1: int,
    n2: int,
    nz: int,
    l1: float = TAU,
    l2: float = TAU,
    zmax: float = 10.0,
    stretch: float = 3.0,
) -> Grid:
    """Build a Grid and its derivative/quadrature operators.

    Degenerate parameters are rejected; for production sizes (nz >= 16) a
    positive stretch must actually cluster nodes at the wall, meaning the
    smallest spacing is at most zmax/(4 nz).
    """
    if n1 < 4 or n2 < 4 or n1 % 2 or n2 % 2:
        raise ValueError("n1, n2 must be even and at least 4")
    if nz < 3:
        raise ValueError("nz must be at least 3")
    if l1 <= 0 or l2 <= 0 or zmax <= 0:
        raise ValueError("l1, l2, zmax must be positive")
    if stretch < 0 or not np.isfinite(stretch):
        raise ValueError("stretch must be finite and nonnegative")

    s = np.linspace(0.0, 1.0, nz)
    if stretch == 0.0:
        z = zmax * s
    else:
        z = zmax * np.expm1(stretch * s) / np.expm1(stretch)
    z[0] = 0.0
    z[-1] = zmax
    dz = np.diff(z)
    if np.any(dz <= 0):
        raise ValueError("wall-normal nodes are not strictly increasing")
    if stretch > 0 and nz >= 16 and dz.min() > zmax / (4 * nz):
        raise ValueError(
            f"stretch={stretch} does not cluster nodes at the wall "
            f"(min spacing {dz.min():.3g} > zmax/(4 nz) = {zmax / (4 * nz):.3g}); "
            "use stretch >= 2.4 or stretch = 0 for a uniform grid"
        )

    kx = TAU * np.fft.fftfreq(n1, d=l1 / n1)
    ky = TAU * np.fft.rfftfreq(n2, d=l2 / n2)

    keep1 = np.abs(np.fft.fftfreq(n1) * n1) <= n1 // 3
    keep2 = np.abs(np.fft.rfftfreq(n2) * n2) <= n2 // 3
    mask23 = keep1[:, None] & keep2[None, :]

    return Grid(
        l1=float(l1),
        l2=float(l2),
        n1=n1,
        n2=n2,
        nz=nz,
        zmax=float(zmax),
        stretch=float(stretch),
        z=z,
        w=_trapezoid_weights(z),
        d1=_derivative_matrix(z, 1),
        d2=_derivative_matrix(z, 2),
        kx=kx,
        ky=ky,
        mask23=mask23,
    )
