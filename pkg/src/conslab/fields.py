"""Scalar and vector fields on the slab grid, their discrete derivative
operators, norms, and the binary snapshot format.

Horizontal derivatives are spectral (periodic directions), wall-normal
derivatives use the grid's banded stencils. All reductions are deterministic.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .grid import Grid, make_grid

SNAPSHOT_MAGIC = b"CSLB1"


@dataclass
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite entries")


@dataclass
class VectorField:
    grid: Grid
    values: np.ndarray  # (3, n1, n2, nz)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (3, *self.grid.shape):
            raise ValueError(
                f"vector shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("vector field contains non-finite entries")

    @classmethod
    def from_components(cls, f1: ScalarField, f2: ScalarField, f3: ScalarField) -> "VectorField":
        if f1.grid is not f2.grid or f1.grid is not f3.grid:
            if not (f1.grid.cache_key == f2.grid.cache_key == f3.grid.cache_key):
                raise ValueError("components live on different grids")
        return cls(f1.grid, np.stack([f1.values, f2.values, f3.values]))

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.values[i])

    @property
    def u1(self) -> np.ndarray:
        return self.values[0]

    @property
    def u2(self) -> np.ndarray:
        return self.values[1]

    @property
    def u3(self) -> np.ndarray:
        return self.values[2]


@dataclass
class SpectralField:
    """rfft2 coefficients (horizontal transform only) of a real field."""

    grid: Grid
    coeffs: np.ndarray  # (n1, n2//2 + 1, nz) complex

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        want = (self.grid.n1, self.grid.n2 // 2 + 1, self.grid.nz)
        if self.coeffs.shape != want:
            raise ValueError(f"spectral shape {self.coeffs.shape}, expected {want}")
        # Hermitian symmetry of the ky = 0 column is what makes the inverse real.
        col = self.coeffs[:, 0, :]
        if not np.allclose(col, np.conj(col[-np.arange(self.grid.n1) % self.grid.n1]), atol=1e-10):
            raise ValueError("coefficients are not the transform of a real field")


def to_spectral(f: ScalarField) -> SpectralField:
    return SpectralField(f.grid, np.fft.rfft2(f.values, axes=(0, 1)))


def from_spectral(fh: SpectralField) -> ScalarField:
    g = fh.grid
    return ScalarField(g, np.fft.irfft2(fh.coeffs, s=(g.n1, g.n2), axes=(0, 1)))


def _ddy_values(grid: Grid, values: np.ndarray, axis: int) -> np.ndarray:
    vh = np.fft.rfft2(values, axes=(-3, -2))
    if axis == 1:
        vh *= 1j * grid.kx[:, None, None]
    elif axis == 2:
        vh *= 1j * grid.ky[None, :, None]
    else:
        raise ValueError("axis must be 1 or 2")
    return np.fft.irfft2(vh, s=(grid.n1, grid.n2), axes=(-3, -2))


def ddy(f: ScalarField, axis: int) -> ScalarField:
    """Spectral derivative along horizontal direction `axis` (1 or 2)."""
    return ScalarField(f.grid, _ddy_values(f.grid, f.values, axis))


def _ddz_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    return values @ grid.d1.T


def ddz(f: ScalarField) -> ScalarField:
    """Wall-normal derivative: three-point stencils, one-sided at the walls."""
    return ScalarField(f.grid, _ddz_values(f.grid, f.values))


def ddzz(f: ScalarField) -> ScalarField:
    """Second wall-normal derivative (four-point one-sided rows at the walls)."""
    return ScalarField(f.grid, f.values @ f.grid.d2.T)


def divergence(u: VectorField) -> ScalarField:
    g = u.grid
    out = _ddy_values(g, u.values[0], 1)
    out += _ddy_values(g, u.values[1], 2)
    out += _ddz_values(g, u.values[2])
    return ScalarField(g, out)


def curl(u: VectorField) -> VectorField:
    g = u.grid
    w1 = _ddy_values(g, u.values[2], 2) - _ddz_values(g, u.values[1])
    w2 = _ddz_values(g, u.values[0]) - _ddy_values(g, u.values[2], 1)
    w3 = _ddy_values(g, u.values[1], 1) - _ddy_values(g, u.values[0], 2)
    return VectorField(g, np.stack([w1, w2, w3]))


def gradient(f: ScalarField) -> VectorField:
    g = f.grid
    return VectorField(
        g,
        np.stack(
            [
                _ddy_values(g, f.values, 1),
                _ddy_values(g, f.values, 2),
                _ddz_values(g, f.values),
            ]
        ),
    )


def l2_norm(f: ScalarField | VectorField) -> float:
    """Quadrature L2 norm: exact horizontal cell sum, trapezoid in z."""
    g = f.grid
    sq = f.values * f.values
    if isinstance(f, VectorField):
        sq = sq.sum(axis=0)
    return float(np.sqrt(np.sum(sq @ g.w) * g.da))


def linf_norm(f: ScalarField | VectorField) -> float:
    return float(np.max(np.abs(f.values)))


def dealias(f: ScalarField | SpectralField):
    """Two-thirds rule projection."""
    if isinstance(f, SpectralField):
        return SpectralField(f.grid, f.coeffs * f.grid.mask23[:, :, None])
    vh = np.fft.rfft2(f.values, axes=(0, 1)) * f.grid.mask23[:, :, None]
    return ScalarField(f.grid, np.fft.irfft2(vh, s=(f.grid.n1, f.grid.n2), axes=(0, 1)))


def advective_term(u: VectorField, apply_dealias: bool = True) -> VectorField:
    """(u . grad) u with pointwise products, optionally two-thirds dealiased."""
    g = u.grid
    out = np.empty_like(u.values)
    dz = u.values @ g.d1.T
    d1v = _ddy_values(g, u.values, 1)
    d2v = _ddy_values(g, u.values, 2)
    for i in range(3):
        out[i] = u.values[0] * d1v[i] + u.values[1] * d2v[i] + u.values[2] * dz[i]
    if apply_dealias:
        oh = np.fft.rfft2(out, axes=(1, 2)) * g.mask23[None, :, :, None]
        out = np.fft.irfft2(oh, s=(g.n1, g.n2), axes=(1, 2))
    return VectorField(g, out)


# -- snapshot format ---------------------------------------------------------
#
# magic "CSLB1", then little-endian: u32 n1, n2, nz, u32 component count,
# f64 l1, l2, zmax, stretch, then each component as row-major f64.

_HEADER = struct.Struct("<IIIIdddd")


def write_snapshot(path, fields: VectorField | Sequence[ScalarField]) -> None:
    if isinstance(fields, VectorField):
        comps: Iterable[np.ndarray] = fields.values
        grid = fields.grid
    else:
        fields = list(fields)
        if not fields:
            raise ValueError("nothing to write")
        grid = fields[0].grid
        for f in fields:
            if f.grid.cache_key != grid.cache_key:
                raise ValueError("snapshot components live on different grids")
        comps = [f.values for f in fields]
    comps = list(comps)
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(
            _HEADER.pack(
                grid.n1, grid.n2, grid.nz, len(comps), grid.l1, grid.l2, grid.zmax, grid.stretch
            )
        )
        for arr in comps:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_snapshot(path) -> list[ScalarField]:
    with open(path, "rb") as fh:
        magic = fh.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"bad snapshot magic {magic!r}")
        n1, n2, nz, ncomp, l1, l2, zmax, stretch = _HEADER.unpack(fh.read(_HEADER.size))
        grid = make_grid(n1, n2, nz, l1, l2, zmax, stretch)
        out = []
        count = n1 * n2 * nz
        for _ in range(ncomp):
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError("snapshot truncated")
            arr = np.frombuffer(raw, dtype="<f8").reshape(n1, n2, nz).astype(np.float64)
            out.append(ScalarField(grid, arr))
    return out


def read_snapshot_vector(path) -> VectorField:
    comps = read_snapshot(path)
    if len(comps) != 3:
        raise ValueError(f"expected 3 components, found {len(comps)}")
    return VectorField.from_components(*comps)
