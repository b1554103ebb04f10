"""Spectral function spaces on the rectangle (0, lx) x (0, ly).

Scalars are expanded in the cosine basis cos(k pi x/lx) cos(l pi y/ly), sampled at
cell centres, so the orthonormal DCT-II diagonalises the Neumann Laplacian.
Vector components use the matching mixed bases: the x-component expands in
sin(k pi x/lx) cos(l pi y/ly), the y-component in cos(k pi x/lx) sin(l pi y/ly).
With this choice :meth:`GridSpec.div` is exactly minus the transpose of
:meth:`GridSpec.grad` under the cell-average quadrature.

Arrays have shape ``(ny, nx)``: y is the outer (row) index, x the inner one.
"""

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from scipy import fft

from .errors import NonZeroMeanInput, ShapeMismatch


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or n < 8 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 8, got {n}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("lx and ly must be positive")

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def area(self):
        return self.lx * self.ly

    @property
    def cell_area(self):
        return self.area / (self.nx * self.ny)

    @cached_property
    def x(self):
        return (np.arange(self.nx) + 0.5) * self.lx / self.nx

    @cached_property
    def y(self):
        return (np.arange(self.ny) + 0.5) * self.ly / self.ny

    @cached_property
    def mesh(self):
        """Cell-centre coordinates ``(X, Y)``, each of shape ``(ny, nx)``."""
        return np.meshgrid(self.x, self.y)

    # wavenumbers: cosine modes k = 0..n-1, sine modes k = 1..n
    @cached_property
    def cx(self):
        return np.pi * np.arange(self.nx) / self.lx

    @cached_property
    def cy(self):
        return np.pi * np.arange(self.ny) / self.ly

    @cached_property
    def sx(self):
        return np.pi * np.arange(1, self.nx + 1) / self.lx

    @cached_property
    def sy(self):
        return np.pi * np.arange(1, self.ny + 1) / self.ly

    @cached_property
    def k2(self):
        """Eigenvalues of -Laplacian on the cosine basis, shape ``(ny, nx)``."""
        return self.cx[None, :] ** 2 + self.cy[:, None] ** 2

    @cached_property
    def k2_inv(self):
        out = np.zeros(self.shape)
        out[self.k2 > 0] = 1.0 / self.k2[self.k2 > 0]
        return out

    @cached_property
    def dealias_mask(self):
        """2/3-rule mask on cosine coefficients."""
        kx = np.arange(self.nx) < (2 * self.nx) // 3
        ky = np.arange(self.ny) < (2 * self.ny) // 3
        return (ky[:, None] & kx[None, :]).astype(float)

    # -- transforms -------------------------------------------------------

    def check(self, a):
        a = np.asarray(a, dtype=float)
        if a.shape != self.shape:
            raise ShapeMismatch(f"expected array of shape {self.shape}, got {a.shape}")
        return a

    @staticmethod
    def dct(a):
        return fft.dctn(a, type=2, norm="ortho")

    @staticmethod
    def idct(c):
        return fft.idctn(c, type=2, norm="ortho")

    # x-component basis: sine in x (axis 1), cosine in y (axis 0)
    @staticmethod
    def _sc(a):
        return fft.dst(fft.dct(a, type=2, norm="ortho", axis=0), type=2, norm="ortho", axis=1)

    @staticmethod
    def _isc(c):
        return fft.idst(fft.idct(c, type=2, norm="ortho", axis=0), type=2, norm="ortho", axis=1)

    # y-component basis: cosine in x, sine in y
    @staticmethod
    def _cs(a):
        return fft.dst(fft.dct(a, type=2, norm="ortho", axis=1), type=2, norm="ortho", axis=0)

    @staticmethod
    def _ics(c):
        return fft.idst(fft.idct(c, type=2, norm="ortho", axis=1), type=2, norm="ortho", axis=0)

    # -- operators on raw arrays -------------------------------------------

    def integrate(self, a):
        return self.cell_area * float(np.sum(a))

    def inner(self, a, b):
        return self.cell_area * float(np.vdot(a, b))

    def mean(self, a):
        return float(np.mean(a))

    def laplacian(self, a):
        return self.idct(-self.k2 * self.dct(a))

    def inv_laplacian(self, a):
        """Zero-mean solution z of -Lap z = a (no mean check)."""
        return self.idct(self.k2_inv * self.dct(a))

    def grad_hat(self, c):
        """Gradient from cosine coefficients ``c``."""
        gx = np.zeros(self.shape)
        gy = np.zeros(self.shape)
        gx[:, :-1] = -self.sx[None, :-1] * c[:, 1:]
        gy[:-1, :] = -self.sy[:-1, None] * c[1:, :]
        return self._isc(gx), self._ics(gy)

    def grad(self, a):
        return self.grad_hat(self.dct(a))

    def div_hat(self, vx, vy):
        """Cosine coefficients of div(vx, vy)."""
        out = np.zeros(self.shape)
        out[:, 1:] += self.sx[None, :-1] * self._sc(vx)[:, :-1]
        out[1:, :] += self.sy[:-1, None] * self._cs(vy)[:-1, :]
        return out

    def div(self, vx, vy):
        return self.idct(self.div_hat(vx, vy))

    def grad_sq_integral(self, a):
        """Integral of |grad a|^2, evaluated exactly in coefficient space."""
        c = self.dct(a)
        return self.cell_area * float(np.sum(self.k2 * c * c))

    def min_eigenvalue(self):
        """Smallest nonzero eigenvalue of -Laplacian."""
        return min(self.cx[1], self.cy[1]) ** 2


@dataclass(frozen=True)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = self.grid.check(self.values)
        if not np.all(np.isfinite(v)):
            raise ValueError("ScalarField values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid, fn):
        X, Y = grid.mesh
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape).astype(float))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.shape, float(c)))


@dataclass(frozen=True)
class VectorField:
    grid: GridSpec
    x_values: np.ndarray
    y_values: np.ndarray

    def __post_init__(self):
        for name in ("x_values", "y_values"):
            object.__setattr__(self, name, self.grid.check(getattr(self, name)))


class NormKind(Enum):
    MeanSquare = "H"
    H1 = "V1"
    DualH1 = "V1*"


def laplacian(f):
    return ScalarField(f.grid, f.grid.laplacian(f.values))


def inv_neumann_laplacian(f):
    """Inverse of -Laplacian on zero-mean fields (operator N)."""
    g = f.grid
    m = g.mean(f.values)
    scale = np.sqrt(g.inner(f.values, f.values))
    if abs(m) > 1e-10 * scale:
        raise NonZeroMeanInput(f"input mean {m:.3e} is not zero; subtract the mean first")
    return ScalarField(g, g.inv_laplacian(f.values))


def gradient(f):
    gx, gy = f.grid.grad(f.values)
    return VectorField(f.grid, gx, gy)


def divergence(v):
    return ScalarField(v.grid, v.grid.div(v.x_values, v.y_values))


def spatial_mean(f):
    return f.grid.mean(f.values)


def norm(f, kind=NormKind.MeanSquare):
    g, a = f.grid, f.values
    if kind is NormKind.MeanSquare:
        return np.sqrt(g.inner(a, a))
    if kind is NormKind.H1:
        return np.sqrt(g.inner(a, a) + g.grad_sq_integral(a))
    if kind is NormKind.DualH1:
        m = g.mean(a)
        c = g.dct(a - m)
        dual = g.cell_area * float(np.sum(g.k2_inv * c * c))
        return np.sqrt(dual + m * m)
    raise ValueError(f"unknown norm kind {kind!r}")


def dual_h1_norm(grid, a):
    """Array-level V1* norm; used in trajectory diagnostics."""
    m = grid.mean(a)
    c = grid.dct(a - m)
    return np.sqrt(grid.cell_area * float(np.sum(grid.k2_inv * c * c)) + m * m)
