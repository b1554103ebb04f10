"""Divergence-free controls parameterised by stream functions.

A control holds, for every time step, coefficients ``a[l-1, k-1]`` of

    psi(x, y) = sum_{k,l=1..K} a_lk sin(k pi x/lx) sin(l pi y/ly)

and the velocity is ``u = (d psi/dy, -d psi/dx)``.  Each mode is evaluated
directly on the cell centres, so ``div u = 0`` and ``u.n = 0`` hold by
construction.  Distinct modes are exactly orthogonal on the grid for
``K < min(nx, ny)``, which makes the L2(Q) metric on coefficients diagonal.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import IndexOutOfRange, ShapeMismatch
from .field import GridSpec, VectorField


@dataclass(frozen=True)
class AdmissibleSet:
    p_exponent: float = 6.0
    bound_L: float = 1.0

    def __post_init__(self):
        if not self.p_exponent > 2:
            raise ValueError("p_exponent must exceed 2")
        if not self.bound_L > 0:
            raise ValueError("bound_L must be positive")


@dataclass(frozen=True, eq=False)
class StreamControl:
    grid: GridSpec
    n_steps: int
    dt: float
    psi: np.ndarray = field(repr=False)

    def __post_init__(self):
        psi = np.array(self.psi, dtype=float)
        if psi.ndim != 3 or psi.shape[0] != self.n_steps or psi.shape[1] != psi.shape[2]:
            raise ShapeMismatch(f"psi must have shape (n_steps, K, K), got {psi.shape}")
        if psi.shape[1] >= min(self.grid.nx, self.grid.ny):
            raise ValueError("K_u must be smaller than the grid size")
        if not np.all(np.isfinite(psi)):
            raise ValueError("control coefficients must be finite")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @property
    def k_u(self):
        return self.psi.shape[1]

    @classmethod
    def zeros(cls, grid, n_steps, dt, k_u):
        return cls(grid, n_steps, dt, np.zeros((n_steps, k_u, k_u)))

    def with_psi(self, psi):
        return StreamControl(self.grid, self.n_steps, self.dt, psi)

    def __add__(self, other):
        return self.with_psi(self.psi + other.psi)

    def __sub__(self, other):
        return self.with_psi(self.psi - other.psi)

    def __mul__(self, c):
        return self.with_psi(float(c) * self.psi)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_psi(-self.psi)


@lru_cache(maxsize=32)
def _basis(grid, k_u):
    """Sampled sin/cos of modes 1..K along x and y, plus wavenumbers."""
    k = np.arange(1, k_u + 1)
    wx, wy = np.pi * k / grid.lx, np.pi * k / grid.ly
    sx = np.sin(wx[:, None] * grid.x[None, :])
    cx = np.cos(wx[:, None] * grid.x[None, :])
    sy = np.sin(wy[:, None] * grid.y[None, :])
    cy = np.cos(wy[:, None] * grid.y[None, :])
    return wx, wy, sx, cx, sy, cy


def velocity_arrays(grid, a):
    """(u_x, u_y) on the grid for one coefficient block ``a``."""
    wx, wy, sx, cx, sy, cy = _basis(grid, a.shape[0])
    ux = cy.T @ (wy[:, None] * a) @ sx
    uy = -(sy.T @ (a * wx[None, :]) @ cx)
    return ux, uy


def velocity_transpose(grid, k_u, gx, gy):
    """Transpose of :func:`velocity_arrays` w.r.t. the quadrature inner product."""
    wx, wy, sx, cx, sy, cy = _basis(grid, k_u)
    out = wy[:, None] * (cy @ gx @ sx.T) - wx[None, :] * (sy @ gy @ cx.T)
    return grid.cell_area * out


@lru_cache(maxsize=32)
def l2_weights(grid, k_u):
    """Integral of |u|^2 over the domain for each unit stream mode."""
    wx, wy = np.pi * np.arange(1, k_u + 1) / grid.lx, np.pi * np.arange(1, k_u + 1) / grid.ly
    return 0.25 * grid.area * (wx[None, :] ** 2 + wy[:, None] ** 2)


def stream_to_velocity(ctrl, step):
    if not 0 <= step < ctrl.n_steps:
        raise IndexOutOfRange(f"step {step} outside [0, {ctrl.n_steps})")
    ux, uy = velocity_arrays(ctrl.grid, ctrl.psi[step])
    return VectorField(ctrl.grid, ux, uy)


def all_velocities(ctrl):
    """Velocity arrays for every step, shape (n_steps, 2, ny, nx)."""
    out = np.empty((ctrl.n_steps, 2) + ctrl.grid.shape)
    for n in range(ctrl.n_steps):
        out[n, 0], out[n, 1] = velocity_arrays(ctrl.grid, ctrl.psi[n])
    return out


def lp_l3_norm(grid, velocities, dt, p):
    l3 = np.array([(grid.integrate((u[0] ** 2 + u[1] ** 2) ** 1.5)) ** (1 / 3) for u in velocities])
    return float(np.sum(dt * l3 ** p) ** (1 / p))


def control_norm(ctrl, p):
    """Norm of u in L^p(0, T; L^3)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return lp_l3_norm(ctrl.grid, all_velocities(ctrl), ctrl.dt, p)


def l2_inner(c1, c2):
    """L2(Q) inner product of the induced velocities."""
    w = l2_weights(c1.grid, c1.k_u)
    return float(c1.dt * np.sum(w[None] * c1.psi * c2.psi))


def l2_norm(ctrl):
    return float(np.sqrt(max(l2_inner(ctrl, ctrl), 0.0)))


def project_admissible(ctrl, admissible):
    """Radial scaling onto {control_norm <= L}."""
    nrm = control_norm(ctrl, admissible.p_exponent)
    if nrm <= admissible.bound_L:
        return ctrl
    return ctrl.with_psi(ctrl.psi * (admissible.bound_L / nrm))


def pullback_gradient(g, grid, k_u):
    """Exact transpose of ``stream_to_velocity`` applied step by step.

    ``g`` is an array of shape (n_steps, 2, ny, nx) or a list of VectorFields.
    Returns coefficient arrays of shape (n_steps, K, K).
    """
    if isinstance(g, (list, tuple)) and g and isinstance(g[0], VectorField):
        g = np.stack([np.stack([v.x_values, v.y_values]) for v in g])
    g = np.asarray(g, dtype=float)
    if g.ndim != 4 or g.shape[1:] != (2,) + grid.shape:
        raise ShapeMismatch(f"gradient must have shape (n_steps, 2, {grid.ny}, {grid.nx})")
    return np.stack([velocity_transpose(grid, k_u, gn[0], gn[1]) for gn in g])


def riesz_control(coeff_grad, ctrl):
    """Turn a coefficient-space derivative into the L2(Q) gradient control."""
    w = l2_weights(ctrl.grid, ctrl.k_u)
    return ctrl.with_psi(coeff_grad / (ctrl.dt * w[None]))


def mollify_control(ctrl, width):
    """Causal moving average over the last ``width`` steps.

    Steps before the start are taken equal to the first step, so the kernel
    always has mass one and constant controls are fixed.
    """
    if int(width) != width or width < 1:
        raise ValueError("width must be a positive integer")
    width = int(width)
    if width == 1:
        return ctrl
    padded = np.concatenate([np.repeat(ctrl.psi[:1], width - 1, axis=0), ctrl.psi])
    c = np.concatenate([np.zeros((1,) + ctrl.psi.shape[1:]), np.cumsum(padded, axis=0)])
    n = np.arange(ctrl.n_steps)
    return ctrl.with_psi((c[n + width] - c[n]) / width)


def single_vortex(grid, n_steps, dt, k_u, amplitude=1.0):
    """Control with only the (1, 1) stream mode active at every step."""
    psi = np.zeros((n_steps, k_u, k_u))
    psi[:, 0, 0] = amplitude
    return StreamControl(grid, n_steps, dt, psi)


def random_control(grid, n_steps, dt, k_u, rng, scale=1.0):
    """Smooth random control: coefficients decay like 1/(k^2 + l^2)."""
    k = np.arange(1, k_u + 1)
    decay = 1.0 / (k[None, :] ** 2 + k[:, None] ** 2)
    return StreamControl(grid, n_steps, dt, scale * decay[None] * rng.standard_normal((n_steps, k_u, k_u)))
