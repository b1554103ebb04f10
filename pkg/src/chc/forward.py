"""Stabilised semi-implicit Euler-Maruyama integration of the state system.

One step, in cosine coefficients (``k2`` are the eigenvalues of -Lap):

    (1 + dt k2^2 + s dt k2) phi^{n+1} = phi^n - dt k2 [Psi'(phi^n) - s phi^n]
                                        - dt C(u^n, phi^n) + B(phi^n) dW^n

The convection ``C(u, phi)`` is assembled as div(u phi), which equals
u . grad(phi) for the divergence-free, boundary-tangent controls used here.
Its zero mode is dropped, so the mean of phi is carried exactly.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFinite, PotentialDomainViolation, ShapeMismatch
from .field import ScalarField, dual_h1_norm
from .noise import NoiseKind, NoiseModel
from .potential import Nonlinearity, PotentialModel, _eval
from .velocity import all_velocities


@dataclass(frozen=True)
class SolverParams:
    n_steps: int = 100
    dt: float = 1e-3
    stabilization_s: float = 1.0
    use_regularized_potential: bool = False
    lam: float = 1e-2
    dealias: bool = False

    def __post_init__(self):
        if self.n_steps < 1 or not self.dt > 0:
            raise ValueError("need n_steps >= 1 and dt > 0")
        if self.stabilization_s < 0:
            raise ValueError("stabilization_s must be nonnegative")
        if self.use_regularized_potential and not self.lam > 0:
            raise ValueError("lambda must be positive")

    @property
    def T(self):
        return self.n_steps * self.dt


@dataclass(frozen=True)
class Models:
    potential: PotentialModel = field(default_factory=PotentialModel.polynomial)
    noise: NoiseModel = field(default_factory=NoiseModel.off)


def nonlinearity(params, models):
    pot = models.potential
    if params.use_regularized_potential:
        return Nonlinearity(pot, params.lam)
    if pot.is_log:
        raise PotentialDomainViolation(
            "logarithmic potential needs use_regularized_potential (Psi_lambda)")
    return Nonlinearity(pot)


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    phi: np.ndarray
    mu: np.ndarray
    mass_series: np.ndarray
    energy_series: np.ndarray
    grid: object = field(repr=False)
    params: SolverParams = None
    noise_key: tuple = None

    @property
    def n_steps(self):
        return self.mu.shape[0]

    def field(self, n):
        return ScalarField(self.grid, self.phi[n])


class Stepper:
    """Precomputed spectral factors for one (grid, params, models) triple."""

    def __init__(self, grid, params, models):
        self.grid = grid
        self.params = params
        self.models = models
        self.nl = nonlinearity(params, models)
        dt, s, k2 = params.dt, params.stabilization_s, grid.k2
        self.denom = 1.0 + dt * k2 * k2 + s * dt * k2
        self.mask = grid.dealias_mask if params.dealias else None
        self.pin_noise_mean = models.noise.kind is NoiseKind.ConservativeMultiplicative

    def convection_hat(self, ux, uy, f):
        c = self.grid.div_hat(ux * f, uy * f)
        if self.mask is not None:
            c *= self.mask
        c[0, 0] = 0.0
        return c

    def noise_hat(self, phi, xi_row):
        nm = self.models.noise
        if nm.is_off:
            return 0.0
        c = self.grid.dct(nm.increment(phi, xi_row, self.params.dt))
        if self.pin_noise_mean:
            c[0, 0] = 0.0
        return c

    def step(self, phi, ux, uy, xi_row):
        g, dt, s = self.grid, self.params.dt, self.params.stabilization_s
        dpsi = self.nl.d1(phi)
        c = g.dct(phi)
        rhs = c - dt * g.k2 * g.dct(dpsi - s * phi)
        rhs -= dt * self.convection_hat(ux, uy, phi)
        rhs = rhs + self.noise_hat(phi, xi_row)
        new_hat = rhs / self.denom
        phi_new = g.idct(new_hat)
        mu = g.idct(g.k2 * new_hat) + dpsi + s * (phi_new - phi)
        return phi_new, mu

    def energy(self, phi):
        return 0.5 * self.grid.grad_sq_integral(phi) + self.grid.integrate(self.nl.psi(phi))


def _xi_row(noise, n, models):
    if models.noise.is_off:
        return np.zeros(0)
    return noise.xi[n]


def forward_step(phi_n, u_n, xi_row, params, models):
    """Advance one step; returns (phi_next, mu_half) as ScalarFields."""
    grid = phi_n.grid
    if u_n.grid != grid:
        raise ShapeMismatch("phi and u live on different grids")
    st = Stepper(grid, params, models)
    xi_row = np.zeros(0) if models.noise.is_off else xi_row
    with np.errstate(over="ignore", invalid="ignore"):
        phi, mu = st.step(phi_n.values, u_n.x_values, u_n.y_values, xi_row)
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(mu))):
        raise NonFinite("non-finite state after one step; reduce dt", step=0)
    return ScalarField(grid, phi), ScalarField(grid, mu)


def _check_inputs(phi0, ctrl, noise, params, models):
    if ctrl.grid != phi0.grid:
        raise ShapeMismatch("initial datum and control live on different grids")
    if ctrl.n_steps != params.n_steps or not np.isclose(ctrl.dt, params.dt, rtol=1e-14, atol=0):
        raise ShapeMismatch("control time grid differs from solver time grid")
    if noise is not None and noise.n_steps != params.n_steps:
        raise ShapeMismatch("noise realization has the wrong number of steps")
    if noise is not None and not models.noise.is_off and noise.xi.shape[1] != models.noise.j_modes:
        raise ShapeMismatch("noise realization has the wrong number of channels")


def forward_solve(phi0, ctrl, noise, params, models, velocities=None):
    """Integrate from ``phi0`` under control ``ctrl`` and one noise path."""
    _check_inputs(phi0, ctrl, noise, params, models)
    grid = phi0.grid
    st = Stepper(grid, params, models)
    if models.potential.is_log:
        with np.errstate(all="ignore"):
            e0 = grid.integrate(_eval(models.potential, 0, phi0.values))
        if not np.isfinite(e0) or np.any(np.abs(phi0.values) > 1):
            warnings.warn("initial free energy is not finite for the logarithmic potential")
    if velocities is None:
        velocities = all_velocities(ctrl)
    N = params.n_steps
    phi = np.empty((N + 1,) + grid.shape)
    mu = np.empty((N,) + grid.shape)
    phi[0] = phi0.values
    for n in range(N):
        xi = _xi_row(noise, n, models)
        with np.errstate(over="ignore", invalid="ignore"):
            phi[n + 1], mu[n] = st.step(phi[n], velocities[n, 0], velocities[n, 1], xi)
        if not (np.all(np.isfinite(phi[n + 1])) and np.all(np.isfinite(mu[n]))):
            raise NonFinite(f"non-finite state at step {n}; reduce dt", step=n)
    mass = phi.mean(axis=(1, 2))
    energy = np.array([st.energy(p) for p in phi])
    key = None if noise is None else (noise.seed, noise.path_index)
    return StateTrajectory(phi, mu, mass, energy, grid, params, key)


def free_energy(phi, model):
    """1/2 int |grad phi|^2 + int Psi(phi); +inf outside the log domain."""
    g, a = phi.grid, phi.values
    if model.is_log and np.any(np.abs(a) > 1):
        return float("inf")
    return 0.5 * g.grad_sq_integral(a) + g.integrate(_eval(model, 0, a))


def v1_norm_series(traj):
    g = traj.grid
    return np.array([np.sqrt(g.inner(p, p) + g.grad_sq_integral(p)) for p in traj.phi])


def c0_dual_distance(traj_a, traj_b):
    """max_n ||phi_a^n - phi_b^n||_{V1*}."""
    g = traj_a.grid
    return max(dual_h1_norm(g, a - b) for a, b in zip(traj_a.phi, traj_b.phi))
