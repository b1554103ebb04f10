"""Discrete tangent and adjoint of the forward scheme.

The tangent step is the exact derivative of :meth:`forward.Stepper.step`,

    theta^{n+1} = D^{-1} [ theta^n + dt Lap((Psi''(phi^n) - s) theta^n)
                           - dt Pi F div(u^n theta^n + h^n phi^n)
                           + DB(phi^n) theta^n dW^n - dt Lap g^n ],

with ``D = 1 + dt Lap^2 - s dt Lap``, ``Pi`` the mean projection and ``F`` the
optional dealiasing mask.  The adjoint runs the transpose of that map
backwards, so every duality pairing holds to roundoff.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyPathSet, ShapeMismatch, TrajectoryMismatch
from .forward import Stepper
from .velocity import all_velocities


@dataclass(frozen=True)
class CostWeights:
    alpha1: float = 0.0
    alpha2: float = 1.0
    alpha3: float = 0.0

    def __post_init__(self):
        a = (self.alpha1, self.alpha2, self.alpha3)
        if min(a) < 0 or sum(a) <= 0:
            raise ValueError("weights must be nonnegative with alpha1 + alpha2 + alpha3 > 0")


@dataclass(frozen=True, eq=False)
class Targets:
    """Tracking targets: ``phi_Q`` is one field or a series over time levels 0..N."""

    phi_Q: np.ndarray
    phi_T: np.ndarray

    def at(self, n):
        q = np.asarray(self.phi_Q)
        return q if q.ndim == 2 else q[n]

    def check(self, grid, n_steps):
        q = np.asarray(self.phi_Q)
        ok_q = q.shape == grid.shape or q.shape == (n_steps + 1,) + grid.shape
        if not ok_q or np.shape(self.phi_T) != grid.shape:
            raise ShapeMismatch("targets are not shaped like the state")

    @classmethod
    def constant(cls, grid, value_q=0.0, value_t=0.0):
        return cls(np.full(grid.shape, float(value_q)), np.full(grid.shape, float(value_t)))


@dataclass(frozen=True, eq=False)
class TangentTrajectory:
    theta: np.ndarray
    nu: np.ndarray


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    """Backward solution on one path.

    ``p[n]`` for n = 0..N is the multiplier carried by the recursion, with
    ``p[N] = alpha2 (phi^N - phi_T)``.  ``p_step[n]`` is the zero-mean field paired
    with the inputs of step n (implicit solve applied to ``p[n+1]`` plus the
    tracking source), ``p_tilde[n] = -Lap p_step[n]``, and ``p_conv[n]`` is
    ``p_step[n]`` after the dealiasing mask (identical without dealiasing).
    """

    p: np.ndarray
    p_tilde: np.ndarray
    p_step: np.ndarray
    p_conv: np.ndarray = field(repr=False)


def _check_replay(states, ctrl, noise, params):
    if states.params is not None and states.params != params:
        raise TrajectoryMismatch("trajectory was produced with different solver parameters")
    if states.n_steps != params.n_steps or ctrl.n_steps != params.n_steps:
        raise TrajectoryMismatch("trajectory, control and params disagree on n_steps")
    key = None if noise is None else (noise.seed, noise.path_index)
    if states.noise_key is not None and key is not None and states.noise_key != key:
        raise TrajectoryMismatch(f"trajectory used noise path {states.noise_key}, got {key}")
    if states.grid != ctrl.grid:
        raise TrajectoryMismatch("trajectory and control live on different grids")


class _Linearization:
    """Step-wise tangent map and its transpose around one stored trajectory."""

    def __init__(self, states, ctrl, noise, params, models, velocities=None):
        self.st = Stepper(states.grid, params, models)
        self.grid = states.grid
        self.states = states
        self.noise = noise
        self.models = models
        self.params = params
        self.vel = all_velocities(ctrl) if velocities is None else velocities

    def xi(self, n):
        return np.zeros(0) if self.models.noise.is_off else self.noise.xi[n]

    def _mask(self, c):
        if self.st.mask is not None:
            c = c * self.st.mask
        c[0, 0] = 0.0
        return c

    def step(self, n, theta, h=None, g_force=None):
        """theta^{n+1} and nu^n for direction velocity h = (hx, hy) and forcing g."""
        grid, dt, s = self.grid, self.params.dt, self.params.stabilization_s
        phi = self.states.phi[n]
        ux, uy = self.vel[n]
        d2 = self.st.nl.d2(phi)
        rhs = grid.dct(theta) - dt * grid.k2 * grid.dct((d2 - s) * theta)
        vx, vy = ux * theta, uy * theta
        if h is not None:
            vx = vx + h[0] * phi
            vy = vy + h[1] * phi
        rhs -= dt * self._mask(grid.div_hat(vx, vy))
        nm = self.models.noise
        if not nm.is_off:
            nh = grid.dct(nm.d_increment(phi, theta, self.xi(n), dt))
            if self.st.pin_noise_mean:
                nh[0, 0] = 0.0
            rhs += nh
        if g_force is not None:
            rhs += dt * grid.k2 * grid.dct(g_force)
        new_hat = rhs / self.st.denom
        theta_new = grid.idct(new_hat)
        nu = grid.idct(grid.k2 * new_hat) + d2 * theta + s * (theta_new - theta)
        if g_force is not None:
            nu = nu - g_force
        return theta_new, nu

    def step_transpose(self, n, q):
        """Return (p^n, p_step^n, p_conv^n) for multiplier q on theta^{n+1}."""
        grid, dt, s = self.grid, self.params.dt, self.params.stabilization_s
        phi = self.states.phi[n]
        ux, uy = self.vel[n]
        d2 = self.st.nl.d2(phi)
        w_hat = grid.dct(q) / self.st.denom
        w = grid.idct(w_hat)
        out = w + dt * (d2 - s) * grid.idct(-grid.k2 * w_hat)
        conv_hat = self._mask(w_hat.copy())
        gx, gy = grid.grad_hat(conv_hat)
        out += dt * (ux * gx + uy * gy)
        nm = self.models.noise
        if not nm.is_off:
            wn = w_hat.copy()
            if self.st.pin_noise_mean:
                wn[0, 0] = 0.0
            out += nm.d_increment_adjoint(phi, grid.idct(wn), self.xi(n), dt)
        w_hat[0, 0] = 0.0
        return out, grid.idct(w_hat), grid.idct(conv_hat)


def _velocity_series(direction, ctrl):
    if direction is None:
        return None
    if direction.grid != ctrl.grid or direction.psi.shape != ctrl.psi.shape:
        raise ShapeMismatch("direction must be shaped like the control")
    return all_velocities(direction)


def tangent_solve(states, ctrl, direction_h, forcing_g, noise, params, models):
    """Linearised trajectory for control direction ``h`` and forcing ``g``.

    ``forcing_g`` is None or an array of shape (n_steps, ny, nx).
    """
    _check_replay(states, ctrl, noise, params)
    lin = _Linearization(states, ctrl, noise, params, models)
    hv = _velocity_series(direction_h, ctrl)
    N, shape = params.n_steps, states.grid.shape
    if forcing_g is not None and np.shape(forcing_g) != (N,) + shape:
        raise ShapeMismatch("forcing must have shape (n_steps, ny, nx)")
    theta = np.zeros((N + 1,) + shape)
    nu = np.empty((N,) + shape)
    for n in range(N):
        theta[n + 1], nu[n] = lin.step(
            n, theta[n],
            None if hv is None else hv[n],
            None if forcing_g is None else forcing_g[n])
    return TangentTrajectory(theta, nu)


def adjoint_solve(states, ctrl, targets, weights, noise, params, models, velocities=None):
    """Backward transpose recursion for the tracking functional of ``weights``."""
    _check_replay(states, ctrl, noise, params)
    grid, N = states.grid, params.n_steps
    targets.check(grid, N)
    lin = _Linearization(states, ctrl, noise, params, models, velocities)
    a1, a2, dt = weights.alpha1, weights.alpha2, params.dt
    p = np.empty((N + 1,) + grid.shape)
    p_step = np.empty((N,) + grid.shape)
    p_conv = np.empty((N,) + grid.shape)
    p[N] = a2 * (states.phi[N] - targets.phi_T)
    for n in range(N - 1, -1, -1):
        q = p[n + 1] + a1 * dt * (states.phi[n + 1] - targets.at(n + 1))
        p[n], p_step[n], p_conv[n] = lin.step_transpose(n, q)
    p_tilde = np.stack([-grid.laplacian(w) for w in p_step])
    return AdjointTrajectory(p, p_tilde, p_step, p_conv)


def tracking_functional(states, tangent, targets, weights, params):
    """alpha1 sum_{n>=1} dt <theta^n, phi^n - phi_Q^n> + alpha2 <theta^N, phi^N - phi_T>."""
    g, N, dt = states.grid, params.n_steps, params.dt
    lhs = 0.0
    if weights.alpha1:
        lhs += weights.alpha1 * dt * sum(
            g.inner(tangent.theta[n], states.phi[n] - targets.at(n)) for n in range(1, N + 1))
    if weights.alpha2:
        lhs += weights.alpha2 * g.inner(tangent.theta[N], states.phi[N] - targets.phi_T)
    return lhs


def adjoint_pairing(states, adjoint, direction_velocities, forcing_g, params):
    """sum_n dt [ int phi^n h^n . grad P^n + int P~^n g^n ]."""
    g, N, dt = states.grid, params.n_steps, params.dt
    rhs = 0.0
    for n in range(N):
        if direction_velocities is not None:
            gx, gy = g.grad(adjoint.p_conv[n])
            hx, hy = direction_velocities[n]
            rhs += dt * g.inner(states.phi[n], hx * gx + hy * gy)
        if forcing_g is not None:
            rhs += dt * g.inner(adjoint.p_tilde[n], forcing_g[n])
    return rhs


def duality_gap(states, ctrl, direction_h, forcing_g, targets, weights, noise, params, models,
                return_sides=False):
    """Relative gap between the tracking pairing of theta and the adjoint pairing."""
    tan = tangent_solve(states, ctrl, direction_h, forcing_g, noise, params, models)
    adj = adjoint_solve(states, ctrl, targets, weights, noise, params, models)
    lhs = tracking_functional(states, tan, targets, weights, params)
    rhs = adjoint_pairing(states, adj, _velocity_series(direction_h, ctrl), forcing_g, params)
    gap = abs(lhs - rhs) / (1.0 + abs(lhs) + abs(rhs))
    return (gap, lhs, rhs) if return_sides else gap


def assemble_gradient(states_per_path, adjoints_per_path, ctrl, weights, velocities=None):
    """Path average of phi^n grad P^n plus alpha3 u^n, shape (n_steps, 2, ny, nx)."""
    if len(states_per_path) == 0 or len(states_per_path) != len(adjoints_per_path):
        raise EmptyPathSet("need equally many (>= 1) state and adjoint trajectories")
    grid = ctrl.grid
    acc = np.zeros((ctrl.n_steps, 2) + grid.shape)
    for states, adj in zip(states_per_path, adjoints_per_path):
        for n in range(ctrl.n_steps):
            gx, gy = grid.grad(adj.p_conv[n])
            acc[n, 0] += states.phi[n] * gx
            acc[n, 1] += states.phi[n] * gy
    acc /= len(states_per_path)
    if weights.alpha3:
        u = all_velocities(ctrl) if velocities is None else velocities
        acc += weights.alpha3 * u
    return acc
