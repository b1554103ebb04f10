"""Sample-average cost, adjoint gradients and projected-gradient descent.

Noise paths are frozen for a whole run, so the reduced cost is a deterministic
smooth function of the control.  Gradients are returned as controls: the Riesz
representer of the derivative in the L2(Q) metric of the velocities.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .adjoint import CostWeights, Targets, adjoint_solve, assemble_gradient
from .errors import NonFinite
from .forward import forward_solve
from .noise import sample_noise
from .velocity import (
    AdmissibleSet,
    all_velocities,
    control_norm,
    l2_inner,
    l2_norm,
    project_admissible,
    pullback_gradient,
    riesz_control,
)


def worker_count(n_items):
    env = os.environ.get("CHC_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_items))


def path_map(fn, items):
    """Map over paths; results keep the input order for deterministic reductions."""
    items = list(items)
    workers = worker_count(len(items))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class PathSpec:
    base_seed: int = 0
    n_paths: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 20
    n_paths: int = 1
    base_seed: int = 0
    step0: float = 1.0
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    tol_vi: float = 1e-6
    weights: CostWeights = field(default_factory=CostWeights)
    admissible: AdmissibleSet = field(default_factory=AdmissibleSet)
    max_shrinks: int = 30

    def __post_init__(self):
        if not (0 < self.armijo_c < 1 and 0 < self.armijo_shrink < 1):
            raise ValueError("armijo_c and armijo_shrink must lie in (0, 1)")
        if self.n_paths < 1 or self.max_iters < 0 or not self.step0 > 0 or not self.tol_vi > 0:
            raise ValueError("invalid optimizer configuration")


@dataclass(eq=False)
class ControlProblem:
    """Everything except the control needed to evaluate the reduced cost."""

    phi0: object
    targets: Targets
    weights: CostWeights
    paths: PathSpec
    params: object
    models: object

    def __post_init__(self):
        self.targets.check(self.phi0.grid, self.params.n_steps)

    @cached_property
    def noises(self):
        p = self.params
        return [sample_noise(self.paths.base_seed, i, p.n_steps, p.dt, self.models.noise)
                for i in range(self.paths.n_paths)]

    @property
    def tracking_active(self):
        return bool(self.weights.alpha1 or self.weights.alpha2)

    def solve_paths(self, ctrl, velocities=None):
        if velocities is None:
            velocities = all_velocities(ctrl)
        return path_map(
            lambda nz: forward_solve(self.phi0, ctrl, nz, self.params, self.models, velocities),
            self.noises)

    def tracking_cost(self, states):
        g, N, dt, w = states.grid, self.params.n_steps, self.params.dt, self.weights
        out = 0.0
        if w.alpha1:
            out += 0.5 * w.alpha1 * dt * sum(
                g.inner(d, d) for d in (states.phi[n] - self.targets.at(n) for n in range(1, N + 1)))
        if w.alpha2:
            d = states.phi[N] - self.targets.phi_T
            out += 0.5 * w.alpha2 * g.inner(d, d)
        return out

    def path_costs(self, ctrl, states=None):
        """Per-path costs, control term included in each."""
        control_term = 0.5 * self.weights.alpha3 * l2_inner(ctrl, ctrl)
        if not self.tracking_active:
            return np.full(self.paths.n_paths, control_term)
        if states is None:
            states = self.solve_paths(ctrl)
        return np.array([self.tracking_cost(s) for s in states]) + control_term

    def cost(self, ctrl):
        return float(np.mean(self.path_costs(ctrl)))

    def cost_and_gradient(self, ctrl, states=None):
        """(J, gradient control, gradient density of shape (N, 2, ny, nx))."""
        velocities = all_velocities(ctrl)
        if not self.tracking_active:
            dens = self.weights.alpha3 * velocities
            grad = riesz_control(ctrl.dt * pullback_gradient(dens, ctrl.grid, ctrl.k_u), ctrl)
            return self.cost(ctrl), grad, dens
        if states is None:
            states = self.solve_paths(ctrl, velocities)
        J = float(np.mean(self.path_costs(ctrl, states)))
        adjoints = path_map(
            lambda sn: adjoint_solve(sn[0], ctrl, self.targets, self.weights, sn[1],
                                     self.params, self.models, velocities),
            list(zip(states, self.noises)))
        dens = assemble_gradient(states, adjoints, ctrl, self.weights, velocities)
        grad = riesz_control(ctrl.dt * pullback_gradient(dens, ctrl.grid, ctrl.k_u), ctrl)
        return J, grad, dens


def evaluate_cost(ctrl, phi0, targets, weights, paths, params, models):
    return ControlProblem(phi0, targets, weights, paths, params, models).cost(ctrl)


def vi_residual(ctrl, gradient, admissible):
    """||u - Proj(u - g)|| in L2(Q); zero exactly at stationary points."""
    return l2_norm(ctrl - project_admissible(ctrl - gradient, admissible))


class Status(Enum):
    VITolReached = "VITolReached"
    MaxIters = "MaxIters"
    LineSearchFailed = "LineSearchFailed"


@dataclass(frozen=True)
class IterRecord:
    iter: int
    J: float
    vi_residual: float
    step: float
    norm_u: float


@dataclass
class OptimizationReport:
    rows: list
    status: Status
    control: object = field(repr=False)

    @property
    def J(self):
        return np.array([r.J for r in self.rows])

    @property
    def vi(self):
        return np.array([r.vi_residual for r in self.rows])


def run_projected_gradient(ctrl0, problem, config, callback=None):
    """Projected gradient with Armijo backtracking on the frozen-seed SAA cost.

    The first trial step is ``step0``, later ones the Barzilai-Borwein step
    <s, s>/<s, y> clipped to [1e-6, 1e6] * step0.  A trial u+ = Proj(u - tau g)
    is accepted when J(u+) <= J(u) - (armijo_c / tau) ||u+ - u||^2, which is
    J(u) - c tau ||g||^2 whenever the projection is inactive.
    """
    adm = config.admissible
    p = adm.p_exponent
    u = project_admissible(ctrl0, adm)
    states = problem.solve_paths(u) if problem.tracking_active else None
    J, g, _ = problem.cost_and_gradient(u, states)
    r = vi_residual(u, g, adm)
    rows = [IterRecord(0, J, r, 0.0, control_norm(u, p))]
    status = Status.MaxIters
    tau = config.step0
    for k in range(1, config.max_iters + 1):
        if r <= config.tol_vi:
            status = Status.VITolReached
            break
        for _ in range(config.max_shrinks):
            trial = project_admissible(u - tau * g, adm)
            d2 = l2_inner(trial - u, trial - u)
            try:
                trial_states = problem.solve_paths(trial) if problem.tracking_active else None
                J_trial = float(np.mean(problem.path_costs(trial, trial_states)))
            except NonFinite:
                # a step large enough to blow up the state is simply rejected
                J_trial = np.inf
            if J_trial <= J - config.armijo_c / tau * d2:
                break
            tau *= config.armijo_shrink
        else:
            status = Status.LineSearchFailed
            break
        J_new, g_new, _ = problem.cost_and_gradient(trial, trial_states)
        s_step, y_step = trial - u, g_new - g
        sy = l2_inner(s_step, y_step)
        u, J, g, states = trial, J_new, g_new, trial_states
        r = vi_residual(u, g, adm)
        rows.append(IterRecord(k, J, r, tau, control_norm(u, p)))
        if callback is not None:
            callback(rows[-1])
        tau = config.step0 if sy <= 0 else float(
            np.clip(l2_inner(s_step, s_step) / sy, 1e-6 * config.step0, 1e6 * config.step0))
    else:
        if r <= config.tol_vi:
            status = Status.VITolReached
    return OptimizationReport(rows, status, u)


@dataclass(frozen=True)
class GradCheckRow:
    delta: float
    fd_value: float
    adjoint_value: float
    rel_error: float


def gradient_check(ctrl, direction, deltas, problem):
    """Centred finite differences of the SAA cost against the adjoint derivative."""
    deltas = [float(d) for d in deltas]
    if any(d <= 0 for d in deltas) or any(a <= b for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be positive and decreasing")
    _, grad, _ = problem.cost_and_gradient(ctrl)
    adj = l2_inner(grad, direction)
    rows = []
    for d in deltas:
        fd = (problem.cost(ctrl + d * direction) - problem.cost(ctrl - d * direction)) / (2 * d)
        rel = abs(fd - adj) / max(abs(adj), 1e-300)
        rows.append(GradCheckRow(d, fd, adj, rel))
    return rows
