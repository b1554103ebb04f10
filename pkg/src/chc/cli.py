"""``chc <simulate|optimize|gradcheck|dualcheck> --config <path> [--out DIR] [--seed N]``."""

import argparse
import os
import sys

import numpy as np

from .adjoint import CostWeights, duality_gap
from .errors import CHCError, ConfigError
from .field import ScalarField
from .forward import forward_solve, v1_norm_series
from .io import atomic_write_text, format_csv, write_control, write_csv, write_field
from .noise import noise_manifest, sample_noise
from .optimize import ControlProblem, Status, gradient_check, run_projected_gradient
from .velocity import random_control

COMMANDS = ("simulate", "optimize", "gradcheck", "dualcheck")


def _write_metadata(cfg, out, seed):
    atomic_write_text(os.path.join(out, "config.effective"), cfg.echo())
    p = cfg.params()
    atomic_write_text(os.path.join(out, "manifest.txt"),
                      noise_manifest(seed, cfg["noise.n_paths"], cfg.models().noise, p.dt) + "\n")


def _simulate(cfg, out, seed):
    grid, params, models = cfg.grid(), cfg.params(), cfg.models()
    phi0, ctrl = cfg.phi0(), cfg.control0()
    stride = cfg["output.stride"]
    for i in range(cfg["noise.n_paths"]):
        noise = sample_noise(seed, i, params.n_steps, params.dt, models.noise)
        traj = forward_solve(phi0, ctrl, noise, params, models)
        pdir = os.path.join(out, f"path{i:03d}")
        for n in range(0, params.n_steps + 1, stride):
            write_field(os.path.join(pdir, f"phi_{n:06d}.chf"), ScalarField(grid, traj.phi[n]))
        if params.n_steps % stride:
            n = params.n_steps
            write_field(os.path.join(pdir, f"phi_{n:06d}.chf"), ScalarField(grid, traj.phi[n]))
        v1 = v1_norm_series(traj)
        rows = [(n * params.dt, traj.mass_series[n], traj.energy_series[n], v1[n])
                for n in range(params.n_steps + 1)]
        write_csv(os.path.join(pdir, "series.csv"), ("time", "mass", "energy", "norm_v1"), rows)
    return 0


def _problem(cfg, seed):
    return ControlProblem(cfg.phi0(), cfg.targets(), cfg.weights(), cfg.paths(seed),
                          cfg.params(), cfg.models())


def _optimize(cfg, out, seed):
    report = run_projected_gradient(cfg.control0(), _problem(cfg, seed), cfg.optimizer())
    rows = [(r.iter, r.J, r.vi_residual, r.step, r.norm_u) for r in report.rows]
    write_csv(os.path.join(out, "report.csv"), ("iter", "J", "vi_residual", "step", "norm_u"), rows)
    write_control(os.path.join(out, "control_final.chu"), report.control)
    atomic_write_text(os.path.join(out, "status.txt"), report.status.value + "\n")
    if report.status is Status.LineSearchFailed:
        print("ERROR LineSearchFailed: Armijo backtracking exhausted; reduce optimizer.step0",
              file=sys.stderr)
        return 3
    return 0


def _gradcheck(cfg, out, seed):
    problem = _problem(cfg, seed)
    ctrl = cfg.control0()
    rng = np.random.default_rng(cfg["check.seed"])
    direction = random_control(ctrl.grid, ctrl.n_steps, ctrl.dt, ctrl.k_u, rng)
    rows = gradient_check(ctrl, direction, cfg.deltas(), problem)
    write_csv(os.path.join(out, "gradcheck.csv"), ("delta_or_trial", "lhs", "rhs", "rel_error"),
              [(r.delta, r.fd_value, r.adjoint_value, r.rel_error) for r in rows])
    best = min(r.rel_error for r in rows)
    if best > cfg["check.grad_tol"]:
        print(f"ERROR GradCheckFailed: min rel_error {best:.3e} > {cfg['check.grad_tol']:.1e}",
              file=sys.stderr)
        return 4
    return 0


def _dualcheck(cfg, out, seed):
    params, models = cfg.params(), cfg.models()
    phi0, ctrl = cfg.phi0(), cfg.control0()
    grid, N = ctrl.grid, params.n_steps
    rng = np.random.default_rng(cfg["check.seed"])
    rows = []
    for trial in range(cfg["check.trials"]):
        noise = sample_noise(seed, trial % cfg["noise.n_paths"], N, params.dt, models.noise)
        states = forward_solve(phi0, ctrl, noise, params, models)
        h = random_control(grid, N, params.dt, ctrl.k_u, rng)
        g = rng.standard_normal((N,) + grid.shape)
        w = CostWeights(*rng.uniform(0.1, 1.0, 3))
        targets = cfg.targets()
        gap, lhs, rhs = duality_gap(states, ctrl, h, g, targets, w, noise, params, models,
                                    return_sides=True)
        rows.append((trial, lhs, rhs, gap))
    write_csv(os.path.join(out, "dualcheck.csv"), ("delta_or_trial", "lhs", "rhs", "rel_error"), rows)
    worst = max(r[3] for r in rows)
    if worst > cfg["check.dual_tol"]:
        print(f"ERROR DualCheckFailed: max gap {worst:.3e} > {cfg['check.dual_tol']:.1e}",
              file=sys.stderr)
        return 4
    return 0


_RUNNERS = {"simulate": _simulate, "optimize": _optimize,
            "gradcheck": _gradcheck, "dualcheck": _dualcheck}


def run_command(cmd, config, out_dir=None, seed=None):
    """Run one command; returns the process exit status."""
    if cmd not in _RUNNERS:
        print(f"ERROR UnknownCommand: {cmd!r}", file=sys.stderr)
        return 2
    out = out_dir or config["output.dir"]
    seed = config["noise.seed"] if seed is None else int(seed)
    try:
        os.makedirs(out, exist_ok=True)
        _write_metadata(config, out, seed)
        return _RUNNERS[cmd](config, out, seed)
    except ConfigError as exc:
        print(f"ERROR {exc.tag}: {exc}", file=sys.stderr)
        return 2
    except CHCError as exc:
        print(f"ERROR {exc.tag}: {exc}", file=sys.stderr)
        return 1


def main(argv=None):
    from .config import parse_config

    ap = argparse.ArgumentParser(prog="chc", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read(), command=args.command)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"ERROR ConfigError: {v}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ERROR ConfigError: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = cfg.with_overrides(noise__seed=args.seed)
    return run_command(args.command, cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
