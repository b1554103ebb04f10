"""Flat ``key = value`` run configuration with assumption-tagged validation."""

import math

import numpy as np

from .adjoint import CostWeights, Targets
from .errors import ConfigError
from .field import GridSpec, ScalarField
from .forward import Models, SolverParams
from .noise import NoiseModel
from .optimize import OptimizerConfig, PathSpec
from .potential import PotentialModel
from .velocity import AdmissibleSet, StreamControl, single_vortex

# key -> (type, default); types: int, float, bool, str
SCHEMA = {
    "grid.nx": (int, 32),
    "grid.ny": (int, 32),
    "grid.lx": (float, 2 * math.pi),
    "grid.ly": (float, 2 * math.pi),
    "time.T": (float, 0.5),
    "time.n_steps": (int, 100),
    "solver.s": (str, "auto"),
    "solver.dealias": (bool, False),
    "potential.kind": (str, "polynomial"),
    "potential.theta": (float, 0.5),
    "potential.theta0": (float, 1.0),
    "potential.gamma": (float, 2.0),
    "potential.lambda": (float, 1e-2),
    "potential.use_regularized": (bool, False),
    "noise.kind": (str, "off"),
    "noise.j_modes": (int, 0),
    "noise.amp0": (float, 0.5),
    "noise.seed": (int, 0),
    "noise.n_paths": (int, 1),
    "control.K_u": (int, 3),
    "control.p_exponent": (float, 6.0),
    "control.L": (float, 100.0),
    "control.file": (str, ""),
    "control.init": (str, "vortex"),
    "control.amp": (float, 5.0),
    "cost.alpha1": (float, 0.0),
    "cost.alpha2": (float, 1.0),
    "cost.alpha3": (float, 1e-2),
    "cost.phi_Q_file": (str, ""),
    "cost.phi_T_file": (str, ""),
    "init.preset": (str, "stripes"),
    "init.file": (str, ""),
    "init.mean": (float, 0.0),
    "init.amp": (float, 0.9),
    "init.seed": (int, 0),
    "optimizer.max_iters": (int, 20),
    "optimizer.step0": (float, 100.0),
    "optimizer.armijo_c": (float, 1e-4),
    "optimizer.armijo_shrink": (float, 0.5),
    "optimizer.tol_vi": (float, 1e-6),
    "output.dir": (str, "out"),
    "output.stride": (int, 10),
    "check.deltas": (str, "1e-3,1e-4,1e-5"),
    "check.grad_tol": (float, 1e-6),
    "check.dual_tol": (float, 1e-10),
    "check.trials": (int, 20),
    "check.seed": (int, 1),
}

PRESETS = ("stripes", "random", "tanh-disk")
ADJOINT_COMMANDS = (None, "optimize", "gradcheck")


def _convert(kind, raw):
    if kind is bool:
        low = raw.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError("not finite")
        return v
    return raw.strip()


def _render(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


class RunConfig:
    """Validated configuration; ``values`` maps every schema key to a typed value."""

    def __init__(self, values):
        self.values = dict(values)

    def __getitem__(self, key):
        return self.values[key]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values

    def with_overrides(self, **kv):
        vals = dict(self.values)
        for k, v in kv.items():
            vals[k.replace("__", ".")] = v
        return RunConfig(vals)

    def echo(self):
        """Effective configuration, itself parseable by :func:`parse_config`."""
        lines = ["# effective config"]
        lines += [f"{k} = {_render(self.values[k])}" for k in SCHEMA]
        return "\n".join(lines) + "\n"

    # -- object builders --------------------------------------------------

    def grid(self):
        v = self.values
        return GridSpec(v["grid.nx"], v["grid.ny"], v["grid.lx"], v["grid.ly"])

    @property
    def dt(self):
        return self.values["time.T"] / self.values["time.n_steps"]

    def potential(self):
        v = self.values
        if v["potential.kind"] == "logarithmic":
            return PotentialModel.logarithmic(v["potential.theta"], v["potential.theta0"],
                                              v["potential.gamma"])
        return PotentialModel.polynomial()

    def params(self):
        v = self.values
        s = self.potential().c_psi if v["solver.s"] == "auto" else float(v["solver.s"])
        return SolverParams(v["time.n_steps"], self.dt, s, v["potential.use_regularized"],
                            v["potential.lambda"], v["solver.dealias"])

    def noise_model(self):
        v = self.values
        j = v["noise.j_modes"]
        amps = [v["noise.amp0"]] * j
        if v["noise.kind"] == "multiplicative":
            return NoiseModel.multiplicative(amps)
        if v["noise.kind"] == "additive":
            return NoiseModel.additive(self.grid(), amps)
        return NoiseModel.off()

    def models(self):
        return Models(self.potential(), self.noise_model())

    def weights(self):
        v = self.values
        return CostWeights(v["cost.alpha1"], v["cost.alpha2"], v["cost.alpha3"])

    def admissible(self):
        return AdmissibleSet(self.values["control.p_exponent"], self.values["control.L"])

    def paths(self, seed=None):
        v = self.values
        return PathSpec(v["noise.seed"] if seed is None else seed, v["noise.n_paths"])

    def phi0(self):
        from .io import read_field
        v, g = self.values, self.grid()
        if v["init.file"]:
            f = read_field(v["init.file"])
            if f.grid != g:
                raise ConfigError("init.file: grid differs from grid.* settings")
            return f
        return initial_field(g, v["init.preset"], v["init.mean"], v["init.amp"], v["init.seed"])

    def targets(self):
        from .io import read_field
        v, g = self.values, self.grid()
        mean = self.phi0().values.mean()
        fields = []
        for key in ("cost.phi_Q_file", "cost.phi_T_file"):
            fields.append(read_field(v[key]).values if v[key] else np.full(g.shape, mean))
        return Targets(*fields)

    def control0(self):
        from .io import read_control
        v, g = self.values, self.grid()
        if v["control.file"]:
            return read_control(v["control.file"], g)
        if v["control.init"] == "zero":
            return StreamControl.zeros(g, v["time.n_steps"], self.dt, v["control.K_u"])
        return single_vortex(g, v["time.n_steps"], self.dt, v["control.K_u"], v["control.amp"])

    def optimizer(self):
        v = self.values
        return OptimizerConfig(
            max_iters=v["optimizer.max_iters"], n_paths=v["noise.n_paths"],
            base_seed=v["noise.seed"], step0=v["optimizer.step0"],
            armijo_c=v["optimizer.armijo_c"], armijo_shrink=v["optimizer.armijo_shrink"],
            tol_vi=v["optimizer.tol_vi"], weights=self.weights(), admissible=self.admissible())

    def deltas(self):
        return [float(x) for x in self.values["check.deltas"].split(",") if x.strip()]


def initial_field(grid, preset, mean=0.0, amp=0.9, seed=0):
    """Initial datum presets: stripes, random (mean + small noise), tanh-disk."""
    X, Y = grid.mesh
    if preset == "stripes":
        vals = mean + amp * np.cos(2 * np.pi * X / grid.lx)
    elif preset == "random":
        rng = np.random.default_rng(seed)
        vals = mean + amp * rng.uniform(-1.0, 1.0, grid.shape)
    elif preset == "tanh-disk":
        r = np.hypot(X - grid.lx / 2, Y - grid.ly / 2)
        radius = 0.25 * min(grid.lx, grid.ly)
        vals = mean + amp * np.tanh((radius - r) / np.sqrt(2.0))
    else:
        raise ConfigError(f"init.preset: unknown preset {preset!r}")
    return ScalarField(grid, vals)


def _validate(v, command):
    errs = []
    for k in ("grid.nx", "grid.ny"):
        if v[k] < 8 or v[k] % 2:
            errs.append(f"{k}: grid sizes must be even and >= 8")
    for k in ("grid.lx", "grid.ly", "time.T"):
        if v[k] <= 0:
            errs.append(f"{k}: must be positive")
    if v["time.n_steps"] < 1:
        errs.append("time.n_steps: must be >= 1")
    if v["solver.s"] != "auto":
        try:
            if float(v["solver.s"]) < 0:
                errs.append("solver.s: stabilization must be nonnegative")
        except ValueError:
            errs.append("solver.s: must be 'auto' or a number")

    kind = v["potential.kind"]
    if kind not in ("polynomial", "logarithmic"):
        errs.append("potential.kind: must be 'polynomial' or 'logarithmic'")
    if kind == "logarithmic":
        if not 0 < v["potential.theta"] < v["potential.theta0"]:
            errs.append("potential.theta: [psi_log requires 0<θ<θ₀]")
        if not v["potential.use_regularized"]:
            errs.append("potential.use_regularized: [A1] logarithmic potential is singular; "
                        "set use_regularized = true")
        if not 1 <= v["potential.gamma"] <= 2:
            errs.append("potential.gamma: [A1] gamma must lie in [1,2]")
        if command in ADJOINT_COMMANDS and v["potential.gamma"] != 2:
            errs.append("potential.gamma: [C1] optimisation requires gamma = 2")
    if v["potential.lambda"] <= 0:
        errs.append("potential.lambda: Yosida parameter must be positive")

    nk = v["noise.kind"]
    if nk not in ("off", "additive", "multiplicative"):
        errs.append("noise.kind: must be off, additive or multiplicative")
    if nk == "off" and v["noise.j_modes"] != 0:
        errs.append("noise.j_modes: [A3] noise kind 'off' requires j_modes = 0")
    if nk in ("additive", "multiplicative") and v["noise.j_modes"] < 1:
        errs.append("noise.j_modes: [A3] active noise needs j_modes >= 1")
    if v["noise.n_paths"] < 1:
        errs.append("noise.n_paths: must be >= 1")
    if v["noise.seed"] < 0:
        errs.append("noise.seed: must be a nonnegative 64-bit integer")

    K, n_min = v["control.K_u"], min(v["grid.nx"], v["grid.ny"])
    if not 1 <= K < n_min:
        errs.append("control.K_u: must satisfy 1 <= K_u < min(nx, ny)")
    p = v["control.p_exponent"]
    if p <= 2:
        errs.append("control.p_exponent: [U_ad] requires p > 2")
    elif command in ADJOINT_COMMANDS and p < 6:
        errs.append("control.p_exponent: [C4 requires p >= 6]")
    if v["control.L"] <= 0:
        errs.append("control.L: admissible bound must be positive")
    if v["control.init"] not in ("zero", "vortex"):
        errs.append("control.init: must be 'zero' or 'vortex'")

    alphas = [v["cost.alpha1"], v["cost.alpha2"], v["cost.alpha3"]]
    if min(alphas) < 0:
        errs.append("cost.alpha*: weights must be nonnegative")
    if sum(alphas) <= 0:
        errs.append("cost.alpha*: [§2 requires α₁+α₂+α₃>0]")

    if v["init.preset"] not in PRESETS and not v["init.file"]:
        errs.append(f"init.preset: must be one of {', '.join(PRESETS)}")
    if kind == "logarithmic" and not v["init.file"] and abs(v["init.mean"]) + abs(v["init.amp"]) >= 1:
        errs.append("init.amp: [A2] initial datum must stay inside (-1,1) for the logarithmic potential")

    if v["optimizer.max_iters"] < 0:
        errs.append("optimizer.max_iters: must be >= 0")
    if v["optimizer.step0"] <= 0:
        errs.append("optimizer.step0: must be positive")
    for k in ("optimizer.armijo_c", "optimizer.armijo_shrink"):
        if not 0 < v[k] < 1:
            errs.append(f"{k}: must lie in (0,1)")
    if v["optimizer.tol_vi"] <= 0:
        errs.append("optimizer.tol_vi: must be positive")
    if v["output.stride"] < 1:
        errs.append("output.stride: must be >= 1")
    try:
        d = [float(x) for x in v["check.deltas"].split(",") if x.strip()]
        if not d or any(x <= 0 for x in d) or any(a <= b for a, b in zip(d, d[1:])):
            raise ValueError
    except ValueError:
        errs.append("check.deltas: comma-separated positive decreasing numbers")
    if v["check.trials"] < 1:
        errs.append("check.trials: must be >= 1")
    return errs


def parse_config(text, command=None):
    """Parse and validate; raises ConfigError listing every violation."""
    values = {k: d for k, (_, d) in SCHEMA.items()}
    errs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errs.append(f"line {lineno}: expected 'key = value'")
            continue
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            errs.append(f"{key}: unknown key (line {lineno})")
            continue
        try:
            values[key] = _convert(SCHEMA[key][0], raw)
        except ValueError as exc:
            errs.append(f"{key}: bad value {raw!r} ({exc})")
    errs += _validate(values, command)
    if errs:
        raise ConfigError(errs)
    return RunConfig(values)
