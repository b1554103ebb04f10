"""Truncated cylindrical Wiener noise and the noise coefficient B.

Channel ``j`` of the multiplicative model is ``h_j(y) - mean(h_j(y))`` with
``h_j(s) = a_j sin(s) / (1 + j)^2``, so every channel is mean-free and mass is
conserved.  The additive model adds fixed profiles ``g_j``.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ShapeMismatch
from .field import ScalarField


class NoiseKind(Enum):
    Off = "off"
    Additive = "additive"
    ConservativeMultiplicative = "multiplicative"


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind = NoiseKind.Off
    j_modes: int = 0
    amplitudes: tuple = ()
    spatial_profiles: tuple = field(default=(), repr=False)
    c_b: float = field(init=False)

    def __post_init__(self):
        if self.kind is NoiseKind.Off and self.j_modes != 0:
            raise ValueError("noise kind 'off' requires j_modes = 0")
        if len(self.amplitudes) != self.j_modes:
            raise ValueError("need exactly j_modes amplitudes")
        if self.kind is NoiseKind.Additive and len(self.spatial_profiles) != self.j_modes:
            raise ValueError("additive noise needs one spatial profile per mode")
        if self.kind is NoiseKind.ConservativeMultiplicative:
            c2 = float(np.sum((2.0 * self.coefficients) ** 2))
        elif self.kind is NoiseKind.Additive:
            c2 = float(sum(np.max(np.abs(g)) ** 2 for g in self.spatial_profiles))
        else:
            c2 = 0.0
        if not np.isfinite(c2):
            raise ValueError("noise coefficient bound C_B is not finite")
        object.__setattr__(self, "c_b", np.sqrt(c2))

    @classmethod
    def off(cls):
        return cls()

    @classmethod
    def multiplicative(cls, amplitudes):
        amplitudes = tuple(float(a) for a in amplitudes)
        return cls(NoiseKind.ConservativeMultiplicative, len(amplitudes), amplitudes)

    @classmethod
    def additive(cls, grid, amplitudes, profiles=None):
        """Additive noise; default profiles are low cosine modes scaled by a_j/(1+j)^2."""
        amplitudes = tuple(float(a) for a in amplitudes)
        if profiles is None:
            X, Y = grid.mesh
            profiles = []
            for j, a in enumerate(amplitudes):
                kx, ky = (j + 1) // 2 + 1, j // 2
                mode = np.cos(kx * np.pi * X / grid.lx) * np.cos(ky * np.pi * Y / grid.ly)
                profiles.append(a / (1 + j) ** 2 * mode)
        profiles = tuple(np.asarray(p.values if isinstance(p, ScalarField) else p, dtype=float)
                         for p in profiles)
        return cls(NoiseKind.Additive, len(amplitudes), amplitudes, profiles)

    @property
    def coefficients(self):
        """Channel weights a_j / (1 + j)^2."""
        j = np.arange(self.j_modes)
        return np.asarray(self.amplitudes, dtype=float) / (1.0 + j) ** 2

    @property
    def is_off(self):
        return self.kind is NoiseKind.Off or self.j_modes == 0

    # -- array-level kernels (used in the time loops) ----------------------

    def _weight(self, xi_row, dt):
        xi_row = np.asarray(xi_row, dtype=float)
        if xi_row.shape != (self.j_modes,):
            raise ShapeMismatch(f"xi_row must have length {self.j_modes}, got {xi_row.shape}")
        return xi_row, np.sqrt(dt)

    def increment(self, phi, xi_row, dt):
        """sum_j (B(phi) e_j) xi_j sqrt(dt) on raw arrays."""
        xi_row, sq = self._weight(xi_row, dt)
        if self.kind is NoiseKind.ConservativeMultiplicative:
            s = np.sin(phi)
            return float(self.coefficients @ xi_row) * sq * (s - s.mean())
        if self.kind is NoiseKind.Additive:
            out = np.zeros_like(phi, dtype=float)
            for g, x in zip(self.spatial_profiles, xi_row):
                out += g * x
            return out * sq
        return np.zeros_like(phi, dtype=float)

    def d_increment(self, phi, theta, xi_row, dt):
        xi_row, sq = self._weight(xi_row, dt)
        if self.kind is NoiseKind.ConservativeMultiplicative:
            v = np.cos(phi) * theta
            return float(self.coefficients @ xi_row) * sq * (v - v.mean())
        return np.zeros_like(phi, dtype=float)

    def d_increment_adjoint(self, phi, w, xi_row, dt):
        xi_row, sq = self._weight(xi_row, dt)
        if self.kind is NoiseKind.ConservativeMultiplicative:
            return float(self.coefficients @ xi_row) * sq * np.cos(phi) * (w - w.mean())
        return np.zeros_like(phi, dtype=float)

    def channels(self, phi):
        """Per-channel fields B(phi) e_j as a list of arrays."""
        if self.kind is NoiseKind.ConservativeMultiplicative:
            s = np.sin(phi)
            return [c * (s - s.mean()) for c in self.coefficients]
        if self.kind is NoiseKind.Additive:
            return [np.array(g) for g in self.spatial_profiles]
        return []


@dataclass(frozen=True)
class NoiseRealization:
    seed: int
    path_index: int
    n_steps: int
    dt: float
    xi: np.ndarray = field(repr=False)

    def increments(self):
        return self.xi * np.sqrt(self.dt)


def _generator(seed, path_index):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(path_index),))
    return np.random.Generator(np.random.Philox(ss))


def sample_noise(seed, path_index, n_steps, dt, model):
    """Standard normal draws for one path; bit-exact given (seed, path_index)."""
    if n_steps < 1 or not dt > 0:
        raise ValueError("need n_steps >= 1 and dt > 0")
    j = 0 if model.is_off else model.j_modes
    xi = _generator(seed, path_index).standard_normal((n_steps, j)) if j else np.zeros((n_steps, 0))
    xi.setflags(write=False)
    return NoiseRealization(int(seed), int(path_index), int(n_steps), float(dt), xi)


def apply_B(model, phi, xi_row, dt):
    return ScalarField(phi.grid, model.increment(phi.values, xi_row, dt))


def apply_DB(model, phi, theta, xi_row, dt):
    if theta.grid != phi.grid:
        raise ShapeMismatch("phi and theta live on different grids")
    return ScalarField(phi.grid, model.d_increment(phi.values, theta.values, xi_row, dt))


def apply_DB_adjoint(model, phi, w, xi_row, dt):
    if w.grid != phi.grid:
        raise ShapeMismatch("phi and w live on different grids")
    return ScalarField(phi.grid, model.d_increment_adjoint(phi.values, w.values, xi_row, dt))


def noise_manifest(seed, n_paths, model, dt):
    j = 0 if model.is_off else model.j_modes
    return f"seed={int(seed)} paths={int(n_paths)} modes={j} dt={dt!r}"
