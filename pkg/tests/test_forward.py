import warnings

import numpy as np
import pytest

from chc.errors import NonFinite, PotentialDomainViolation, ShapeMismatch
from chc.field import GridSpec, ScalarField, VectorField, spatial_mean
from chc.forward import (
    Models,
    SolverParams,
    c0_dual_distance,
    forward_solve,
    forward_step,
    free_energy,
    v1_norm_series,
)
from chc.noise import NoiseModel, sample_noise
from chc.potential import PotentialModel
from chc.velocity import StreamControl, random_control, single_vortex, stream_to_velocity

POLY = PotentialModel.polynomial()
DET = Models(POLY, NoiseModel.off())
NOISY = Models(POLY, NoiseModel.multiplicative([0.5, 0.5]))


def zero_velocity(grid):
    z = np.zeros(grid.shape)
    return VectorField(grid, z, z)


def stripes(grid, amp=0.9):
    return ScalarField.from_function(grid, lambda X, Y: amp * np.cos(2 * np.pi * X / grid.lx))


def tanh_profile(grid):
    return ScalarField.from_function(grid, lambda X, Y: np.tanh((X - 0.5 * grid.lx) / 0.5))


class TestStep:
    def test_constant_equilibrium(self, box_grid):
        p = SolverParams(10, 1e-2)
        for m in (-0.7, 0.0, 0.3):
            phi, mu = forward_step(ScalarField.constant(box_grid, m), zero_velocity(box_grid),
                                   np.zeros(0), p, DET)
            assert np.allclose(phi.values, m, atol=1e-14, rtol=0)
            assert np.allclose(mu.values, m ** 3 - m, atol=1e-14)

    @pytest.mark.parametrize("m,s,dt", [(0.0, 1.0, 1e-2), (0.5, 2.0, 1e-3), (-0.8, 0.0, 5e-3)])
    def test_amplification_factor(self, m, s, dt):
        g = GridSpec(32, 32, 1.0, 1.0)
        eps = 1e-6
        phi0 = ScalarField.from_function(g, lambda X, Y: m + eps * np.cos(np.pi * X))
        p = SolverParams(1, dt, stabilization_s=s)
        phi1, _ = forward_step(phi0, zero_velocity(g), np.zeros(0), p, DET)
        k2 = np.pi ** 2
        # one-mode linearisation of the scheme, Psi''(m) = 3 m^2 - 1
        G = (1 - dt * k2 * (3 * m * m - 1 - s)) / (1 + dt * k2 * k2 + s * dt * k2)
        mode = 2 * g.inner(phi1.values - m, np.cos(np.pi * g.mesh[0]))
        assert mode / eps == pytest.approx(G, abs=1e-4)

    def test_mass_with_noise_and_flow(self, box_grid, rng):
        g = box_grid
        p = SolverParams(1, 5e-3)
        for _ in range(10):
            phi = ScalarField(g, 0.3 + 0.5 * rng.standard_normal(g.shape))
            c = random_control(g, 1, 5e-3, 3, rng, 5.0)
            out, _ = forward_step(phi, stream_to_velocity(c, 0), rng.standard_normal(2), p, NOISY)
            assert abs(spatial_mean(out) - spatial_mean(phi)) <= 1e-13

    def test_log_requires_regularisation(self, box_grid):
        models = Models(PotentialModel.logarithmic(0.5, 1.0), NoiseModel.off())
        phi = ScalarField.constant(box_grid, 0.1)
        with pytest.raises(PotentialDomainViolation):
            forward_step(phi, zero_velocity(box_grid), np.zeros(0), SolverParams(1, 1e-3), models)
        p = SolverParams(1, 1e-3, use_regularized_potential=True, lam=1e-2)
        out, _ = forward_step(phi, zero_velocity(box_grid), np.zeros(0), p, models)
        assert np.allclose(out.values, 0.1, atol=1e-14)

    def test_blow_up(self, box_grid, rng):
        phi = ScalarField(box_grid, 1e120 * rng.standard_normal(box_grid.shape))
        with pytest.raises(NonFinite):
            forward_step(phi, zero_velocity(box_grid), np.zeros(0), SolverParams(1, 10.0), DET)


class TestSolve:
    def test_initial_datum_kept(self, box_grid):
        p = SolverParams(5, 5e-3)
        phi0 = stripes(box_grid)
        tr = forward_solve(phi0, StreamControl.zeros(box_grid, 5, 5e-3, 3), None, p, DET)
        assert np.array_equal(tr.phi[0], phi0.values)
        assert tr.phi.shape == (6,) + box_grid.shape and tr.mu.shape == (5,) + box_grid.shape
        assert tr.mass_series.shape == tr.energy_series.shape == (6,)

    def test_energy_dissipation(self, box_grid):
        p = SolverParams(100, 5e-3)
        tr = forward_solve(tanh_profile(box_grid), StreamControl.zeros(box_grid, 100, 5e-3, 3),
                           None, p, DET)
        assert np.all(np.diff(tr.energy_series) <= 1e-10)
        assert tr.energy_series[-1] < tr.energy_series[0]

    def test_mass_vortex(self, box_grid):
        p = SolverParams(100, 5e-3)
        tr = forward_solve(stripes(box_grid), single_vortex(box_grid, 100, 5e-3, 3, 5.0), None, p, DET)
        m0 = tr.mass_series[0]
        assert np.max(np.abs(tr.mass_series - m0)) <= 1e-12 * (1 + abs(m0))

    def test_mass_noisy(self, box_grid, rng):
        p = SolverParams(50, 5e-3)
        phi0 = ScalarField(box_grid, 0.2 + 0.3 * np.cos(box_grid.mesh[1]))
        nz = sample_noise(3, 0, 50, 5e-3, NOISY.noise)
        c = random_control(box_grid, 50, 5e-3, 3, rng, 3.0)
        tr = forward_solve(phi0, c, nz, p, NOISY)
        assert np.max(np.abs(tr.mass_series - tr.mass_series[0])) <= 1e-12 * 1.2

    def test_deterministic(self, box_grid, rng):
        p = SolverParams(20, 5e-3)
        c = random_control(box_grid, 20, 5e-3, 3, rng, 3.0)
        nz = sample_noise(8, 1, 20, 5e-3, NOISY.noise)
        a = forward_solve(stripes(box_grid), c, nz, p, NOISY)
        b = forward_solve(stripes(box_grid), c, nz, p, NOISY)
        assert np.array_equal(a.phi, b.phi) and np.array_equal(a.mu, b.mu)

    def test_shape_checks(self, box_grid, rect_grid):
        p = SolverParams(5, 5e-3)
        with pytest.raises(ShapeMismatch):
            forward_solve(stripes(box_grid), StreamControl.zeros(box_grid, 4, 5e-3, 3), None, p, DET)
        with pytest.raises(ShapeMismatch):
            forward_solve(stripes(box_grid), StreamControl.zeros(box_grid, 5, 1e-3, 3), None, p, DET)
        with pytest.raises(ShapeMismatch):
            forward_solve(stripes(rect_grid), StreamControl.zeros(box_grid, 5, 5e-3, 3), None, p, DET)

    def test_blow_up_reports_step(self, box_grid):
        p = SolverParams(40, 2.0, stabilization_s=0.0)
        phi0 = ScalarField.from_function(box_grid, lambda X, Y: 3 * np.cos(X) * np.cos(Y))
        with pytest.raises(NonFinite) as exc:
            forward_solve(phi0, StreamControl.zeros(box_grid, 40, 2.0, 3), None, p, DET)
        assert exc.value.step is not None and 0 <= exc.value.step < 40

    def test_log_initial_warning(self, box_grid):
        models = Models(PotentialModel.logarithmic(0.5, 1.0), NoiseModel.off())
        p = SolverParams(2, 1e-3, use_regularized_potential=True)
        phi0 = ScalarField.constant(box_grid, 1.5)
        with pytest.warns(UserWarning):
            forward_solve(phi0, StreamControl.zeros(box_grid, 2, 1e-3, 3), None, p, models)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            forward_solve(ScalarField.constant(box_grid, 0.2), StreamControl.zeros(box_grid, 2, 1e-3, 3),
                          None, p, models)

    def test_log_regularised_run(self, box_grid):
        models = Models(PotentialModel.logarithmic(0.5, 1.0), NoiseModel.off())
        p = SolverParams(50, 5e-3, stabilization_s=0.5, use_regularized_potential=True, lam=1e-3)
        tr = forward_solve(ScalarField(box_grid, 0.6 * np.cos(box_grid.mesh[0])),
                           StreamControl.zeros(box_grid, 50, 5e-3, 3), None, p, models)
        assert np.all(np.isfinite(tr.phi))
        assert np.all(np.diff(tr.energy_series) <= 1e-10)

    def test_continuous_dependence(self, box_grid, rng):
        N, dt = 40, 5e-3
        p = SolverParams(N, dt)
        u = single_vortex(box_grid, N, dt, 3, 3.0)
        h = random_control(box_grid, N, dt, 3, rng, 2.0)
        base = forward_solve(stripes(box_grid), u, None, p, DET)
        ratios = [c0_dual_distance(forward_solve(stripes(box_grid), u + e * h, None, p, DET), base) / e
                  for e in (1e-2, 5e-3, 2.5e-3)]
        assert ratios[0] > 0
        assert max(ratios) / min(ratios) - 1 < 0.1

    def test_lambda_consistency(self, box_grid):
        N, dt = 40, 5e-3
        ctrl = single_vortex(box_grid, N, dt, 3, 3.0)
        ref = forward_solve(stripes(box_grid), ctrl, None, SolverParams(N, dt), DET)
        errs = []
        for lam in (1e-1, 1e-2, 1e-3):
            p = SolverParams(N, dt, use_regularized_potential=True, lam=lam)
            tr = forward_solve(stripes(box_grid), ctrl, None, p, DET)
            errs.append(np.abs(tr.phi - ref.phi).max())
        assert errs[0] > errs[1] > errs[2]


class TestEnergy:
    def test_pure_phase(self, unit_grid):
        assert free_energy(ScalarField.constant(unit_grid, 1.0), POLY) == 0.0

    def test_zero(self, unit_grid):
        assert free_energy(ScalarField.constant(unit_grid, 0.0), POLY) == pytest.approx(0.25, abs=1e-15)

    def test_cosine(self, unit_grid):
        value = free_energy(ScalarField.from_function(unit_grid, lambda X, Y: np.cos(np.pi * X)), POLY)
        assert value == pytest.approx(np.pi ** 2 / 4 + 3 / 32, rel=1e-13)
        # independent check of the potential term by a fine midpoint rule
        x = (np.arange(10 ** 6) + 0.5) / 10 ** 6
        quad = np.mean(0.25 * (np.cos(np.pi * x) ** 2 - 1) ** 2)
        assert quad == pytest.approx(3 / 32, rel=1e-10)

    def test_log_outside(self, unit_grid):
        log = PotentialModel.logarithmic(0.5, 1.0)
        assert free_energy(ScalarField.constant(unit_grid, 1.2), log) == float("inf")
        assert np.isfinite(free_energy(ScalarField.constant(unit_grid, 1.0), log))

    def test_v1_series(self, box_grid):
        p = SolverParams(3, 5e-3)
        tr = forward_solve(ScalarField.constant(box_grid, 0.5), StreamControl.zeros(box_grid, 3, 5e-3, 3),
                           None, p, DET)
        assert np.allclose(v1_norm_series(tr), 0.5 * 2 * np.pi)
