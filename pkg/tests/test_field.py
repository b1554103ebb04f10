import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import fft

from chc.errors import NonZeroMeanInput
from chc.field import (
    GridSpec,
    NormKind,
    ScalarField,
    gradient,
    inv_neumann_laplacian,
    laplacian,
    norm,
    spatial_mean,
)
from chc.io import decode_field, encode_field, read_field, write_field


def cos_x(grid):
    return ScalarField.from_function(grid, lambda X, Y: np.cos(np.pi * X / grid.lx))


class TestGridSpec:
    def test_rejects_odd_or_small(self):
        with pytest.raises(ValueError):
            GridSpec(7, 8)
        with pytest.raises(ValueError):
            GridSpec(9, 8)
        with pytest.raises(ValueError):
            GridSpec(8, 8, lx=0.0)

    def test_cell_centres(self, rect_grid):
        g = rect_grid
        assert np.allclose(g.x, (np.arange(16) + 0.5) * 1.7 / 16)
        assert np.allclose(g.y, (np.arange(24) + 0.5) * 0.9 / 24)
        assert g.shape == (24, 16)


class TestLaplacian:
    def test_constant_in_kernel(self, rect_grid):
        out = laplacian(ScalarField.constant(rect_grid, 2.5))
        assert np.max(np.abs(out.values)) < 1e-13

    def test_cosine_eigenfunction(self, rect_grid):
        f = cos_x(rect_grid)
        expected = -(np.pi / rect_grid.lx) ** 2 * f.values
        assert np.allclose(laplacian(f).values, expected, atol=1e-12)

    def test_mean_is_zero(self, rect_grid, rng):
        f = ScalarField(rect_grid, rng.standard_normal(rect_grid.shape))
        out = laplacian(f)
        # oracle: the k = 0 DCT coefficient of the output is annihilated
        c0 = fft.dctn(out.values, type=2, norm="ortho")[0, 0]
        scale = np.abs(out.values).max()
        assert abs(c0) <= 1e-13 * scale * np.sqrt(out.values.size)
        assert abs(spatial_mean(out)) <= 1e-13 * norm(f) * scale

    def test_self_adjoint(self, rect_grid, rng):
        g = rect_grid
        a, b = rng.standard_normal((2,) + g.shape)
        lhs, rhs = g.inner(g.laplacian(a), b), g.inner(a, g.laplacian(b))
        assert abs(lhs - rhs) <= 1e-11 * abs(lhs)


class TestInverse:
    def test_cosine(self, rect_grid):
        f = cos_x(rect_grid)
        z = inv_neumann_laplacian(f)
        assert np.allclose(z.values, (rect_grid.lx / np.pi) ** 2 * f.values, atol=1e-12)

    def test_zero(self, rect_grid):
        z = inv_neumann_laplacian(ScalarField.constant(rect_grid, 0.0))
        assert np.all(z.values == 0)

    def test_round_trip(self, rect_grid, rng):
        a = rng.standard_normal(rect_grid.shape)
        f = ScalarField(rect_grid, a - a.mean())
        z = inv_neumann_laplacian(f)
        res = laplacian(z).values + f.values
        assert np.linalg.norm(res) <= 1e-12 * np.linalg.norm(f.values)
        assert abs(spatial_mean(z)) < 1e-14

    def test_rejects_mean(self, rect_grid, rng):
        f = ScalarField(rect_grid, rng.standard_normal(rect_grid.shape) + 1.0)
        with pytest.raises(NonZeroMeanInput):
            inv_neumann_laplacian(f)


class TestGradient:
    def test_constant(self, rect_grid):
        v = gradient(ScalarField.constant(rect_grid, -4.0))
        assert np.abs(v.x_values).max() < 1e-13 and np.abs(v.y_values).max() < 1e-13

    def test_cosine(self, rect_grid):
        g = rect_grid
        v = gradient(cos_x(g))
        X, _ = g.mesh
        assert np.allclose(v.x_values, -(np.pi / g.lx) * np.sin(np.pi * X / g.lx), atol=1e-12)
        assert np.abs(v.y_values).max() < 1e-12

    def test_integration_by_parts(self, rect_grid, rng):
        g = rect_grid
        f, h = rng.standard_normal((2,) + g.shape)
        gf, gh = g.grad(f), g.grad(h)
        lhs = g.inner(gf[0], gh[0]) + g.inner(gf[1], gh[1])
        rhs = -g.inner(f, g.laplacian(h))
        assert abs(lhs - rhs) <= 1e-11 * abs(lhs)

    def test_div_is_minus_grad_transpose(self, rect_grid, rng):
        g = rect_grid
        f, vx, vy = rng.standard_normal((3,) + g.shape)
        gx, gy = g.grad(f)
        lhs = g.inner(gx, vx) + g.inner(gy, vy)
        assert abs(lhs + g.inner(f, g.div(vx, vy))) <= 1e-12 * (abs(lhs) + 1)


class TestMeanAndNorms:
    def test_mean_examples(self, rect_grid):
        assert spatial_mean(ScalarField.constant(rect_grid, 3.5)) == pytest.approx(3.5, abs=1e-15)
        assert abs(spatial_mean(cos_x(rect_grid))) < 1e-14
        vals = np.ones(rect_grid.shape)
        vals[:, : rect_grid.nx // 2] = -1
        assert spatial_mean(ScalarField(rect_grid, vals)) == 0

    def test_zero_field(self, rect_grid):
        z = ScalarField.constant(rect_grid, 0.0)
        assert all(norm(z, k) == 0 for k in NormKind)

    def test_unit_constant(self, unit_grid):
        one = ScalarField.constant(unit_grid, 1.0)
        for k in NormKind:
            assert norm(one, k) == pytest.approx(1.0, abs=1e-14)

    def test_cosine_closed_forms(self, unit_grid):
        # oracle: int_0^1 cos^2 = int_0^1 sin^2 = 1/2
        f = cos_x(unit_grid)
        assert norm(f, NormKind.MeanSquare) == pytest.approx(np.sqrt(0.5), rel=1e-13)
        assert norm(f, NormKind.H1) == pytest.approx(np.sqrt(0.5 + np.pi ** 2 / 2), rel=1e-13)
        assert norm(f, NormKind.DualH1) == pytest.approx(np.sqrt(1 / (2 * np.pi ** 2)), rel=1e-13)

    def test_dual_bound(self, rect_grid, rng):
        g = rect_grid
        C = np.sqrt(max(1.0 / g.min_eigenvalue(), 1.0 / g.area))
        for _ in range(20):
            f = ScalarField(g, rng.standard_normal(g.shape) + rng.normal())
            assert norm(f, NormKind.DualH1) <= C * norm(f, NormKind.MeanSquare) * (1 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(n=st.sampled_from([8, 16, 32, 64, 128]), seed=st.integers(0, 2 ** 32 - 1))
def test_transform_round_trip(n, seed):
    g = GridSpec(n, n, 1.0, 2.0)
    a = np.random.default_rng(seed).standard_normal(g.shape)
    back = g.idct(g.dct(a))
    assert np.linalg.norm(back - a) <= 1e-13 * np.linalg.norm(a)


class TestSnapshotFormat:
    def test_layout(self, rect_grid, rng):
        f = ScalarField(rect_grid, rng.standard_normal(rect_grid.shape))
        blob = encode_field(f)
        assert blob[:4] == b"CHF1"
        assert struct.unpack_from("<II", blob, 4) == (16, 24)
        assert struct.unpack_from("<dd", blob, 12) == (1.7, 0.9)
        # row-major, y outer: the second stored value is (x = 1, y = 0)
        assert struct.unpack_from("<d", blob, 36)[0] == f.values[0, 1]
        assert len(blob) == 28 + 8 * 16 * 24

    def test_round_trip(self, tmp_path, rect_grid, rng):
        f = ScalarField(rect_grid, rng.standard_normal(rect_grid.shape))
        write_field(tmp_path / "f.chf", f)
        g = read_field(tmp_path / "f.chf")
        assert g.grid == f.grid and np.array_equal(g.values, f.values)
        assert not [p for p in tmp_path.iterdir() if p.name.startswith(".tmp")]

    def test_truncated(self, rect_grid):
        blob = encode_field(ScalarField.constant(rect_grid, 1.0))
        with pytest.raises(ValueError):
            decode_field(blob[:-8])
