"""Fractional operators: spectral symbols, quadrature accuracy,
exact discrete adjointness, composition, component packing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fracvar as fv
from conftest import bump_field, gaussian_field, periodic_field

ALPHAS = [0.25, 0.5, 0.75]


def plane_wave(grid, k=3):
    x = grid.coords()
    phase = np.zeros(grid.shape)
    for j in range(grid.n):
        phase = phase + x[..., j] * k
    return fv.SampledField(grid, np.sin(2.0 * np.pi * phase)[..., None])


class TestSpectralSymbols:
    """Plane waves are eigenfunctions: frozen symbol values."""

    @pytest.mark.parametrize("alpha", ALPHAS)
    @pytest.mark.parametrize("k", [1, 3, 7])
    def test_laplacian_eigenvalue_1d(self, periodic_1d, alpha, k):
        u = plane_wave(periodic_1d, k)
        out = fv.fractional_laplacian(u, alpha / 2.0, fv.SPECTRAL).field
        expected = (2.0 * np.pi * k) ** alpha * u.values
        np.testing.assert_allclose(out.values, expected, rtol=1e-11, atol=1e-11)

    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_gradient_of_sine_1d(self, periodic_1d, alpha):
        k = 3
        x = periodic_1d.axis()
        u = plane_wave(periodic_1d, k)
        params = fv.compute_constants(1, alpha)
        out = fv.fractional_gradient(u, params, fv.SPECTRAL).field
        expected = (2.0 * np.pi * k) ** alpha * np.cos(2.0 * np.pi * k * x)
        np.testing.assert_allclose(out.values[:, 0], expected,
                                   rtol=1e-11, atol=1e-11)

    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_potential_inverts_laplacian(self, periodic_1d, alpha):
        u = plane_wave(periodic_1d, 5)
        lap = fv.fractional_laplacian(u, alpha / 2.0, fv.SPECTRAL).field
        back = fv.riesz_potential(lap, alpha, fv.SPECTRAL).field
        np.testing.assert_allclose(back.values, u.values, rtol=0, atol=1e-11)

    def test_potential_kills_mean(self, periodic_1d):
        u = fv.SampledField(periodic_1d, np.ones(periodic_1d.shape + (1,)))
        out = fv.riesz_potential(u, 0.5, fv.SPECTRAL).field
        np.testing.assert_allclose(out.values, 0.0, atol=1e-13)

    def test_gradient_2d_components(self, periodic_2d):
        x = periodic_2d.coords()
        u = fv.SampledField(
            periodic_2d, np.sin(2.0 * np.pi * x[..., 0])[..., None])
        params = fv.compute_constants(2, 0.5)
        out = fv.fractional_gradient(u, params, fv.SPECTRAL).field
        # second component vanishes for a field constant along axis 1
        assert np.max(np.abs(out.values[..., 1])) < 1e-12
        expected = (2.0 * np.pi) ** 0.5 * np.cos(2.0 * np.pi * x[..., 0])
        np.testing.assert_allclose(out.values[..., 0], expected,
                                   rtol=1e-11, atol=1e-11)


class TestQuadratureAccuracy:
    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_plane_wave_gradient(self, alpha):
        g = fv.make_grid(1, fv.PERIODIC, 512)
        x = g.axis()
        k = 3
        u = plane_wave(g, k)
        params = fv.compute_constants(1, alpha)
        out = fv.fractional_gradient(u, params, fv.QUADRATURE).field
        expected = (2.0 * np.pi * k) ** alpha * np.cos(2.0 * np.pi * k * x)
        rel = np.max(np.abs(out.values[:, 0] - expected)) / np.max(np.abs(expected))
        assert rel < 1e-3

    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_plane_wave_laplacian(self, alpha):
        g = fv.make_grid(1, fv.PERIODIC, 512)
        u = plane_wave(g, 3)
        out = fv.fractional_laplacian(u, alpha / 2.0, fv.QUADRATURE).field
        expected = (2.0 * np.pi * 3) ** alpha * u.values
        rel = np.max(np.abs(out.values - expected)) / np.max(np.abs(expected))
        assert rel < 5e-3

    def test_indicator_potential_value(self):
        # I_{1/2} of the indicator of [-1, 1] at the origin equals
        # (1/gamma) * int_{-1}^{1} |y|^{-1/2} dy = 4 / sqrt(2 pi);
        # the jump discontinuity limits the quadrature to first order
        N = 512
        g = fv.make_grid(1, fv.BOX, N, 8.0)
        x = g.coords()[..., 0]
        u = fv.SampledField(g, ((np.abs(x) <= 1.0) * 1.0)[..., None],
                            decay=fv.DECAY_COMPACT)
        out = fv.riesz_potential(u, 0.5, fv.QUADRATURE).field
        exact = 4.0 / np.sqrt(2.0 * np.pi)
        assert out.values[N // 2, 0] == pytest.approx(exact, rel=1e-2)

    def test_gradient_converges_with_resolution(self):
        params = fv.compute_constants(1, 0.5)
        errs = []
        for N in (256, 512):
            g = fv.make_grid(1, fv.BOX, N, 8.0)
            u = gaussian_field(g)
            gs = fv.fractional_gradient(u, params, fv.SPECTRAL).field
            gq = fv.fractional_gradient(u, params, fv.QUADRATURE).field
            diff = fv.SampledField(g, gs.values - gq.values)
            errs.append(fv.lp_norm(diff, 2) / fv.lp_norm(gs, 2))
        assert errs[0] < 1e-2
        assert errs[1] < 0.5 * errs[0]

    def test_potential_refuses_periodic(self, periodic_1d):
        u = periodic_field(periodic_1d)
        with pytest.raises(ValueError):
            fv.riesz_potential(u, 0.5, fv.QUADRATURE)

    def test_box_requires_known_decay(self, box_1d):
        u = fv.SampledField(box_1d, np.zeros(box_1d.shape + (1,)),
                            decay=fv.DECAY_UNKNOWN)
        params = fv.compute_constants(1, 0.5)
        with pytest.raises(ValueError):
            fv.fractional_gradient(u, params, fv.QUADRATURE)


def _all_setups():
    setups = []
    for backend in (fv.SPECTRAL, fv.QUADRATURE):
        for grid in (fv.make_grid(1, fv.PERIODIC, 128),
                     fv.make_grid(1, fv.BOX, 128, 4.0),
                     fv.make_grid(2, fv.PERIODIC, 32),
                     fv.make_grid(2, fv.BOX, 32, 2.0)):
            setups.append((backend, grid))
    return setups


class TestAdjointness:
    """The discrete gradient is exactly skew-adjoint and the divergence
    is its exact negative adjoint, on every backend and grid."""

    @pytest.mark.parametrize("backend,grid", _all_setups())
    def test_gradient_skew(self, backend, grid):
        phi = bump_field(grid)
        psi = bump_field(grid, radius=(0.15 if grid.kind == fv.PERIODIC
                                       else 0.3 * grid.half_extent),
                         center=(0.4 if grid.kind == fv.PERIODIC else 0.0))
        params = fv.compute_constants(grid.n, 0.5)
        g_phi = fv.fractional_gradient(phi, params, backend).field
        g_psi = fv.fractional_gradient(psi, params, backend).field
        vol = grid.cell_volume
        scale = max(fv.lp_norm(g_phi, 2) * fv.lp_norm(psi, 2), 1e-300)
        for j in range(grid.n):
            lhs = np.sum(g_phi.values[..., j] * psi.values[..., 0]) * vol
            rhs = -np.sum(phi.values[..., 0] * g_psi.values[..., j]) * vol
            assert abs(lhs - rhs) / scale < 1e-13

    @pytest.mark.parametrize("backend,grid", _all_setups())
    def test_divergence_is_negative_adjoint(self, backend, grid):
        rng = np.random.default_rng(11)
        phi = bump_field(grid)
        V_vals = np.zeros(grid.shape + (grid.n,))
        mask = bump_field(grid).values[..., 0] > 0
        for j in range(grid.n):
            V_vals[..., j] = rng.normal(size=grid.shape) * mask
        V = fv.SampledField(grid, V_vals, decay=fv.DECAY_COMPACT)
        params = fv.compute_constants(grid.n, 0.5)
        g_phi = fv.fractional_gradient(phi, params, backend).field
        div_V = fv.fractional_divergence(V, params, backend)
        vol = grid.cell_volume
        lhs = np.sum(g_phi.values * V.values) * vol
        rhs = -np.sum(phi.values[..., 0] * div_V.values[..., 0]) * vol
        scale = max(fv.lp_norm(g_phi, 2) * fv.lp_norm(V, 2), 1e-300)
        assert abs(lhs - rhs) / scale < 1e-13

    def test_laplacian_self_adjoint(self, periodic_1d):
        phi = periodic_field(periodic_1d)
        psi = periodic_field(periodic_1d, modes=((2, 1.0), (5, 0.5)))
        out_phi = fv.fractional_laplacian(phi, 0.3, fv.QUADRATURE).field
        out_psi = fv.fractional_laplacian(psi, 0.3, fv.QUADRATURE).field
        lhs = fv.lp_inner(out_phi, psi)
        rhs = fv.lp_inner(phi, out_psi)
        scale = max(fv.lp_norm(out_phi, 2) * fv.lp_norm(psi, 2), 1e-300)
        assert abs(lhs - rhs) / scale < 1e-13


class TestComposition:
    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_periodic_spectral_exact(self, periodic_1d, alpha):
        u = periodic_field(periodic_1d)
        params = fv.compute_constants(1, alpha)
        g = fv.fractional_gradient(u, params, fv.SPECTRAL).field
        lifted = fv.fractional_laplacian(g, (1.0 - alpha) / 2.0,
                                         fv.SPECTRAL).field
        classical = fv.classical_gradient(u, fv.SPECTRAL)
        np.testing.assert_allclose(lifted.values, classical.values,
                                   rtol=0, atol=1e-10)

    def test_laplacian_splits(self, periodic_1d):
        # (-Delta)^s1 (-Delta)^s2 = (-Delta)^(s1+s2) on the same grid
        u = periodic_field(periodic_1d)
        a = fv.fractional_laplacian(u, 0.2, fv.SPECTRAL).field
        ab = fv.fractional_laplacian(a, 0.3, fv.SPECTRAL).field
        direct = fv.fractional_laplacian(u, 0.5, fv.SPECTRAL).field
        np.testing.assert_allclose(ab.values, direct.values, atol=1e-10)


class TestLinearity:
    @given(a=st.floats(-3, 3, allow_nan=False),
           b=st.floats(-3, 3, allow_nan=False))
    @settings(max_examples=20, deadline=None)
    def test_gradient_linear(self, a, b):
        g = fv.make_grid(1, fv.PERIODIC, 64)
        u = periodic_field(g)
        v = periodic_field(g, modes=((2, 0.7),))
        params = fv.compute_constants(1, 0.5)
        comb = fv.SampledField(g, a * u.values + b * v.values)
        left = fv.fractional_gradient(comb, params, fv.QUADRATURE).field
        right = (a * fv.fractional_gradient(u, params, fv.QUADRATURE).field.values
                 + b * fv.fractional_gradient(v, params, fv.QUADRATURE).field.values)
        np.testing.assert_allclose(left.values, right, atol=1e-10 * (1 + abs(a) + abs(b)))


class TestPacking:
    def test_matrix_roundtrip(self, periodic_2d):
        rng = np.random.default_rng(3)
        m, n = 2, 2
        field = fv.SampledField(periodic_2d,
                                rng.normal(size=periodic_2d.shape + (m * n,)))
        arr = fv.as_matrix(field, m, n)
        assert arr.shape == periodic_2d.shape + (m, n)
        back = fv.from_matrix(periodic_2d, arr, field.decay)
        assert np.array_equal(back.values, field.values)

    def test_vector_gradient_layout(self, periodic_2d):
        # gradient of an m-component field packs as i * n + j
        x = periodic_2d.coords()
        vals = np.stack([np.sin(2 * np.pi * x[..., 0]),
                         np.cos(2 * np.pi * x[..., 1])], axis=-1)
        u = fv.SampledField(periodic_2d, vals)
        params = fv.compute_constants(2, 0.5)
        out = fv.fractional_gradient(u, params, fv.SPECTRAL).field
        assert out.values.shape == periodic_2d.shape + (4,)
        A = fv.as_matrix(out, 2, 2)
        # row 0 only varies along axis 0, row 1 only along axis 1
        assert np.max(np.abs(A[..., 0, 1])) < 1e-12
        assert np.max(np.abs(A[..., 1, 0])) < 1e-12


class TestTruncationEstimates:
    def test_box_compact_estimate_finite(self, box_1d):
        u = bump_field(box_1d)
        params = fv.compute_constants(1, 0.5)
        res = fv.fractional_gradient(u, params, fv.QUADRATURE)
        assert np.isfinite(res.truncation_estimate)
        assert res.truncation_estimate >= 0.0

    def test_invalid_order_rejected(self, periodic_1d):
        u = periodic_field(periodic_1d)
        for s in (0.0, 1.0, -0.5):
            with pytest.raises(ValueError):
                fv.fractional_laplacian(u, s, fv.SPECTRAL)
