"""Complementary-value spaces: projection, prescribed-value construction,
tail diagnostics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fracvar as fv
from fracvar import spaces as sp
from conftest import periodic_field


def interval_omega(grid, lo=0.25, hi=0.75):
    x = grid.coords()
    mask = np.ones(grid.shape, dtype=bool)
    for j in range(grid.n):
        mask &= (x[..., j] > lo) & (x[..., j] < hi)
    return mask


@pytest.fixture
def spec_1d(periodic_1d):
    omega = interval_omega(periodic_1d)
    g = periodic_field(periodic_1d)
    return sp.ComplementarySpec(omega=omega, g=g)


class TestComplementarySpec:
    def test_auto_enlarged_region(self, spec_1d):
        assert spec_1d.omega_prime.sum() > spec_1d.omega.sum()
        assert np.all(spec_1d.omega_prime[spec_1d.omega])

    def test_empty_omega_rejected(self, periodic_1d):
        g = periodic_field(periodic_1d)
        with pytest.raises(ValueError):
            sp.ComplementarySpec(omega=np.zeros(periodic_1d.shape, bool), g=g)

    def test_nonfinite_datum_rejected(self, periodic_1d):
        # non-finite values are rejected at field construction already
        vals = np.ones(periodic_1d.shape + (1,))
        vals[3] = np.nan
        with pytest.raises(ValueError):
            fv.SampledField(periodic_1d, vals)

    def test_margin_enforced(self, periodic_1d):
        omega = interval_omega(periodic_1d)
        g = periodic_field(periodic_1d)
        with pytest.raises(ValueError):
            # omega_prime identical to omega leaves no margin
            sp.ComplementarySpec(omega=omega, g=g, omega_prime=omega.copy())


class TestProjection:
    def test_overwrites_outside(self, periodic_1d, spec_1d):
        u = periodic_field(periodic_1d, modes=((5, 1.0),))
        v = sp.project_complementary(u, spec_1d)
        out = ~spec_1d.omega
        assert np.array_equal(v.values[out], spec_1d.g.values[out])
        assert np.array_equal(v.values[spec_1d.omega], u.values[spec_1d.omega])

    @given(seed=st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_idempotent(self, seed):
        grid = fv.make_grid(1, fv.PERIODIC, 64)
        omega = interval_omega(grid)
        g = periodic_field(grid)
        spec = sp.ComplementarySpec(omega=omega, g=g)
        rng = np.random.default_rng(seed)
        u = fv.SampledField(grid, rng.normal(size=grid.shape + (1,)))
        once = sp.project_complementary(u, spec)
        twice = sp.project_complementary(once, spec)
        assert np.array_equal(once.values, twice.values)


class TestConstruction:
    def test_prescribes_value_and_gradient_1d(self, periodic_1d, spec_1d):
        params = fv.compute_constants(1, 0.5)
        z = np.array([1.3])
        A = np.array([[-0.7]])
        res = sp.construct_prescribed((128,), z, A, spec_1d, params)
        assert res.achieved_value == pytest.approx(1.3, rel=1e-10)
        assert res.achieved_gradient[0, 0] == pytest.approx(-0.7, rel=1e-5)
        assert res.beta > 0
        assert not np.any(res.phi.values[~spec_1d.omega] != 0.0)

    def test_prescribes_2d(self, periodic_2d):
        omega = interval_omega(periodic_2d, 0.2, 0.8)
        g = fv.SampledField(periodic_2d, np.zeros(periodic_2d.shape + (1,)))
        spec = sp.ComplementarySpec(omega=omega, g=g)
        params = fv.compute_constants(2, 0.4)
        z = np.array([0.8])
        A = np.array([[0.5, -1.1]])
        res = sp.construct_prescribed((32, 32), z, A, spec, params)
        assert res.achieved_value == pytest.approx(0.8, rel=1e-10)
        np.testing.assert_allclose(res.achieved_gradient, A, rtol=1e-5)
        assert not np.any(res.phi.values[~omega] != 0.0)

    def test_numeric_gradient_matches(self, spec_1d):
        # the grid fractional gradient of the constructed field matches
        # the requested matrix at x0 up to discretization error
        grid = spec_1d.grid
        params = fv.compute_constants(1, 0.5)
        res = sp.construct_prescribed((128,), np.array([0.0]),
                                      np.array([[1.0]]), spec_1d, params)
        grad = fv.fractional_gradient(res.phi, params, fv.SPECTRAL).field
        assert grad.values[128, 0] == pytest.approx(1.0, abs=5e-2)

    def test_radius_too_large_rejected(self, spec_1d):
        params = fv.compute_constants(1, 0.5)
        with pytest.raises(ValueError):
            sp.construct_prescribed((128,), np.array([1.0]),
                                    np.array([[1.0]]), spec_1d, params,
                                    support_radius=0.4)

    def test_x0_outside_omega_rejected(self, spec_1d):
        params = fv.compute_constants(1, 0.5)
        with pytest.raises(ValueError):
            sp.construct_prescribed((2,), np.array([1.0]),
                                    np.array([[1.0]]), spec_1d, params)

    def test_3d_not_implemented(self):
        grid = fv.make_grid(3, fv.PERIODIC, 16)
        omega = interval_omega(grid, 0.2, 0.8)
        g = fv.SampledField(grid, np.zeros(grid.shape + (1,)))
        spec = sp.ComplementarySpec(omega=omega, g=g)
        params = fv.compute_constants(3, 0.5)
        with pytest.raises(NotImplementedError):
            sp.construct_prescribed((8, 8, 8), np.array([1.0]),
                                    np.ones((1, 3)), spec, params)

    def test_with_datum(self, periodic_1d, spec_1d):
        params = fv.compute_constants(1, 0.5)
        z = np.array([2.0])
        A = np.array([[0.3]])
        u = sp.prescribed_with_datum((128,), z, A, spec_1d, params)
        out = ~spec_1d.omega
        assert np.array_equal(u.values[out], spec_1d.g.values[out])
        assert u.values[128, 0] == pytest.approx(2.0, rel=1e-8)


class TestOutsideDiagnostic:
    def _family(self, grid, omega, count):
        x = grid.axis()
        r = np.abs(x - 0.5) / 0.2
        bump = np.where(r < 1, np.exp(-1.0 / np.maximum(1 - r ** 2, 1e-300)), 0.0)
        fields = []
        for j in range(1, count + 1):
            vals = bump * np.sin(2 * np.pi * j * x) / j
            vals[~omega] = 0.0
            fields.append(fv.SampledField(grid, vals[..., None]))
        return fields

    def test_tail_control(self, periodic_1d):
        omega = interval_omega(periodic_1d)
        g = fv.SampledField(periodic_1d, np.zeros(periodic_1d.shape + (1,)))
        spec = sp.ComplementarySpec(omega=omega, g=g)
        params = fv.compute_constants(1, 0.5)
        diag = sp.strong_outside_diagnostic(self._family(periodic_1d, omega, 12),
                                            spec, params)
        assert diag.passed
        assert diag.fitted_constant > 0
        assert len(diag.tail_norms) == 12

    def test_rejects_leaky_member(self, periodic_1d):
        omega = interval_omega(periodic_1d)
        g = fv.SampledField(periodic_1d, np.zeros(periodic_1d.shape + (1,)))
        spec = sp.ComplementarySpec(omega=omega, g=g)
        params = fv.compute_constants(1, 0.5)
        family = self._family(periodic_1d, omega, 4)
        vals = family[0].values.copy()
        vals[0, 0] = 0.5
        family[0] = fv.SampledField(periodic_1d, vals)
        with pytest.raises(ValueError):
            sp.strong_outside_diagnostic(family, spec, params)

    def test_needs_two_fields(self, periodic_1d):
        omega = interval_omega(periodic_1d)
        g = fv.SampledField(periodic_1d, np.zeros(periodic_1d.shape + (1,)))
        spec = sp.ComplementarySpec(omega=omega, g=g)
        params = fv.compute_constants(1, 0.5)
        with pytest.raises(ValueError):
            sp.strong_outside_diagnostic(self._family(periodic_1d, omega, 1),
                                         spec, params)
