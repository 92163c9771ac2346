"""Convex envelopes, laminates, push-forward fields and the
quasiconvexity violation search."""

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fracvar as fv
from fracvar import envelope as env
from conftest import periodic_field


def double_well(a):
    return min((a - 1.0) ** 2, (a + 1.0) ** 2)


def benchmark(a):
    return min(2.0 * a * a, a * a + (abs(a) - 1.0) ** 2)


class TestConvexEnvelope1D:
    def test_double_well_envelope(self):
        tab = env.convex_envelope_1d(double_well, -2.0, 2.0, num=4097)
        inside = np.abs(tab.samples) <= 1.0
        np.testing.assert_allclose(tab.qc_values[inside], 0.0, atol=1e-12)
        np.testing.assert_allclose(tab.qc_values[~inside],
                                   tab.f_values[~inside], atol=1e-12)

    def test_benchmark_envelope_closed_form(self):
        # f** equals |A| - 1/8 on 1/4 <= |A| <= 3/4 and f elsewhere
        tab = env.convex_envelope_1d(benchmark, -2.0, 2.0, num=4097)
        a = tab.samples
        exact = np.where((np.abs(a) >= 0.25) & (np.abs(a) <= 0.75),
                         np.abs(a) - 0.125,
                         tab.f_values)
        np.testing.assert_allclose(tab.qc_values, exact, atol=1e-10)

    def test_convex_input_unchanged(self):
        tab = env.convex_envelope_1d(lambda a: a * a, -2.0, 2.0)
        np.testing.assert_allclose(tab.qc_values, tab.f_values, atol=1e-12)

    def test_method_label(self):
        tab = env.convex_envelope_1d(double_well, -1.0, 1.0, num=65)
        assert tab.method == "biconjugate-1d"

    @given(seed=st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_envelope_is_convex_minorant(self, seed):
        rng = np.random.default_rng(seed)
        coeffs = rng.normal(size=4)

        def f(a):
            return float(coeffs[0] * np.sin(3 * a) + coeffs[1] * a * a
                         + coeffs[2] * a + coeffs[3] + 2.0 * a ** 4)

        tab = env.convex_envelope_1d(f, -2.0, 2.0, num=513)
        q = tab.qc_values
        assert np.all(q <= tab.f_values + 1e-9)
        # discrete midpoint convexity
        mid = 0.5 * (q[:-2] + q[2:])
        assert np.all(q[1:-1] <= mid + 1e-9)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            env.convex_envelope_1d(lambda a: np.inf if a > 0 else 0.0,
                                   -1.0, 1.0, num=65)


class TestEnvelopeTable:
    def test_envelope_above_f_rejected(self):
        xs = np.linspace(-1, 1, 11)
        with pytest.raises(ValueError):
            env.EnvelopeTable(samples=xs, f_values=np.zeros(11),
                              qc_values=np.ones(11), method="manual")

    def test_interpolate(self):
        tab = env.convex_envelope_1d(double_well, -2.0, 2.0, num=4097)
        assert tab.interpolate(0.0) == pytest.approx(0.0, abs=1e-12)
        assert tab.interpolate(1.5) == pytest.approx(0.25, abs=1e-3)

    def test_save_csv(self, tmp_path):
        tab = env.convex_envelope_1d(double_well, -1.0, 1.0, num=33)
        path = tmp_path / "env.csv"
        tab.save_csv(path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["A", "f", "f_qc"]
        assert len(rows) == 34


class TestLaminate:
    def test_reaches_envelope_at_well_center(self):
        f = lambda A: double_well(float(np.atleast_2d(A)[0, 0]))
        val = env.laminate_upper_bound(f, np.array([[0.0]]), depth=1)
        assert val == pytest.approx(0.0, abs=1e-10)

    def test_monotone_in_depth(self):
        f = lambda A: benchmark(float(np.atleast_2d(A)[0, 0]))
        vals = [env.laminate_upper_bound(f, np.array([[0.5]]), depth=d)
                for d in range(3)]
        assert vals[0] >= vals[1] >= vals[2]
        assert vals[0] == pytest.approx(benchmark(0.5))

    def test_never_below_convex_envelope(self):
        tab = env.convex_envelope_1d(benchmark, -4.0, 4.0, num=8193)
        f = lambda A: benchmark(float(np.atleast_2d(A)[0, 0]))
        for a0 in (-0.6, 0.3, 0.5, 1.2):
            ub = env.laminate_upper_bound(f, np.array([[a0]]), depth=2)
            # chordal interpolation of the tabulated hull can overshoot
            # the true envelope by O(h^2)
            assert ub >= tab.interpolate(a0) - 1e-5

    def test_depth_limited(self):
        f = lambda A: 0.0
        with pytest.raises(ValueError):
            env.laminate_upper_bound(f, np.array([[0.0]]), depth=4)


class TestPushforward:
    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
    def test_gradient_pushes_through(self, periodic_1d, alpha):
        v = periodic_field(periodic_1d)
        params = fv.compute_constants(1, alpha)
        u = env.periodic_pushforward(v, params)
        g_u = fv.fractional_gradient(u, params, fv.SPECTRAL).field
        grad_v = fv.classical_gradient(v, fv.SPECTRAL)
        np.testing.assert_allclose(g_u.values, grad_v.values, atol=1e-10)

    def test_mean_preserved(self, periodic_1d):
        vals = periodic_field(periodic_1d).values + 0.37
        v = fv.SampledField(periodic_1d, vals)
        params = fv.compute_constants(1, 0.5)
        u = env.periodic_pushforward(v, params)
        assert u.values.mean() == pytest.approx(vals.mean(), rel=1e-12)

    def test_rejects_box(self, box_1d):
        v = fv.SampledField(box_1d, np.zeros(box_1d.shape + (1,)))
        with pytest.raises(ValueError):
            env.periodic_pushforward(v, fv.compute_constants(1, 0.5))


class TestViolationSearch:
    def test_witness_at_double_well_center(self):
        params = fv.compute_constants(1, 0.5)
        wit = env.alpha_qc_violation_search(double_well, 0.0, params)
        assert wit is not None
        assert wit.gap == pytest.approx(1.0, rel=1e-6)
        a1, a2 = wit.details["slopes"]
        assert a1 == pytest.approx(-1.0, abs=1e-2)
        assert a2 == pytest.approx(1.0, abs=1e-2)
        assert wit.test_field.grid.kind == fv.PERIODIC

    def test_gap_matches_envelope(self):
        params = fv.compute_constants(1, 0.5)
        tab = env.convex_envelope_1d(benchmark, -6.0, 6.0, num=32769)
        wit = env.alpha_qc_violation_search(benchmark, 0.6, params)
        assert wit is not None
        expected = benchmark(0.6) - tab.interpolate(0.6)
        assert wit.gap == pytest.approx(expected, rel=1e-2)

    def test_no_witness_for_convex(self):
        params = fv.compute_constants(1, 0.5)
        for a0 in (-1.0, 0.0, 2.0):
            assert env.alpha_qc_violation_search(lambda a: a * a, a0,
                                                 params) is None

    def test_matrix_case_not_implemented(self):
        params = fv.compute_constants(2, 0.5)
        with pytest.raises(NotImplementedError):
            env.alpha_qc_violation_search(lambda A: 0.0, np.zeros((2, 2)),
                                          params)

    def test_witness_mixture_consistent(self):
        # the laminate average recorded in the witness reproduces the gap
        params = fv.compute_constants(1, 0.5)
        wit = env.alpha_qc_violation_search(benchmark, 0.5, params)
        assert wit is not None
        mix = wit.details["laminate_average"]
        assert benchmark(0.5) - mix == pytest.approx(wit.gap, rel=1e-12)
