import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from helpers import laguerre_factorial_sum, sign_changes
from vlident.errors import InvalidParameterError
from vlident.laguerre import (LaguerreSeriesSpec, build_basis_matrix, continuous_orthonormality_defect,
                              eval_laguerre, laguerre_polynomials, project_continuous,
                              project_onto_basis)


class TestEvalLaguerre:
    def test_order_zero_at_origin(self):
        assert eval_laguerre(0, 0.0, 0.5) == pytest.approx(1.0, abs=1e-15)

    def test_first_order_zero_crossing(self):
        # L_1(2at) vanishes at t = 1/(2a)
        assert eval_laguerre(1, 1.0, 0.5) == pytest.approx(0.0, abs=1e-15)

    def test_origin_value_is_sqrt_2a(self):
        assert eval_laguerre(2, 0.0, 1.0) == pytest.approx(1.41421356, abs=1e-8)

    @pytest.mark.parametrize("n", range(0, 12))
    @pytest.mark.parametrize("a", [0.05, 0.7, 4.0])
    def test_matches_factorial_sum(self, n, a):
        for t in (0.0, 0.3, 1.7, 5.0, 11.0):
            assert eval_laguerre(n, t, a) == pytest.approx(laguerre_factorial_sum(n, t, a), rel=1e-9, abs=1e-12)

    def test_recurrence_matches_scipy_at_high_order(self):
        x = np.linspace(0.0, 60.0, 301)
        ours = laguerre_polynomials(x, 30)
        for n in (15, 22, 30):
            np.testing.assert_allclose(ours[n], special.eval_laguerre(n, x), rtol=1e-9, atol=1e-9)

    def test_negative_time_is_zero(self):
        assert eval_laguerre(3, -0.5, 1.0) == 0.0
        np.testing.assert_array_equal(eval_laguerre(1, np.array([-2.0, -1e-9]), 1.0), [0.0, 0.0])

    @pytest.mark.parametrize("a", [0.0, -1.0, math.inf, math.nan])
    def test_invalid_time_scale(self, a):
        with pytest.raises(InvalidParameterError):
            eval_laguerre(0, 1.0, a)

    def test_invalid_order(self):
        with pytest.raises(InvalidParameterError):
            eval_laguerre(-1, 1.0, 1.0)

    @given(n=st.integers(0, 10), a=st.floats(1e-3, 1e3))
    def test_origin_invariant(self, n, a):
        assert eval_laguerre(n, 0.0, a) == pytest.approx(math.sqrt(2 * a), rel=1e-12)


class TestSpec:
    @pytest.mark.parametrize("R,a", [(0, 1.0), (2, 0.0), (2, -1.0), (1, math.inf), (1.5, 1.0)])
    def test_rejects_invalid(self, R, a):
        with pytest.raises(InvalidParameterError):
            LaguerreSeriesSpec(R, a)


class TestBasisMatrix:
    def test_single_column(self):
        B = build_basis_matrix(LaguerreSeriesSpec(1, 0.5), 2)
        np.testing.assert_allclose(B.samples[:, 0], [1.0, math.exp(-0.5), math.exp(-1.0)], rtol=1e-14)

    def test_zero_memory_row(self):
        B = build_basis_matrix(LaguerreSeriesSpec(2, 0.5), 0)
        assert B.shape == (1, 2)
        np.testing.assert_allclose(B.samples[0], [1.0, 1.0], rtol=1e-14)

    def test_columns_are_orders(self):
        spec = LaguerreSeriesSpec(4, 0.3)
        B = build_basis_matrix(spec, 10)
        for r in range(4):
            np.testing.assert_allclose(B.samples[:, r], eval_laguerre(r, np.arange(11.0), 0.3))

    def test_read_only(self):
        B = build_basis_matrix(LaguerreSeriesSpec(2, 1.0), 3)
        with pytest.raises(ValueError):
            B.samples[0, 0] = 5.0


class TestOrthonormality:
    @pytest.mark.parametrize("m,n", [(0, 0), (0, 1), (2, 3), (5, 5)])
    def test_defect_small(self, m, n):
        assert continuous_orthonormality_defect(m, n, 1.0, 1e-3, 40.0) < 1e-4

    def test_defect_shrinks_with_step(self):
        coarse = continuous_orthonormality_defect(1, 1, 1.0, 1e-1, 40.0)
        fine = continuous_orthonormality_defect(1, 1, 1.0, 1e-3, 40.0)
        assert fine < coarse


class TestZeroCrossings:
    @pytest.mark.parametrize("n", range(0, 7))
    def test_n_sign_changes(self, n):
        a = 0.8
        t = np.linspace(0.0, 40.0 / a, 100001)
        assert sign_changes(eval_laguerre(n, t, a)) == n


class TestProjection:
    def test_basis_element(self):
        spec = LaguerreSeriesSpec(4, 0.3)
        signal = eval_laguerre(0, np.arange(41.0), 0.3)
        proj = project_onto_basis(signal, spec)
        np.testing.assert_allclose(proj.coefficients, [1, 0, 0, 0], atol=1e-9)
        assert proj.residual_sse < 1e-20
        assert not proj.rank_deficient

    def test_zero_signal(self):
        proj = project_onto_basis(np.zeros(30), LaguerreSeriesSpec(3, 0.5))
        np.testing.assert_array_equal(proj.coefficients, np.zeros(3))
        assert proj.residual_sse == 0.0

    def test_more_functions_fit_better(self):
        t = np.arange(101.0)
        signal = np.exp(-0.3 * t)
        r1 = project_onto_basis(signal, LaguerreSeriesSpec(1, 0.3)).residual_sse
        r4 = project_onto_basis(signal, LaguerreSeriesSpec(4, 0.3)).residual_sse
        assert r4 <= r1

    def test_degenerate_basis_flagged(self):
        # a huge time scale collapses every column onto the t = 0 sample
        proj = project_onto_basis(np.ones(5), LaguerreSeriesSpec(3, 800.0))
        assert proj.rank_deficient

    def test_too_short_signal(self):
        with pytest.raises(InvalidParameterError):
            project_onto_basis(np.ones(2), LaguerreSeriesSpec(3, 1.0))

    @settings(max_examples=60, deadline=None)
    @given(R=st.integers(1, 7), a=st.floats(0.05, 5.0),
           data=st.lists(st.floats(-3, 3), min_size=40, max_size=40))
    def test_nested_monotonicity(self, R, a, data):
        signal = np.array(data)
        small = project_onto_basis(signal, LaguerreSeriesSpec(R, a)).residual_sse
        large = project_onto_basis(signal, LaguerreSeriesSpec(R + 1, a)).residual_sse
        assert large <= small + 1e-12 * max(1.0, small)


class TestContinuousProjection:
    def test_basis_element_coefficients(self):
        spec = LaguerreSeriesSpec(5, 0.7)
        proj = project_continuous(lambda t: eval_laguerre(2, t, 0.7), spec)
        np.testing.assert_allclose(proj.coefficients, [0, 0, 1, 0, 0], atol=1e-12)
        assert proj.energy == pytest.approx(1.0, rel=1e-12)

    def test_energy_of_exponential(self):
        # int_0^inf exp(-2bt) dt = 1/(2b)
        proj = project_continuous(lambda t: np.exp(-0.4 * t), LaguerreSeriesSpec(3, 1.0))
        assert proj.energy == pytest.approx(1.0 / 0.8, rel=1e-10)

    @settings(max_examples=80, deadline=None)
    @given(R=st.integers(1, 10), a=st.floats(0.05, 20.0),
           amps=st.lists(st.floats(-5, 5), min_size=3, max_size=3),
           rates=st.lists(st.floats(0.01, 10.0), min_size=3, max_size=3),
           freq=st.floats(0.0, 2.0))
    def test_bessel_inequality(self, R, a, amps, rates, freq):
        def f(t):
            return sum(c * np.exp(-b * t) for c, b in zip(amps, rates)) * np.cos(freq * t)

        proj = project_continuous(f, LaguerreSeriesSpec(R, a))
        assert np.sum(proj.coefficients ** 2) <= proj.energy + 1e-8 * max(1.0, proj.energy)

    def test_bessel_is_tight_for_span_members(self):
        spec = LaguerreSeriesSpec(4, 1.3)
        proj = project_continuous(lambda t: 2 * eval_laguerre(0, t, 1.3) - eval_laguerre(3, t, 1.3), spec)
        assert np.sum(proj.coefficients ** 2) == pytest.approx(proj.energy, rel=1e-10)
        assert np.sum(proj.coefficients ** 2) <= proj.energy + 1e-8
