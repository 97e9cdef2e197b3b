import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import naive_ep, phi
from sigreg_lab.core import DEFAULT_GRID, QuadratureGrid, norm_ppf
from sigreg_lab.oracles import finite_diff_grad
from sigreg_lab.univariate import (
    DegenerateSampleError,
    TestKind,
    anderson_darling,
    cramer_von_mises,
    epps_pulley,
    epps_pulley_grad,
    eval_slices,
    eval_test,
    extended_jarque_bera,
    jarque_bera,
    moment_match,
    moment_match_grad,
    watson,
)

finite = st.floats(-6, 6, allow_nan=False)


class TestEppsPulley:
    def test_single_zero_frozen(self):
        # 17-knot trapezoid of (1 - e^{-t^2/2})^2 e^{-t^2/2}, evaluated at 30 digits
        assert epps_pulley([0.0]) == pytest.approx(0.408920720214421842, rel=1e-13)

    def test_single_zero_near_continuum(self):
        cont = math.sqrt(2 * math.pi) - 2 * math.sqrt(math.pi) + math.sqrt(2 * math.pi / 3)
        assert epps_pulley([0.0]) == pytest.approx(cont, abs=1e-4)

    def test_three_points_frozen(self):
        assert epps_pulley([0.5, -1.2, 2.0]) == pytest.approx(0.687266259758398923, rel=1e-13)

    @pytest.mark.parametrize("n", [1, 2, 7, 100, 5000])
    def test_matches_naive_full_grid(self, rng, n):
        s = rng.normal(0.3, 1.4, n)
        assert epps_pulley(s) == pytest.approx(naive_ep(s), rel=1e-11)

    @pytest.mark.parametrize("t_max,t_count,coef", [(3.0, 9, 0.5), (5.0, 33, 1.0), (8.0, 65, 0.25)])
    def test_matches_naive_other_grids(self, rng, t_max, t_count, coef):
        s = rng.standard_normal(50)
        grid = QuadratureGrid(t_max, t_count, coef)
        assert epps_pulley(s, grid) == pytest.approx(naive_ep(s, t_max, t_count, coef), rel=1e-11)

    def test_row_blocking_is_transparent(self, rng):
        s = rng.standard_normal(9000)  # spans several row blocks
        assert epps_pulley(s) == pytest.approx(naive_ep(s), rel=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=40))
    def test_nonnegative_and_bounded(self, s):
        g = DEFAULT_GRID
        v = epps_pulley(s)
        assert 0.0 <= v <= len(s) * np.sum(g.trapz * g.weight * 4.0) + 1e-12

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            epps_pulley([])


class TestEppsPulleyGradient:
    def test_equal_entries_for_duplicates(self):
        _, g = epps_pulley_grad(np.zeros(5))
        assert np.all(g == g[0])

    def test_three_points_vs_finite_differences(self):
        s = np.array([0.5, -1.2, 2.0])
        _, g = epps_pulley_grad(s)
        fd = finite_diff_grad(epps_pulley, s, h=1e-5)
        assert np.max(np.abs(g - fd)) <= 1e-6 * np.max(np.abs(fd))

    def test_random_vectors_vs_finite_differences(self, rng):
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(1, 30))
            s = rng.normal(rng.normal(), rng.uniform(0.3, 2.0), n)
            _, g = epps_pulley_grad(s)
            fd = finite_diff_grad(epps_pulley, s, h=1e-5)
            worst = max(worst, np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12))
        assert worst <= 1e-6

    def test_statistic_matches_value(self, rng):
        s = rng.standard_normal(20)
        assert epps_pulley_grad(s)[0] == epps_pulley(s)

    @pytest.mark.parametrize("n", [1, 16, 512])
    def test_unscaled_gradient_bound_unit_bandwidth(self, rng, n):
        # the bound holds for the V-statistic (EP / N) with window e^{-t^2}
        grid = QuadratureGrid(window_coef=1.0)
        for _ in range(50):
            s = rng.normal(rng.normal(0, 3), rng.uniform(0.01, 5.0), n)
            _, g = epps_pulley_grad(s, grid)
            assert np.max(np.abs(g / n)) <= 4.0 / n


class TestMomentStatistics:
    def test_jb_two_points(self):
        assert jarque_bera([-1.0, 1.0]) == pytest.approx(1 / 3, rel=1e-15)

    def test_jb_symmetric_has_no_skew_term(self, rng):
        x = rng.standard_normal(11)
        s = np.concatenate([x, -x])
        n = s.size
        kurt = np.mean(s**4) / np.mean(s**2) ** 2
        assert jarque_bera(s) == pytest.approx(n / 6 * ((kurt - 3) / 2) ** 2, rel=1e-12)

    def test_jb_null_tail_rate(self):
        rng = np.random.default_rng(5)
        reps = 1000
        hits = sum(jarque_bera(rng.standard_normal(100_000)) > 5.99 for _ in range(reps))
        assert abs(hits / reps - 0.05) <= 0.02

    def test_ejb_examples(self, rng):
        assert extended_jarque_bera([-1.0, 1.0]) == pytest.approx(1 / 3, rel=1e-15)
        assert extended_jarque_bera([0.0, 2.0]) == pytest.approx(7 / 3, rel=1e-15)
        s = rng.standard_normal(30)
        s = (s - s.mean()) / s.std()
        assert extended_jarque_bera(s) == pytest.approx(jarque_bera(s), rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize("fn", [jarque_bera, extended_jarque_bera])
    def test_degenerate_sample(self, fn):
        with pytest.raises(DegenerateSampleError):
            fn([2.0, 2.0, 2.0])
        with pytest.raises(ValueError):
            fn([1.0])

    def test_moment_match_examples(self):
        assert moment_match([-1.0, 1.0]) == 0.0
        assert moment_match([0.0, 0.0]) == 1.0
        assert moment_match([1.0, 3.0]) == pytest.approx(4.0)

    def test_moment_match_gradient(self, rng):
        s = rng.normal(0.4, 1.7, 12)
        _, g = moment_match_grad(s)
        fd = finite_diff_grad(moment_match, s)
        assert np.allclose(g, fd, rtol=1e-6, atol=1e-9)


class TestEdfStatistics:
    def test_cvm_single_zero(self):
        assert cramer_von_mises([0.0]) == pytest.approx(1 / 12, rel=1e-15)

    @pytest.mark.parametrize("n", [1, 5, 40])
    def test_cvm_plugin_minimum(self, n):
        s = norm_ppf((2 * np.arange(1, n + 1) - 1) / (2 * n))
        assert cramer_von_mises(s) == pytest.approx(1 / (12 * n), rel=1e-10)

    def test_cvm_triple_three_frozen(self):
        assert cramer_von_mises([3.0, 3.0, 3.0]) == pytest.approx(0.995955772579197113, rel=1e-13)

    def test_ad_single_zero(self):
        assert anderson_darling([0.0]) == pytest.approx(2 * math.log(2) - 1, rel=1e-14)

    def test_ad_three_points_frozen(self):
        assert anderson_darling([2.0, -1.0, 0.5]) == pytest.approx(0.745871317033395783, rel=1e-13)

    def test_ad_against_loop(self, rng):
        s = rng.normal(0.2, 1.1, 25)
        x = sorted(s)
        n = len(x)
        ref = -n - sum((2 * i - 1) * (math.log(phi(x[i - 1])) + math.log(1 - phi(x[n - i])))
                       for i in range(1, n + 1)) / n
        assert anderson_darling(s) == pytest.approx(ref, rel=1e-12)

    def test_ad_shift_increases(self, rng):
        s = rng.standard_normal(50)
        assert anderson_darling(s + 5) > anderson_darling(s)

    def test_ad_clamps_extremes(self):
        assert np.isfinite(anderson_darling([-60.0, 0.0, 60.0]))

    def test_watson_examples(self):
        assert watson([0.0]) == pytest.approx(1 / 12, rel=1e-15)
        # the mean-CDF correction cancels the CDF-dependent part exactly here
        assert watson([1.0, 1.0]) == pytest.approx(1 / 6, rel=1e-13)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=30))
    def test_watson_below_cvm(self, s):
        assert watson(s) <= cramer_von_mises(s) + 1e-15


ALL_KINDS = list(TestKind)


class TestDispatchAndInvariants:
    def test_dispatch(self):
        assert eval_test("epps-pulley", [0.0]) == epps_pulley([0.0])
        assert eval_test(TestKind.JARQUE_BERA, [-1.0, 1.0]) == pytest.approx(1 / 3)
        assert eval_test("watson", [0.0]) == pytest.approx(1 / 12)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_slices_match_univariate(self, rng, kind):
        P = rng.standard_normal((30, 4))
        vals = eval_slices(kind, P)
        assert np.allclose(vals, [eval_test(kind, P[:, j]) for j in range(4)], rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("kind", [k for k in ALL_KINDS if not k.differentiable])
    def test_gradient_only_for_differentiable(self, kind):
        with pytest.raises(ValueError):
            eval_slices(kind, np.ones((3, 1)), grad=True)

    @pytest.mark.parametrize("kind", [k for k in ALL_KINDS if k is not TestKind.JARQUE_BERA])
    @pytest.mark.parametrize("a,b", [(1.0, 0.3), (1.5, 0.0), (0.7, 0.0), (1.2, -0.4), (1.0, -0.05)])
    def test_affine_sensitivity(self, kind, a, b):
        s = norm_ppf((np.arange(1000) + 0.5) / 1000)
        assert eval_test(kind, a * s + b) > eval_test(kind, s)

    @pytest.mark.parametrize("a,b", [(1.0, 0.3), (1.5, 0.0), (0.7, -0.2)])
    def test_jb_is_affine_invariant(self, a, b):
        s = norm_ppf((np.arange(1000) + 0.5) / 1000)
        assert jarque_bera(a * s + b) == pytest.approx(jarque_bera(s), rel=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(finite, min_size=3, max_size=25, unique=True), st.randoms(use_true_random=False))
    def test_permutation_invariance(self, s, rnd):
        perm = list(s)
        rnd.shuffle(perm)
        for kind in ALL_KINDS:
            assert eval_test(kind, perm) == pytest.approx(eval_test(kind, s), rel=1e-12, abs=1e-14)
