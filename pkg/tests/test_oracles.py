import math

import numpy as np
import pytest

from sigreg_lab.core import seeded_rng
from sigreg_lab.experiments import XDistributionSpec, generate_x_distribution
from sigreg_lab.loss import global_statistic_max
from sigreg_lab.oracles import (
    bhep_statistic,
    finite_diff_grad,
    hz_beta,
    moment_counterexample,
    reference_quadrature,
)
from sigreg_lab.slicing import sample_directions
from sigreg_lab.univariate import epps_pulley


def naive_bhep(Y, beta):
    Y = [list(map(float, r)) for r in Y]
    n, d = len(Y), len(Y[0])
    b2 = beta * beta
    pair = sum(math.exp(-b2 / 2 * sum((a - c) ** 2 for a, c in zip(Y[i], Y[j]))) for i in range(n) for j in range(n))
    single = sum(math.exp(-b2 / (2 * (1 + b2)) * sum(a * a for a in y)) for y in Y)
    return pair / n - 2 * (1 + b2) ** (-d / 2) * single + n * (1 + 2 * b2) ** (-d / 2)


class TestBhep:
    def test_hand_value(self):
        v = bhep_statistic(np.zeros((1, 1)), beta=1.0)
        assert v == pytest.approx(1 - 2 / math.sqrt(2) + 1 / math.sqrt(3), rel=1e-14)
        assert v == pytest.approx(0.163140, abs=1e-5)

    def test_matches_double_loop(self, rng):
        Y = rng.standard_normal((7, 3))
        assert bhep_statistic(Y, 0.8) == pytest.approx(naive_bhep(Y, 0.8), rel=1e-12)

    def test_duplicated_rows(self, rng):
        Y = rng.standard_normal((5, 2))
        Y2 = np.vstack([Y, Y])
        assert bhep_statistic(Y2, 1.1) == pytest.approx(naive_bhep(Y2, 1.1), rel=1e-12)
        # doubling every row doubles all three terms
        assert bhep_statistic(Y2, 1.1) == pytest.approx(2 * bhep_statistic(Y, 1.1), rel=1e-12)

    def test_blocking_is_transparent(self, rng):
        Y = rng.standard_normal((50, 3))
        assert bhep_statistic(Y, block=7) == pytest.approx(bhep_statistic(Y), rel=1e-13)

    def test_default_beta(self):
        assert hz_beta(100, 2) == pytest.approx(2**-0.5 * (5 * 100 / 4) ** (1 / 6), rel=1e-15)

    def test_beta_validation(self):
        with pytest.raises(ValueError):
            bhep_statistic(np.zeros((2, 2)), beta=0.0)

    def test_x_batches_rank_above_gaussian(self):
        wins = 0
        for seed in range(100):
            G = seeded_rng(seed, 21).standard_normal((300, 2))
            X = generate_x_distribution(XDistributionSpec(300, 2, seed)).data
            wins += bhep_statistic(X) > bhep_statistic(G)
        assert wins >= 95

    def test_agrees_with_sketched_ep(self):
        agree = 0
        for seed in range(50):
            G = seeded_rng(seed, 22).standard_normal((256, 4))
            X = generate_x_distribution(XDistributionSpec(256, 4, seed)).data
            d = sample_directions(seed, 4, 64)
            bhep_says = bhep_statistic(X) > bhep_statistic(G)
            # testing decisions use the max-aggregated statistic
            ep_says = global_statistic_max(X, d).aggregate > global_statistic_max(G, d).aggregate
            agree += bhep_says == ep_says
        assert agree >= 45


class TestReferenceQuadrature:
    def test_plateau(self, rng):
        s = rng.standard_normal(40)
        a = reference_quadrature(s, fine_count=20001)
        b = reference_quadrature(s, fine_count=40001)
        assert abs(a - b) < 1e-10

    def test_zero_approaches_analytic(self):
        cont = math.sqrt(2 * math.pi) - 2 * math.sqrt(math.pi) + math.sqrt(2 * math.pi / 3)
        err5 = abs(reference_quadrature([0.0]) - cont)
        err8 = abs(reference_quadrature([0.0], -8.0, 8.0, 40001) - cont)
        assert err8 < err5 and err8 < 1e-12

    def test_close_to_trapezoid(self, rng):
        s = rng.standard_normal(100)
        assert reference_quadrature(s) == pytest.approx(epps_pulley(s), rel=1e-3)

    def test_n_scaling(self, rng):
        s = rng.standard_normal(30)
        assert reference_quadrature(np.tile(s, 2)) == pytest.approx(2 * reference_quadrature(s), rel=1e-12)

    def test_fine_count_validation(self):
        with pytest.raises(ValueError):
            reference_quadrature([0.0], fine_count=101)
        with pytest.raises(ValueError):
            reference_quadrature([0.0], fine_count=1000)


class TestFiniteDiff:
    def test_quadratic(self):
        assert np.allclose(finite_diff_grad(lambda x: float(np.sum(x**2)), [1.0, 2.0]), [2.0, 4.0], atol=1e-9)

    def test_constant(self):
        assert np.all(finite_diff_grad(lambda x: 3.0, np.ones((2, 3))) == 0)

    def test_h_validation(self):
        with pytest.raises(ValueError):
            finite_diff_grad(lambda x: 0.0, [1.0], h=0.0)


class TestMomentCounterexample:
    def test_order_one(self):
        p = moment_counterexample(1, 0.1)
        assert np.array_equal(p.support, [0, 1, 2])
        assert np.allclose(p.p_plus, [13 / 30, 4 / 30, 13 / 30], rtol=0, atol=1e-15)
        assert np.allclose(p.p_minus, [7 / 30, 16 / 30, 7 / 30], rtol=0, atol=1e-15)
        assert p.moments("plus", 1)[1] == 1.0 and p.moments("minus", 1)[1] == 1.0

    def test_order_four_kernel(self):
        p = moment_counterexample(4, 0.001)
        v = (p.p_plus - p.p_minus) / (2 * p.epsilon)
        assert np.allclose(v, [1, -5, 10, -10, 5, -1], atol=1e-9)

    @pytest.mark.parametrize("order", range(1, 11))
    def test_invariants(self, order):
        p = moment_counterexample(order)
        for q in (p.p_plus, p.p_minus):
            assert np.all(q >= 0) and abs(q.sum() - 1) <= 1e-12
        assert np.allclose(p.moments("plus"), p.moments("minus"), rtol=1e-10, atol=1e-10)
        assert p.tv_distance > 0
        assert p.moments("plus", order + 1)[-1] != pytest.approx(p.moments("minus", order + 1)[-1], rel=1e-12)

    def test_epsilon_shrinks(self):
        p = moment_counterexample(4, 0.5)
        assert p.epsilon == pytest.approx(1 / 120)
        assert np.all(p.p_plus > 0) and np.all(p.p_minus > 0)

    def test_order_validation(self):
        with pytest.raises(ValueError):
            moment_counterexample(0)

    def test_quantile_sample(self):
        p = moment_counterexample(1, 0.1)
        s = p.quantile_sample("plus", 30)
        assert [int(np.sum(s == v)) for v in (0, 1, 2)] == [13, 4, 13]
