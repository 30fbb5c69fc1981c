import numpy as np
import pytest

from avare.metrics import (
    InfiniteCostError,
    cost,
    dynamic_regret,
    loglog_slope,
    optimal_cost,
    regret_slope,
    relative_error,
    table1_ratios,
)
from avare.problems import Dataset, FiniteSumProblem, make_synthetic

from test_drivers import small_run


class TestCost:
    def test_values(self):
        assert cost([0.5, 0.5], [1.0, 1.0]) == pytest.approx(4.0)
        assert optimal_cost([1.0, 1.0]) == pytest.approx(4.0)

    def test_zero_norm_zero_probability(self):
        assert cost([1.0, 0.0], [2.0, 0.0]) == pytest.approx(4.0)

    def test_infinite(self):
        with pytest.raises(InfiniteCostError):
            cost([1.0, 0.0], [1.0, 1.0])

    def test_cost_at_least_optimum(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            a = rng.exponential(size=6)
            p = rng.dirichlet(np.ones(6))
            assert cost(p, a) >= optimal_cost(a) * (1 - 1e-12)


class TestSlopes:
    def test_exact_power_law(self):
        t = np.arange(1, 1001)
        A, s = loglog_slope(t, 3.0 * t**0.66)
        assert s == pytest.approx(0.66) and A == pytest.approx(3.0)

    def test_burn_in_and_min_points(self):
        t = np.arange(1, 101)
        with pytest.raises(ValueError):
            loglog_slope(t, t * 1.0, burn_in=0.95, min_points=10)

    def test_regret_slope_linear(self):
        assert regret_slope(np.arange(1, 2001) * 2.0) == pytest.approx(1.0)

    def test_zero_regret_is_nan(self):
        assert np.isnan(regret_slope(np.zeros(500)))


class TestRecords:
    def test_regret_and_relative_error(self):
        rec = small_run("avare", metrics="full")
        np.testing.assert_allclose(dynamic_regret(rec), np.cumsum(rec.cost - rec.opt_cost))
        np.testing.assert_allclose(relative_error(rec), rec.rel_err)
        assert np.all(rec.cost >= rec.opt_cost * (1 - 1e-12))

    def test_cheap_mode_refuses(self):
        rec = small_run("avare", metrics="cheap")
        with pytest.raises(ValueError):
            dynamic_regret(rec)

    def test_columns_and_passes(self):
        rec = small_run("uniform", metrics="full")
        assert list(rec.columns()) == ["t", "alpha", "eps", "cost", "opt_cost", "cum_regret",
                                       "subopt", "rel_err", "dx_norm"]
        assert rec.data_passes[-1] == pytest.approx(rec.T / rec.N)


class TestTable1:
    def test_ratios_at_least_one(self):
        for seed in range(3):
            prob = FiniteSumProblem(make_synthetic(60, 5, seed=seed), "logistic", 1.0)
            smooth, var = table1_ratios(prob)
            assert smooth >= 1.0 and var >= 1.0

    def test_equal_rows_give_one(self):
        # identical features with balanced labels: every L_i and ||g_i*|| equal
        Z = np.array([[1.0, 2.0]] * 4)
        prob = FiniteSumProblem(Dataset(Z, np.array([0, 1, 0, 1])), "logistic", 1.0)
        smooth, var = table1_ratios(prob)
        assert smooth == pytest.approx(1.0)
        assert var == pytest.approx(1.0, abs=1e-8)
