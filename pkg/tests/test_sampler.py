import numpy as np
import pytest

from avare.rng import make_rng
from avare.sampler import (
    DegenerateTableError,
    WeightTable,
    sequential_wor,
)
from avare.simplex import solve_restricted_reference

from oracles import chi_square_pvalue, wor_inclusion_by_enumeration


def reference_cs(h):
    return np.cumsum(np.sort(h)[::-1])


class TestTable:
    def test_initial_state(self):
        t = WeightTable([1.0, 3.0, 2.0])
        np.testing.assert_allclose(t.CS, [3, 5, 6])
        np.testing.assert_array_equal(t.order(), [1, 2, 0])
        assert t.validate_full()

    def test_update_moves_entry(self):
        t = WeightTable([1.0, 3.0, 2.0])
        t.update(0, 5.0)
        np.testing.assert_allclose(t.CS, [5, 8, 10])
        np.testing.assert_array_equal(t.order(), [0, 1, 2])
        assert t.validate_full()

    @pytest.mark.parametrize("bad", [-1.0, np.nan, np.inf])
    def test_update_rejects_bad_norm(self, bad):
        t = WeightTable([1.0, 2.0])
        with pytest.raises(ValueError):
            t.update(0, bad)
        assert t.validate_full()

    def test_update_rejects_bad_index(self):
        with pytest.raises(IndexError):
            WeightTable([1.0, 2.0]).update(2, 1.0)

    def test_ties_keep_index_order(self):
        t = WeightTable([1.0, 1.0, 1.0])
        t.update(1, 1.0)
        np.testing.assert_array_equal(t.order(), [0, 1, 2])

    def test_random_updates_track_reference(self):
        rng = np.random.default_rng(0)
        n = 200
        t = WeightTable(rng.exponential(size=n))
        for k in range(3000):
            i = int(rng.integers(n))
            y = 0.0 if rng.random() < 0.1 else float(rng.exponential())
            t.update(i, y)
            if k % 500 == 0:
                np.testing.assert_allclose(t.CS, reference_cs(t.H), rtol=0, atol=1e-9)
        assert t.validate_full()
        assert t.bulk_work > 0

    def test_reanchor_bounds_drift(self):
        rng = np.random.default_rng(1)
        n = 64
        t = WeightTable(rng.exponential(size=n) * 1e6, reanchor_every=256)
        for _ in range(2000):
            t.update(int(rng.integers(n)), float(rng.exponential() * 1e-6))
        # right after a re-anchor the prefix sums are exact
        t.update(0, 1.0)
        t.reanchor()
        np.testing.assert_array_equal(t.CS, np.cumsum(t.H[t.order()]))


class TestThreshold:
    def test_matches_reference(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            n = int(rng.integers(1, 60))
            h = rng.exponential(size=n) * (rng.random(n) > 0.3)
            if not h.any():
                h[0] = 1.0
            eps = rng.uniform(0, 1 / n)
            t = WeightTable(h)
            ref = solve_restricted_reference(h, eps)
            rho, lam = t.find_rho(eps)
            assert rho == ref.rho
            assert lam == pytest.approx(ref.lam, rel=1e-12)
            np.testing.assert_allclose(t.probabilities(eps), ref.p, rtol=1e-12, atol=1e-15)

    def test_worked_example(self):
        t = WeightTable([3.0, 1.0, 0.0, 0.0])
        assert t.find_rho(0.1) == (2, pytest.approx(5.0))
        np.testing.assert_allclose(t.probabilities(0.1), [0.6, 0.2, 0.1, 0.1])

    def test_all_zero(self):
        t = WeightTable(np.zeros(5))
        assert t.find_rho(0.1) == (5, 0.0)
        np.testing.assert_allclose(t.probabilities(0.1), np.full(5, 0.2))
        with pytest.raises(DegenerateTableError):
            t.find_rho(0.0)

    def test_eps_out_of_range(self):
        with pytest.raises(ValueError):
            WeightTable([1.0, 2.0]).find_rho(0.6)


class TestSampling:
    def test_chi_square(self):
        h = np.array([5.0, 3.0, 1.0, 0.5, 0.0, 0.0, 2.0, 0.1])
        t = WeightTable(h)
        eps = 0.05
        p = t.probabilities(eps)
        rng = make_rng(3)
        counts = np.bincount([t.sample(eps, rng) for _ in range(40000)], minlength=h.size)
        assert chi_square_pvalue(counts, p) > 1e-3

    def test_draw_reports_probability(self):
        t = WeightTable([4.0, 1.0, 0.0])
        p = t.probabilities(0.1)
        rng = make_rng(4)
        for _ in range(200):
            i, pi = t.draw(0.1, rng)
            assert pi == pytest.approx(p[i])

    def test_eps_zero_never_samples_zero_norm(self):
        t = WeightTable([1.0, 0.0, 2.0])
        rng = make_rng(5)
        assert 1 not in {t.sample(0.0, rng) for _ in range(2000)}

    def test_all_zero_uniform(self):
        t = WeightTable(np.zeros(4))
        rng = make_rng(6)
        counts = np.bincount([t.sample(0.1, rng) for _ in range(8000)], minlength=4)
        assert chi_square_pvalue(counts, np.full(4, 0.25)) > 1e-3

    def test_deterministic_given_seed(self):
        t = WeightTable([1.0, 2.0, 3.0, 4.0])
        a = [t.sample(0.1, make_rng(7)) for _ in range(1)]
        b = [t.sample(0.1, make_rng(7)) for _ in range(1)]
        assert a == b


class TestWithoutReplacement:
    def test_distinct_and_weights(self):
        t = WeightTable([5.0, 3.0, 1.0, 0.5, 0.2])
        rng = make_rng(8)
        idx, q = t.sample_without_replacement(0.05, 4, rng)
        assert len(set(idx.tolist())) == 4
        p = t.probabilities(0.05)
        used = np.concatenate([[0.0], np.cumsum(p[idx])[:-1]])
        np.testing.assert_allclose(q, p[idx] / (1 - used))

    @pytest.mark.parametrize("max_rejections", [32, 0])
    def test_inclusion_frequencies(self, max_rejections):
        h = np.array([6.0, 2.0, 1.0, 0.5, 0.0])
        eps = 0.04
        t = WeightTable(h)
        p = t.probabilities(eps)
        m = 3
        expected = wor_inclusion_by_enumeration(p, m)
        rng = make_rng(9)
        reps = 20000
        counts = np.zeros(h.size)
        for _ in range(reps):
            idx, _ = t.sample_without_replacement(eps, m, rng, max_rejections=max_rejections)
            counts[idx] += 1
        freq = counts / reps
        se = np.sqrt(expected * (1 - expected) / reps)
        assert np.all(np.abs(freq - expected) <= 5 * se + 1e-12)

    def test_full_batch_takes_everything(self):
        t = WeightTable([1.0, 2.0, 3.0])
        idx, q = t.sample_without_replacement(0.1, 3, make_rng(10))
        assert sorted(idx.tolist()) == [0, 1, 2]
        assert q[-1] == pytest.approx(1.0)

    def test_bad_batch_size(self):
        with pytest.raises(ValueError):
            WeightTable([1.0, 2.0]).sample_without_replacement(0.1, 3, make_rng(0))

    def test_sequential_wor_explicit(self):
        p = np.array([0.5, 0.3, 0.2])
        expected = wor_inclusion_by_enumeration(p, 2)
        rng = make_rng(11)
        counts = np.zeros(3)
        for _ in range(20000):
            idx, q = sequential_wor(p, 2, rng)
            counts[idx] += 1
            assert q[0] == p[idx[0]]
        np.testing.assert_allclose(counts / 20000, expected, atol=0.015)


class TestComplexity:
    def test_search_visits_polylog(self):
        rng = np.random.default_rng(12)
        for k in (6, 10, 14):
            n = 2**k
            t = WeightTable(rng.exponential(size=n))
            t.tree.visits = 0
            reps = 50
            for _ in range(reps):
                t.find_rho(0.5 / n)
            assert t.tree.visits / reps <= 4 * k**2
