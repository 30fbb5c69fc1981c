import mpmath
import numpy as np
import pytest

from avare.schedules import EpsilonSchedule, StepSchedule, t0_of

mpmath.mp.dps = 40


def eps_mp(C, delta, t, m=1, p_min=0):
    C, delta = mpmath.mpf(C), mpmath.mpf(delta)
    k = delta / 3
    return 1 / (C ** (1 - k) * (C + m * (t - 1)) ** k) + mpmath.mpf(p_min)


class TestEpsilon:
    @pytest.mark.parametrize("t", [1, 2, 10, 101, 12345])
    @pytest.mark.parametrize("delta", [1.0, 0.5, 0.2])
    def test_single_matches_high_precision(self, t, delta):
        s = EpsilonSchedule(N=100, C=100, delta=delta)
        assert s(t) == pytest.approx(float(eps_mp(100, delta, t)), rel=1e-14)

    @pytest.mark.parametrize("t", [1, 2, 50, 1000])
    def test_minibatch_matches_high_precision(self, t):
        s = EpsilonSchedule(N=1000, C=1000, delta=1.0, m=128, mode="minibatch")
        assert s(t) == pytest.approx(float(eps_mp(1000, 1, t, m=128)), rel=1e-14)

    def test_first_value_is_one_over_n(self):
        assert EpsilonSchedule(N=100, C=100)(1) == pytest.approx(0.01)

    def test_known_value(self):
        # (C + t - 1) doubles at t = C + 1, so eps drops by 2^(-delta/3)
        s = EpsilonSchedule(N=100, C=100, delta=1.0)
        assert s(101) == pytest.approx(0.01 * 2 ** (-1 / 3), rel=1e-14)

    def test_monotone_decreasing(self):
        s = EpsilonSchedule(N=50, C=80, delta=0.7, m=4, mode="minibatch")
        vals = np.array([s(t) for t in range(1, 2000)])
        assert np.all(np.diff(vals) < 0) and np.all(vals <= 1 / 50)

    def test_rejects_small_c(self):
        with pytest.raises(ValueError):
            EpsilonSchedule(N=100, C=99)

    @pytest.mark.parametrize("delta", [0.0, 1.5])
    def test_rejects_delta(self, delta):
        with pytest.raises(ValueError):
            EpsilonSchedule(N=10, C=10, delta=delta)

    def test_t_is_one_based(self):
        with pytest.raises(ValueError):
            EpsilonSchedule(N=10, C=10)(0)


class TestConstantStep:
    def test_defaults(self):
        s = EpsilonSchedule.default_constant_step(100)
        assert s.p_min == pytest.approx(1 / 500)
        assert s.C == pytest.approx(125.0)
        assert s(1) == pytest.approx(0.01, rel=1e-12)
        assert s(1) <= 0.01

    def test_tends_to_p_min(self):
        s = EpsilonSchedule.default_constant_step(100)
        assert s(10**9) == pytest.approx(s.p_min, rel=0.05)
        t = 777
        assert s(t) == pytest.approx(float(eps_mp(s.C, 1, t, p_min=s.p_min)), rel=1e-13)

    def test_rejects_large_c(self):
        with pytest.raises(ValueError):
            EpsilonSchedule(N=100, C=200, mode="constant_step", p_min=1 / 500)

    def test_p_min_only_in_constant_mode(self):
        with pytest.raises(ValueError):
            EpsilonSchedule(N=10, C=10, p_min=0.01)


class TestT0:
    @pytest.mark.parametrize("delta", [1.0, 0.5])
    @pytest.mark.parametrize("m", [1, 7])
    def test_matches_scan(self, delta, m):
        N = 30
        s = EpsilonSchedule(N=N, C=N, delta=delta, m=m, mode="minibatch")
        t = 1
        while s(t) > 1 / (2 * N):
            t += 1
        assert t0_of(s) == t

    def test_closed_form_delta_one(self):
        # eps_t <= 1/(2N) with C = N, delta = 1  <=>  N + t - 1 >= 8N
        N = 40
        assert t0_of(EpsilonSchedule(N=N, C=N)) == 7 * N + 1

    def test_unreachable(self):
        s = EpsilonSchedule(N=10, C=10 / 1.0, mode="constant_step", p_min=0.06)
        with pytest.raises(ValueError):
            t0_of(s)


class TestStep:
    def test_power_decay(self):
        s = StepSchedule.power_decay(E=2.0, F=3.0, beta=0.5)
        assert s(1) == pytest.approx(2 / np.sqrt(3))
        assert s(6) == pytest.approx(2 / np.sqrt(8))

    def test_experiment(self):
        s = StepSchedule.experiment(m=1, N=100, L=0.05, mu=1.0)
        assert s(1) == pytest.approx(1 / (10 + 1))
        assert s(90) == pytest.approx(1 / 100)
        assert s.decay_exponent == 1.0

    def test_constant(self):
        s = StepSchedule.constant(0.25)
        assert s(1) == s(10**6) == 0.25
        assert s.decay_exponent == 0.0

    @pytest.mark.parametrize(
        "kwargs",
        [dict(mode="power_decay", E=1, F=0.5), dict(mode="power_decay", beta=1.5),
         dict(mode="constant", alpha=0.0), dict(mode="experiment", L=0.0), dict(mode="nope")],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            StepSchedule(**kwargs)
