import numpy as np
import pytest
from scipy.optimize import brentq, minimize

from avare.problems import ConvergenceError, Dataset, FiniteSumProblem, make_synthetic

from oracles import finite_difference_gradient


@pytest.fixture(params=["logistic", "softmax"])
def problem(request):
    K = 2 if request.param == "logistic" else 3
    return FiniteSumProblem(make_synthetic(30, 4, seed=1, K=K), request.param, mu=0.5)


class TestDataset:
    def test_shapes(self):
        data = make_synthetic(50, 7, seed=0)
        assert (data.N, data.d) == (50, 7)
        assert set(np.unique(data.labels)) <= {0, 1}

    @pytest.mark.parametrize(
        "Z, y, K",
        [
            (np.ones((2, 2)), [0, 2], 2),
            (np.ones((2, 2)), [0], 2),
            (np.array([[np.nan, 1.0]]), [0], 2),
            (np.ones(3), [0, 1, 0], 2),
            (np.ones((2, 2)), [0.5, 1], 2),
        ],
    )
    def test_validation(self, Z, y, K):
        with pytest.raises(ValueError):
            Dataset(Z, np.asarray(y), K)

    def test_generator_deterministic(self):
        a, b = make_synthetic(20, 3, seed=5), make_synthetic(20, 3, seed=5)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_label_noise_rate(self):
        clean = make_synthetic(20000, 5, seed=2, noise=0.0)
        noisy = make_synthetic(20000, 5, seed=2, noise=0.05)
        assert np.mean(clean.labels != noisy.labels) == pytest.approx(0.05, abs=0.01)


class TestGradients:
    def test_full_gradient_is_sum(self, problem):
        x = np.random.default_rng(0).standard_normal(problem.D)
        np.testing.assert_allclose(
            problem.per_example_gradients(x).sum(axis=0), problem.full_gradient(x), atol=1e-12
        )

    def test_finite_differences(self, problem):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(problem.D)
        for i in (0, 7, 29):
            fd = finite_difference_gradient(lambda v: problem.per_example_losses(v)[i], x)
            np.testing.assert_allclose(problem.per_example_gradient(x, i), fd, atol=1e-8)
        fd = finite_difference_gradient(problem.full_loss, x)
        np.testing.assert_allclose(problem.full_gradient(x), fd, atol=1e-7)

    def test_rows_subset(self, problem):
        x = np.full(problem.D, 0.1)
        rows = np.array([3, 1, 3])
        np.testing.assert_allclose(problem.per_example_gradients(x, rows), problem.per_example_gradients(x)[rows])

    def test_large_margins_stable(self):
        data = Dataset(np.array([[1e3], [-1e3]]), np.array([1, 0]))
        prob = FiniteSumProblem(data, "logistic", mu=0.0)
        assert np.all(np.isfinite(prob.per_example_losses(np.array([50.0]))))
        assert np.all(np.isfinite(prob.per_example_gradients(np.array([-50.0]))))

    def test_index_out_of_range(self, problem):
        with pytest.raises(IndexError):
            problem.per_example_gradient(np.zeros(problem.D), problem.N)

    def test_logistic_needs_binary(self):
        with pytest.raises(ValueError):
            FiniteSumProblem(make_synthetic(10, 2, K=3), "logistic")


class TestSmoothness:
    def test_bounds_hessian(self, problem):
        # per-component Hessian spectral norm never exceeds L_i
        rng = np.random.default_rng(2)
        L = problem.smoothness_constants()
        h = 1e-5
        for i in (0, 11):
            for _ in range(3):
                x = rng.standard_normal(problem.D) * 0.3
                H = np.empty((problem.D, problem.D))
                for k in range(problem.D):
                    e = np.zeros(problem.D)
                    e[k] = h
                    H[:, k] = (problem.per_example_gradient(x + e, i) - problem.per_example_gradient(x - e, i)) / (2 * h)
                assert np.linalg.norm((H + H.T) / 2, 2) <= L[i] * (1 + 1e-5)

    def test_logistic_constant_attained_at_zero(self):
        # at x = 0 the logistic curvature is exactly 1/4 along z_i
        data = Dataset(np.array([[3.0, 4.0]]), np.array([1]))
        prob = FiniteSumProblem(data, "logistic", mu=1.0)
        assert prob.per_example_smoothness(0) == pytest.approx(25 / 4 + 1)

    def test_convexity_probe(self, problem):
        rng = np.random.default_rng(3)
        f = problem.full_loss
        for _ in range(50):
            x, y = rng.standard_normal((2, problem.D)) * 2
            lam = rng.random()
            assert f(lam * x + (1 - lam) * y) <= lam * f(x) + (1 - lam) * f(y) + 1e-10


class TestMinimizer:
    def test_one_dimensional_root(self):
        # single example, scalar parameter: grad = z (sigmoid(z x) - y) + mu x
        z, y, mu = 1.7, 1, 0.3
        prob = FiniteSumProblem(Dataset(np.array([[z]]), np.array([y])), "logistic", mu)
        root = brentq(lambda x: z * (1 / (1 + np.exp(-z * x)) - y) + mu * x, -50, 50, xtol=1e-15)
        assert prob.solve_minimizer(1e-12)[0] == pytest.approx(root, abs=1e-10)

    def test_matches_scipy(self, problem):
        x = problem.solve_minimizer(1e-10)
        res = minimize(problem.full_loss, np.zeros(problem.D), jac=problem.full_gradient,
                       method="L-BFGS-B", options={"gtol": 1e-12, "ftol": 1e-15, "maxiter": 10000})
        assert problem.full_loss(x) <= res.fun + 1e-12
        np.testing.assert_allclose(x, res.x, atol=1e-5)
        assert np.linalg.norm(problem.full_gradient(x)) <= 1e-10

    def test_no_convergence_raises(self, problem):
        with pytest.raises(ConvergenceError):
            problem.solve_minimizer(1e-14, max_iter=3)

    def test_requires_mu(self):
        prob = FiniteSumProblem(make_synthetic(5, 2), "logistic", mu=0.0)
        with pytest.raises(ValueError):
            prob.solve_minimizer()
