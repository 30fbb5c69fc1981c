"""Finite-sum problems: l2-regularized logistic and softmax regression.

Component functions are scaled so that the objective is the plain sum
``f(x) = sum_i f_i(x)`` with

    f_i(x) = (phi_i(x) + mu/2 ||x||^2) / N

where ``phi_i`` is the per-example loss. Then ``f`` is the mean loss plus the
ridge penalty and ``N * grad f_i`` is the usual per-example stochastic
gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit, logsumexp, softmax

__all__ = ["Dataset", "FiniteSumProblem", "make_synthetic", "ConvergenceError"]


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    K: int = 2

    def __post_init__(self):
        z = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 1:
            raise ValueError("features must be an N x d matrix with N, d >= 1")
        if not np.all(np.isfinite(z)):
            raise ValueError("features contain NaN or inf")
        if y.shape != (z.shape[0],):
            raise ValueError("need exactly one label per row")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(y == np.round(y)):
                raise ValueError("labels must be integers")
            y = y.astype(np.int64)
        if self.K < 2 or y.min() < 0 or y.max() >= self.K:
            raise ValueError(f"labels must lie in [0, {self.K})")
        object.__setattr__(self, "features", z)
        object.__setattr__(self, "labels", y.astype(np.int64))

    @property
    def N(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]


class FiniteSumProblem:
    """Regularized linear classifier as a sum of N component functions.

    Parameters
    ----------
    data : Dataset
    kind : {"logistic", "softmax"}
        Logistic needs ``K == 2``; its parameter has dimension ``d``. Softmax
        parameters are a flattened ``K x d`` weight matrix (no bias).
    mu : float
        Ridge coefficient, ``>= 0``.
    """

    def __init__(self, data: Dataset, kind="logistic", mu=1.0):
        if kind not in ("logistic", "softmax"):
            raise ValueError(f"unknown model kind {kind!r}")
        if kind == "logistic" and data.K != 2:
            raise ValueError("logistic model needs binary labels")
        if mu < 0:
            raise ValueError("mu must be non-negative")
        self.data = data
        self.kind = kind
        self.mu = float(mu)
        self.Z = data.features
        self.y = data.labels
        self.N, self.d = self.Z.shape
        self.K = data.K
        self.D = self.d if kind == "logistic" else self.K * self.d
        self._onehot = np.eye(self.K)[self.y] if kind == "softmax" else None

    # -- losses ----------------------------------------------------------
    def _margins(self, x):
        if self.kind == "logistic":
            return self.Z @ x
        return self.Z @ x.reshape(self.K, self.d).T  # (N, K)

    def per_example_losses(self, x):
        x = np.asarray(x, dtype=np.float64)
        s = self._margins(x)
        if self.kind == "logistic":
            # log(1 + e^s) - y s
            phi = np.where(self.y == 1, -log_expit(s), -log_expit(-s))
        else:
            phi = logsumexp(s, axis=1) - s[np.arange(self.N), self.y]
        return (phi + 0.5 * self.mu * (x @ x)) / self.N

    def full_loss(self, x):
        return float(self.per_example_losses(x).sum())

    # -- gradients -------------------------------------------------------
    def _residuals(self, s, rows=None):
        if self.kind == "logistic":
            y = self.y if rows is None else self.y[rows]
            return expit(s) - y
        oh = self._onehot if rows is None else self._onehot[rows]
        return softmax(s, axis=-1) - oh

    def per_example_gradients(self, x, rows=None):
        """Gradients of ``f_i`` as rows; all N rows unless ``rows`` is given."""
        x = np.asarray(x, dtype=np.float64)
        Z = self.Z if rows is None else self.Z[rows]
        if self.kind == "logistic":
            r = self._residuals(Z @ x, rows)
            G = r[:, None] * Z
        else:
            W = x.reshape(self.K, self.d)
            r = self._residuals(Z @ W.T, rows)  # (n, K)
            G = (r[:, :, None] * Z[:, None, :]).reshape(Z.shape[0], self.D)
        return (G + self.mu * x) / self.N

    def per_example_gradient(self, x, i):
        if not 0 <= i < self.N:
            raise IndexError(f"index {i} out of range 0..{self.N - 1}")
        return self.per_example_gradients(x, np.array([i]))[0]

    def full_gradient(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "logistic":
            r = self._residuals(self.Z @ x)
            g = self.Z.T @ r
        else:
            r = self._residuals(self._margins(x))
            g = (r.T @ self.Z).ravel()
        return g / self.N + self.mu * x

    # -- constants -------------------------------------------------------
    def smoothness_constants(self):
        """Per-component Lipschitz constants of ``grad f_i``."""
        zz = np.sum(self.Z**2, axis=1)
        curv = 0.25 if self.kind == "logistic" else 0.5
        return (curv * zz + self.mu) / self.N

    def per_example_smoothness(self, i):
        return float(self.smoothness_constants()[i])

    # -- minimizer -------------------------------------------------------
    def solve_minimizer(self, tol=1e-8, max_iter=200_000, x0=None):
        """Accelerated full-batch gradient descent until ``||grad f|| <= tol``."""
        if self.mu <= 0:
            raise ValueError("minimizer requires mu > 0")
        L = float(self.smoothness_constants().sum())
        mu = self.mu
        kappa_root = np.sqrt(L / mu)
        momentum = (kappa_root - 1) / (kappa_root + 1)
        x = np.zeros(self.D) if x0 is None else np.array(x0, dtype=np.float64)
        y = x.copy()
        gnorm = np.inf
        for it in range(max_iter):
            g = self.full_gradient(y)
            x_new = y - g / L
            y = x_new + momentum * (x_new - x)
            x = x_new
            gnorm = float(np.linalg.norm(self.full_gradient(x)))
            if gnorm <= tol:
                return x
        raise ConvergenceError(
            f"no convergence after {max_iter} iterations: ||grad f|| = {gnorm:.3e} > {tol:.1e}"
        )


def make_synthetic(N, d, seed=0, K=2, noise=0.05):
    """Gaussian features labelled by a random linear teacher.

    Features and teacher weights are standard normal; a fraction ``noise``
    of labels is replaced by a uniformly drawn different class.
    """
    if N < 1 or d < 1:
        raise ValueError("N and d must be >= 1")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((N, d))
    if K == 2:
        w = rng.standard_normal(d)
        y = (Z @ w > 0).astype(np.int64)
    else:
        W = rng.standard_normal((K, d))
        y = np.argmax(Z @ W.T, axis=1)
    flip = rng.random(N) < noise
    shift = rng.integers(1, K, size=N)
    y = np.where(flip, (y + shift) % K, y)
    return Dataset(Z, y, K)
