"""Variance-minimizing distributions over the restricted simplex.

The problem solved here is

    min  sum_i a_i**2 / p_i    subject to  p_i >= eps,  sum_i p_i = 1

for non-negative weights ``a`` and ``eps`` in ``[0, 1/N]``. The solution has a
closed form: the ``rho`` largest weights get ``p_i = a_i / lam`` and every other
index is pinned to ``eps``.

Indices are 0-based throughout the package.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SimplexSolution",
    "check_weights",
    "check_eps",
    "decreasing_order",
    "objective",
    "solve_restricted",
    "solve_restricted_reference",
    "verify_kkt",
    "optimal_cost_full_simplex",
    "restriction_gap_bound",
]


@dataclass(frozen=True)
class SimplexSolution:
    """Closed-form minimizer over the eps-restricted simplex.

    ``lam`` is 0.0 only for the all-zero weight vector, in which case ``p`` is
    uniform and ``degenerate`` is set.
    """

    rho: int
    lam: float
    p: np.ndarray
    eps: float
    degenerate: bool = False


def check_weights(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("weights must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(a)):
        raise ValueError("weights must be finite")
    if np.any(a < 0):
        raise ValueError("weights must be non-negative")
    return a


def check_eps(eps: float, n: int) -> float:
    eps = float(eps)
    # eps above 1/N is a caller bug, never clamped
    if not (0.0 <= eps <= 1.0 / n) or not np.isfinite(eps):
        raise ValueError(f"eps={eps!r} outside [0, 1/N] for N={n}")
    return eps


def decreasing_order(a: np.ndarray) -> np.ndarray:
    """Permutation sorting ``a`` decreasingly, ties by ascending index."""
    return np.argsort(-a, kind="stable")


def objective(a, p) -> float:
    """sum a_i**2 / p_i with the convention 0/0 = 0."""
    a = np.asarray(a, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    a2 = a * a
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(a2 > 0, a2 / p, 0.0)
    return float(terms.sum())


def _uniform_solution(n: int, eps: float) -> SimplexSolution:
    return SimplexSolution(n, 0.0, np.full(n, 1.0 / n), eps, degenerate=True)


def solve_restricted(a, eps: float) -> SimplexSolution:
    """Exact minimizer of ``sum a_i**2/p_i`` over ``{p >= eps, sum p = 1}``.

    Vectorized: one sort, one cumulative sum, one comparison pass.
    """
    a = check_weights(a)
    n = a.size
    eps = check_eps(eps, n)
    if not np.any(a > 0):
        return _uniform_solution(n, eps)

    order = decreasing_order(a)
    srt = a[order]
    csum = np.cumsum(srt)
    ranks = np.arange(1, n + 1)
    denom = 1.0 - (n - ranks) * eps
    ok = denom * srt >= eps * csum
    rho = int(np.flatnonzero(ok)[-1]) + 1
    lam = float(csum[rho - 1] / (1.0 - (n - rho) * eps))

    p = np.full(n, eps)
    head = order[:rho]
    p[head] = a[head] / lam
    return SimplexSolution(rho, lam, p, eps)


def solve_restricted_reference(a, eps: float) -> SimplexSolution:
    """Naive sort-and-scan version of :func:`solve_restricted`.

    Loops in plain Python so that it shares no vectorized code path with the
    fast solver or the tree sampler.
    """
    a = check_weights(a)
    n = a.size
    eps = check_eps(eps, n)
    vals = [float(v) for v in a]
    if all(v == 0.0 for v in vals):
        return _uniform_solution(n, eps)

    order = sorted(range(n), key=lambda i: (-vals[i], i))
    rho = 0
    running = 0.0
    head_sum = 0.0
    for r, i in enumerate(order, start=1):
        running += vals[i]
        if (1.0 - (n - r) * eps) * vals[i] >= eps * running:
            rho = r
            head_sum = running
    lam = head_sum / (1.0 - (n - rho) * eps)

    p = np.empty(n)
    for r, i in enumerate(order, start=1):
        p[i] = vals[i] / lam if r <= rho else eps
    return SimplexSolution(rho, lam, p, eps)


def verify_kkt(a, eps: float, sol: SimplexSolution, tol: float = 1e-9) -> bool:
    """Check the KKT certificate for ``sol``.

    Multipliers: ``nu = lam**2``; ``mu_i = 0`` on the head and
    ``nu - a_i**2/eps**2`` on the tail. Stationarity is checked in the form
    ``p_i * sqrt(nu - mu_i) == a_i`` so zero weights need no special casing.
    """
    a = np.asarray(a, dtype=np.float64)
    p = np.asarray(sol.p, dtype=np.float64)
    n = a.size
    if p.shape != a.shape:
        return False

    nu = sol.lam**2
    order = decreasing_order(a)
    in_head = np.zeros(n, dtype=bool)
    in_head[order[: sol.rho]] = True
    mu = np.zeros(n)
    tail = ~in_head
    if np.any(tail):
        if eps <= 0:
            return False
        mu[tail] = nu - a[tail] ** 2 / eps**2

    scale = max(1.0, float(a.max()) if n else 1.0, sol.lam)
    stationary = np.abs(p * np.sqrt(np.maximum(nu - mu, 0.0)) - a) <= tol * scale
    slack = np.abs(mu * (p - eps)) <= tol * max(1.0, nu)
    primal = bool(np.all(p >= eps - tol)) and abs(p.sum() - 1.0) <= tol
    dual = bool(np.all(mu >= -tol * max(1.0, nu)))
    return bool(np.all(stationary) and np.all(slack) and primal and dual)


def optimal_cost_full_simplex(a) -> float:
    """Minimum of ``sum a_i**2/p_i`` over the whole simplex: ``(sum a)**2``."""
    a = np.asarray(a, dtype=np.float64)
    if np.any(a < 0):
        raise ValueError("weights must be non-negative")
    return float(a.sum()) ** 2


def restriction_gap_bound(a, eps: float) -> float:
    """Upper bound ``6 eps N (sum a)**2`` on the cost of restricting the simplex.

    Only valid for ``eps <= 1/(2N)``.
    """
    a = check_weights(a)
    n = a.size
    if not (0.0 <= eps <= 1.0 / (2 * n)):
        raise ValueError(f"eps={eps!r} outside [0, 1/(2N)]; bound does not hold")
    return 6.0 * eps * n * float(a.sum()) ** 2
