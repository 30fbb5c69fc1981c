"""Sampling costs, dynamic regret, and summary ratios.

The cost of a distribution ``p`` against gradient norms ``a`` is the trace of
the importance-sampling estimator's covariance without its constant
``-||sum g_i||^2`` term: ``sum a_i**2 / p_i``. The per-step optimum over the
simplex is ``(sum a_i)**2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .simplex import optimal_cost_full_simplex

__all__ = [
    "RunRecord",
    "InfiniteCostError",
    "cost",
    "optimal_cost",
    "dynamic_regret",
    "relative_error",
    "table1_ratios",
    "loglog_slope",
    "regret_slope",
]

TRACE_COLUMNS = ("t", "alpha", "eps", "cost", "opt_cost", "cum_regret", "subopt", "rel_err", "dx_norm")


class InfiniteCostError(ValueError):
    """A positive-norm index was given zero probability."""


@dataclass
class RunRecord:
    """Per-step trace of one run.

    Cost-related columns are NaN when the run was made in cheap metrics mode.
    """

    t: np.ndarray
    alpha: np.ndarray
    eps: np.ndarray
    cost: np.ndarray
    opt_cost: np.ndarray
    cum_regret: np.ndarray
    subopt: np.ndarray
    rel_err: np.ndarray
    dx_norm: np.ndarray
    indices: list = field(default_factory=list)
    seed: int = 0
    sampler: str = ""
    metrics: str = "cheap"
    N: int = 0
    m: int = 1
    digest: str = ""
    wall_time: float = 0.0
    final_x: np.ndarray | None = None
    final_h: np.ndarray | None = None
    iterates: np.ndarray | None = None

    @property
    def T(self):
        return len(self.t)

    @property
    def data_passes(self):
        return self.t * self.m / self.N

    def columns(self):
        return {name: getattr(self, name) for name in TRACE_COLUMNS}


def cost(p, norms) -> float:
    p = np.asarray(p, dtype=np.float64)
    a = np.asarray(norms, dtype=np.float64)
    a2 = a * a
    if np.any((p <= 0) & (a2 > 0)):
        raise InfiniteCostError("zero probability on an index with a non-zero gradient")
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.where(a2 > 0, a2 / p, 0.0).sum())


def optimal_cost(norms) -> float:
    return optimal_cost_full_simplex(norms)


def _require_full(record):
    if record.metrics != "full":
        raise ValueError("record was made in cheap metrics mode; costs are unavailable")


def dynamic_regret(record: RunRecord) -> np.ndarray:
    """Running sum of ``cost - opt_cost``."""
    _require_full(record)
    return np.cumsum(record.cost - record.opt_cost)


def relative_error(record: RunRecord) -> np.ndarray:
    """``(cost - opt)/opt`` per step; NaN where the optimum is zero."""
    _require_full(record)
    opt = record.opt_cost
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(opt > 0, (record.cost - opt) / opt, np.nan)


def table1_ratios(problem, x_star=None, tol=1e-10):
    """``(N max L_i / sum L_i, N sum ||g_i*||^2 / (sum ||g_i*||)^2)``."""
    L = problem.smoothness_constants()
    n = L.size
    smooth = n * float(L.max()) / float(L.sum())
    if x_star is None:
        x_star = problem.solve_minimizer(tol)
    g = np.linalg.norm(problem.per_example_gradients(x_star), axis=1)
    s = float(g.sum())
    var = n * float(np.sum(g * g)) / (s * s) if s > 0 else 1.0
    return smooth, var


def loglog_slope(t, y, burn_in=0.0, min_points=2):
    """Least-squares fit ``log y = log A + slope log t`` over ``t > burn_in * t_max``.

    Returns ``(A, slope)``.
    """
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    keep = (t > burn_in * t.max()) & (y > 0) & np.isfinite(y)
    if keep.sum() < min_points:
        raise ValueError(f"need at least {min_points} positive points after burn-in, got {keep.sum()}")
    slope, intercept = np.polyfit(np.log(t[keep]), np.log(y[keep]), 1)
    return float(np.exp(intercept)), float(slope)


def regret_slope(record_or_regret, burn_in=0.2, t=None):
    """Log-log growth exponent of cumulative regret after burn-in.

    Accepts a :class:`RunRecord` or an already averaged regret curve (then
    ``t`` defaults to ``1..T``). Returns NaN when the regret is identically
    zero (slope undefined).
    """
    if isinstance(record_or_regret, RunRecord):
        regret = dynamic_regret(record_or_regret)
        t = record_or_regret.t
    else:
        regret = np.asarray(record_or_regret, dtype=np.float64)
        t = np.arange(1, regret.size + 1) if t is None else np.asarray(t)
    if np.all(np.abs(regret) <= 0):
        return float("nan")
    return loglog_slope(t, regret, burn_in, min_points=100)[1]
