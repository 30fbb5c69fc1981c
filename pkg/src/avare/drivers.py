"""SGD / SGLD loops with pluggable importance samplers and estimators."""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass

import numpy as np

from . import estimators
from .metrics import RunRecord, cost, loglog_slope
from .rng import NOISE_STREAM, SAMPLER_STREAM, make_rng
from .sampler import WeightTable, _draw_from, sequential_wor
from .schedules import EpsilonSchedule, StepSchedule

__all__ = [
    "DivergenceError",
    "RunConfig",
    "UniformSampler",
    "OracleSampler",
    "AvareSampler",
    "make_sampler",
    "register_sampler",
    "list_samplers",
    "estimate_gradient",
    "run",
    "frozen_gradient_run",
    "contraction_diagnostic",
]

ESTIMATORS = ("single", "minibatch_wr", "minibatch_wor")
DIVERGENCE_NORM = 1e12


class DivergenceError(RuntimeError):
    def __init__(self, t, msg):
        super().__init__(f"step {t}: {msg}")
        self.t = t


# -- samplers -------------------------------------------------------------


class UniformSampler:
    name = "uniform"
    needs_norms = False

    def __init__(self, N):
        self.N = N

    def probabilities(self, eps=None):
        return np.full(self.N, 1.0 / self.N)

    def draw(self, eps, rng, count=1):
        idx = rng.integers(self.N, size=count)
        return idx, np.full(count, 1.0 / self.N)

    def draw_wor(self, eps, m, rng):
        idx = rng.choice(self.N, size=m, replace=False)
        return idx, 1.0 / (self.N - np.arange(m))

    def observe(self, indices, norms):
        pass


class OracleSampler:
    """Samples from ``||g_i|| / sum ||g_j||`` using the current true norms."""

    name = "oracle"
    needs_norms = True

    def __init__(self, N):
        self.N = N
        self.p = None

    def set_norms(self, norms):
        s = norms.sum()
        self.p = norms / s if s > 0 else np.full(self.N, 1.0 / self.N)

    def probabilities(self, eps=None):
        if self.p is None:
            raise ValueError("oracle sampler needs the current gradient norms (full metrics mode)")
        return self.p

    def draw(self, eps, rng, count=1):
        p = self.probabilities()
        idx = np.array([_draw_from(p, rng) for _ in range(count)], dtype=np.intp)
        return idx, p[idx]

    def draw_wor(self, eps, m, rng):
        return sequential_wor(self.probabilities(), m, rng)

    def observe(self, indices, norms):
        pass


class AvareSampler:
    """Restricted-simplex optimal sampling on last-seen norms."""

    name = "avare"
    needs_norms = False

    def __init__(self, N, h_init=0.0, **table_kwargs):
        h = np.broadcast_to(np.asarray(h_init, dtype=np.float64), (N,))
        self.N = N
        self.table = WeightTable(h, **table_kwargs)

    def probabilities(self, eps):
        return self.table.probabilities(eps)

    def draw(self, eps, rng, count=1):
        rl = self.table.find_rho(eps)
        idx = np.empty(count, dtype=np.intp)
        p = np.empty(count)
        for k in range(count):
            idx[k], p[k] = self.table.draw(eps, rng, rl)
        return idx, p

    def draw_wor(self, eps, m, rng):
        return self.table.sample_without_replacement(eps, m, rng)

    def observe(self, indices, norms):
        for i, a in zip(indices, norms):
            self.table.update(i, a)


SAMPLER_REGISTRY = {
    "avare": lambda N, h_init: AvareSampler(N, h_init),
    "uniform": lambda N, h_init: UniformSampler(N),
    "oracle": lambda N, h_init: OracleSampler(N),
}


def register_sampler(kind, factory):
    """Add a sampler kind; ``factory(N, h_init)`` must return a sampler object."""
    if kind in SAMPLER_REGISTRY:
        raise ValueError(f"sampler {kind!r} already registered")
    SAMPLER_REGISTRY[kind] = factory


def list_samplers():
    return sorted(SAMPLER_REGISTRY)


def make_sampler(kind, N, h_init=0.0):
    try:
        factory = SAMPLER_REGISTRY[kind]
    except KeyError:
        raise ValueError(f"unknown sampler {kind!r}; known: {', '.join(list_samplers())}") from None
    return factory(N, h_init)


# -- configuration --------------------------------------------------------


@dataclass
class RunConfig:
    """One SGD/SGLD run. ``epsilon`` is required for the avare sampler."""

    sampler: str = "avare"
    estimator: str = "single"
    m: int = 1
    T: int = 1000
    epsilon: EpsilonSchedule | None = None
    step: StepSchedule | None = None
    seed: int = 0
    metrics: str = "cheap"
    algorithm: str = "sgd"
    h_init: float = 0.0
    stream: int = 0
    x0: np.ndarray | None = None
    f_star: float | None = None
    keep_iterates: bool = False

    def validate(self, N):
        if self.sampler not in SAMPLER_REGISTRY:
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.algorithm not in ("sgd", "sgld"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.metrics not in ("cheap", "full"):
            raise ValueError(f"unknown metrics mode {self.metrics!r}")
        if self.estimator == "single" and self.m != 1:
            raise ValueError("the single estimator uses m = 1")
        if not 1 <= self.m <= N:
            raise ValueError(f"batch size must lie in [1, N={N}]")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.step is None:
            raise ValueError("a step schedule is required")
        if self.sampler == "avare":
            if self.epsilon is None:
                raise ValueError("avare sampler needs an epsilon schedule")
            if self.epsilon.N != N:
                raise ValueError(f"epsilon schedule built for N={self.epsilon.N}, problem has N={N}")
        if self.sampler == "oracle" and self.metrics != "full":
            raise ValueError("oracle sampler requires full metrics mode")

    def digest(self):
        blob = {
            k: v for k, v in self.__dict__.items() if k not in ("x0", "keep_iterates")
        }
        blob["epsilon"] = None if self.epsilon is None else self.epsilon.__dict__
        blob["step"] = None if self.step is None else self.step.__dict__
        blob["x0"] = None if self.x0 is None else np.asarray(self.x0).tolist()
        text = json.dumps(blob, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# -- one step -------------------------------------------------------------


def estimate_gradient(problem, x, sampler, estimator, eps, m, rng, grads=None):
    """Draw a batch and form the gradient estimate.

    Returns ``(ghat, indices, sampled_grads)``. ``grads`` may hold all N
    per-example gradients at ``x`` (full metrics mode) to avoid recomputation.
    """

    def rows(idx):
        return grads[idx] if grads is not None else problem.per_example_gradients(x, idx)

    if estimator == "single":
        idx, p = sampler.draw(eps, rng, 1)
        G = rows(idx)
        return estimators.single_estimate(G[0], p[0]), idx, G
    if estimator == "minibatch_wr":
        idx, p = sampler.draw(eps, rng, m)
        G = rows(idx)
        return estimators.minibatch_wr_estimate(G, p), idx, G
    idx, q = sampler.draw_wor(eps, m, rng)
    G = rows(idx)
    return estimators.minibatch_wor_estimate(G, q, idx), idx, G


def run(problem, config: RunConfig) -> RunRecord:
    """Run SGD or SGLD for ``config.T`` steps and return the trace."""
    N = problem.N
    config.validate(N)
    started = time.perf_counter()
    rng = make_rng(config.seed, config.stream, SAMPLER_STREAM)
    noise_rng = make_rng(config.seed, config.stream, NOISE_STREAM)
    sampler = make_sampler(config.sampler, N, config.h_init)
    full = config.metrics == "full"
    T = config.T

    x = np.zeros(problem.D) if config.x0 is None else np.array(config.x0, dtype=np.float64)
    cols = {k: np.full(T, np.nan) for k in ("alpha", "eps", "cost", "opt_cost", "subopt", "dx_norm")}
    indices = []
    iterates = [x.copy()] if config.keep_iterates else None
    f_star = config.f_star

    for t in range(1, T + 1):
        eps = config.epsilon(t) if config.epsilon is not None else None
        alpha = config.step(t)
        k = t - 1
        cols["alpha"][k] = alpha
        if eps is not None:
            cols["eps"][k] = eps

        grads = None
        if full:
            grads = problem.per_example_gradients(x)
            norms = np.linalg.norm(grads, axis=1)
            if sampler.needs_norms:
                sampler.set_norms(norms)
            cols["cost"][k] = cost(sampler.probabilities(eps), norms)
            cols["opt_cost"][k] = float(norms.sum()) ** 2

        ghat, idx, G = estimate_gradient(problem, x, sampler, config.estimator, eps, config.m, rng, grads)
        x_new = x - alpha * ghat
        if config.algorithm == "sgld":
            x_new = x_new + np.sqrt(2.0 * alpha) * noise_rng.standard_normal(problem.D)
        if not np.all(np.isfinite(x_new)) or np.linalg.norm(x_new) > DIVERGENCE_NORM:
            raise DivergenceError(t, "iterate diverged")

        sampler.observe(idx, np.linalg.norm(G, axis=1))
        cols["dx_norm"][k] = np.linalg.norm(x_new - x)
        x = x_new
        indices.append(idx)
        if iterates is not None:
            iterates.append(x.copy())
        if full and f_star is not None:
            cols["subopt"][k] = problem.full_loss(x) - f_star

    tt = np.arange(1, T + 1)
    regret = np.cumsum(cols["cost"] - cols["opt_cost"])
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(cols["opt_cost"] > 0, (cols["cost"] - cols["opt_cost"]) / cols["opt_cost"], np.nan)
    return RunRecord(
        t=tt,
        cum_regret=regret,
        rel_err=rel,
        indices=indices,
        seed=config.seed,
        sampler=config.sampler,
        metrics=config.metrics,
        N=N,
        m=config.m,
        digest=config.digest(),
        wall_time=time.perf_counter() - started,
        final_x=x,
        final_h=sampler.table.H.copy() if isinstance(sampler, AvareSampler) else None,
        iterates=np.array(iterates) if iterates is not None else None,
        **cols,
    )


def frozen_gradient_run(norms, sampler="uniform", T=1000, epsilon=None, m=1, seed=0, h_init=0.0):
    """Sampler-only control: gradient norms never change.

    Returns the per-step costs, the (constant) optimum, and cumulative regret.
    Avare observes the fixed norms of the indices it samples.
    """
    norms = np.asarray(norms, dtype=np.float64)
    N = norms.size
    smp = make_sampler(sampler, N, h_init)
    if smp.needs_norms:
        smp.set_norms(norms)
    rng = make_rng(seed, 0, SAMPLER_STREAM)
    costs = np.empty(T)
    opt = float(norms.sum()) ** 2
    for t in range(1, T + 1):
        eps = epsilon(t) if epsilon is not None else None
        costs[t - 1] = cost(smp.probabilities(eps), norms)
        idx, _ = smp.draw(eps, rng, m)
        smp.observe(idx, norms[idx])
    return costs, opt, np.cumsum(costs - opt)


def contraction_diagnostic(records, burn_in=0.1):
    """Fit ``E||x_{t+1} - x_t|| ~ A t^(-delta)`` over the seed-averaged trace.

    Accepts a list of :class:`RunRecord` (averaged over seeds) or a single
    record. Returns ``(A_hat, delta_hat)``.
    """
    if isinstance(records, RunRecord):
        records = [records]
    dx = np.mean([r.dx_norm for r in records], axis=0)
    t = records[0].t
    if np.sum(t > burn_in * t.max()) < 10:
        raise ValueError("need at least 10 points after burn-in")
    A, slope = loglog_slope(t, dx, burn_in, min_points=10)
    return A, -slope
