"""Importance-weighted gradient estimators and exact moment enumeration.

Gradients are rows of 2-d arrays (one row per sampled index, in draw order).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "single_estimate",
    "minibatch_wr_estimate",
    "minibatch_wor_estimate",
    "wor_stage_estimates",
    "enumerate_wor",
    "enumerate_moments",
    "MomentReport",
    "wr_trace_variance",
    "wor_trace_variance",
]


def single_estimate(g, p):
    """Unbiased single-draw estimate ``g_I / p_I``."""
    if not p > 0:
        raise ValueError(f"sampling probability must be positive, got {p!r}")
    return np.asarray(g, dtype=np.float64) / p


def minibatch_wr_estimate(grads, probs):
    """Mean of single-draw estimates over ``m`` independent draws."""
    grads = np.atleast_2d(np.asarray(grads, dtype=np.float64))
    probs = np.atleast_1d(np.asarray(probs, dtype=np.float64))
    if probs.size == 0:
        raise ValueError("empty batch")
    if probs.size != grads.shape[0]:
        raise ValueError("one probability per gradient row required")
    if np.any(probs <= 0):
        raise ValueError("sampling probabilities must be positive")
    return (grads / probs[:, None]).mean(axis=0)


def _check_wor(grads, q, indices):
    grads = np.atleast_2d(np.asarray(grads, dtype=np.float64))
    q = np.atleast_1d(np.asarray(q, dtype=np.float64))
    if q.size == 0:
        raise ValueError("empty batch")
    if q.size != grads.shape[0]:
        raise ValueError("one conditional weight per gradient row required")
    # the last draw's weight can exceed 1 by rounding in 1 - sum(p_taken)
    if np.any(q <= 0) or np.any(q > 1 + 1e-9):
        raise ValueError("conditional weights must lie in (0, 1]")
    if indices is not None and len(set(np.asarray(indices).tolist())) != len(indices):
        raise ValueError("duplicate indices in a without-replacement batch")
    return grads, q


def wor_stage_estimates(grads, q, indices=None):
    """Per-draw estimates ``g_{I_j}/q_j + sum_{k<j} g_{I_k}`` (one row per j)."""
    grads, q = _check_wor(grads, q, indices)
    before = np.cumsum(grads, axis=0) - grads
    return grads / q[:, None] + before


def minibatch_wor_estimate(grads, q, indices=None):
    """Unbiased without-replacement minibatch estimate.

    ``q[j]`` is the conditional probability of the j-th drawn index given the
    earlier draws, as recorded by the sampler.
    """
    return wor_stage_estimates(grads, q, indices).mean(axis=0)


def enumerate_wor(p, m):
    """All ordered m-tuples of distinct indices with their sequential law.

    Yields ``(tuple, probability, q)`` where ``q`` holds the conditional
    probabilities of each draw. Tuples of probability zero are skipped.
    """
    p = np.asarray(p, dtype=np.float64)
    n = p.size
    for tup in itertools.permutations(range(n), m):
        prob = 1.0
        q = np.empty(m)
        live = np.ones(n, dtype=bool)
        for j, i in enumerate(tup):
            rest = p[live].sum()
            if rest <= 0 or p[i] <= 0:
                prob = 0.0
                break
            q[j] = min(p[i] / rest, 1.0)
            prob *= q[j]
            live[i] = False
        if prob > 0:
            yield tup, prob, q


@dataclass
class MomentReport:
    mean: np.ndarray
    trace_var: float
    stage_vars: np.ndarray
    cross_term: float
    recursion_residual: float


def enumerate_moments(g, p, m, max_n=6):
    """Exact moments of the without-replacement estimator by enumeration.

    Parameters
    ----------
    g : (N, d) array
        Per-index gradients.
    p : (N,) array
        First-draw distribution.
    m : int
        Batch size.
    max_n : int
        Guard against factorial blow-up.

    Returns
    -------
    MomentReport
        ``mean`` and ``trace_var`` of the batch estimate, the per-stage
        variances ``E||g_j - g||^2``, the total of the pairwise cross terms
        (zero when the variance decomposes over stages), and the largest
        violation of the stage recursion
        ``E[V_{j+1} | S_{j-1}] = (1 - E q_j) V_j - E[q_j ||g_j - g||^2]``.
    """
    g = np.atleast_2d(np.asarray(g, dtype=np.float64))
    p = np.asarray(p, dtype=np.float64)
    n = g.shape[0]
    if n > max_n:
        raise ValueError(f"N={n} exceeds the enumeration cap {max_n}")
    if not 1 <= m <= n:
        raise ValueError("batch size must lie in [1, N]")
    total = g.sum(axis=0)

    tuples, probs, stages = [], [], []
    for tup, prob, q in enumerate_wor(p, m):
        tuples.append(tup)
        probs.append(prob)
        stages.append(wor_stage_estimates(g[list(tup)], q))
    probs = np.array(probs)
    stages = np.array(stages)  # (K, m, d)
    dev = stages - total
    batch = stages.mean(axis=1)

    mean = probs @ batch
    trace_var = float(probs @ np.sum((batch - total) ** 2, axis=1))
    sq = np.sum(dev**2, axis=2)  # (K, m)
    stage_vars = probs @ sq
    cross = 0.0
    for j in range(m):
        for k in range(j + 1, m):
            cross += 2.0 * float(probs @ np.sum(dev[:, j] * dev[:, k], axis=1))

    residual = 0.0
    for j in range(m - 1):
        # condition on the first j draws (stage index j is the (j+1)-th draw)
        groups = {}
        for row, tup in enumerate(tuples):
            groups.setdefault(tup[:j], []).append(row)
        for rows in groups.values():
            w = probs[rows]
            w = w / w.sum()
            qj = np.array([_q_at(p, tuples[r], j) for r in rows])
            vj = w @ sq[rows, j]
            lhs = w @ sq[rows, j + 1]
            rhs = (1.0 - w @ qj) * vj - w @ (qj * sq[rows, j])
            residual = max(residual, abs(lhs - rhs) / max(1.0, abs(vj)))
    return MomentReport(mean, trace_var, stage_vars, cross, residual)


def _q_at(p, tup, j):
    live = np.ones(p.size, dtype=bool)
    live[list(tup[:j])] = False
    return min(p[tup[j]] / p[live].sum(), 1.0)


_PERMS = {}


def _perms(n, m):
    if (n, m) not in _PERMS:
        _PERMS[n, m] = np.array(list(itertools.permutations(range(n), m)), dtype=np.intp).reshape(-1, m)
    return _PERMS[n, m]


def wor_trace_variance(g, p, m, max_n=8):
    """Exact ``E||g_b - sum g||^2`` of the without-replacement estimator.

    Vectorized enumeration over all ordered m-tuples; use
    :func:`enumerate_moments` for the full stage-wise report.
    """
    g = np.atleast_2d(np.asarray(g, dtype=np.float64))
    p = np.asarray(p, dtype=np.float64)
    n = g.shape[0]
    if n > max_n:
        raise ValueError(f"N={n} exceeds the enumeration cap {max_n}")
    if not 1 <= m <= n:
        raise ValueError("batch size must lie in [1, N]")
    tups = _perms(n, m)
    P = p[tups]
    before = np.cumsum(P, axis=1) - P
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.minimum(P / (p.sum() - before), 1.0)
    prob = np.prod(q, axis=1)
    keep = prob > 0
    q, prob, G = q[keep], prob[keep], g[tups[keep]]  # (K, m, d)
    stages = G / q[:, :, None] + (np.cumsum(G, axis=1) - G)
    dev = stages.mean(axis=1) - g.sum(axis=0)
    return float(prob @ np.sum(dev * dev, axis=1))


def wr_trace_variance(g, p, m=1):
    """Trace variance of the with-replacement mean: (sum ||g_i||^2/p_i - ||sum g||^2)/m."""
    g = np.atleast_2d(np.asarray(g, dtype=np.float64))
    p = np.asarray(p, dtype=np.float64)
    sq = np.sum(g**2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(sq > 0, sq / p, 0.0)
    return float((terms.sum() - np.sum(g.sum(axis=0) ** 2)) / m)
