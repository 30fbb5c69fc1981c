"""Stateful adaptive sampler over last-seen gradient norms.

:class:`WeightTable` keeps three structures in sync:

``H``
    the norms, indexed by original (0-based) index;
``tree``
    an order-statistic tree over keys ``(-H[i], i)``, so rank 1 is the largest
    norm and ties go to the smaller index;
``CS``
    cumulative sums of the norms in tree order, ``CS[r-1] = sum of the r
    largest``.

Finding the threshold rank costs O(log^2 N) tree work, drawing an index
O(log N) plus the threshold search, and an update O(log N) tree work plus
one O(N) vectorized shift of ``CS``.
"""
from __future__ import annotations

import numpy as np

from .ostree import OrderStatisticTree
from .simplex import check_eps, check_weights

__all__ = [
    "DegenerateTableError",
    "WeightTable",
    "initialize",
    "update",
    "find_rho",
    "probabilities",
    "sample",
    "sample_without_replacement",
    "validate_full",
    "sequential_wor",
]


class DegenerateTableError(ValueError):
    """All norms are zero and eps is zero: no distribution to sample from."""


class WeightTable:
    """Norm array + order-statistic tree + cumulative sums.

    Parameters
    ----------
    norms : array_like
        Initial non-negative, finite norms.
    reanchor_every : int or None
        Rebuild ``CS`` from scratch after this many updates to cap rounding
        drift. ``None`` disables re-anchoring.
    tree_seed : int
        Seed for the treap priorities.
    """

    def __init__(self, norms, reanchor_every=2**16, tree_seed=0):
        h = check_weights(norms).copy()
        self.N = h.size
        self.H = h
        self.tree = OrderStatisticTree(
            (((-float(h[i]), i), i) for i in range(self.N)), seed=tree_seed
        )
        self.CS = np.empty(self.N)
        self.reanchor_every = reanchor_every
        self.updates = 0
        self.bulk_work = 0
        self._rebuild_cs()

    def _rebuild_cs(self):
        order = np.lexsort((np.arange(self.N), -self.H))
        np.cumsum(self.H[order], out=self.CS)

    @property
    def total(self):
        return float(self.CS[-1])

    def rank_of(self, i):
        return self.tree.rank((-float(self.H[i]), i))

    def order(self):
        """Original indices in tree (decreasing-norm) order."""
        return np.array([node.value for node in self.tree.inorder()], dtype=np.intp)

    # -- mutation --------------------------------------------------------
    def _delete(self, i):
        x = self.H[i]
        key = (-float(x), i)
        r = self.tree.rank(key)
        self.tree.delete(key)
        n = self.N
        # ranks r+1..N move up by one and lose x
        self.CS[r - 1 : n - 1] = self.CS[r:n] - x
        self.bulk_work += n - r

    def _insert(self, i, y):
        key = (-y, i)
        self.tree.insert(key, i)
        r = self.tree.rank(key)
        n = self.N
        # ranks r..N-1 move down by one and gain y; slot r is re-derived
        self.CS[r:n] = self.CS[r - 1 : n - 1] + y
        self.CS[r - 1] = (self.CS[r - 2] if r > 1 else 0.0) + y
        self.bulk_work += n - r + 1

    def update(self, i, new_norm):
        i = int(i)
        if not 0 <= i < self.N:
            raise IndexError(f"index {i} out of range 0..{self.N - 1}")
        y = float(new_norm)
        if not np.isfinite(y) or y < 0:
            raise ValueError(f"norm must be finite and non-negative, got {new_norm!r}")
        self._delete(i)
        self.H[i] = y
        self._insert(i, y)
        self.updates += 1
        if self.reanchor_every and self.updates % self.reanchor_every == 0:
            self._rebuild_cs()

    # -- threshold search ------------------------------------------------
    def _holds(self, r, key_value, eps):
        # threshold inequality at rank r, in multiplied-out form
        return (1.0 - (self.N - r) * eps) * key_value >= eps * self.CS[r - 1]

    def find_rho(self, eps):
        """Threshold rank and normalizer for ``eps``.

        Returns ``(rho, lam)``. ``lam`` is 0.0 when every norm is zero (the
        distribution is then uniform).
        """
        n = self.N
        eps = check_eps(eps, n)
        if self.CS[-1] <= 0.0:
            if eps == 0.0:
                raise DegenerateTableError("all norms are zero and eps == 0")
            return n, 0.0
        tree = self.tree
        node, offset, lo = tree.root, 0, 0
        while node is not None:
            tree.visits += 1
            r = offset + (node.left.size if node.left is not None else 0) + 1
            if not self._holds(r, -node.key[0], eps):
                node = node.left
                continue
            if r == n:
                lo = n
                break
            nxt = tree.select(r + 1)
            if not self._holds(r + 1, -nxt.key[0], eps):
                lo = r
                break
            lo = r + 1
            offset = r
            node = node.right
        rho = max(lo, 1)
        lam = float(self.CS[rho - 1] / (1.0 - (n - rho) * eps))
        return rho, lam

    def probabilities(self, eps):
        """Explicit distribution in original index order (O(N))."""
        rho, lam = self.find_rho(eps)
        if lam == 0.0:
            return np.full(self.N, 1.0 / self.N)
        cut = self.tree.select(rho).key
        h = self.H
        idx = np.arange(self.N)
        head = (-h < cut[0]) | ((-h == cut[0]) & (idx <= cut[1]))
        return np.where(head, h / lam, eps)

    # -- sampling --------------------------------------------------------
    def draw(self, eps, rng, rho_lam=None):
        """Draw one index; returns ``(index, probability of that index)``."""
        rho, lam = self.find_rho(eps) if rho_lam is None else rho_lam
        n = self.N
        if lam == 0.0:
            return int(rng.integers(n)), 1.0 / n
        tail = (n - rho) * eps
        if tail > 0.0 and rng.random() < tail:
            r = int(rng.integers(rho + 1, n + 1))
            return self.tree.select(r).value, eps
        # inverse transform restricted to the head ranks 1..rho
        u = 1.0 - rng.random()
        target = u * self.CS[rho - 1]
        lo, hi = 1, rho  # first rank r <= rho with target <= CS[r]
        while lo < hi:
            self.tree.visits += 1
            mid = (lo + hi) // 2
            if target <= self.CS[mid - 1]:
                hi = mid
            else:
                lo = mid + 1
        i = self.tree.select(lo).value
        return i, self.H[i] / lam

    def sample(self, eps, rng):
        return self.draw(eps, rng)[0]

    def sample_without_replacement(self, eps, m, rng, max_rejections=32):
        """Sequential draws without replacement from the eps-optimal law.

        Each draw after the first comes from ``p`` renormalized over the indices
        not yet taken. Draws are made by rejection against ``p`` and fall back
        to an explicit renormalized distribution after ``max_rejections``
        consecutive rejections; both routes realize the same conditional law.

        Returns ``(indices, q)`` where ``q[j]`` is the conditional probability
        of ``indices[j]`` at draw ``j``.
        """
        n = self.N
        if not 1 <= m <= n:
            raise ValueError(f"batch size m={m} must lie in [1, {n}]")
        rho, lam = self.find_rho(eps)
        taken = []
        seen = set()
        q = []
        mass = 0.0
        while len(taken) < m:
            for _ in range(max_rejections):
                i, pi = self.draw(eps, rng, (rho, lam))
                if i not in seen:
                    break
            else:
                p = self.probabilities(eps)
                p[taken] = 0.0
                i = _draw_from(p, rng)
                pi = p[i]
            remaining = 1.0 - mass
            if pi <= 0.0 or remaining <= 0.0:
                raise ValueError("no probability mass left among untaken indices")
            taken.append(i)
            seen.add(i)
            q.append(min(pi / remaining, 1.0))
            mass += pi
        return np.array(taken, dtype=np.intp), np.array(q)

    # -- checks ----------------------------------------------------------
    def validate_full(self, atol=1e-6):
        """Rebuild all structures from ``H`` and compare."""
        n = self.N
        if len(self.tree) != n or not self.tree.check():
            return False
        nodes = self.tree.inorder()
        order = np.lexsort((np.arange(n), -self.H))
        if [nd.value for nd in nodes] != order.tolist():
            return False
        if any(nd.key != (-self.H[nd.value], nd.value) for nd in nodes):
            return False
        fresh = np.cumsum(self.H[order])
        tol = atol * max(1.0, float(fresh[-1]))
        if np.any(np.diff(self.CS) < -tol):
            return False
        return bool(np.all(np.abs(fresh - self.CS) <= tol))

    def reanchor(self):
        self._rebuild_cs()


def _draw_from(p, rng):
    c = np.cumsum(p)
    u = (1.0 - rng.random()) * c[-1]
    return int(min(np.searchsorted(c, u, side="left"), p.size - 1))


def sequential_wor(p, m, rng):
    """Draw ``m`` distinct indices sequentially from explicit probabilities ``p``.

    Returns ``(indices, q)`` with ``q[j] = p[I_j] / (1 - sum_{k<j} p[I_k])``.
    """
    p = np.asarray(p, dtype=np.float64)
    n = p.size
    if not 1 <= m <= n:
        raise ValueError(f"batch size m={m} must lie in [1, {n}]")
    live = p.copy()
    taken = np.empty(m, dtype=np.intp)
    q = np.empty(m)
    mass = 0.0
    for j in range(m):
        if live.sum() <= 0.0:
            raise ValueError("no probability mass left among untaken indices")
        i = _draw_from(live, rng)
        taken[j] = i
        q[j] = min(p[i] / (1.0 - mass), 1.0)
        mass += p[i]
        live[i] = 0.0
    return taken, q


# functional aliases mirroring the operation names


def initialize(norms, **kwargs):
    return WeightTable(norms, **kwargs)


def update(table, i, new_norm):
    table.update(i, new_norm)


def find_rho(table, eps):
    return table.find_rho(eps)


def probabilities(table, eps):
    return table.probabilities(eps)


def sample(table, eps, rng):
    return table.sample(eps, rng)


def sample_without_replacement(table, eps, m, rng):
    return table.sample_without_replacement(eps, m, rng)


def validate_full(table):
    return table.validate_full()
