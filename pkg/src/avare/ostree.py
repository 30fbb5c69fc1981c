"""Order-statistic tree (treap) with rank/select and node-visit accounting.

Keys are any totally ordered values (the sampler uses ``(-norm, index)``
tuples so that the inorder sequence is decreasing in norm with ties broken
by ascending index). Ranks are 1-based, matching the usual textbook
presentation of rank/select.

Every pointer hop during a descent bumps ``visits`` so callers can measure
the work done by an operation.
"""
from __future__ import annotations

import random

__all__ = ["Node", "OrderStatisticTree"]


class Node:
    __slots__ = ("key", "value", "prio", "size", "left", "right")

    def __init__(self, key, value, prio):
        self.key = key
        self.value = value
        self.prio = prio
        self.size = 1
        self.left = None
        self.right = None

    def __repr__(self):
        return f"Node(key={self.key!r}, value={self.value!r}, size={self.size})"


def _size(node):
    return node.size if node is not None else 0


def _fix(node):
    node.size = 1 + _size(node.left) + _size(node.right)


class OrderStatisticTree:
    """Treap keyed by unique keys, storing one value per key.

    Parameters
    ----------
    items : iterable of (key, value), optional
        Initial contents; keys must be unique.
    seed : int
        Seed for the heap priorities. Fixing it makes the tree shape
        reproducible.
    """

    def __init__(self, items=(), seed=0):
        self._prio = random.Random(seed)
        self.root = None
        self.visits = 0
        items = sorted(items, key=lambda kv: kv[0])
        if items:
            self._build(items)

    def __len__(self):
        return _size(self.root)

    def _build(self, items):
        # O(N) Cartesian-tree construction from keys already in order
        stack = []
        for key, value in items:
            node = Node(key, value, self._prio.random())
            last = None
            while stack and stack[-1].prio < node.prio:
                last = stack.pop()
                _fix(last)
            node.left = last
            if stack:
                stack[-1].right = node
            stack.append(node)
        while stack:
            last = stack.pop()
            if stack:
                stack[-1].right = last
        self.root = last
        self._refresh_sizes(self.root)

    def _refresh_sizes(self, node):
        # iterative post-order; recursion depth would be O(N) in the worst case
        out = []
        todo = [node] if node is not None else []
        while todo:
            cur = todo.pop()
            out.append(cur)
            if cur.left is not None:
                todo.append(cur.left)
            if cur.right is not None:
                todo.append(cur.right)
        for cur in reversed(out):
            _fix(cur)

    # -- split / merge ---------------------------------------------------
    def _split(self, node, key):
        """Split into (keys < key, keys >= key)."""
        if node is None:
            return None, None
        self.visits += 1
        if node.key < key:
            lo, hi = self._split(node.right, key)
            node.right = lo
            _fix(node)
            return node, hi
        lo, hi = self._split(node.left, key)
        node.left = hi
        _fix(node)
        return lo, node

    def _merge(self, a, b):
        if a is None:
            return b
        if b is None:
            return a
        self.visits += 1
        if a.prio > b.prio:
            a.right = self._merge(a.right, b)
            _fix(a)
            return a
        b.left = self._merge(a, b.left)
        _fix(b)
        return b

    # -- public operations -----------------------------------------------
    def insert(self, key, value):
        node = Node(key, value, self._prio.random())
        lo, hi = self._split(self.root, key)
        if hi is not None and self._leftmost(hi).key == key:
            self.root = self._merge(lo, hi)
            raise KeyError(f"duplicate key {key!r}")
        self.root = self._merge(self._merge(lo, node), hi)

    def delete(self, key):
        """Remove ``key`` and return its value."""
        self.root, value = self._delete(self.root, key)
        return value

    def _delete(self, node, key):
        if node is None:
            raise KeyError(key)
        self.visits += 1
        if key < node.key:
            node.left, value = self._delete(node.left, key)
        elif node.key < key:
            node.right, value = self._delete(node.right, key)
        else:
            return self._merge(node.left, node.right), node.value
        _fix(node)
        return node, value

    def _leftmost(self, node):
        while node.left is not None:
            self.visits += 1
            node = node.left
        return node

    def rank(self, key):
        """1-based position of ``key`` in inorder sequence."""
        node, r = self.root, 0
        while node is not None:
            self.visits += 1
            if key < node.key:
                node = node.left
            elif node.key < key:
                r += _size(node.left) + 1
                node = node.right
            else:
                return r + _size(node.left) + 1
        raise KeyError(key)

    def select(self, r):
        """Node holding the ``r``-th smallest key (1-based)."""
        if not 1 <= r <= len(self):
            raise IndexError(f"rank {r} out of range 1..{len(self)}")
        node = self.root
        while True:
            self.visits += 1
            left = _size(node.left)
            if r <= left:
                node = node.left
            elif r == left + 1:
                return node
            else:
                r -= left + 1
                node = node.right

    def successor(self, key):
        """Node with the smallest key strictly greater than ``key``, or None."""
        node, best = self.root, None
        while node is not None:
            self.visits += 1
            if key < node.key:
                best = node
                node = node.left
            else:
                node = node.right
        return best

    def inorder(self):
        out, stack, node = [], [], self.root
        while stack or node is not None:
            while node is not None:
                stack.append(node)
                node = node.left
            node = stack.pop()
            out.append(node)
            node = node.right
        return out

    def height(self):
        best, todo = 0, [(self.root, 1)] if self.root is not None else []
        while todo:
            node, depth = todo.pop()
            best = max(best, depth)
            for child in (node.left, node.right):
                if child is not None:
                    todo.append((child, depth + 1))
        return best

    def check(self):
        """Structural invariants: BST order, heap order, subtree sizes."""
        nodes = self.inorder()
        keys = [n.key for n in nodes]
        if any(not (a < b) for a, b in zip(keys, keys[1:])):
            return False
        for n in nodes:
            if n.size != 1 + _size(n.left) + _size(n.right):
                return False
            for child in (n.left, n.right):
                if child is not None and child.prio > n.prio:
                    return False
        return True
