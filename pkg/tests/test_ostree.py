import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avare.ostree import OrderStatisticTree


def keys_of(tree):
    return [n.key for n in tree.inorder()]


class TestBasics:
    def test_build_sorted(self):
        t = OrderStatisticTree([(k, str(k)) for k in (5, 1, 4, 2, 3)])
        assert keys_of(t) == [1, 2, 3, 4, 5]
        assert len(t) == 5 and t.check()

    def test_rank_select_roundtrip(self):
        t = OrderStatisticTree([(k, k) for k in range(0, 100, 3)])
        for r in range(1, len(t) + 1):
            assert t.rank(t.select(r).key) == r

    def test_insert_delete(self):
        t = OrderStatisticTree()
        for k in (3, 1, 2):
            t.insert(k, -k)
        assert keys_of(t) == [1, 2, 3]
        assert t.delete(2) == -2
        assert keys_of(t) == [1, 3]
        assert t.check()

    def test_duplicate_insert_rejected(self):
        t = OrderStatisticTree([(1, "a")])
        with pytest.raises(KeyError):
            t.insert(1, "b")
        assert keys_of(t) == [1] and t.check()

    def test_missing_key(self):
        t = OrderStatisticTree([(1, "a")])
        with pytest.raises(KeyError):
            t.delete(2)
        with pytest.raises(KeyError):
            t.rank(2)

    def test_select_out_of_range(self):
        t = OrderStatisticTree([(1, "a")])
        for r in (0, 2):
            with pytest.raises(IndexError):
                t.select(r)

    def test_successor(self):
        t = OrderStatisticTree([(k, k) for k in (10, 20, 30)])
        assert t.successor(10).key == 20
        assert t.successor(15).key == 20
        assert t.successor(30) is None

    def test_tuple_keys_order(self):
        # the sampler's key: decreasing norm, ties by ascending index
        items = [((-2.0, 0), 0), ((-5.0, 1), 1), ((-2.0, 2), 2)]
        t = OrderStatisticTree(items)
        assert [n.value for n in t.inorder()] == [1, 0, 2]

    def test_seed_fixes_shape(self):
        items = [(k, k) for k in range(200)]
        a, b = OrderStatisticTree(items, seed=3), OrderStatisticTree(items, seed=3)
        assert a.height() == b.height() and a.root.key == b.root.key


class TestRandomized:
    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.booleans(), st.integers(0, 60)), max_size=300))
    def test_matches_sorted_list(self, ops):
        t, ref = OrderStatisticTree(), []
        for is_insert, k in ops:
            if is_insert and k not in ref:
                t.insert(k, k)
                ref.append(k)
                ref.sort()
            elif not is_insert and k in ref:
                assert t.delete(k) == k
                ref.remove(k)
        assert keys_of(t) == ref and t.check()
        for r, k in enumerate(ref, start=1):
            assert t.rank(k) == r and t.select(r).key == k

    def test_height_logarithmic(self):
        rng = random.Random(0)
        n = 2**14
        t = OrderStatisticTree([(k, k) for k in range(n)])
        for _ in range(5000):
            k = rng.randrange(n)
            t.delete(k)
            t.insert(k, k)
        # treap height concentrates around ~3 log2 N
        assert t.height() <= 4 * math.log2(n)
        assert t.check()

    def test_visits_count_descent(self):
        t = OrderStatisticTree([(k, k) for k in range(1024)])
        before = t.visits
        node = t.select(500)
        assert 1 <= t.visits - before <= t.height()
        assert node.key == 499
