import math

import numpy as np
import pytest

from treespace import (
    AttributedTree,
    TreeError,
    brute_force_distance,
    distance_matrix,
    geodesic,
    geodesic_distance,
    geodesic_point,
)
from treespace.geodesic import _min_weight_cover

from helpers import random_tree, random_tree_pair

S = frozenset


def star(leaves, lengths):
    return AttributedTree(tuple(leaves),
                          {S([x]): (l,) for x, l in zip(leaves, lengths)})


def quartet(inner1, inner2, inner_len=1.0):
    """Binary tree on a,b,c,d with two interior splits, unit pendants."""
    edges = {S(x): (1.0,) for x in "abcd"}
    edges[S(inner1)] = (inner_len,)
    edges[S(inner2)] = (inner_len,)
    return AttributedTree(("a", "b", "c", "d"), edges)


def test_identity():
    t = star("abc", (1.0, 2.0, 3.0))
    assert geodesic_distance(t, t) == 0.0


def test_same_orthant_euclidean():
    t1 = star("abc", (1.0, 2.0, 3.0))
    t2 = star("abc", (2.0, 2.0, 4.0))
    assert geodesic_distance(t1, t2) == pytest.approx(math.sqrt(2.0), abs=1e-15)


def test_cone_path_quartet():
    # both interior splits cross both of the others: one unsplittable
    # support pair, so the path passes through the shared star face
    t1 = quartet("ab", "cd")
    t2 = quartet("ac", "bd")
    d = geodesic_distance(t1, t2)
    assert d == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-12)
    assert abs(brute_force_distance(t1, t2, grid=64) - d) <= 1e-6

    mid = geodesic_point(t1, t2, 0.5)
    assert mid.splits == frozenset(S(x) for x in "abcd")
    for x in "abcd":
        assert mid.attribute(S(x)) == (1.0,)


def test_two_pair_support():
    # {a,b} fights only {b,c} and {d,e} only {e,f}: the support refines
    # into two pairs with switch times 1/3 and 2/3
    leaves = ("a", "b", "c", "d", "e", "f")
    pend = {S(x): (1.0,) for x in leaves}
    t1 = AttributedTree(leaves, {**pend, S("ab"): (2.0,), S("de"): (1.0,)})
    t2 = AttributedTree(leaves, {**pend, S("bc"): (1.0,), S("ef"): (2.0,)})
    d = geodesic_distance(t1, t2)
    assert d == pytest.approx(math.sqrt(18.0), abs=1e-12)

    path = geodesic(t1, t2)
    assert path.times == pytest.approx((1.0 / 3.0, 2.0 / 3.0), abs=1e-12)
    assert abs(brute_force_distance(t1, t2) - d) <= 1e-6


def test_free_splits():
    # the two one-side-only splits never conflict, so each contributes
    # its own norm and vanishes at an endpoint of the path
    leaves = ("a", "b", "c", "d")
    pend = {S(x): (1.0,) for x in leaves}
    t1 = AttributedTree(leaves, {**pend, S("ab"): (2.0,)})
    t2 = AttributedTree(leaves, {**pend, S("cd"): (2.0,)})
    d = geodesic_distance(t1, t2)
    assert d == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-12)
    assert abs(brute_force_distance(t1, t2) - d) <= 1e-6


def test_endpoint_law():
    rng = np.random.default_rng(5)
    t1, t2 = random_tree_pair(rng, 5)
    assert geodesic_point(t1, t2, 0.0) == t1
    assert geodesic_point(t1, t2, 1.0) == t2
    with pytest.raises(ValueError):
        geodesic_point(t1, t2, 1.5)
    with pytest.raises(ValueError):
        geodesic_point(t1, t2, -0.1)


def test_same_topology_midpoint():
    t1 = star("abc", (1.0, 2.0, 3.0))
    t2 = star("abc", (2.0, 2.0, 4.0))
    mid = geodesic_point(t1, t2, 0.5)
    assert mid.attribute(S("a")) == (1.5,)
    assert mid.attribute(S("b")) == (2.0,)
    assert mid.attribute(S("c")) == (3.5,)


def test_path_additivity():
    rng = np.random.default_rng(11)
    for _ in range(30):
        t1, t2 = random_tree_pair(rng, int(rng.integers(3, 7)),
                                  k=int(rng.integers(1, 3)))
        d = geodesic_distance(t1, t2)
        for s in (0.25, 0.5, 0.75):
            mid = geodesic_point(t1, t2, s)
            left = geodesic_distance(t1, mid)
            right = geodesic_distance(mid, t2)
            assert abs(left + right - d) <= 1e-9
            assert abs(left - s * d) <= 1e-9


def test_symmetry_bitwise():
    rng = np.random.default_rng(13)
    for _ in range(50):
        t1, t2 = random_tree_pair(rng, int(rng.integers(3, 8)),
                                  k=int(rng.integers(1, 3)))
        assert geodesic_distance(t1, t2) == geodesic_distance(t2, t1)


def test_homogeneity():
    rng = np.random.default_rng(17)
    for _ in range(20):
        t1, t2 = random_tree_pair(rng, 5, k=2)
        c = float(rng.uniform(0.3, 3.0))
        s1 = AttributedTree(t1.leaves, {s: tuple(c * v for v in a)
                                        for s, a in t1.edges.items()})
        s2 = AttributedTree(t2.leaves, {s: tuple(c * v for v in a)
                                        for s, a in t2.edges.items()})
        assert abs(geodesic_distance(s1, s2) - c * geodesic_distance(t1, t2)) <= 1e-9


def test_oracle_agreement():
    rng = np.random.default_rng(20260823)
    for _ in range(40):
        n = int(rng.integers(3, 7))
        k = int(rng.integers(1, 3))
        t1, t2 = random_tree_pair(rng, n, k=k, zero_prob=0.1)
        d = geodesic_distance(t1, t2)
        b = brute_force_distance(t1, t2, grid=128)
        assert abs(d - b) <= 1e-6
        # the oracle searches a restricted path family, so it never
        # undercuts the true geodesic
        assert b >= d - 1e-8


def test_oracle_same_topology_exact():
    t1 = star("abcd", (1.0, 2.0, 3.0, 4.0))
    t2 = star("abcd", (4.0, 3.0, 2.0, 1.0))
    for grid in (2, 16, 128):
        assert brute_force_distance(t1, t2, grid=grid) == \
            geodesic_distance(t1, t2)


def test_oracle_size_guard():
    leaves = tuple("abcdefgh")
    pend = {S(x): (1.0,) for x in leaves}
    nested1 = {S(leaves[:i]): (1.0,) for i in range(2, 8)}
    nested2 = {S(leaves[-i:]): (1.0,) for i in range(2, 8)}
    t1 = AttributedTree(leaves, {**pend, **nested1})
    t2 = AttributedTree(leaves, {**pend, **nested2})
    with pytest.raises(ValueError):
        brute_force_distance(t1, t2)


def test_mismatched_inputs_rejected():
    t1 = star("abc", (1.0, 1.0, 1.0))
    t2 = star("abd", (1.0, 1.0, 1.0))
    with pytest.raises(TreeError):
        geodesic_distance(t1, t2)
    t3 = AttributedTree(("a", "b", "c"),
                        {S(x): (1.0, 0.0) for x in "abc"})
    with pytest.raises(TreeError):
        geodesic_distance(t1, t3)


def test_distance_matrix_small():
    t = star("abc", (1.0, 2.0, 3.0))
    dm = distance_matrix([t])
    assert dm.values.shape == (1, 1)
    assert dm.values[0, 0] == 0.0

    dm = distance_matrix([t, t, star("abc", (2.0, 2.0, 4.0))])
    assert dm.values[0, 1] == 0.0
    assert dm.values[0, 2] == pytest.approx(math.sqrt(2.0))


def test_distance_matrix_triangle():
    rng = np.random.default_rng(23)
    trees = [random_tree(rng, ("a", "b", "c", "d", "e")) for _ in range(10)]
    dm = distance_matrix(trees)
    v = dm.values
    n = len(trees)
    for i in range(n):
        for j in range(i + 1, n):
            for l in range(n):
                assert v[i, j] <= v[i, l] + v[l, j] + 1e-9


def test_distance_matrix_threads_deterministic():
    rng = np.random.default_rng(29)
    trees = [random_tree(rng, ("a", "b", "c", "d")) for _ in range(8)]
    one = distance_matrix(trees, threads=1)
    two = distance_matrix(trees, threads=3)
    assert np.array_equal(one.values, two.values)


def test_min_weight_cover_prefers_light_side():
    # one heavy A vertex against two light B vertices: the cover picks
    # whichever side is cheaper
    flow, in_a, in_b = _min_weight_cover([0.9], [0.3, 0.3],
                                         [(0, 0), (0, 1)])
    assert flow == pytest.approx(0.6)
    assert in_a == [False]
    assert in_b == [True, True]

    flow, in_a, in_b = _min_weight_cover([0.2], [0.3, 0.3],
                                         [(0, 0), (0, 1)])
    assert flow == pytest.approx(0.2)
    assert in_a == [True]
    assert in_b == [False, False]


def test_geodesic_path_structure():
    rng = np.random.default_rng(31)
    for _ in range(20):
        t1, t2 = random_tree_pair(rng, 5)
        path = geodesic(t1, t2)
        only1 = t1.splits - t2.splits
        only2 = t2.splits - t1.splits
        got1 = [s for A, _ in path.support for s in A]
        got2 = [s for _, B in path.support for s in B]
        # every one-side split appears exactly once across the support
        assert sorted(map(sorted, got1)) == sorted(map(sorted, only1))
        assert sorted(map(sorted, got2)) == sorted(map(sorted, only2))
        assert all(0.0 <= t <= 1.0 for t in path.times)
        assert path.length >= 0.0
