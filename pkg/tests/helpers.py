"""Shared generators for randomized tests.

Random trees are built from random recursive partitions of the leaf set, so
every generated split set is compatible by construction.  Generators take an
explicit ``numpy.random.Generator`` so each test controls its own seed.
"""

import numpy as np

from treespace import AttributedTree


def leaf_names(n):
    return tuple(f"L{i}" for i in range(n))


def random_split_set(rng, leaves, p_keep=0.8):
    """A random compatible split family over ``leaves``.

    Recursively partitions the leaf set; every block of every level is a
    candidate split (pendants and the full set included), kept with
    probability ``p_keep``.
    """
    splits = []

    def recurse(block):
        if rng.random() < p_keep:
            splits.append(frozenset(block))
        if len(block) < 2:
            return
        cut = int(rng.integers(1, len(block)))
        order = list(block)
        rng.shuffle(order)
        recurse(order[:cut])
        recurse(order[cut:])

    recurse(list(leaves))
    return list(dict.fromkeys(splits))


def random_tree(rng, leaves, k=1, p_keep=0.8, zero_prob=0.0):
    """A random attributed tree; ``zero_prob`` inserts all-zero attributes."""
    edges = {}
    for s in random_split_set(rng, leaves, p_keep):
        if rng.random() < zero_prob:
            edges[s] = (0.0,) * k
        elif k == 1:
            edges[s] = (float(rng.uniform(0.05, 2.0)),)
        else:
            edges[s] = tuple(float(v) for v in rng.normal(0.0, 1.0, size=k))
    if not edges:
        edges[frozenset({leaves[0]})] = (1.0,) * 1 if k == 1 else tuple(
            float(v) for v in rng.normal(0.0, 1.0, size=k))
    return AttributedTree(leaves, edges)


def random_tree_pair(rng, n_leaves, k=1, zero_prob=0.0):
    leaves = leaf_names(n_leaves)
    return (random_tree(rng, leaves, k, zero_prob=zero_prob),
            random_tree(rng, leaves, k, zero_prob=zero_prob))
