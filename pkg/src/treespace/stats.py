"""Population statistics for attributed trees.

The Fréchet mean generalizes the ordinary average to tree space: it is the
tree minimizing the sum of squared geodesic distances to the inputs.  No
closed form exists across orthants, so the mean is approximated by a
law-of-large-numbers scheme: walk from the current iterate a fraction
1/(step+1) of the way toward the next input, cycling the inputs in a fixed
seeded random order.  When every input shares one topology the minimizer is
the coordinatewise average and is returned exactly.

Group comparisons use permutation tests on two statistics: the distance
between group means and the absolute difference of group variances.  The
p-value (1 + #{permuted >= observed}) / (M + 1) never reaches zero, so a
significant result is never an artifact of too few permutations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geodesic import geodesic, geodesic_distance
from .trees import AttributedTree

__all__ = [
    "MeanConfig",
    "MeanResult",
    "frechet_mean",
    "frechet_mean_detailed",
    "variance",
    "PermutationTestReport",
    "permutation_test",
    "pearson",
    "SubtreeCorrelation",
    "subtree_variance_correlation",
]

# Objective snapshots stop the iteration once no improvement shows up for
# this many consecutive snapshots.  The nominal displacement tolerance stays
# in MeanConfig but steps shrink like 1/step, so the plateau is what fires.
_PLATEAU_PATIENCE = 20
_PLATEAU_RTOL = 1e-12


@dataclass(frozen=True)
class MeanConfig:
    """Iteration budget for the mean search.

    ``max_iterations`` defaults to 1000 times the population size when left
    as None.  ``tolerance`` stops early when an iterate moves less than this
    distance.
    """

    max_iterations: int | None = None
    tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class MeanResult:
    tree: AttributedTree
    objective: float
    trace: list[float]
    iterations: int


def _check_population(trees):
    if not trees:
        raise ValueError("empty population")
    leaves = trees[0].leaves
    for t in trees[1:]:
        if t.leaves != leaves:
            raise ValueError("trees have different leaf sets")


def _objective(tree, trees):
    return sum(geodesic_distance(tree, t) ** 2 for t in trees)


def _coordinate_mean(trees):
    """Exact mean for a single-topology population (orthants are convex)."""
    first = trees[0]
    edges = {}
    for s in first.sorted_splits():
        vals = np.array([t.edges[s] for t in trees])
        m = vals.mean(axis=0)
        if np.any(m != 0.0):
            edges[s] = tuple(float(v) for v in m)
    labels = {}
    for t in trees:
        for name, sp in t.branch_labels.items():
            if name not in labels and sp in edges:
                labels[name] = sp
    return AttributedTree(first.leaves, edges, labels)


def frechet_mean_detailed(trees, cfg: MeanConfig | None = None) -> MeanResult:
    """Mean search with the objective trace attached.

    ``trace`` holds the best objective seen at each snapshot, so it is
    non-increasing; the returned tree is the best iterate, never a worse
    late one.
    """
    trees = list(trees)
    _check_population(trees)
    cfg = cfg or MeanConfig()
    n = len(trees)
    if n == 1:
        return MeanResult(trees[0], 0.0, [0.0], 0)

    if all(t.splits == trees[0].splits for t in trees):
        mean = _coordinate_mean(trees)
        obj = _objective(mean, trees)
        return MeanResult(mean, obj, [obj], 0)
    if n == 2:
        # the two-point mean is the midpoint, no iteration needed
        mid = geodesic(trees[0], trees[1]).point(0.5)
        obj = _objective(mid, trees)
        return MeanResult(mid, obj, [obj], 0)

    max_iter = cfg.max_iterations if cfg.max_iterations is not None \
        else 1000 * n
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(n)
    snap = 1 if n <= 16 else n

    # start from the best input so the result never loses to an input tree
    input_objs = [_objective(t, trees) for t in trees]
    start = int(np.argmin(input_objs))
    current = trees[start]
    best = current
    best_obj = input_objs[start]
    trace = [best_obj]

    step = 0
    quiet = 0  # consecutive steps below the displacement tolerance
    while step < max_iter:
        step += 1
        sample = trees[order[(step - 1) % n]]
        path = geodesic(current, sample)
        frac = 1.0 / (step + 1)
        moved = frac * path.length
        current = path.point(frac)
        # a single tiny move can just mean the sample was nearby; only a
        # whole quiet cycle through the inputs counts as converged
        quiet = quiet + 1 if moved < cfg.tolerance else 0
        settled = quiet >= n
        if step % snap == 0 or step == max_iter or settled:
            obj = _objective(current, trees)
            if obj < best_obj:
                best_obj = obj
                best = current
            trace.append(best_obj)
            if settled:
                break
            if len(trace) > _PLATEAU_PATIENCE:
                gain = trace[-_PLATEAU_PATIENCE - 1] - best_obj
                if gain <= _PLATEAU_RTOL * max(1.0, best_obj):
                    break
    return MeanResult(best, best_obj, trace, step)


def frechet_mean(trees, cfg: MeanConfig | None = None) -> AttributedTree:
    """The tree minimizing the sum of squared distances to ``trees``."""
    return frechet_mean_detailed(trees, cfg).tree


def variance(trees, mean: AttributedTree) -> float:
    """Sum of squared distances to ``mean`` over (N - 1)."""
    trees = list(trees)
    if len(trees) < 2:
        raise ValueError("variance needs at least two trees")
    return sum(geodesic_distance(t, mean) ** 2 for t in trees) \
        / (len(trees) - 1)


# ---------------------------------------------------------------------------
# permutation tests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PermutationTestReport:
    statistic_kind: str
    observed: float
    permuted: tuple[float, ...]
    p_value: float
    seed: int
    sizes: tuple[int, int]

    @property
    def m(self) -> int:
        return len(self.permuted)

    def to_json(self, include_permuted: bool = False) -> dict:
        arr = np.array(self.permuted)
        out = {
            "kind": self.statistic_kind,
            "observed": self.observed,
            "p_value": self.p_value,
            "M": self.m,
            "seed": self.seed,
            "sizes": list(self.sizes),
            "permuted_summary": {
                f"q{q}": float(np.quantile(arr, q / 100))
                for q in (0, 25, 50, 75, 100)
            },
        }
        if include_permuted:
            out["permuted"] = list(self.permuted)
        return out


def _stacked_attributes(trees):
    """Row per tree of concatenated attributes; only for one topology."""
    splits = trees[0].sorted_splits()
    return np.array([[c for s in splits for c in t.edges[s]] for t in trees])


def _group_stat_trees(g1, g2, kind, cfg):
    if kind == "mean":
        return geodesic_distance(frechet_mean(g1, cfg), frechet_mean(g2, cfg))
    v1 = variance(g1, frechet_mean(g1, cfg))
    v2 = variance(g2, frechet_mean(g2, cfg))
    return abs(v1 - v2)


def permutation_test(g1, g2, kind: str = "mean", m: int = 1000,
                     seed: int = 0) -> PermutationTestReport:
    """Two-group permutation test on tree populations.

    ``kind`` selects the statistic: distance between group means, or
    absolute difference of group variances.  Each of the ``m`` replicates
    repartitions the pooled trees into the original group sizes, using an
    RNG stream derived from (seed, replicate) so replicates are independent
    of evaluation order.  Partitions are sampled independently, so repeats
    can occur.
    """
    g1, g2 = list(g1), list(g2)
    if len(g1) < 2 or len(g2) < 2:
        raise ValueError("each group needs at least two trees")
    if kind not in ("mean", "variance"):
        raise ValueError(f"unknown statistic kind: {kind!r}")
    if m < 1:
        raise ValueError("m must be at least 1")
    pool = g1 + g2
    _check_population(pool)
    n1 = len(g1)
    n = len(pool)

    single_orthant = all(t.splits == pool[0].splits for t in pool)
    if single_orthant:
        x = _stacked_attributes(pool)

        def stat(idx1, idx2):
            a, b = x[idx1], x[idx2]
            if kind == "mean":
                diff = a.mean(axis=0) - b.mean(axis=0)
                return float(np.sqrt(diff @ diff))
            va = float(((a - a.mean(axis=0)) ** 2).sum() / (len(idx1) - 1))
            vb = float(((b - b.mean(axis=0)) ** 2).sum() / (len(idx2) - 1))
            return abs(va - vb)

        observed = stat(np.arange(n1), np.arange(n1, n))
    else:
        cfg = MeanConfig(seed=seed)

        def stat(idx1, idx2):
            return _group_stat_trees([pool[i] for i in idx1],
                                     [pool[i] for i in idx2], kind, cfg)

        observed = stat(list(range(n1)), list(range(n1, n)))

    permuted = []
    for rep in range(m):
        rng = np.random.default_rng([seed, rep])
        perm = rng.permutation(n)
        permuted.append(stat(perm[:n1], perm[n1:]))
    permuted = tuple(float(v) for v in permuted)
    exceed = sum(1 for v in permuted if v >= observed)
    p = (1 + exceed) / (m + 1)
    return PermutationTestReport(kind, float(observed), permuted, p, seed,
                                 (n1, n - n1))


# ---------------------------------------------------------------------------
# correlation
# ---------------------------------------------------------------------------

def pearson(x, y) -> float:
    """Sample correlation coefficient of two equal-length sequences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be equal-length 1-D sequences")
    if len(x) < 2:
        raise ValueError("need at least two observations")
    sx = x.std(ddof=1)
    sy = y.std(ddof=1)
    if sx == 0.0 or sy == 0.0:
        raise ValueError("constant input has no correlation")
    r = float(((x - x.mean()) * (y - y.mean())).sum()
              / ((len(x) - 1) * sx * sy))
    return r


@dataclass
class SubtreeCorrelation:
    """Pairwise correlation of per-subject deviations from subtree means.

    ``deviations[i, j]`` is the distance from subject i's subtree j to that
    subtree's population mean; ``matrix[j, k]`` the Pearson correlation of
    deviation columns j and k.
    """

    labels: tuple[str, ...]
    deviations: np.ndarray
    matrix: np.ndarray

    def scatter(self, label_a: str, label_b: str):
        ja = self.labels.index(label_a)
        jb = self.labels.index(label_b)
        return self.deviations[:, ja], self.deviations[:, jb]

    def histogram(self, label: str, bins: int = 20):
        j = self.labels.index(label)
        counts, edges = np.histogram(self.deviations[:, j], bins=bins)
        return counts, edges


def subtree_variance_correlation(populations: dict, means: dict) \
        -> SubtreeCorrelation:
    """Correlate how far subjects sit from each labeled subtree mean.

    ``populations`` maps a label to the list of that subtree across
    subjects (same subjects, same order for every label); ``means`` maps
    the label to the reference mean subtree.
    """
    labels = tuple(populations)
    if not labels:
        raise ValueError("no subtree populations given")
    sizes = {len(populations[lab]) for lab in labels}
    if len(sizes) != 1:
        raise ValueError("subtree populations differ in length")
    missing = [lab for lab in labels if lab not in means]
    if missing:
        raise ValueError(f"no mean for labels: {missing}")
    n = sizes.pop()
    dev = np.zeros((n, len(labels)))
    for j, lab in enumerate(labels):
        mu = means[lab]
        dev[:, j] = [geodesic_distance(t, mu) for t in populations[lab]]
    mat = np.ones((len(labels), len(labels)))
    for j in range(len(labels)):
        for k in range(j + 1, len(labels)):
            mat[j, k] = mat[k, j] = pearson(dev[:, j], dev[:, k])
    return SubtreeCorrelation(labels, dev, mat)
