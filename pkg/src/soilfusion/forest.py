"""Bagged regression trees with seeded, order-independent randomness.

Each tree is grown on a bootstrap resample using sum-of-squared-error
splits over a uniformly sampled feature subset per node. Candidate
thresholds are midpoints between consecutive distinct sorted values;
ties break toward the lowest feature index, then the lowest threshold.

Rows are brought into a canonical order (lexicographic over feature
columns, then target) before resampling, so a trained forest depends
only on the row *set*, not the row order. Per-tree random streams are
derived from (seed, tree index), which makes training independent of
worker count and scheduling.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    NoOobRowsError,
    NonFiniteInputError,
    TooFewSamplesError,
)


@dataclass
class ForestParams:
    tree_count: int = 300
    min_leaf_size: int = 8
    features_per_split: int = 0  # 0 = ceil(p / 3)
    bootstrap: bool = True
    seed: int = 0

    def resolve_mtry(self, n_features):
        mtry = self.features_per_split or math.ceil(n_features / 3)
        return min(mtry, n_features)


@dataclass
class Tree:
    """Array-encoded binary tree; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray


@dataclass
class RegressionForest:
    trees: list
    params: ForestParams
    column_names: list
    oob_indices: list = field(default_factory=list)

    @property
    def n_features(self):
        return len(self.column_names)


def canonical_order(x, y):
    """Permutation sorting rows lexicographically by features, then target."""
    keys = (y,) + tuple(x[:, j] for j in range(x.shape[1] - 1, -1, -1))
    return np.lexsort(keys)


def _tree_rng(seed, tree_index):
    return np.random.default_rng(np.random.SeedSequence((seed, 0, tree_index)))


def _grow_tree(x, y, row_idx, min_leaf, mtry, rng):
    feature, threshold, left, right, value = [], [], [], [], []
    stack = [(row_idx, -1, False)]  # (rows, parent node, is right child)
    p = x.shape[1]

    while stack:
        rows, parent, is_right = stack.pop()
        node = len(feature)
        if parent >= 0:
            if is_right:
                right[parent] = node
            else:
                left[parent] = node

        yn = y[rows]
        split = None
        if rows.size >= 2 * min_leaf and yn.min() < yn.max():
            # Candidates are the first mtry entries of a per-node feature
            # permutation; when they admit no legal split (e.g. constant
            # within the node) the draw extends chunk by chunk, so only a
            # node with no splittable feature at all becomes a leaf.
            order = rng.permutation(p)
            for start in range(0, p, mtry):
                candidates = np.sort(order[start : start + mtry])
                split = _best_split(x, yn, rows, candidates, min_leaf)
                if split is not None:
                    break
        if split is None:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(yn.mean())
            continue

        feat, thr = split
        go_left = x[rows, feat] <= thr
        feature.append(feat)
        threshold.append(thr)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        # Right pushed first so the left child is grown (and numbered) first.
        stack.append((rows[~go_left], node, True))
        stack.append((rows[go_left], node, False))

    return Tree(
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(value, dtype=np.float64),
    )


def _best_split(x, yn, rows, candidates, min_leaf):
    """Lowest-SSE (feature, threshold) over the candidates, or None."""
    n = rows.size
    xn = x[rows[:, None], candidates[None, :]]
    order = np.argsort(xn, axis=0, kind="stable")
    xs = np.take_along_axis(xn, order, axis=0)
    ys = yn[order]

    csum = np.cumsum(ys, axis=0)
    csum2 = np.cumsum(ys * ys, axis=0)
    total, total2 = csum[-1], csum2[-1]

    k = np.arange(1, n, dtype=np.float64)[:, None]
    left_sse = csum2[:-1] - csum[:-1] ** 2 / k
    right_sse = (total2 - csum2[:-1]) - (total - csum[:-1]) ** 2 / (n - k)
    sse = left_sse + right_sse

    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        ks = np.arange(1, n)
        valid &= ((ks >= min_leaf) & (n - ks >= min_leaf))[:, None]
    if not valid.any():
        return None
    sse = np.where(valid, sse, np.inf)

    best_per_feat = np.argmin(sse, axis=0)  # first occurrence = lowest threshold
    feat_sse = sse[best_per_feat, np.arange(len(candidates))]
    if not np.isfinite(feat_sse).any():
        return None
    j = int(np.argmin(feat_sse))  # first occurrence = lowest feature index
    kbest = int(best_per_feat[j])
    lo, hi = xs[kbest, j], xs[kbest + 1, j]
    thr = 0.5 * (lo + hi)
    if thr >= hi:  # midpoint rounded up to the upper value; keep it left of hi
        thr = lo
    return int(candidates[j]), float(thr)


def _build_one(args):
    xc, yc, params, mtry, tree_index = args
    n = xc.shape[0]
    rng = _tree_rng(params.seed, tree_index)
    if params.bootstrap:
        sample = rng.integers(0, n, size=n)
        oob = np.setdiff1d(np.arange(n), sample)
    else:
        sample = np.arange(n)
        oob = np.empty(0, dtype=np.int64)
    tree = _grow_tree(xc, yc, np.sort(sample), params.min_leaf_size, mtry, rng)
    return tree, oob


def train_forest(x, y, params, column_names=None, n_jobs=1):
    """Train a seeded forest; results are identical for any n_jobs."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.ndim != 2:
        raise DimensionMismatchError("x must be 2-D")
    if x.shape[0] != y.size:
        raise DimensionMismatchError("x and y row counts differ")
    if x.shape[0] < 2:
        raise TooFewSamplesError("training needs at least 2 rows")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise NonFiniteInputError("training data must be finite")
    if params.tree_count < 1 or params.min_leaf_size < 1:
        raise ValueError("tree_count and min_leaf_size must be >= 1")

    if column_names is None:
        column_names = [f"x{j}" for j in range(x.shape[1])]
    elif len(column_names) != x.shape[1]:
        raise DimensionMismatchError("column_names length must match x width")

    perm = canonical_order(x, y)
    xc, yc = x[perm], y[perm]
    mtry = params.resolve_mtry(x.shape[1])

    jobs = [(xc, yc, params, mtry, i) for i in range(params.tree_count)]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            built = list(pool.map(_build_one, jobs))
    else:
        built = [_build_one(job) for job in jobs]

    trees = [t for t, _ in built]
    oob = [o for _, o in built]
    return RegressionForest(trees, params, list(column_names), oob)


def _tree_predict(tree, x):
    n = x.shape[0]
    node = np.zeros(n, dtype=np.int32)
    while True:
        feats = tree.feature[node]
        active = feats >= 0
        if not active.any():
            break
        rows = np.flatnonzero(active)
        f = feats[rows]
        go_left = x[rows, f] <= tree.threshold[node[rows]]
        node[rows] = np.where(go_left, tree.left[node[rows]], tree.right[node[rows]])
    return tree.value[node]


def predict(forest, x):
    """Mean of per-tree leaf means; accepts one row or a matrix."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr.reshape(1, -1)
    if arr.shape[1] != forest.n_features:
        raise DimensionMismatchError(
            f"expected {forest.n_features} columns, got {arr.shape[1]}"
        )
    acc = np.zeros(arr.shape[0])
    for tree in forest.trees:
        acc += _tree_predict(tree, arr)
    out = acc / len(forest.trees)
    return float(out[0]) if single else out


def cross_validate(x, y, params, folds, n_jobs=1):
    """Out-of-fold predictions; fold f's model seed derives from (seed, f)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = x.shape[0]
    seen = np.zeros(n, dtype=bool)
    for fold in folds:
        seen[np.asarray(fold, dtype=np.int64)] = True
    if not seen.all():
        raise ValueError("folds must partition all rows")

    out = np.empty(n)
    for f, fold in enumerate(folds):
        fold = np.asarray(fold, dtype=np.int64)
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        fold_seed = int(
            np.random.SeedSequence((params.seed, 2, f)).generate_state(1)[0]
        )
        fold_params = ForestParams(
            params.tree_count,
            params.min_leaf_size,
            params.features_per_split,
            params.bootstrap,
            fold_seed,
        )
        model = train_forest(x[mask], y[mask], fold_params, n_jobs=n_jobs)
        out[fold] = predict(model, x[fold])
    return out


@dataclass
class ImportanceReport:
    features: list
    scores: np.ndarray
    ranking: list  # feature names, descending score


def variable_importance(forest, x, y):
    """Permutation importance on out-of-bag rows.

    Per feature: mean over trees of the OOB MSE increase after permuting
    that feature's column. Features a tree never splits on contribute
    exactly 0 for that tree.
    """
    if not forest.params.bootstrap:
        raise NoOobRowsError("importance requires bootstrap resampling")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[1] != forest.n_features:
        raise DimensionMismatchError("x width does not match the forest")

    perm = canonical_order(x, y)
    xc, yc = x[perm], y[perm]
    p = x.shape[1]
    deltas = np.zeros(p)
    n_used = 0

    for t, (tree, oob) in enumerate(zip(forest.trees, forest.oob_indices)):
        if oob.size == 0:
            continue
        n_used += 1
        x_oob = xc[oob]
        y_oob = yc[oob]
        base_mse = float(np.mean((y_oob - _tree_predict(tree, x_oob)) ** 2))
        for f in np.unique(tree.feature[tree.feature >= 0]):
            rng = np.random.default_rng(
                np.random.SeedSequence((forest.params.seed, 1, t, int(f)))
            )
            shuffled = x_oob.copy()
            shuffled[:, f] = x_oob[rng.permutation(oob.size), f]
            mse = float(np.mean((y_oob - _tree_predict(tree, shuffled)) ** 2))
            deltas[f] += mse - base_mse

    if n_used == 0:
        raise NoOobRowsError("no tree has out-of-bag rows")
    scores = deltas / n_used
    order = np.lexsort((np.arange(p), -scores))
    names = list(forest.column_names)
    return ImportanceReport(names, scores, [names[i] for i in order])


def save_forest(forest, path):
    """Persist a forest to .npz; round-trips to identical predictions."""
    payload = {
        "meta": np.frombuffer(
            json.dumps(
                {
                    "params": vars(forest.params),
                    "column_names": forest.column_names,
                    "n_trees": len(forest.trees),
                }
            ).encode("utf-8"),
            dtype=np.uint8,
        )
    }
    for i, tree in enumerate(forest.trees):
        payload[f"t{i}_feature"] = tree.feature
        payload[f"t{i}_threshold"] = tree.threshold
        payload[f"t{i}_left"] = tree.left
        payload[f"t{i}_right"] = tree.right
        payload[f"t{i}_value"] = tree.value
        payload[f"t{i}_oob"] = forest.oob_indices[i]
    np.savez_compressed(path, **payload)


def load_forest(path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        params = ForestParams(**meta["params"])
        trees, oob = [], []
        for i in range(meta["n_trees"]):
            trees.append(
                Tree(
                    data[f"t{i}_feature"],
                    data[f"t{i}_threshold"],
                    data[f"t{i}_left"],
                    data[f"t{i}_right"],
                    data[f"t{i}_value"],
                )
            )
            oob.append(data[f"t{i}_oob"])
    return RegressionForest(trees, params, meta["column_names"], oob)
