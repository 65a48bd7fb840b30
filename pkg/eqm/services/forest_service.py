"""
Random forest regression service

CART regression trees on bootstrap samples with per-split feature
subsampling. Tree t draws from its own generator seeded with
derive_seed(params.seed, t), so trees are independent of each other and of
the number of worker threads.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from ..constants import ForestConstants
from ..core.custom_exceptions import DimensionMismatchError, NonFiniteInputError, TooFewRowsError
from ..schemas.forest import Forest, ForestParams, Tree


logger = logging.getLogger(__name__)


def derive_seed(seed: int, tree_index: int) -> int:
    """splitmix64 finalizer over seed XOR tree_index."""
    mask = ForestConstants.UINT64_MASK
    z = ((seed ^ tree_index) + 0x9E3779B97F4A7C15) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return z ^ (z >> 31)


def _as_matrix(X, n_features: Optional[int] = None) -> np.ndarray:
    matrix = np.asarray(X, dtype=np.float64)
    if matrix.ndim != 2:
        raise DimensionMismatchError(f"Expected a 2-D feature matrix, got {matrix.ndim} dimension(s)")
    if n_features is not None and matrix.shape[1] != n_features:
        raise DimensionMismatchError(f"Expected {n_features} features, got {matrix.shape[1]}")
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteInputError("Feature matrix contains NaN or infinite values")
    return matrix


def _best_split(xs: np.ndarray, ys: np.ndarray, min_samples_leaf: int) -> tuple[float, float]:
    """Best (gain, threshold) for one feature; gain is the SSE reduction, -inf if no valid split."""
    order = np.argsort(xs, kind="stable")
    xs_sorted = xs[order]
    # centering keeps the running sums well conditioned
    centered = ys[order] - ys.mean()
    n = centered.size

    csum = np.cumsum(centered)
    csq = np.cumsum(centered * centered)
    left_n = np.arange(1, n, dtype=np.float64)
    right_n = n - left_n
    left_sum = csum[:-1]
    right_sum = csum[-1] - left_sum
    sse_left = csq[:-1] - left_sum * left_sum / left_n
    sse_right = (csq[-1] - csq[:-1]) - right_sum * right_sum / right_n
    gain = (csq[-1] - csum[-1] * csum[-1] / n) - sse_left - sse_right

    valid = (xs_sorted[:-1] < xs_sorted[1:]) & (left_n >= min_samples_leaf) & (right_n >= min_samples_leaf)
    if not np.any(valid):
        return -np.inf, 0.0
    gain = np.where(valid, gain, -np.inf)
    position = int(np.argmax(gain))
    low, high = xs_sorted[position], xs_sorted[position + 1]
    threshold = (low + high) / 2.0
    if threshold >= high:
        threshold = low
    return float(gain[position]), float(threshold)


def _grow_tree(X: np.ndarray, y: np.ndarray, params: ForestParams, mtry: int, tree_index: int) -> Tree:
    rng = np.random.default_rng(derive_seed(params.seed, tree_index))
    n_samples, n_features = X.shape
    if params.bootstrap:
        sample = rng.integers(0, n_samples, size=n_samples)
    else:
        sample = np.arange(n_samples)
    in_bag = np.zeros(n_samples, dtype=bool)
    in_bag[sample] = True

    feature: list[int] = [ForestConstants.LEAF]
    threshold: list[float] = [0.0]
    left: list[int] = [ForestConstants.LEAF]
    right: list[int] = [ForestConstants.LEAF]
    value: list[float] = [0.0]
    gain: list[float] = [0.0]

    # depth-first, left subtree first, so RNG draws happen in a fixed order
    stack = [(0, sample, 0)]
    while stack:
        node, rows, depth = stack.pop()
        targets = y[rows]
        value[node] = float(targets.mean())

        if (
            (params.max_depth is not None and depth >= params.max_depth)
            or rows.size < 2 * params.min_samples_leaf
            or np.all(targets == targets[0])
        ):
            continue

        candidates = np.sort(rng.choice(n_features, size=mtry, replace=False))
        best_gain, best_feature, best_threshold = 0.0, ForestConstants.LEAF, 0.0
        for candidate in candidates:
            split_gain, split_threshold = _best_split(X[rows, candidate], targets, params.min_samples_leaf)
            if split_gain > best_gain:
                best_gain, best_feature, best_threshold = split_gain, int(candidate), split_threshold
        if best_feature == ForestConstants.LEAF:
            continue

        goes_left = X[rows, best_feature] <= best_threshold
        left_id, right_id = len(feature), len(feature) + 1
        for _ in range(2):
            feature.append(ForestConstants.LEAF)
            threshold.append(0.0)
            left.append(ForestConstants.LEAF)
            right.append(ForestConstants.LEAF)
            value.append(0.0)
            gain.append(0.0)
        feature[node], threshold[node] = best_feature, best_threshold
        left[node], right[node], gain[node] = left_id, right_id, best_gain
        stack.append((right_id, rows[~goes_left], depth + 1))
        stack.append((left_id, rows[goes_left], depth + 1))

    return Tree(
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        value=value,
        gain=gain,
        in_bag=np.packbits(in_bag).tobytes().hex(),
    )


def fit_forest(
    X,
    y,
    params: ForestParams,
    feature_names: Optional[Sequence[str]] = None,
    threads: int = 1,
) -> Forest:
    """Train a forest; identical (X, y, params) give an identical forest for any thread count."""
    matrix = _as_matrix(X)
    targets = np.asarray(y, dtype=np.float64)
    if targets.ndim != 1 or targets.size != matrix.shape[0]:
        raise DimensionMismatchError(f"{matrix.shape[0]} feature rows but {targets.size} targets")
    if not np.all(np.isfinite(targets)):
        raise NonFiniteInputError("Targets contain NaN or infinite values")
    if matrix.shape[0] < ForestConstants.MIN_TRAINING_ROWS:
        raise TooFewRowsError(matrix.shape[0], ForestConstants.MIN_TRAINING_ROWS, module="forest")

    n_features = matrix.shape[1]
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(n_features)]
    if len(names) != n_features:
        raise DimensionMismatchError(f"{len(names)} feature names for {n_features} features")
    mtry = params.resolve_mtry(n_features)

    logger.debug(
        "Fitting forest: %d trees, %d rows, %d features, mtry %d, %d thread(s)",
        params.n_trees, matrix.shape[0], n_features, mtry, threads,
    )
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        trees = list(pool.map(lambda t: _grow_tree(matrix, targets, params, mtry, t), range(params.n_trees)))

    return Forest(trees=trees, feature_names=names, n_samples=matrix.shape[0], params=params)


def _tree_apply(tree: Tree, matrix: np.ndarray) -> np.ndarray:
    """Leaf value reached by every row."""
    feature, threshold, left, right, value = tree.arrays()
    node = np.zeros(matrix.shape[0], dtype=np.int64)
    rows = np.arange(matrix.shape[0])
    active = feature[node] != ForestConstants.LEAF
    while np.any(active):
        current = node[active]
        goes_left = matrix[rows[active], feature[current]] <= threshold[current]
        node[active] = np.where(goes_left, left[current], right[current])
        active = feature[node] != ForestConstants.LEAF
    return value[node]


def predict_many(forest: Forest, X) -> np.ndarray:
    matrix = _as_matrix(X, forest.n_features)
    total = np.zeros(matrix.shape[0])
    for tree in forest.trees:
        total += _tree_apply(tree, matrix)
    return total / len(forest.trees)


def predict(forest: Forest, x) -> float:
    """Mean of the per-tree leaf values for one feature vector."""
    vector = np.asarray(x, dtype=np.float64)
    if vector.ndim != 1:
        raise DimensionMismatchError("predict expects a single feature vector")
    return float(predict_many(forest, vector[np.newaxis, :])[0])


def oob_predict(forest: Forest, X) -> np.ndarray:
    """Out-of-bag prediction per training row; NaN where a row was in every bag."""
    matrix = _as_matrix(X, forest.n_features)
    if matrix.shape[0] != forest.n_samples:
        raise DimensionMismatchError(
            f"OOB prediction needs the {forest.n_samples} training rows, got {matrix.shape[0]}"
        )
    total = np.zeros(matrix.shape[0])
    count = np.zeros(matrix.shape[0], dtype=np.int64)
    for tree in forest.trees:
        out_of_bag = ~tree.in_bag_mask(forest.n_samples)
        if not np.any(out_of_bag):
            continue
        total[out_of_bag] += _tree_apply(tree, matrix[out_of_bag])
        count[out_of_bag] += 1

    predictions = np.full(matrix.shape[0], np.nan)
    covered = count > 0
    predictions[covered] = total[covered] / count[covered]
    return predictions


def feature_importance(forest: Forest) -> dict[str, float]:
    """Total SSE reduction per feature, normalized to sum to 1 (all 0 when no tree splits)."""
    totals = np.zeros(forest.n_features)
    for tree in forest.trees:
        for feature, gain in zip(tree.feature, tree.gain):
            if feature != ForestConstants.LEAF:
                totals[feature] += gain
    grand_total = totals.sum()
    if grand_total > 0:
        totals = totals / grand_total
    return {name: float(share) for name, share in zip(forest.feature_names, totals)}
