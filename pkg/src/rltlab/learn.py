"""Quantile regression forests and boosted quantile trees.

The forest retains the full multiset of training responses in every leaf
of every tree, so any conditional quantile can be read off the weighted
empirical CDF (each tree weighs 1/B, split uniformly over its leaf).
Out-of-bag predictions reuse only the trees whose bootstrap missed a row.
The boosted variant fits shallow trees to the pinball-loss gradient with
leaf values set to leaf-local residual quantiles.

Tree growth is a single numba kernel shared by both learners; everything
is deterministic given the seed, including serialization bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings as _warnings
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .features import FEATURE_NAMES, SCHEMA_VERSION, FeatureVector
from .rules import ALL_RULES, RuleId

NO_DEPTH_LIMIT = 1 << 30


@njit(cache=True)
def _grow_tree(x, y, order, min_leaf, mtry, max_depth, seed):
    """Grow one CART regression tree by variance reduction.

    `order` is the working row-index array (bootstrap sample); it is
    partitioned in place so every leaf owns a contiguous segment.
    Returns node arrays, the leaf segment table, and the per-feature
    impurity gain.
    """
    np.random.seed(seed)
    n_rows = order.shape[0]
    d = x.shape[1]
    max_nodes = 2 * n_rows + 1
    feature = np.full(max_nodes, -1, np.int32)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int32)
    right = np.full(max_nodes, -1, np.int32)
    seg_lo = np.zeros(max_nodes, np.int64)
    seg_hi = np.zeros(max_nodes, np.int64)
    gains = np.zeros(d)

    # explicit stack of (node, lo, hi, depth)
    stack = np.zeros((max_nodes, 4), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n_rows
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    perm = np.arange(d)

    while top > 0:
        top -= 1
        node = stack[top, 0]
        lo = stack[top, 1]
        hi = stack[top, 2]
        depth = stack[top, 3]
        seg_lo[node] = lo
        seg_hi[node] = hi
        count = hi - lo

        if count < 2 * min_leaf or depth >= max_depth:
            continue
        s_all = 0.0
        s2_all = 0.0
        for i in range(lo, hi):
            v = y[order[i]]
            s_all += v
            s2_all += v * v
        parent_sse = s2_all - s_all * s_all / count
        if parent_sse <= 1e-12:
            continue

        # draw the feature subset (partial Fisher-Yates)
        for i in range(mtry):
            j = i + np.random.randint(0, d - i)
            t = perm[i]
            perm[i] = perm[j]
            perm[j] = t

        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        for fi in range(mtry):
            f = perm[fi]
            vals = np.empty(count)
            for i in range(count):
                vals[i] = x[order[lo + i], f]
            srt = np.argsort(vals, kind="mergesort")
            s_left = 0.0
            s2_left = 0.0
            for cut in range(1, count):
                v = y[order[lo + srt[cut - 1]]]
                s_left += v
                s2_left += v * v
                if cut < min_leaf or count - cut < min_leaf:
                    continue
                xa = vals[srt[cut - 1]]
                xb = vals[srt[cut]]
                if xb <= xa:
                    continue
                s_right = s_all - s_left
                s2_right = s2_all - s2_left
                sse = (s2_left - s_left * s_left / cut) + (
                    s2_right - s_right * s_right / (count - cut)
                )
                gain = parent_sse - sse
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    best_thr = 0.5 * (xa + xb)
        if best_feat < 0:
            continue

        # in-place partition of the segment
        i = lo
        k = hi - 1
        while i <= k:
            if x[order[i], best_feat] <= best_thr:
                i += 1
            else:
                t = order[i]
                order[i] = order[k]
                order[k] = t
                k -= 1
        mid = i
        feature[node] = best_feat
        threshold[node] = best_thr
        gains[best_feat] += best_gain
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack[top, 0] = n_nodes
        stack[top, 1] = lo
        stack[top, 2] = mid
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = n_nodes + 1
        stack[top, 1] = mid
        stack[top, 2] = hi
        stack[top, 3] = depth + 1
        top += 1
        n_nodes += 2

    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        seg_lo[:n_nodes],
        seg_hi[:n_nodes],
        gains,
    )


@njit(cache=True)
def _tree_leaf(feature, threshold, left, right, xrow):
    node = 0
    while feature[node] >= 0:
        if xrow[feature[node]] <= threshold[node]:
            node = left[node]
        else:
            node = right[node]
    return node


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    seg_lo: np.ndarray
    seg_hi: np.ndarray
    order: np.ndarray          # bootstrap row ids, leaf-contiguous
    gains: np.ndarray

    def leaf_of(self, xrow: np.ndarray) -> int:
        return int(_tree_leaf(self.feature, self.threshold, self.left, self.right, xrow))

    def leaf_rows(self, leaf: int) -> np.ndarray:
        return self.order[self.seg_lo[leaf]:self.seg_hi[leaf]]


@dataclass(frozen=True)
class QrfParams:
    trees: int = 500
    min_leaf: int = 5
    mtry: int | None = None        # default ceil(d / 3)
    bootstrap: bool = True
    seed: int = 0


@dataclass(frozen=True)
class QuantileForest:
    params: QrfParams
    n_features: int
    y: np.ndarray
    trees: tuple[Tree, ...]
    in_bag: np.ndarray             # (B, n_rows) bool

    @property
    def n_rows(self) -> int:
        return len(self.y)


def _resolve_mtry(params: QrfParams, d: int) -> int:
    m = params.mtry if params.mtry is not None else math.ceil(d / 3)
    return max(1, min(d, m))


def fit_qrf(x: np.ndarray, y: np.ndarray, params: QrfParams = QrfParams()) -> QuantileForest:
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, d = x.shape
    if n < 2:
        raise ValueError("need at least two rows")
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(x)):
        raise ValueError("features and targets must be finite")
    mtry = _resolve_mtry(params, d)
    trees: list[Tree] = []
    in_bag = np.zeros((params.trees, n), dtype=bool)
    for t in range(params.trees):
        rng = np.random.default_rng([params.seed, t])
        if params.bootstrap:
            rows = rng.integers(0, n, size=n)
        else:
            rows = np.arange(n)
        in_bag[t, rows] = True
        order = np.ascontiguousarray(rows, dtype=np.int64)
        kernel_seed = int(rng.integers(0, 2**31 - 1))
        f, thr, le, ri, slo, shi, gains = _grow_tree(
            x, y, order, params.min_leaf, mtry, NO_DEPTH_LIMIT, kernel_seed
        )
        trees.append(Tree(f, thr, le, ri, slo, shi, order, gains))
    return QuantileForest(params, d, y, tuple(trees), in_bag)


def _weighted_quantile(values: np.ndarray, weights: np.ndarray, tau: float) -> float:
    """Generalized inverse of the weighted empirical CDF at tau."""
    srt = np.argsort(values, kind="stable")
    v = values[srt]
    w = weights[srt]
    cdf = np.cumsum(w)
    total = cdf[-1]
    k = int(np.searchsorted(cdf, tau * total - 1e-12, side="left"))
    k = min(k, len(v) - 1)
    return float(v[k])


def _leaf_distribution(forest: QuantileForest, xrow: np.ndarray,
                       tree_ids) -> tuple[np.ndarray, np.ndarray]:
    values: list[np.ndarray] = []
    counts = np.empty(len(tree_ids))
    n_trees = len(tree_ids)
    for k, t in enumerate(tree_ids):
        tree = forest.trees[t]
        leaf = tree.leaf_of(xrow)
        rows = tree.leaf_rows(leaf)
        values.append(forest.y[rows])
        counts[k] = len(rows)
    weights = np.repeat(1.0 / (n_trees * counts), counts.astype(np.int64))
    return np.concatenate(values), weights


def predict_quantile(forest: QuantileForest, xrow: np.ndarray, tau: float) -> float:
    if not (0.0 < tau < 1.0):
        raise ValueError("tau must be in (0, 1)")
    xrow = np.asarray(xrow, dtype=np.float64)
    if xrow.shape != (forest.n_features,):
        raise ValueError("feature-vector shape mismatch")
    vals, w = _leaf_distribution(forest, xrow, range(len(forest.trees)))
    return _weighted_quantile(vals, w, tau)


def oob_predict(forest: QuantileForest, x: np.ndarray, tau: float) -> list[float | None]:
    """Per-training-row prediction from out-of-bag trees only."""
    x = np.asarray(x, dtype=np.float64)
    out: list[float | None] = []
    for i in range(forest.n_rows):
        tree_ids = np.where(~forest.in_bag[:, i])[0]
        if len(tree_ids) == 0:
            out.append(None)
            continue
        vals, w = _leaf_distribution(forest, x[i], tree_ids)
        out.append(_weighted_quantile(vals, w, tau))
    return out


def feature_importance(forest: QuantileForest) -> np.ndarray:
    """Impurity-based importance, normalized to sum 1; uniform (with a
    warning) when the forest never split."""
    total = np.zeros(forest.n_features)
    for tree in forest.trees:
        total += tree.gains
    s = total.sum()
    if s <= 0:
        _warnings.warn("forest has no splits; importance is uniform")
        return np.full(forest.n_features, 1.0 / forest.n_features)
    return total / s


# ---------------------------------------------------------------------------
# Stochastic gradient boosting for quantile regression
# ---------------------------------------------------------------------------


def pinball_loss(y: np.ndarray, pred: np.ndarray, tau: float) -> float:
    y = np.asarray(y, dtype=float)
    pred = np.asarray(pred, dtype=float)
    diff = y - pred
    return float(np.mean((tau - (diff < 0).astype(float)) * diff))


def empirical_quantile(y: np.ndarray, tau: float) -> float:
    """inf{v : F_hat(v) >= tau} on the sample."""
    ys = np.sort(np.asarray(y, dtype=float))
    k = int(math.ceil(tau * len(ys))) - 1
    return float(ys[max(k, 0)])


@dataclass(frozen=True)
class SgbParams:
    stages: int = 200
    shrinkage: float = 0.1
    subsample: float = 0.5
    max_depth: int = 4
    min_leaf: int = 5
    seed: int = 0


@dataclass(frozen=True)
class SgbStage:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_value: np.ndarray


@dataclass(frozen=True)
class BoostedQuantileModel:
    params: SgbParams
    tau: float
    f0: float
    n_features: int
    stages: tuple[SgbStage, ...]

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = np.full(x.shape[0], self.f0)
        for st in self.stages:
            for i in range(x.shape[0]):
                leaf = _tree_leaf(st.feature, st.threshold, st.left, st.right, x[i])
                out[i] += self.params.shrinkage * st.leaf_value[leaf]
        return out


def fit_sgbqr(x: np.ndarray, y: np.ndarray, tau: float,
              params: SgbParams = SgbParams()) -> BoostedQuantileModel:
    """Stagewise trees on the pinball-loss gradient; each stage is fit on
    a random subsample and its leaves take the leaf-local residual
    tau-quantile, scaled by the shrinkage."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, d = x.shape
    if n < 2:
        raise ValueError("need at least two rows")
    f0 = empirical_quantile(y, tau)
    pred = np.full(n, f0)
    stages: list[SgbStage] = []
    rng = np.random.default_rng([params.seed])
    n_sub = max(2, int(round(params.subsample * n)))
    for m in range(params.stages):
        sub = np.sort(rng.choice(n, size=n_sub, replace=False))
        resid = y[sub] - pred[sub]
        grad = np.where(resid < 0, tau - 1.0, tau)  # negative gradient
        order = np.ascontiguousarray(np.arange(n_sub), dtype=np.int64)
        kernel_seed = int(rng.integers(0, 2**31 - 1))
        f, thr, le, ri, slo, shi, _ = _grow_tree(
            x[sub], grad, order, params.min_leaf, d, params.max_depth, kernel_seed
        )
        leaf_value = np.zeros(len(f))
        for node in range(len(f)):
            if f[node] < 0 and shi[node] > slo[node]:
                rows = order[slo[node]:shi[node]]
                leaf_value[node] = empirical_quantile(resid[rows], tau)
        stages.append(SgbStage(f, thr, le, ri, leaf_value))
        for i in range(n):
            leaf = _tree_leaf(f, thr, le, ri, x[i])
            pred[i] += params.shrinkage * leaf_value[leaf]
    return BoostedQuantileModel(params, tau, f0, d, tuple(stages))


# ---------------------------------------------------------------------------
# Datasets, stratified splitting, the per-rule selector
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DataRow:
    instance: str
    family: str
    features: np.ndarray                # (len(FEATURE_NAMES),)
    targets: dict[RuleId, float]        # normalized pace per rule


@dataclass(frozen=True)
class Dataset:
    rows: tuple[DataRow, ...]

    def __len__(self) -> int:
        return len(self.rows)

    def feature_matrix(self) -> np.ndarray:
        return np.vstack([r.features for r in self.rows])

    def target_vector(self, rule: RuleId) -> np.ndarray:
        return np.array([r.targets[rule] for r in self.rows])


def stratified_split(dataset: Dataset, ratio: float = 0.7, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Per-family split keeping round(ratio * k) rows in train (half up);
    singleton families go to train with a warning."""
    by_family: dict[str, list[DataRow]] = {}
    for row in dataset.rows:
        by_family.setdefault(row.family, []).append(row)
    rng = np.random.default_rng([seed])
    train: list[DataRow] = []
    test: list[DataRow] = []
    for family in sorted(by_family):
        rows = by_family[family]
        k = len(rows)
        if k == 1:
            _warnings.warn(f"family {family!r} has a single instance; kept in train")
            train.extend(rows)
            continue
        n_train = int(math.floor(ratio * k + 0.5))
        perm = rng.permutation(k)
        train.extend(rows[i] for i in sorted(perm[:n_train]))
        test.extend(rows[i] for i in sorted(perm[n_train:]))
    return Dataset(tuple(train)), Dataset(tuple(test))


def schema_hash() -> str:
    payload = SCHEMA_VERSION + "\n" + "\n".join(FEATURE_NAMES)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Selector:
    models: dict[RuleId, QuantileForest]
    tau: float
    schema: str
    master_seed: int

    def predictions(self, features: FeatureVector | np.ndarray) -> dict[RuleId, float]:
        if isinstance(features, FeatureVector):
            features = features.as_array()
        if self.schema != schema_hash():
            raise ValueError("selector was trained with a different feature schema")
        return {r: predict_quantile(self.models[r], features, self.tau) for r in ALL_RULES}


def train_selector(train: Dataset, tau: float = 0.3,
                   params: QrfParams = QrfParams(), master_seed: int = 0) -> Selector:
    if len(train) == 0:
        raise ValueError("empty training set")
    x = train.feature_matrix()
    models: dict[RuleId, QuantileForest] = {}
    for r in ALL_RULES:
        rule_params = replace(params, seed=int(np.random.default_rng(
            [master_seed, r.order]).integers(0, 2**31 - 1)))
        models[r] = fit_qrf(x, train.target_vector(r), rule_params)
    return Selector(models, tau, schema_hash(), master_seed)


def select_rule(selector: Selector, features: FeatureVector | np.ndarray) -> RuleId:
    preds = selector.predictions(features)
    best = ALL_RULES[0]
    for r in ALL_RULES[1:]:
        if preds[r] > preds[best]:
            best = r
    return best


# ---------------------------------------------------------------------------
# Serialization (versioned JSON, byte-stable for a fixed seed)
# ---------------------------------------------------------------------------

FORMAT_VERSION = "rltlab-selector-1"


def _tree_to_obj(tree: Tree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "seg_lo": tree.seg_lo.tolist(),
        "seg_hi": tree.seg_hi.tolist(),
        "order": tree.order.tolist(),
        "gains": tree.gains.tolist(),
    }


def _tree_from_obj(obj: dict) -> Tree:
    return Tree(
        feature=np.array(obj["feature"], dtype=np.int32),
        threshold=np.array(obj["threshold"], dtype=np.float64),
        left=np.array(obj["left"], dtype=np.int32),
        right=np.array(obj["right"], dtype=np.int32),
        seg_lo=np.array(obj["seg_lo"], dtype=np.int64),
        seg_hi=np.array(obj["seg_hi"], dtype=np.int64),
        order=np.array(obj["order"], dtype=np.int64),
        gains=np.array(obj["gains"], dtype=np.float64),
    )


def forest_to_obj(forest: QuantileForest) -> dict:
    return {
        "params": {
            "trees": forest.params.trees,
            "min_leaf": forest.params.min_leaf,
            "mtry": forest.params.mtry,
            "bootstrap": forest.params.bootstrap,
            "seed": forest.params.seed,
        },
        "n_features": forest.n_features,
        "y": forest.y.tolist(),
        "trees": [_tree_to_obj(t) for t in forest.trees],
    }


def forest_from_obj(obj: dict) -> QuantileForest:
    params = QrfParams(**obj["params"])
    trees = tuple(_tree_from_obj(t) for t in obj["trees"])
    y = np.array(obj["y"], dtype=np.float64)
    in_bag = np.zeros((len(trees), len(y)), dtype=bool)
    for t, tree in enumerate(trees):
        in_bag[t, tree.order] = True
    return QuantileForest(params, obj["n_features"], y, trees, in_bag)


def selector_to_json(selector: Selector) -> str:
    obj = {
        "format": FORMAT_VERSION,
        "tau": selector.tau,
        "schema": selector.schema,
        "master_seed": selector.master_seed,
        "feature_names": list(FEATURE_NAMES),
        "models": {r.value: forest_to_obj(selector.models[r]) for r in ALL_RULES},
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def selector_from_json(text: str) -> Selector:
    obj = json.loads(text)
    if obj.get("format") != FORMAT_VERSION:
        raise ValueError(f"unsupported selector format {obj.get('format')!r}")
    models = {RuleId.from_name(name): forest_from_obj(m) for name, m in obj["models"].items()}
    return Selector(models, obj["tau"], obj["schema"], obj["master_seed"])
