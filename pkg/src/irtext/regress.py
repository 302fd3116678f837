"""From-scratch regressors mapping feature vectors to a latent trait:
CART decision tree, bagged random forest, and least-squares linear model."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .backends import kernels


class DimensionMismatchError(ValueError):
    """Feature dimensions disagree between data and model."""


# Hyperparameter grids used for model selection (absolute counts for the
# tree's max_features; None means all features).
RF_N_ESTIMATORS_GRID = (10, 25, 50, 100, 150, 200, 250)
RF_MAX_DEPTH_GRID = (2, 5, 10, 15, 25, 50)
DT_MAX_FEATURES_GRID = (1, 2, 3, 4, 5, None)
DT_MAX_DEPTH_GRID = (2, 5, 10, 20, 50)
LR_NORMALIZE_GRID = (True, False)


@dataclass(frozen=True)
class HyperParams:
    """One model configuration: kind plus the grid axes that apply to it."""

    kind: str
    n_estimators: int | None = None
    max_depth: int | None = None
    max_features: int | None = None
    normalize: bool | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("rf", "dt", "lr"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "rf" and (self.n_estimators is None or self.max_depth is None):
            raise ValueError("rf requires n_estimators and max_depth")
        if self.kind == "dt" and self.max_depth is None:
            raise ValueError("dt requires max_depth")
        if self.kind == "lr" and self.normalize is None:
            raise ValueError("lr requires normalize")

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        for key in ("n_estimators", "max_depth", "max_features", "normalize"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "HyperParams":
        return cls(
            kind=obj["kind"],
            n_estimators=obj.get("n_estimators"),
            max_depth=obj.get("max_depth"),
            max_features=obj.get("max_features"),
            normalize=obj.get("normalize"),
        )


def default_grid(kind: str) -> list[HyperParams]:
    """The model-selection grid for one model family."""
    if kind == "rf":
        return [
            HyperParams(kind="rf", n_estimators=n, max_depth=d)
            for n in RF_N_ESTIMATORS_GRID
            for d in RF_MAX_DEPTH_GRID
        ]
    if kind == "dt":
        return [
            HyperParams(kind="dt", max_features=f, max_depth=d)
            for f in DT_MAX_FEATURES_GRID
            for d in DT_MAX_DEPTH_GRID
        ]
    if kind == "lr":
        return [HyperParams(kind="lr", normalize=n) for n in LR_NORMALIZE_GRID]
    raise ValueError(f"unknown model kind {kind!r}")


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature, threshold, children) or leaf (prediction)."""

    prediction: float | None = None
    feature_index: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    def is_leaf(self) -> bool:
        return self.prediction is not None


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[TreeNode, ...]
    n_estimators: int
    max_depth: int
    rng_seed: int
    n_features: int


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float
    normalize: bool
    feature_means: np.ndarray | None = None
    feature_stds: np.ndarray | None = None


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Independent per-tree stream; forest output is order-free by design."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tree_index,)))


def _sse(y: np.ndarray) -> float:
    s = float(np.sum(y))
    sq = float(np.sum(y * y))
    return sq - s * s / y.shape[0]


def _build_tree(
    X: np.ndarray,
    y: np.ndarray,
    depth: int,
    max_depth: int,
    max_features: int | None,
    rng: np.random.Generator,
) -> TreeNode:
    n, p = X.shape
    if depth >= max_depth or n <= 1:
        return TreeNode(prediction=float(np.mean(y)))
    parent_sse = _sse(y)
    if max_features is None or max_features >= p:
        candidates = np.arange(p)
    else:
        candidates = np.sort(rng.choice(p, size=max_features, replace=False))
    best_gain = 0.0
    best_feature = -1
    best_thr = 0.0
    for f in candidates:
        found, thr, children_sse = kernels.best_split(
            np.ascontiguousarray(X[:, f]), y
        )
        if not found:
            continue
        gain = parent_sse - children_sse
        if gain > best_gain:
            best_gain = gain
            best_feature = int(f)
            best_thr = float(thr)
    if best_feature < 0:
        return TreeNode(prediction=float(np.mean(y)))
    mask = X[:, best_feature] <= best_thr
    left = _build_tree(X[mask], y[mask], depth + 1, max_depth, max_features, rng)
    right = _build_tree(X[~mask], y[~mask], depth + 1, max_depth, max_features, rng)
    return TreeNode(
        feature_index=best_feature, threshold=best_thr, left=left, right=right
    )


def _check_xy(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatchError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise DimensionMismatchError("X must be non-empty")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"X has {X.shape[0]} rows but y has {y.shape[0]} targets"
        )
    return X, y


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> TreeNode:
    """Greedy CART regression tree minimizing summed child variance.

    Split thresholds are midpoints between consecutive distinct sorted values;
    candidate features at each node are a uniform sample of size max_features
    (None = all); leaves predict the mean target.
    """
    X, y = _check_xy(X, y)
    if rng is None:
        rng = np.random.default_rng(0)
    return _build_tree(X, y, 0, max_depth, max_features, rng)


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    params: HyperParams,
    seed: int,
    bootstrap: bool = True,
) -> ForestModel:
    """Bagged forest: per-tree bootstrap rows, per-node feature sampling of
    ceil(sqrt(p)) candidates, prediction by arithmetic mean over trees.

    The bootstrap flag is a test hook; disabling it with one estimator
    reduces the forest to a single fit_tree call.
    """
    if params.kind != "rf":
        raise ValueError(f"fit_forest needs rf params, got {params.kind!r}")
    X, y = _check_xy(X, y)
    n, p = X.shape
    max_features = math.isqrt(p)
    if max_features * max_features < p:
        max_features += 1
    trees = []
    for t in range(params.n_estimators):
        rng = tree_rng(seed, t)
        if bootstrap:
            rows = rng.integers(0, n, size=n)
            Xt, yt = X[rows], y[rows]
        else:
            Xt, yt = X, y
        trees.append(_build_tree(Xt, yt, 0, params.max_depth, max_features, rng))
    return ForestModel(
        trees=tuple(trees),
        n_estimators=params.n_estimators,
        max_depth=params.max_depth,
        rng_seed=seed,
        n_features=p,
    )


def fit_linear(X: np.ndarray, y: np.ndarray, normalize: bool) -> LinearModel:
    """Least squares via normal equations with 1e-8 ridge jitter on the Gram
    diagonal; optional per-feature z-scoring stored for prediction."""
    X, y = _check_xy(X, y)
    means = stds = None
    Xw = X
    if normalize:
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        safe = np.where(stds > 0.0, stds, 1.0)
        Xw = np.where(stds > 0.0, (X - means) / safe, 0.0)
    ones = np.ones((Xw.shape[0], 1))
    A = np.hstack([Xw, ones])
    gram = A.T @ A
    gram[np.diag_indices_from(gram)] += 1e-8
    coef = np.linalg.solve(gram, A.T @ y)
    return LinearModel(
        weights=coef[:-1],
        intercept=float(coef[-1]),
        normalize=normalize,
        feature_means=means,
        feature_stds=stds,
    )


def _predict_tree(node: TreeNode, x: np.ndarray) -> float:
    while not node.is_leaf():
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node.prediction


def predict(model, x: np.ndarray) -> float:
    """Predict one feature vector with a tree, forest, or linear model."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(model, TreeNode):
        return _predict_tree(model, x)
    if isinstance(model, ForestModel):
        if x.shape[0] != model.n_features:
            raise DimensionMismatchError(
                f"expected {model.n_features} features, got {x.shape[0]}"
            )
        return float(np.mean([_predict_tree(t, x) for t in model.trees]))
    if isinstance(model, LinearModel):
        if x.shape[0] != model.weights.shape[0]:
            raise DimensionMismatchError(
                f"expected {model.weights.shape[0]} features, got {x.shape[0]}"
            )
        if model.normalize:
            safe = np.where(model.feature_stds > 0.0, model.feature_stds, 1.0)
            x = np.where(model.feature_stds > 0.0, (x - model.feature_means) / safe, 0.0)
        return float(x @ model.weights + model.intercept)
    raise TypeError(f"unknown model type {type(model).__name__}")


def predict_many(model, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.array([predict(model, X[i]) for i in range(X.shape[0])])


def fit_model(X: np.ndarray, y: np.ndarray, params: HyperParams, seed: int):
    """Train whichever model family the hyperparameters describe."""
    if params.kind == "rf":
        return fit_forest(X, y, params, seed)
    if params.kind == "dt":
        return fit_tree(
            X, y, max_depth=params.max_depth, max_features=params.max_features,
            rng=tree_rng(seed, 0),
        )
    return fit_linear(X, y, normalize=params.normalize)


def _tree_to_dict(node: TreeNode) -> dict:
    if node.is_leaf():
        return {"value": node.prediction}
    return {
        "feature": node.feature_index,
        "threshold": node.threshold,
        "left": _tree_to_dict(node.left),
        "right": _tree_to_dict(node.right),
    }


def _tree_from_dict(obj: dict) -> TreeNode:
    if "value" in obj:
        return TreeNode(prediction=float(obj["value"]))
    return TreeNode(
        feature_index=int(obj["feature"]),
        threshold=float(obj["threshold"]),
        left=_tree_from_dict(obj["left"]),
        right=_tree_from_dict(obj["right"]),
    )


def write_model(
    model,
    params: HyperParams,
    seed: int,
    target: str,
    vocab_fingerprint: str,
    path: str | Path,
) -> None:
    """Model file: full structure plus hyperparameters, seed, target name and
    the fingerprint of the vocabulary it was trained against."""
    if isinstance(model, TreeNode):
        payload = {"tree": _tree_to_dict(model)}
    elif isinstance(model, ForestModel):
        payload = {
            "forest": {
                "trees": [_tree_to_dict(t) for t in model.trees],
                "n_features": model.n_features,
            }
        }
    elif isinstance(model, LinearModel):
        payload = {
            "linear": {
                "weights": [float(w) for w in model.weights],
                "intercept": model.intercept,
                "normalize": model.normalize,
                "means": None
                if model.feature_means is None
                else [float(v) for v in model.feature_means],
                "stds": None
                if model.feature_stds is None
                else [float(v) for v in model.feature_stds],
            }
        }
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    obj = {
        "hyperparams": params.to_dict(),
        "seed": seed,
        "target": target,
        "vocab_fingerprint": vocab_fingerprint,
        "model": payload,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, sort_keys=True)
        f.write("\n")


def read_model(path: str | Path):
    """Returns (model, params, seed, target, vocab_fingerprint)."""
    with open(path, encoding="utf-8") as f:
        obj = json.load(f)
    params = HyperParams.from_dict(obj["hyperparams"])
    payload = obj["model"]
    if "tree" in payload:
        model = _tree_from_dict(payload["tree"])
    elif "forest" in payload:
        model = ForestModel(
            trees=tuple(_tree_from_dict(t) for t in payload["forest"]["trees"]),
            n_estimators=params.n_estimators,
            max_depth=params.max_depth,
            rng_seed=obj["seed"],
            n_features=int(payload["forest"]["n_features"]),
        )
    else:
        lin = payload["linear"]
        model = LinearModel(
            weights=np.array(lin["weights"], dtype=np.float64),
            intercept=float(lin["intercept"]),
            normalize=bool(lin["normalize"]),
            feature_means=None if lin["means"] is None else np.array(lin["means"]),
            feature_stds=None if lin["stds"] is None else np.array(lin["stds"]),
        )
    return model, params, obj["seed"], obj["target"], obj["vocab_fingerprint"]
