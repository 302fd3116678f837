"""Experimental protocol: two-stage splits, k-fold grid search over models,
encodings and vocabulary sizes, and the regression/classification metrics."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .irt import PredictionTrace, TraceStep
from .regress import HyperParams, fit_model, predict_many
from .textpipe import (
    Encoding,
    build_vocabulary_for_questions,
    featurize_questions,
)
from .types import DataValidationError, InteractionLog, Question, QuestionBank


@dataclass(frozen=True)
class SplitSpec:
    """Ratios and seed for the two-stage experiment split."""

    interaction_split_ratio: float = 0.7
    question_split_ratio: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("interaction_split_ratio", "question_split_ratio"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {v}")


@dataclass(frozen=True)
class ExperimentDatasets:
    ds_gte: InteractionLog
    ds_val: InteractionLog
    ds_train: frozenset[str]
    ds_test: frozenset[str]


@dataclass(frozen=True)
class ClassificationReport:
    """Accuracy plus per-class precision/recall; precision is None when the
    class is never predicted."""

    accuracy: float
    precision_correct: float | None
    recall_correct: float
    precision_wrong: float | None
    recall_wrong: float

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision_correct": self.precision_correct,
            "recall_correct": self.recall_correct,
            "precision_wrong": self.precision_wrong,
            "recall_wrong": self.recall_wrong,
        }


def _stable_sub_rng(seed: int, salt: str) -> np.random.Generator:
    """Independent stream derived from the seed and a string salt.

    Hash-based so per-item streams do not depend on iteration order.
    """
    digest = hashlib.sha256(salt.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "big")
    return np.random.default_rng(np.random.SeedSequence((seed, key)))


def split_experiment(
    log: InteractionLog, bank: QuestionBank, spec: SplitSpec
) -> ExperimentDatasets:
    """Per-item 70:30 interaction split (>= 1 record kept on the estimation
    side) plus an independent 80:20 split of the question ids."""
    rows_of_item: dict[str, list[int]] = {item_id: [] for item_id in bank.questions}
    for i, r in enumerate(log):
        if r.item_id not in rows_of_item:
            raise DataValidationError(
                f"interaction references item {r.item_id!r} not in bank"
            )
        rows_of_item[r.item_id].append(i)

    short = sorted(iid for iid, rows in rows_of_item.items() if len(rows) < 2)
    if short:
        raise DataValidationError(
            f"items need >= 2 interactions to stratify, offending: {short[:10]}"
        )

    gte_rows: list[int] = []
    val_rows: list[int] = []
    for item_id in bank.questions:
        rows = np.array(rows_of_item[item_id])
        rng = _stable_sub_rng(spec.seed, f"interaction-split/{item_id}")
        rng.shuffle(rows)
        n = rows.shape[0]
        n_gte = max(1, int(math.floor(spec.interaction_split_ratio * n + 1e-9)))
        gte_rows.extend(rows[:n_gte].tolist())
        val_rows.extend(rows[n_gte:].tolist())
    gte_rows.sort()
    val_rows.sort()

    question_ids = sorted(bank.questions)
    rng = _stable_sub_rng(spec.seed, "question-split")
    order = np.array(question_ids, dtype=object)
    rng.shuffle(order)
    n_train = int(math.floor(spec.question_split_ratio * len(order) + 1e-9))
    ds_train = frozenset(order[:n_train].tolist())
    ds_test = frozenset(order[n_train:].tolist())

    return ExperimentDatasets(
        ds_gte=InteractionLog(tuple(log.records[i] for i in gte_rows)),
        ds_val=InteractionLog(tuple(log.records[i] for i in val_rows)),
        ds_train=ds_train,
        ds_test=ds_test,
    )


@dataclass(frozen=True)
class GridConfig:
    """One grid-search cell: model hyperparameters plus featurization."""

    params: HyperParams
    encoding: Encoding
    n_w: int


@dataclass(frozen=True)
class GridResult:
    config: GridConfig
    mean_cv_mse: float
    fold_mses: tuple[float, ...]


def make_folds(n_rows: int, k: int, seed: int) -> list[np.ndarray]:
    """Shuffle rows once, partition into k near-equal folds."""
    if k > n_rows:
        raise ValueError(f"k={k} exceeds number of rows {n_rows}")
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    order = np.arange(n_rows)
    np.random.default_rng(np.random.SeedSequence((seed, 0xF01D))).shuffle(order)
    base = n_rows // k
    extra = n_rows % k
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(np.sort(order[start : start + size]))
        start += size
    return folds


def cv_mse(
    X: np.ndarray,
    y: np.ndarray,
    params: HyperParams,
    folds: Sequence[np.ndarray],
    seed: int,
) -> tuple[float, tuple[float, ...]]:
    """Mean held-out MSE of one configuration over fixed folds."""
    n = X.shape[0]
    fold_mses = []
    for fold in folds:
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        model = fit_model(X[mask], y[mask], params, seed)
        pred = predict_many(model, X[fold])
        fold_mses.append(float(np.mean((pred - y[fold]) ** 2)))
    return float(np.mean(fold_mses)), tuple(fold_mses)


def kfold_grid_search(
    questions: Sequence[Question],
    y: np.ndarray,
    grid: Sequence[GridConfig],
    k: int = 5,
    seed: int = 0,
) -> list[GridResult]:
    """Rank configurations by mean CV MSE over k folds shared by every config.

    Featurization depends on (encoding, n_w), so the corpus is re-featurized
    once per distinct pair in the outer loop.
    """
    y = np.asarray(y, dtype=np.float64)
    if len(questions) != y.shape[0]:
        raise ValueError("questions and targets must align")
    folds = make_folds(len(questions), k, seed)
    features: dict[tuple[Encoding, int], np.ndarray] = {}
    results: list[GridResult] = []
    for config in grid:
        key = (config.encoding, config.n_w)
        if key not in features:
            vocab = build_vocabulary_for_questions(
                questions, config.encoding, config.n_w
            )
            features[key] = featurize_questions(questions, config.encoding, vocab)
        mean_mse, fold_mses = cv_mse(features[key], y, config.params, folds, seed)
        results.append(
            GridResult(config=config, mean_cv_mse=mean_mse, fold_mses=fold_mses)
        )
    order = sorted(range(len(results)), key=lambda i: (results[i].mean_cv_mse, i))
    return [results[i] for i in order]


def regression_metrics(
    y_true: np.ndarray, y_pred: np.ndarray, trait_range: tuple[float, float]
) -> dict[str, float]:
    """MSE, RMSE, MAE plus the same errors relative to the trait range width."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ValueError("y_true and y_pred must be equal-length and non-empty")
    lo, hi = trait_range
    width = hi - lo
    if width <= 0:
        raise ValueError(f"degenerate trait range ({lo}, {hi})")
    err = y_pred - y_true
    mse = float(np.mean(err * err))
    rmse = math.sqrt(mse)
    mae = float(np.mean(np.abs(err)))
    return {
        "mse": mse,
        "rmse": rmse,
        "mae": mae,
        "relative_rmse": rmse / width,
        "relative_mae": mae / width,
    }


def classification_report(trace: PredictionTrace) -> ClassificationReport:
    """Confusion-matrix metrics with the correct answer as positive class."""
    if len(trace) == 0:
        raise ValueError("classification_report requires a non-empty trace")
    tp = sum(1 for s in trace if s.predicted and s.actual)
    fp = sum(1 for s in trace if s.predicted and not s.actual)
    tn = sum(1 for s in trace if not s.predicted and not s.actual)
    fn = sum(1 for s in trace if not s.predicted and s.actual)
    total = tp + fp + tn + fn
    n_correct = tp + fn
    n_wrong = fp + tn
    return ClassificationReport(
        accuracy=(tp + tn) / total,
        precision_correct=tp / (tp + fp) if (tp + fp) > 0 else None,
        recall_correct=tp / n_correct if n_correct > 0 else 0.0,
        precision_wrong=tn / (tn + fn) if (tn + fn) > 0 else None,
        recall_wrong=tn / n_wrong if n_wrong > 0 else 0.0,
    )


def majority_class(train_actuals: Sequence[bool]) -> bool:
    """The globally more frequent class; ties predict correct."""
    if len(train_actuals) == 0:
        raise ValueError("majority baseline requires training actuals")
    n_correct = sum(1 for v in train_actuals if v)
    return n_correct >= len(train_actuals) - n_correct


def majority_baseline(
    train_actuals: Sequence[bool], eval_actuals: Sequence[bool]
) -> PredictionTrace:
    """Trace predicting the training-side majority class at every step."""
    majority = majority_class(train_actuals)
    rate = sum(1 for v in train_actuals if v) / len(train_actuals)
    steps = tuple(
        TraceStep(
            item_id=str(i),
            p=rate,
            predicted=majority,
            actual=actual,
            theta_before=0.0,
            theta_after=0.0,
        )
        for i, actual in enumerate(eval_actuals)
    )
    return PredictionTrace(steps)


def write_grid_report(results: Sequence[GridResult], path: str | Path) -> None:
    """Grid-search CSV: model,encoding,n_w,params_json,mean_cv_mse,fold_mses."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(
            ["model", "encoding", "n_w", "params_json", "mean_cv_mse", "fold_mses"]
        )
        for r in results:
            writer.writerow(
                [
                    r.config.params.kind,
                    r.config.encoding.value,
                    r.config.n_w,
                    json.dumps(r.config.params.to_dict(), sort_keys=True),
                    repr(r.mean_cv_mse),
                    json.dumps([round(v, 12) for v in r.fold_mses]),
                ]
            )


def write_metrics_report(
    metrics: dict[str, float], trait_range: tuple[float, float], path: str | Path
) -> None:
    obj = dict(metrics)
    obj["trait_range"] = [trait_range[0], trait_range[1]]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, sort_keys=True)
        f.write("\n")
