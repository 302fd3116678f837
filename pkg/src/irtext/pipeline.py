"""End-to-end experiment orchestration over a self-describing run directory.

Each stage reads and writes files under the run directory, so running stages
individually through the CLI composes to exactly the same artifacts as one
``pipeline`` invocation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dataio
from .evaluate import (
    GridConfig,
    SplitSpec,
    classification_report,
    kfold_grid_search,
    majority_baseline,
    regression_metrics,
    split_experiment,
    write_grid_report,
)
from .irt import (
    TRACE_FIELDS,
    CalibrationResult,
    IrtConfig,
    PredictionTrace,
    TraceStep,
    calibrate,
    predict_performance,
    predict_with_skill_side_channel,
    read_calibration,
    write_calibration,
    write_trace,
)
from .regress import HyperParams, fit_model, predict_many, read_model, write_model
from .textpipe import (
    Encoding,
    build_vocabulary_for_questions,
    featurize_questions,
    read_vocabulary,
    write_vocabulary,
)
from .types import InteractionLog, ItemParams, QuestionBank, filter_first_timers, filter_min_support

TARGETS = ("difficulty", "discrimination")


@dataclass(frozen=True)
class GridSpec:
    """Model-selection search space; the full published grids are larger and
    can be supplied through the config file."""

    k: int = 5
    encodings: tuple[str, ...] = tuple(e.value for e in Encoding)
    n_w: tuple[int, ...] = (100, 500)
    rf_n_estimators: tuple[int, ...] = (50, 100, 250)
    rf_max_depth: tuple[int, ...] = (10, 25, 50)
    dt_max_depth: tuple[int, ...] = (10, 50)
    dt_max_features: tuple[int | None, ...] = (None,)
    lr_normalize: tuple[bool, ...] = (True, False)
    models: tuple[str, ...] = ("rf", "dt", "lr")

    def configs(self) -> list[GridConfig]:
        params: list[HyperParams] = []
        if "rf" in self.models:
            params += [
                HyperParams(kind="rf", n_estimators=n, max_depth=d)
                for n in self.rf_n_estimators
                for d in self.rf_max_depth
            ]
        if "dt" in self.models:
            params += [
                HyperParams(kind="dt", max_depth=d, max_features=f)
                for f in self.dt_max_features
                for d in self.dt_max_depth
            ]
        if "lr" in self.models:
            params += [HyperParams(kind="lr", normalize=n) for n in self.lr_normalize]
        return [
            GridConfig(params=p, encoding=Encoding(enc), n_w=nw)
            for enc in self.encodings
            for nw in self.n_w
            for p in params
        ]


@dataclass(frozen=True)
class RunConfig:
    interactions: str = ""
    questions: str = ""
    out_dir: str = "run"
    min_students: int = 1
    interaction_split_ratio: float = 0.7
    question_split_ratio: float = 0.8
    threshold: float = 0.5
    seed: int = 0
    workers: int = 1
    irt: IrtConfig = field(default_factory=IrtConfig)
    grid: GridSpec = field(default_factory=GridSpec)

    def to_dict(self) -> dict:
        # out_dir is deliberately not part of the snapshot so reruns into
        # different directories stay byte-identical
        return {
            "interactions": self.interactions,
            "questions": self.questions,
            "min_students": self.min_students,
            "interaction_split_ratio": self.interaction_split_ratio,
            "question_split_ratio": self.question_split_ratio,
            "threshold": self.threshold,
            "seed": self.seed,
            "workers": self.workers,
            "irt": {
                "theta_bounds": list(self.irt.theta_bounds),
                "b_bounds": list(self.irt.b_bounds),
                "a_bounds": list(self.irt.a_bounds),
                "max_rounds": self.irt.max_rounds,
                "tolerance": self.irt.tolerance,
                "grid_resolution": self.irt.grid_resolution,
            },
            "grid": {
                "k": self.grid.k,
                "encodings": list(self.grid.encodings),
                "n_w": list(self.grid.n_w),
                "rf_n_estimators": list(self.grid.rf_n_estimators),
                "rf_max_depth": list(self.grid.rf_max_depth),
                "dt_max_depth": list(self.grid.dt_max_depth),
                "dt_max_features": list(self.grid.dt_max_features),
                "lr_normalize": list(self.grid.lr_normalize),
                "models": list(self.grid.models),
            },
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        cfg = cls()
        irt_obj = obj.get("irt", {})
        grid_obj = obj.get("grid", {})
        irt = IrtConfig(
            theta_bounds=tuple(irt_obj.get("theta_bounds", cfg.irt.theta_bounds)),
            b_bounds=tuple(irt_obj.get("b_bounds", cfg.irt.b_bounds)),
            a_bounds=tuple(irt_obj.get("a_bounds", cfg.irt.a_bounds)),
            max_rounds=irt_obj.get("max_rounds", cfg.irt.max_rounds),
            tolerance=irt_obj.get("tolerance", cfg.irt.tolerance),
            grid_resolution=irt_obj.get("grid_resolution", cfg.irt.grid_resolution),
        )
        grid = GridSpec(
            k=grid_obj.get("k", cfg.grid.k),
            encodings=tuple(grid_obj.get("encodings", cfg.grid.encodings)),
            n_w=tuple(grid_obj.get("n_w", cfg.grid.n_w)),
            rf_n_estimators=tuple(grid_obj.get("rf_n_estimators", cfg.grid.rf_n_estimators)),
            rf_max_depth=tuple(grid_obj.get("rf_max_depth", cfg.grid.rf_max_depth)),
            dt_max_depth=tuple(grid_obj.get("dt_max_depth", cfg.grid.dt_max_depth)),
            dt_max_features=tuple(grid_obj.get("dt_max_features", cfg.grid.dt_max_features)),
            lr_normalize=tuple(grid_obj.get("lr_normalize", cfg.grid.lr_normalize)),
            models=tuple(grid_obj.get("models", cfg.grid.models)),
        )
        return cls(
            interactions=obj.get("interactions", cfg.interactions),
            questions=obj.get("questions", cfg.questions),
            out_dir=obj.get("out_dir", cfg.out_dir),
            min_students=obj.get("min_students", cfg.min_students),
            interaction_split_ratio=obj.get(
                "interaction_split_ratio", cfg.interaction_split_ratio
            ),
            question_split_ratio=obj.get(
                "question_split_ratio", cfg.question_split_ratio
            ),
            threshold=obj.get("threshold", cfg.threshold),
            seed=obj.get("seed", cfg.seed),
            workers=obj.get("workers", cfg.workers),
            irt=irt,
            grid=grid,
        )


class RunPaths:
    """Canonical artifact names inside one run directory."""

    def __init__(self, run_dir: str | Path):
        self.run_dir = Path(run_dir)

    def __getattr__(self, name: str) -> Path:
        names = {
            "config": "config.json",
            "filtered": "filtered.csv",
            "ds_gte": "ds_gte.csv",
            "ds_val": "ds_val.csv",
            "question_split": "question_split.json",
            "calibration": "calibration.json",
            "selection": "selection.json",
            "estimates": "estimates.json",
            "report": "report.json",
        }
        if name in names:
            return self.run_dir / names[name]
        raise AttributeError(name)

    def grid_report(self, target: str) -> Path:
        return self.run_dir / f"grid_{target}.csv"

    def vocab(self, target: str) -> Path:
        return self.run_dir / f"vocab_{target}.json"

    def model(self, target: str) -> Path:
        return self.run_dir / f"model_{target}.json"

    def trace(self, experiment: int, source: str) -> Path:
        return self.run_dir / f"trace_exp{experiment}_{source}.csv"


def stage_filter(config: RunConfig, paths: RunPaths) -> InteractionLog:
    """First-timer filtering then minimum item support."""
    log = dataio.read_interactions(config.interactions)
    log = filter_first_timers(log)
    log = filter_min_support(log, config.min_students)
    dataio.write_interactions(log, paths.filtered)
    return log


def stage_split(config: RunConfig, paths: RunPaths) -> None:
    log = dataio.read_interactions(paths.filtered)
    bank = dataio.read_question_bank(config.questions)
    log.check_joinable(bank)
    spec = SplitSpec(
        interaction_split_ratio=config.interaction_split_ratio,
        question_split_ratio=config.question_split_ratio,
        seed=config.seed,
    )
    ds = split_experiment(log, bank, spec)
    dataio.write_interactions(ds.ds_gte, paths.ds_gte)
    dataio.write_interactions(ds.ds_val, paths.ds_val)
    with open(paths.question_split, "w", encoding="utf-8", newline="\n") as f:
        json.dump(
            {"train": sorted(ds.ds_train), "test": sorted(ds.ds_test)},
            f,
            sort_keys=True,
        )
        f.write("\n")


def stage_calibrate(config: RunConfig, paths: RunPaths) -> CalibrationResult:
    log = dataio.read_interactions(paths.ds_gte)
    result = calibrate(log, config.irt, workers=config.workers)
    write_calibration(result, paths.calibration)
    return result


def _read_question_split(paths: RunPaths) -> tuple[list[str], list[str]]:
    with open(paths.question_split, encoding="utf-8") as f:
        obj = json.load(f)
    return list(obj["train"]), list(obj["test"])


def _targets_for(
    item_ids: Sequence[str], items: dict[str, ItemParams], target: str
) -> np.ndarray:
    if target == "difficulty":
        return np.array([items[i].difficulty_b for i in item_ids])
    return np.array([items[i].discrimination_a for i in item_ids])


def stage_select_model(config: RunConfig, paths: RunPaths) -> dict:
    """5-fold grid search per target; writes ranked reports and the winner."""
    bank = dataio.read_question_bank(config.questions)
    train_ids, _ = _read_question_split(paths)
    items, _, _, _ = read_calibration(paths.calibration)
    questions = [bank[i] for i in train_ids]
    grid = config.grid.configs()
    selection: dict = {}
    for target in TARGETS:
        y = _targets_for(train_ids, items, target)
        results = kfold_grid_search(
            questions, y, grid, k=config.grid.k, seed=config.seed
        )
        write_grid_report(results, paths.grid_report(target))
        best = results[0]
        selection[target] = {
            "params": best.config.params.to_dict(),
            "encoding": best.config.encoding.value,
            "n_w": best.config.n_w,
            "mean_cv_mse": best.mean_cv_mse,
        }
    with open(paths.selection, "w", encoding="utf-8", newline="\n") as f:
        json.dump(selection, f, sort_keys=True)
        f.write("\n")
    return selection


def stage_train(config: RunConfig, paths: RunPaths) -> None:
    """Fit one regressor per target on the train questions with the selected
    configuration, storing vocabulary and model files."""
    bank = dataio.read_question_bank(config.questions)
    train_ids, _ = _read_question_split(paths)
    items, _, _, _ = read_calibration(paths.calibration)
    with open(paths.selection, encoding="utf-8") as f:
        selection = json.load(f)
    questions = [bank[i] for i in train_ids]
    for target in TARGETS:
        sel = selection[target]
        encoding = Encoding(sel["encoding"])
        vocab = build_vocabulary_for_questions(questions, encoding, sel["n_w"])
        write_vocabulary(vocab, paths.vocab(target))
        X = featurize_questions(questions, encoding, vocab)
        y = _targets_for(train_ids, items, target)
        params = HyperParams.from_dict(sel["params"])
        model = fit_model(X, y, params, config.seed)
        write_model(
            model, params, config.seed, target, vocab.fingerprint(), paths.model(target)
        )


def stage_estimate(config: RunConfig, paths: RunPaths) -> dict[str, ItemParams]:
    """Estimate latent traits of the held-out test questions from text only."""
    bank = dataio.read_question_bank(config.questions)
    _, test_ids = _read_question_split(paths)
    with open(paths.selection, encoding="utf-8") as f:
        selection = json.load(f)
    questions = [bank[i] for i in test_ids]
    predicted: dict[str, np.ndarray] = {}
    for target in TARGETS:
        model, _, _, stored_target, fingerprint = read_model(paths.model(target))
        if stored_target != target:
            raise ValueError(
                f"model file {paths.model(target)} trained for {stored_target!r}"
            )
        vocab = read_vocabulary(paths.vocab(target))
        if vocab.fingerprint() != fingerprint:
            raise ValueError(f"vocabulary fingerprint mismatch for target {target!r}")
        encoding = Encoding(selection[target]["encoding"])
        X = featurize_questions(questions, encoding, vocab)
        predicted[target] = predict_many(model, X)
    lo_a, hi_a = config.irt.a_bounds
    lo_b, hi_b = config.irt.b_bounds
    estimates = {
        item_id: ItemParams(
            discrimination_a=float(np.clip(predicted["discrimination"][i], lo_a, hi_a)),
            difficulty_b=float(np.clip(predicted["difficulty"][i], lo_b, hi_b)),
        )
        for i, item_id in enumerate(test_ids)
    }
    obj = {
        "items": {
            i: {"a": p.discrimination_a, "b": p.difficulty_b}
            for i, p in estimates.items()
        }
    }
    with open(paths.estimates, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, sort_keys=True)
        f.write("\n")
    return estimates


def _read_estimates(paths: RunPaths) -> dict[str, ItemParams]:
    with open(paths.estimates, encoding="utf-8") as f:
        obj = json.load(f)
    return {
        i: ItemParams(discrimination_a=float(v["a"]), difficulty_b=float(v["b"]))
        for i, v in obj["items"].items()
    }


def _student_sequences(log: InteractionLog) -> dict[str, list]:
    """Per-student interactions in timestamp order (stable on ties)."""
    seqs: dict[str, list] = {}
    for r in log:
        seqs.setdefault(r.student_id, []).append(r)
    return {
        sid: sorted(rs, key=lambda r: r.timestamp) for sid, rs in sorted(seqs.items())
    }


def _merge_traces(traces: Sequence[PredictionTrace]) -> PredictionTrace:
    steps: list = []
    for t in traces:
        steps.extend(t.steps)
    return PredictionTrace(tuple(steps))


def run_prediction_experiments(
    ds_val: InteractionLog,
    ds_gte: InteractionLog,
    test_ids: frozenset[str] | set[str],
    irt_items: dict[str, ItemParams],
    text_items: dict[str, ItemParams],
    irt_config: IrtConfig,
    threshold: float,
) -> dict[str, dict[str, PredictionTrace]]:
    """Both §-style experiments with IRT, text-estimated, and majority traits.

    Experiment 1 keeps only test-question interactions (they both update the
    skill and are evaluated). Experiment 2 replays every interaction for the
    skill updates but evaluates only test questions; the text source then uses
    calibrated traits for train questions and text traits for test questions.
    """
    sequences = _student_sequences(ds_val)
    majority_train = [r.correct for r in ds_gte]

    exp1: dict[str, list[PredictionTrace]] = {"irt": [], "text": []}
    exp2: dict[str, list[PredictionTrace]] = {"irt": [], "text": []}
    eval_actuals: list[bool] = []
    for sid, records in sequences.items():
        test_records = [r for r in records if r.item_id in test_ids]
        if test_records:
            item_ids = [r.item_id for r in test_records]
            actuals = [r.correct for r in test_records]
            eval_actuals.extend(actuals)
            for source, params_of in (("irt", irt_items), ("text", text_items)):
                seq = [(params_of[r.item_id], r.correct) for r in test_records]
                exp1[source].append(
                    predict_performance(
                        seq, irt_config, threshold=threshold, item_ids=item_ids
                    )
                )
        if test_records:
            update_flags = [True] * len(records)
            evaluate_flags = [r.item_id in test_ids for r in records]
            item_ids_all = [r.item_id for r in records]
            for source in ("irt", "text"):
                seq = []
                for r in records:
                    if source == "irt" or r.item_id not in test_ids:
                        seq.append((irt_items[r.item_id], r.correct))
                    else:
                        seq.append((text_items[r.item_id], r.correct))
                exp2[source].append(
                    predict_with_skill_side_channel(
                        seq,
                        update_flags,
                        evaluate_flags,
                        irt_config,
                        threshold=threshold,
                        item_ids=item_ids_all,
                    )
                )

    majority_trace = majority_baseline(majority_train, eval_actuals)
    return {
        "experiment1": {
            "irt": _merge_traces(exp1["irt"]),
            "text": _merge_traces(exp1["text"]),
            "majority": majority_trace,
        },
        "experiment2": {
            "irt": _merge_traces(exp2["irt"]),
            "text": _merge_traces(exp2["text"]),
        },
    }


def stage_predict(config: RunConfig, paths: RunPaths) -> dict:
    ds_val = dataio.read_interactions(paths.ds_val)
    ds_gte = dataio.read_interactions(paths.ds_gte)
    _, test_ids = _read_question_split(paths)
    irt_items, _, _, _ = read_calibration(paths.calibration)
    text_items = _read_estimates(paths)
    traces = run_prediction_experiments(
        ds_val,
        ds_gte,
        frozenset(test_ids),
        irt_items,
        text_items,
        config.irt,
        config.threshold,
    )
    for exp_name, by_source in traces.items():
        exp_no = 1 if exp_name == "experiment1" else 2
        for source, trace in by_source.items():
            write_trace(trace, paths.trace(exp_no, source))
    return traces


def stage_report(config: RunConfig, paths: RunPaths) -> dict:
    """Final report: trait-estimation metrics on the test questions plus the
    classification tables of both prediction experiments."""
    _, test_ids = _read_question_split(paths)
    irt_items, _, converged, rounds = read_calibration(paths.calibration)
    text_items = _read_estimates(paths)
    report: dict = {
        "calibration": {"converged": converged, "rounds": rounds},
        "trait_estimation": {},
        "performance_prediction": {},
    }
    ordered = sorted(test_ids)
    for target, trait_range in (
        ("difficulty", config.irt.b_bounds),
        ("discrimination", config.irt.a_bounds),
    ):
        y_true = _targets_for(ordered, irt_items, target)
        y_pred = _targets_for(ordered, text_items, target)
        metrics = regression_metrics(y_true, y_pred, trait_range)
        metrics["trait_range"] = list(trait_range)
        report["trait_estimation"][target] = metrics

    for exp_no, sources in ((1, ("irt", "text", "majority")), (2, ("irt", "text"))):
        table = {}
        for source in sources:
            path = paths.trace(exp_no, source)
            steps = []
            with open(path, newline="", encoding="utf-8") as f:
                reader = csv.DictReader(f)
                if reader.fieldnames != TRACE_FIELDS:
                    raise ValueError(f"{path}: unexpected trace header")
                for row in reader:
                    steps.append(
                        TraceStep(
                            item_id=row["item_id"],
                            p=float(row["p"]),
                            predicted=row["predicted"] == "1",
                            actual=row["actual"] == "1",
                            theta_before=float(row["theta_before"]),
                            theta_after=float(row["theta_after"]),
                        )
                    )
            trace = PredictionTrace(tuple(steps))
            table[source] = (
                classification_report(trace).to_dict() if len(trace) else None
            )
        report["performance_prediction"][f"experiment{exp_no}"] = table

    with open(paths.report, "w", encoding="utf-8", newline="\n") as f:
        json.dump(report, f, sort_keys=True)
        f.write("\n")
    return report


def write_config_snapshot(config: RunConfig, paths: RunPaths) -> None:
    with open(paths.config, "w", encoding="utf-8", newline="\n") as f:
        json.dump(config.to_dict(), f, sort_keys=True)
        f.write("\n")


def run_pipeline(config: RunConfig) -> dict:
    """filter -> split -> calibrate -> select -> train -> estimate -> predict
    -> report; partial artifacts are removed if any stage fails."""
    paths = RunPaths(config.out_dir)
    paths.run_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    def track(path: Path) -> Path:
        created.append(path)
        return path

    try:
        track(paths.config)
        write_config_snapshot(config, paths)
        track(paths.filtered)
        stage_filter(config, paths)
        track(paths.ds_gte)
        track(paths.ds_val)
        track(paths.question_split)
        stage_split(config, paths)
        track(paths.calibration)
        stage_calibrate(config, paths)
        for target in TARGETS:
            track(paths.grid_report(target))
            track(paths.vocab(target))
            track(paths.model(target))
        track(paths.selection)
        stage_select_model(config, paths)
        stage_train(config, paths)
        track(paths.estimates)
        stage_estimate(config, paths)
        for exp_no, sources in ((1, ("irt", "text", "majority")), (2, ("irt", "text"))):
            for source in sources:
                track(paths.trace(exp_no, source))
        stage_predict(config, paths)
        track(paths.report)
        return stage_report(config, paths)
    except BaseException:
        for path in created:
            path.unlink(missing_ok=True)
        raise
