"""Synthetic-data oracle: question banks with a planted vocabulary-to-trait
signal and interaction logs sampled from the true 2PL model."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .irt import CalibrationResult, IrtConfig
from .types import (
    Choice,
    Interaction,
    InteractionLog,
    ItemParams,
    Question,
    QuestionBank,
)

# Calibration-box defaults; planted deltas are clipped against these even when
# the base traits are drawn from a narrower range.
_DEFAULT_THETA_BOUNDS = IrtConfig().theta_bounds
_DEFAULT_A_BOUNDS = IrtConfig().a_bounds
_DEFAULT_B_BOUNDS = IrtConfig().b_bounds


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings.

    Base traits are drawn uniformly inside the draw bounds; vocabulary-signal
    deltas are then added and the result clipped to the (wider) clip bounds,
    so a narrow draw range with strong deltas plants a dominant text signal.
    """

    n_students: int = 1000
    n_items: int = 100
    answers_per_item: int = 150
    theta_bounds: tuple[float, float] = _DEFAULT_THETA_BOUNDS
    a_draw_bounds: tuple[float, float] = _DEFAULT_A_BOUNDS
    b_draw_bounds: tuple[float, float] = _DEFAULT_B_BOUNDS
    a_clip_bounds: tuple[float, float] = _DEFAULT_A_BOUNDS
    b_clip_bounds: tuple[float, float] = _DEFAULT_B_BOUNDS
    vocab_signal: tuple[tuple[str, float, float], ...] = ()
    signal_probability: float = 0.5
    base_text_length: int = 12
    filler_pool_size: int = 40
    n_choices: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_students", "n_items", "answers_per_item",
                     "base_text_length", "filler_pool_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_choices < 2:
            raise ValueError("n_choices must be >= 2")
        if self.answers_per_item > self.n_students:
            raise ValueError(
                f"answers_per_item ({self.answers_per_item}) exceeds "
                f"n_students ({self.n_students})"
            )
        for token, db, da in self.vocab_signal:
            if not (math.isfinite(db) and math.isfinite(da)):
                raise ValueError(f"non-finite delta for signal token {token!r}")


@dataclass(frozen=True)
class SynthGroundTruth:
    config: SynthConfig
    item_params: dict[str, ItemParams]
    skills: dict[str, float]
    bank: QuestionBank
    log: InteractionLog
    signal_tokens_per_item: dict[str, tuple[str, ...]] = field(default_factory=dict)


def _irf(a: float, b: float, theta: float) -> float:
    z = a * (theta - b)
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def generate(config: SynthConfig) -> SynthGroundTruth:
    """Draw true traits, compose question texts carrying the planted signal,
    and sample one Bernoulli answer per (item, sampled student) pair."""
    rng = np.random.default_rng(config.seed)
    student_ids = [f"s{i:04d}" for i in range(config.n_students)]
    item_ids = [f"q{j:04d}" for j in range(config.n_items)]

    theta = rng.uniform(*config.theta_bounds, config.n_students)
    a = rng.uniform(*config.a_draw_bounds, config.n_items)
    b = rng.uniform(*config.b_draw_bounds, config.n_items)

    pool = [f"kw{i:03d}" for i in range(config.filler_pool_size)]
    questions = []
    signal_per_item: dict[str, tuple[str, ...]] = {}
    for j, item_id in enumerate(item_ids):
        words = list(rng.choice(pool, size=config.base_text_length, replace=True))
        carried = []
        for token, db, da in config.vocab_signal:
            if rng.random() < config.signal_probability:
                carried.append(token)
                b[j] += db
                a[j] += da
        words.extend(carried)
        signal_per_item[item_id] = tuple(carried)
        choices = []
        for c in range(config.n_choices):
            text = " ".join(rng.choice(pool, size=2, replace=True))
            choices.append(Choice(text=text, is_correct=c == 0))
        questions.append(
            Question(item_id=item_id, text=" ".join(words), choices=tuple(choices))
        )
    np.clip(a, *config.a_clip_bounds, out=a)
    np.clip(b, *config.b_clip_bounds, out=b)

    records = []
    ts = 0
    for j, item_id in enumerate(item_ids):
        students = rng.choice(
            config.n_students, size=config.answers_per_item, replace=False
        )
        for s in students:
            p = _irf(a[j], b[j], theta[s])
            records.append(
                Interaction(
                    student_id=student_ids[s],
                    item_id=item_id,
                    correct=bool(rng.random() < p),
                    timestamp=ts,
                )
            )
            ts += 1

    return SynthGroundTruth(
        config=config,
        item_params={
            item_ids[j]: ItemParams(discrimination_a=float(a[j]), difficulty_b=float(b[j]))
            for j in range(config.n_items)
        },
        skills={student_ids[i]: float(theta[i]) for i in range(config.n_students)},
        bank=QuestionBank.from_questions(questions),
        log=InteractionLog(tuple(records)),
        signal_tokens_per_item=signal_per_item,
    )


def recovery_report(
    truth: SynthGroundTruth, calibrated: CalibrationResult
) -> dict[str, float]:
    """Pearson correlations and RMSEs between planted and calibrated values."""
    if set(truth.item_params) != set(calibrated.item_params):
        raise ValueError("item id sets differ between truth and calibration")
    if set(truth.skills) != set(calibrated.skills):
        raise ValueError("student id sets differ between truth and calibration")
    item_ids = sorted(truth.item_params)
    student_ids = sorted(truth.skills)
    b_true = np.array([truth.item_params[i].difficulty_b for i in item_ids])
    a_true = np.array([truth.item_params[i].discrimination_a for i in item_ids])
    b_hat = np.array([calibrated.item_params[i].difficulty_b for i in item_ids])
    a_hat = np.array([calibrated.item_params[i].discrimination_a for i in item_ids])
    th_true = np.array([truth.skills[s] for s in student_ids])
    th_hat = np.array([calibrated.skills[s].theta for s in student_ids])

    def pearson(x, y):
        if np.std(x) == 0.0 or np.std(y) == 0.0:
            return float("nan")
        return float(np.corrcoef(x, y)[0, 1])

    def rmse(x, y):
        return float(np.sqrt(np.mean((x - y) ** 2)))

    return {
        "pearson_b": pearson(b_true, b_hat),
        "pearson_a": pearson(a_true, a_hat),
        "rmse_b": rmse(b_true, b_hat),
        "rmse_a": rmse(a_true, a_hat),
        "rmse_theta": rmse(th_true, th_hat),
    }


def write_truth(truth: SynthGroundTruth, path: str | Path) -> None:
    """truth.json with every planted parameter."""
    obj = {
        "items": {
            item_id: {"a": p.discrimination_a, "b": p.difficulty_b}
            for item_id, p in truth.item_params.items()
        },
        "students": dict(truth.skills),
        "signal_tokens": {
            item_id: list(tokens)
            for item_id, tokens in truth.signal_tokens_per_item.items()
        },
        "seed": truth.config.seed,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, sort_keys=True)
        f.write("\n")


def read_truth(path: str | Path) -> tuple[dict[str, ItemParams], dict[str, float]]:
    with open(path, encoding="utf-8") as f:
        obj = json.load(f)
    items = {
        item_id: ItemParams(discrimination_a=float(v["a"]), difficulty_b=float(v["b"]))
        for item_id, v in obj["items"].items()
    }
    return items, {sid: float(th) for sid, th in obj["students"].items()}
