"""Two-parameter logistic IRT: response function, joint calibration, skill MLE,
and the sequential performance-prediction evaluator."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .backends import kernels
from .types import InteractionLog, ItemParams, SkillEstimate


class MissingParameterError(KeyError):
    """An interaction references an id with no fitted parameters."""


class EmptyLogError(ValueError):
    """Calibration requires a non-empty interaction log."""


class FlagInconsistencyError(ValueError):
    """An evaluation step was not also flagged for skill update."""


@dataclass(frozen=True)
class IrtConfig:
    """Bounds and optimizer settings for calibration and skill estimation."""

    theta_bounds: tuple[float, float] = (-5.0, 5.0)
    b_bounds: tuple[float, float] = (-5.0, 5.0)
    a_bounds: tuple[float, float] = (-1.0, 2.5)
    max_rounds: int = 100
    tolerance: float = 1e-4
    grid_resolution: int = 1001

    def __post_init__(self) -> None:
        for name in ("theta_bounds", "b_bounds", "a_bounds"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must satisfy min < max, got ({lo}, {hi})")
        if self.max_rounds < 1:
            raise ValueError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.grid_resolution < 3:
            raise ValueError(
                f"grid_resolution must be >= 3, got {self.grid_resolution}"
            )

    @property
    def a_grid_points(self) -> int:
        """Discrimination-axis resolution of the coarse item grid."""
        return max(3, self.grid_resolution // 10)


@dataclass(frozen=True)
class TraceStep:
    item_id: str
    p: float
    predicted: bool
    actual: bool
    theta_before: float
    theta_after: float


@dataclass(frozen=True)
class PredictionTrace:
    """Per-step records of the sequential performance-prediction task."""

    steps: tuple[TraceStep, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def is_chain_consistent(self) -> bool:
        """theta_after of each step equals theta_before of the next.

        Holds for full single-student traces; restricted or merged traces are
        projections and may legitimately break the chain.
        """
        return all(
            s.theta_after == t.theta_before
            for s, t in zip(self.steps, self.steps[1:])
        )


@dataclass(frozen=True)
class CalibrationResult:
    item_params: dict[str, ItemParams]
    skills: dict[str, SkillEstimate]
    rounds_used: int
    converged: bool
    ll_by_round: tuple[float, ...] = ()
    disconnected_students: tuple[str, ...] = ()
    disconnected_items: tuple[str, ...] = ()


def irf(params: ItemParams, theta: float) -> float:
    """Probability of a correct answer: 1 / (1 + exp(-a * (theta - b)))."""
    z = params.discrimination_a * (theta - params.difficulty_b)
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _theta_of(skill) -> float:
    return skill.theta if isinstance(skill, SkillEstimate) else float(skill)


def log_likelihood(
    log: InteractionLog,
    item_params: Mapping[str, ItemParams],
    skills: Mapping[str, SkillEstimate | float],
) -> float:
    """Sum of ln(irf) over correct answers and ln(1 - irf) over wrong ones.

    Probabilities are clamped to [1e-9, 1 - 1e-9] before the logs.
    """
    if len(log) == 0:
        return 0.0
    a = np.empty(len(log))
    b = np.empty(len(log))
    theta = np.empty(len(log))
    y = np.empty(len(log), dtype=np.uint8)
    for i, r in enumerate(log):
        p = item_params.get(r.item_id)
        if p is None:
            raise MissingParameterError(f"no item parameters for {r.item_id!r}")
        if r.student_id not in skills:
            raise MissingParameterError(f"no skill estimate for {r.student_id!r}")
        a[i] = p.discrimination_a
        b[i] = p.difficulty_b
        theta[i] = _theta_of(skills[r.student_id])
        y[i] = 1 if r.correct else 0
    idx = np.arange(len(log))
    return kernels.total_ll(a, b, theta, idx, idx, y)


def estimate_skill(
    answers: Sequence[tuple[ItemParams, bool]], config: IrtConfig
) -> SkillEstimate:
    """Bounded skill MLE over a set of answered calibrated items.

    Grid search at grid_resolution points, then golden-section refinement on
    the bracketing sub-interval; ties resolve toward the smallest theta.
    """
    if len(answers) == 0:
        raise ValueError("estimate_skill requires at least one answer")
    a = np.array([p.discrimination_a for p, _ in answers])
    b = np.array([p.difficulty_b for p, _ in answers])
    y = np.array([1 if c else 0 for _, c in answers], dtype=np.uint8)
    lo, hi = config.theta_bounds
    theta = kernels.theta_mle(a, b, y, lo, hi, config.grid_resolution)
    return SkillEstimate(theta=float(theta), domain=config.theta_bounds)


def _run_indexed(fn, n: int, workers: int) -> None:
    if workers <= 1 or n <= 1:
        for i in range(n):
            fn(i)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(fn, range(n)))


def calibrate(
    log: InteractionLog, config: IrtConfig, workers: int = 1
) -> CalibrationResult:
    """Joint calibration by alternating bounded coordinate ascent.

    Each round first re-maximizes every student's theta against frozen item
    parameters, then every item's (a, b) against the frozen skills via coarse
    grid search plus local refinement. Sub-maximizations only replace the
    incumbent on strict improvement, so the joint log-likelihood never
    decreases across rounds.
    """
    if len(log) == 0:
        raise EmptyLogError("cannot calibrate an empty interaction log")

    student_ids: list[str] = []
    item_ids: list[str] = []
    student_pos: dict[str, int] = {}
    item_pos: dict[str, int] = {}
    for r in log:
        if r.student_id not in student_pos:
            student_pos[r.student_id] = len(student_ids)
            student_ids.append(r.student_id)
        if r.item_id not in item_pos:
            item_pos[r.item_id] = len(item_ids)
            item_ids.append(r.item_id)
    n_students = len(student_ids)
    n_items = len(item_ids)
    n_obs = len(log)

    st_idx = np.empty(n_obs, dtype=np.int64)
    it_idx = np.empty(n_obs, dtype=np.int64)
    y = np.empty(n_obs, dtype=np.uint8)
    for i, r in enumerate(log):
        st_idx[i] = student_pos[r.student_id]
        it_idx[i] = item_pos[r.item_id]
        y[i] = 1 if r.correct else 0

    rows_of_student = [np.nonzero(st_idx == s)[0] for s in range(n_students)]
    rows_of_item = [np.nonzero(it_idx == j)[0] for j in range(n_items)]
    items_of_student = [it_idx[rows] for rows in rows_of_student]
    students_of_item = [st_idx[rows] for rows in rows_of_item]
    y_of_student = [np.ascontiguousarray(y[rows]) for rows in rows_of_student]
    y_of_item = [np.ascontiguousarray(y[rows]) for rows in rows_of_item]

    th_lo, th_hi = config.theta_bounds
    b_lo, b_hi = config.b_bounds
    a_lo, a_hi = config.a_bounds
    n_grid = config.grid_resolution
    n_a = config.a_grid_points

    theta = np.full(n_students, min(max(0.0, th_lo), th_hi))
    a = np.full(n_items, min(max(1.0, a_lo), a_hi))
    b = np.full(n_items, min(max(0.0, b_lo), b_hi))

    ll_by_round: list[float] = []
    converged = False
    rounds_used = 0
    for _round in range(config.max_rounds):
        rounds_used += 1
        new_theta = theta.copy()

        def fit_student(s: int) -> None:
            a_s = np.ascontiguousarray(a[items_of_student[s]])
            b_s = np.ascontiguousarray(b[items_of_student[s]])
            y_s = y_of_student[s]
            cand = kernels.theta_mle(a_s, b_s, y_s, th_lo, th_hi, n_grid)
            if kernels.ll_student(cand, a_s, b_s, y_s) > kernels.ll_student(
                theta[s], a_s, b_s, y_s
            ):
                new_theta[s] = cand

        _run_indexed(fit_student, n_students, workers)

        new_a = a.copy()
        new_b = b.copy()

        def fit_one_item(j: int) -> None:
            th_j = np.ascontiguousarray(new_theta[students_of_item[j]])
            new_a[j], new_b[j] = kernels.fit_item(
                th_j, y_of_item[j], a_lo, a_hi, n_a, b_lo, b_hi, n_grid, a[j], b[j]
            )

        _run_indexed(fit_one_item, n_items, workers)

        delta = max(
            float(np.max(np.abs(new_theta - theta))),
            float(np.max(np.abs(new_a - a))),
            float(np.max(np.abs(new_b - b))),
        )
        theta, a, b = new_theta, new_a, new_b
        ll_by_round.append(kernels.total_ll(a, b, theta, it_idx, st_idx, y))
        if delta < config.tolerance:
            converged = True
            break

    disconnected_students = tuple(
        student_ids[s]
        for s in range(n_students)
        if y_of_student[s].min() == y_of_student[s].max()
    )
    disconnected_items = tuple(
        item_ids[j]
        for j in range(n_items)
        if y_of_item[j].min() == y_of_item[j].max()
    )

    return CalibrationResult(
        item_params={
            item_ids[j]: ItemParams(discrimination_a=float(a[j]), difficulty_b=float(b[j]))
            for j in range(n_items)
        },
        skills={
            student_ids[s]: SkillEstimate(
                theta=float(theta[s]), domain=config.theta_bounds
            )
            for s in range(n_students)
        },
        rounds_used=rounds_used,
        converged=converged,
        ll_by_round=tuple(ll_by_round),
        disconnected_students=disconnected_students,
        disconnected_items=disconnected_items,
    )


def _check_timestamps(timestamps) -> None:
    if timestamps is None:
        return
    for prev, cur in zip(timestamps, timestamps[1:]):
        if cur < prev:
            raise ValueError("sequence timestamps must be non-decreasing")


def predict_performance(
    sequence: Sequence[tuple[ItemParams, bool]],
    config: IrtConfig,
    threshold: float = 0.5,
    item_ids: Sequence[str] | None = None,
    timestamps: Sequence[int] | None = None,
) -> PredictionTrace:
    """Sequentially predict each answer, then fold the observed answer into the
    skill estimate (full re-maximization over the answer history)."""
    _check_timestamps(timestamps)
    n = len(sequence)
    a_hist = np.empty(n)
    b_hist = np.empty(n)
    y_hist = np.empty(n, dtype=np.uint8)
    th_lo, th_hi = config.theta_bounds
    theta_cur = 0.0
    steps = []
    for k, (params, actual) in enumerate(sequence):
        p = irf(params, theta_cur)
        a_hist[k] = params.discrimination_a
        b_hist[k] = params.difficulty_b
        y_hist[k] = 1 if actual else 0
        theta_next = float(
            kernels.theta_mle(
                a_hist[: k + 1], b_hist[: k + 1], y_hist[: k + 1],
                th_lo, th_hi, config.grid_resolution,
            )
        )
        steps.append(
            TraceStep(
                item_id=item_ids[k] if item_ids is not None else str(k),
                p=p,
                predicted=p >= threshold,
                actual=actual,
                theta_before=theta_cur,
                theta_after=theta_next,
            )
        )
        theta_cur = theta_next
    return PredictionTrace(tuple(steps))


def predict_with_skill_side_channel(
    sequence: Sequence[tuple[ItemParams, bool]],
    skill_update_flags: Sequence[bool],
    evaluate_flags: Sequence[bool],
    config: IrtConfig,
    threshold: float = 0.5,
    item_ids: Sequence[str] | None = None,
    timestamps: Sequence[int] | None = None,
) -> PredictionTrace:
    """Same loop as predict_performance, but predictions are recorded only at
    evaluate-flagged steps while the skill advances at every update-flagged
    step. Every evaluate step must also be an update step."""
    if not (len(sequence) == len(skill_update_flags) == len(evaluate_flags)):
        raise ValueError("sequence and flag lists must have equal length")
    for k, (upd, ev) in enumerate(zip(skill_update_flags, evaluate_flags)):
        if ev and not upd:
            raise FlagInconsistencyError(
                f"step {k} is flagged for evaluation but not for skill update"
            )
    _check_timestamps(timestamps)
    n = len(sequence)
    a_hist = np.empty(n)
    b_hist = np.empty(n)
    y_hist = np.empty(n, dtype=np.uint8)
    n_hist = 0
    th_lo, th_hi = config.theta_bounds
    theta_cur = 0.0
    steps = []
    for k, (params, actual) in enumerate(sequence):
        if not skill_update_flags[k]:
            continue
        evaluate = evaluate_flags[k]
        p = irf(params, theta_cur) if evaluate else 0.0
        a_hist[n_hist] = params.discrimination_a
        b_hist[n_hist] = params.difficulty_b
        y_hist[n_hist] = 1 if actual else 0
        n_hist += 1
        theta_next = float(
            kernels.theta_mle(
                a_hist[:n_hist], b_hist[:n_hist], y_hist[:n_hist],
                th_lo, th_hi, config.grid_resolution,
            )
        )
        if evaluate:
            steps.append(
                TraceStep(
                    item_id=item_ids[k] if item_ids is not None else str(k),
                    p=p,
                    predicted=p >= threshold,
                    actual=actual,
                    theta_before=theta_cur,
                    theta_after=theta_next,
                )
            )
        theta_cur = theta_next
    return PredictionTrace(tuple(steps))


def write_calibration(result: CalibrationResult, path: str | Path) -> None:
    """Calibration file: items with (a, b), student thetas, convergence info."""
    obj = {
        "items": {
            item_id: {"a": p.discrimination_a, "b": p.difficulty_b}
            for item_id, p in result.item_params.items()
        },
        "students": {sid: sk.theta for sid, sk in result.skills.items()},
        "converged": result.converged,
        "rounds": result.rounds_used,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, sort_keys=True)
        f.write("\n")


def read_calibration(
    path: str | Path,
) -> tuple[dict[str, ItemParams], dict[str, float], bool, int]:
    with open(path, encoding="utf-8") as f:
        obj = json.load(f)
    items = {
        item_id: ItemParams(discrimination_a=float(v["a"]), difficulty_b=float(v["b"]))
        for item_id, v in obj["items"].items()
    }
    students = {sid: float(th) for sid, th in obj["students"].items()}
    return items, students, bool(obj["converged"]), int(obj["rounds"])


TRACE_FIELDS = ["step", "item_id", "p", "predicted", "actual", "theta_before", "theta_after"]


def write_trace(trace: PredictionTrace, path: str | Path) -> None:
    """Trace CSV: step,item_id,p,predicted,actual,theta_before,theta_after."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRACE_FIELDS)
        for i, s in enumerate(trace):
            writer.writerow(
                [
                    i,
                    s.item_id,
                    repr(s.p),
                    1 if s.predicted else 0,
                    1 if s.actual else 0,
                    repr(s.theta_before),
                    repr(s.theta_after),
                ]
            )
