"""Core data model: questions, interactions, latent traits, and log filters."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping


class DataValidationError(ValueError):
    """Input data violates a structural invariant."""


@dataclass(frozen=True)
class Choice:
    """One answer option of a multiple-choice question."""

    text: str
    is_correct: bool

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise DataValidationError("choice text must be non-empty")


@dataclass(frozen=True)
class Question:
    """A multiple-choice question; more than one choice may be correct."""

    item_id: str
    text: str
    choices: tuple[Choice, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "choices", tuple(self.choices))
        if len(self.choices) < 2:
            raise DataValidationError(
                f"question {self.item_id!r}: needs at least 2 choices"
            )
        if not any(c.is_correct for c in self.choices):
            raise DataValidationError(
                f"question {self.item_id!r}: needs at least 1 correct choice"
            )

    def correct_choices(self) -> tuple[Choice, ...]:
        return tuple(c for c in self.choices if c.is_correct)


@dataclass(frozen=True)
class Interaction:
    """One answer given by one student to one item."""

    student_id: str
    item_id: str
    correct: bool
    timestamp: int

    def __post_init__(self) -> None:
        if self.timestamp < 0:
            raise DataValidationError(
                f"interaction ({self.student_id!r}, {self.item_id!r}): "
                f"timestamp must be >= 0, got {self.timestamp}"
            )


@dataclass(frozen=True)
class ItemParams:
    """Per-item 2PL latent traits: discrimination and difficulty."""

    discrimination_a: float
    difficulty_b: float


@dataclass(frozen=True)
class SkillEstimate:
    """A student skill value together with the interval it was optimized over."""

    theta: float
    domain: tuple[float, float]

    def __post_init__(self) -> None:
        lo, hi = self.domain
        if not (lo <= self.theta <= hi):
            raise DataValidationError(
                f"theta {self.theta} outside domain [{lo}, {hi}]"
            )


@dataclass(frozen=True)
class QuestionBank:
    """Immutable map from item id to question."""

    questions: Mapping[str, Question]

    @classmethod
    def from_questions(cls, questions) -> "QuestionBank":
        out: dict[str, Question] = {}
        for q in questions:
            if q.item_id in out:
                raise DataValidationError(f"duplicate item_id {q.item_id!r}")
            out[q.item_id] = q
        return cls(questions=out)

    def __getitem__(self, item_id: str) -> Question:
        return self.questions[item_id]

    def __contains__(self, item_id: str) -> bool:
        return item_id in self.questions

    def __len__(self) -> int:
        return len(self.questions)

    def __iter__(self) -> Iterator[Question]:
        return iter(self.questions.values())

    def item_ids(self) -> list[str]:
        return list(self.questions.keys())


@dataclass(frozen=True)
class InteractionLog:
    """Stably ordered sequence of interactions."""

    records: tuple[Interaction, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Interaction]:
        return iter(self.records)

    def student_ids(self) -> set[str]:
        return {r.student_id for r in self.records}

    def item_ids(self) -> set[str]:
        return {r.item_id for r in self.records}

    def check_joinable(self, bank: QuestionBank) -> None:
        """Every referenced item must exist in the bank (checked at join time)."""
        missing = sorted(self.item_ids() - set(bank.questions))
        if missing:
            raise DataValidationError(
                f"interactions reference unknown item ids: {missing[:10]}"
            )


def filter_first_timers(log: InteractionLog) -> InteractionLog:
    """Keep, per (student, item) pair, only the earliest-timestamp record.

    Timestamp ties are broken by input order (first occurrence wins); the
    relative order of surviving records is preserved.
    """
    best: dict[tuple[str, str], tuple[int, int]] = {}
    for idx, r in enumerate(log.records):
        key = (r.student_id, r.item_id)
        if key not in best or r.timestamp < best[key][0]:
            best[key] = (r.timestamp, idx)
    keep = sorted(idx for _, idx in best.values())
    return InteractionLog(tuple(log.records[i] for i in keep))


def filter_min_support(log: InteractionLog, min_students: int) -> InteractionLog:
    """Keep only interactions whose item was answered by >= min_students distinct students."""
    if min_students < 1:
        raise DataValidationError(f"min_students must be >= 1, got {min_students}")
    students_per_item: dict[str, set[str]] = {}
    for r in log.records:
        students_per_item.setdefault(r.item_id, set()).add(r.student_id)
    return InteractionLog(
        tuple(
            r for r in log.records if len(students_per_item[r.item_id]) >= min_students
        )
    )
