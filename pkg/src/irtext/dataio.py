"""File formats for the core data: interactions CSV and question-bank JSONL."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .types import (
    Choice,
    DataValidationError,
    Interaction,
    InteractionLog,
    Question,
    QuestionBank,
)

INTERACTION_FIELDS = ["student_id", "item_id", "correct", "timestamp"]


def read_interactions(path: str | Path) -> InteractionLog:
    """Read an interactions CSV with header student_id,item_id,correct,timestamp."""
    records = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != INTERACTION_FIELDS:
            raise DataValidationError(
                f"{path}: expected header {','.join(INTERACTION_FIELDS)}, "
                f"got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            correct = row["correct"]
            if correct not in ("0", "1"):
                raise DataValidationError(
                    f"{path}:{lineno}: correct must be 0 or 1, got {correct!r}"
                )
            records.append(
                Interaction(
                    student_id=row["student_id"],
                    item_id=row["item_id"],
                    correct=correct == "1",
                    timestamp=int(row["timestamp"]),
                )
            )
    return InteractionLog(tuple(records))


def write_interactions(log: InteractionLog, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(INTERACTION_FIELDS)
        for r in log.records:
            writer.writerow(
                [r.student_id, r.item_id, "1" if r.correct else "0", r.timestamp]
            )


def read_question_bank(path: str | Path) -> QuestionBank:
    """Read a question-bank JSONL file, one question object per line."""
    questions = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataValidationError(f"{path}:{lineno}: invalid JSON: {exc}")
            questions.append(
                Question(
                    item_id=str(obj["item_id"]),
                    text=str(obj["text"]),
                    choices=tuple(
                        Choice(text=str(c["text"]), is_correct=bool(c["is_correct"]))
                        for c in obj["choices"]
                    ),
                )
            )
    return QuestionBank.from_questions(questions)


def write_question_bank(bank: QuestionBank, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for q in bank:
            obj = {
                "item_id": q.item_id,
                "text": q.text,
                "choices": [
                    {"text": c.text, "is_correct": c.is_correct} for c in q.choices
                ],
            }
            f.write(json.dumps(obj, ensure_ascii=False) + "\n")
