"""Command-line interface: simulate data, run individual pipeline stages, or
run the whole experimental protocol."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .pipeline import (
    GridSpec,
    RunConfig,
    RunPaths,
    run_pipeline,
    stage_calibrate,
    stage_estimate,
    stage_filter,
    stage_predict,
    stage_report,
    stage_select_model,
    stage_split,
    stage_train,
    write_config_snapshot,
)
from .synth import SynthConfig, generate, write_truth
from .textpipe import (
    Encoding,
    build_vocabulary_for_questions,
    featurize_questions,
    read_vocabulary,
    write_feature_matrix,
    write_vocabulary,
)
from .types import DataValidationError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit with code 1
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--interactions", help="interactions CSV path")
    p.add_argument("--questions", help="question bank JSONL path")
    p.add_argument("--out", help="run directory (default: run)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--threshold", type=float, help="prediction threshold (default 0.5)")
    p.add_argument("--min-students", type=int, help="minimum item support filter")
    p.add_argument("--workers", type=int, help="worker count for calibration")
    p.add_argument("--max-rounds", type=int, help="calibration round limit")
    p.add_argument("--tolerance", type=float, help="calibration convergence tolerance")
    p.add_argument("--grid-resolution", type=int, help="bounded-grid resolution")
    p.add_argument("--k", type=int, help="cross-validation folds")
    p.add_argument("--encodings", nargs="+", help="encodings searched by select-model")
    p.add_argument("--n-w", nargs="+", type=int, help="vocabulary sizes searched")
    p.add_argument("--models", nargs="+", help="model families searched (rf dt lr)")


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    obj: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as f:
            obj = json.load(f)
    cfg = RunConfig.from_dict(obj)
    updates: dict = {}
    for flag, field_name in (
        ("interactions", "interactions"),
        ("questions", "questions"),
        ("out", "out_dir"),
        ("seed", "seed"),
        ("threshold", "threshold"),
        ("min_students", "min_students"),
        ("workers", "workers"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            updates[field_name] = value
    from dataclasses import replace

    cfg = replace(cfg, **updates)
    irt_updates = {}
    for flag, field_name in (
        ("max_rounds", "max_rounds"),
        ("tolerance", "tolerance"),
        ("grid_resolution", "grid_resolution"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            irt_updates[field_name] = value
    if irt_updates:
        cfg = replace(cfg, irt=replace(cfg.irt, **irt_updates))
    grid_updates = {}
    for flag, field_name in (
        ("k", "k"),
        ("encodings", "encodings"),
        ("n_w", "n_w"),
        ("models", "models"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            grid_updates[field_name] = tuple(value) if isinstance(value, list) else value
    if grid_updates:
        cfg = replace(cfg, grid=replace(cfg.grid, **grid_updates))
    return cfg


def _require(cfg: RunConfig, *fields: str) -> None:
    missing = [f for f in fields if not getattr(cfg, f)]
    if missing:
        raise DataValidationError(f"missing required config fields: {missing}")


def _parse_signal(values: list[str]) -> tuple[tuple[str, float, float], ...]:
    out = []
    for spec in values:
        parts = spec.split(":")
        if len(parts) != 3:
            raise DataValidationError(
                f"signal spec must be token:difficulty_delta:discrimination_delta, got {spec!r}"
            )
        out.append((parts[0], float(parts[1]), float(parts[2])))
    return tuple(out)


def cmd_simulate(args: argparse.Namespace) -> int:
    out_dir = Path(args.out or "run")
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = SynthConfig(
        n_students=args.students,
        n_items=args.items,
        answers_per_item=args.answers_per_item,
        b_draw_bounds=tuple(args.b_draw_bounds),
        a_draw_bounds=tuple(args.a_draw_bounds),
        vocab_signal=_parse_signal(args.signal or []),
        signal_probability=args.signal_probability,
        base_text_length=args.text_length,
        seed=args.seed if args.seed is not None else 0,
    )
    truth = generate(cfg)
    dataio.write_interactions(truth.log, out_dir / "interactions.csv")
    dataio.write_question_bank(truth.bank, out_dir / "questions.jsonl")
    write_truth(truth, out_dir / "truth.json")
    print(
        f"simulated {len(truth.log)} interactions, {len(truth.bank)} questions "
        f"-> {out_dir}"
    )
    return EXIT_OK


def cmd_featurize(args: argparse.Namespace) -> int:
    bank = dataio.read_question_bank(args.questions)
    if args.items_file:
        with open(args.items_file, encoding="utf-8") as f:
            item_ids = [line.strip() for line in f if line.strip()]
    else:
        item_ids = bank.item_ids()
    questions = [bank[i] for i in item_ids]
    encoding = Encoding(args.encoding)
    if args.vocab_in:
        vocab = read_vocabulary(args.vocab_in)
    else:
        vocab = build_vocabulary_for_questions(questions, encoding, args.n_w)
    if args.vocab_out:
        write_vocabulary(vocab, args.vocab_out)
    matrix = featurize_questions(questions, encoding, vocab)
    write_feature_matrix(item_ids, matrix, vocab, args.features_out)
    print(f"featurized {len(item_ids)} questions x {len(vocab)} tokens")
    return EXIT_OK


def _stage_command(stage_fn, needs: tuple[str, ...]):
    def run(args: argparse.Namespace) -> int:
        cfg = _load_run_config(args)
        _require(cfg, *needs)
        paths = RunPaths(cfg.out_dir)
        paths.run_dir.mkdir(parents=True, exist_ok=True)
        result = stage_fn(cfg, paths)
        if stage_fn is stage_calibrate and not result.converged:
            sys.stderr.write(
                f"warning: calibration did not converge in {result.rounds_used} rounds\n"
            )
        return EXIT_OK

    return run


def cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    _require(cfg, "interactions", "questions")
    report = run_pipeline(cfg)
    if not report["calibration"]["converged"]:
        sys.stderr.write("warning: calibration did not converge\n")
    print(json.dumps(report["trait_estimation"], sort_keys=True, indent=2))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="irtext", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset with known truth")
    p.add_argument("--out", help="output directory")
    p.add_argument("--students", type=int, default=1000)
    p.add_argument("--items", type=int, default=100)
    p.add_argument("--answers-per-item", type=int, default=150)
    p.add_argument("--b-draw-bounds", nargs=2, type=float, default=[-5.0, 5.0])
    p.add_argument("--a-draw-bounds", nargs=2, type=float, default=[-1.0, 2.5])
    p.add_argument(
        "--signal",
        action="append",
        metavar="TOKEN:DB:DA",
        help="planted signal token with difficulty/discrimination deltas",
    )
    p.add_argument("--signal-probability", type=float, default=0.5)
    p.add_argument("--text-length", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_simulate)

    for name, stage_fn, needs in (
        ("filter", stage_filter, ("interactions",)),
        ("split", stage_split, ("questions",)),
        ("calibrate", stage_calibrate, ()),
        ("select-model", stage_select_model, ("questions",)),
        ("train", stage_train, ("questions",)),
        ("estimate", stage_estimate, ("questions",)),
        ("predict", stage_predict, ()),
        ("report", stage_report, ()),
    ):
        p = sub.add_parser(name, help=f"run the {name} stage on a run directory")
        _add_run_flags(p)
        p.set_defaults(fn=_stage_command(stage_fn, needs))

    p = sub.add_parser("featurize", help="build TF-IDF features for a question bank")
    p.add_argument("--questions", required=True)
    p.add_argument("--encoding", default=Encoding.QUESTION_ONLY.value,
                   choices=[e.value for e in Encoding])
    p.add_argument("--n-w", type=int, default=1000)
    p.add_argument("--items-file", help="optional file with one item id per line")
    p.add_argument("--vocab-in", help="reuse an existing vocabulary file")
    p.add_argument("--vocab-out", help="write the vocabulary file")
    p.add_argument("--features-out", required=True)
    p.set_defaults(fn=cmd_featurize)

    p = sub.add_parser("pipeline", help="run the full experimental protocol")
    _add_run_flags(p)
    p.set_defaults(fn=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (DataValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA
    except (ValueError, KeyError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
