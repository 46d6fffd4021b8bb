"""Command-line entry point: train, predict, evaluate, gradcheck, enumcheck.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric-check failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import checks, lattice, metrics
from .autodiff import no_grad
from .checkpoint import load_checkpoint
from .config import ModelConfig, VariantKind
from .data import (
    TaskKind,
    Vocabularies,
    join_units,
    load_split,
    parse_source_line,
    target_units,
)
from .decoder import greedy_decode, reject_beam
from .errors import ConfigurationError, ContractError, DataError, NumericError, VocabularyError
from .model import Transducer, count_parameters
from .trainer import TrainConfig, evaluate_samples, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
REFERENCE_PARAMETER_COUNT = 8.6e6

log = logging.getLogger("hardmono")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_model_args(p: argparse.ArgumentParser) -> None:
    defaults = ModelConfig()
    p.add_argument("--variant", choices=[v.value for v in VariantKind], default=defaults.variant.value)
    p.add_argument("--d-hidden", type=int, default=defaults.d_hidden)
    p.add_argument("--d-tag", type=int, default=defaults.d_tag)
    p.add_argument("--d-char", type=int, default=defaults.d_char)
    p.add_argument("--layers", type=int, default=defaults.encoder_layers)
    p.add_argument("--dropout", type=float, default=defaults.dropout)
    p.add_argument("--window", type=int, default=defaults.window)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hardmono", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model")
    _add_model_args(p)
    p.add_argument("--task", choices=[t.value for t in TaskKind], required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--unknown-tags", choices=["error", "ignore"], default="error")

    p = sub.add_parser("predict", help="greedy-decode a source file")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--beam-width", type=int, default=1)
    p.add_argument("--max-length", type=int)
    p.add_argument("--dump-alignments", metavar="PATH", help="write per-sample alignment posteriors as JSON lines")

    p = sub.add_parser("evaluate", help="score predictions against references")
    p.add_argument("--predictions", required=True)
    p.add_argument("--references", required=True)
    p.add_argument("--task", choices=[t.value for t in TaskKind], required=True)
    p.add_argument("--report", help="write the metrics as JSON here")

    for name, help_text, trials in (
        ("gradcheck", "finite-difference gradient check", 1),
        ("enumcheck", "lattice vs. brute-force path enumeration", 100),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--trials", type=int, default=trials)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--variants", nargs="+", choices=[v.value for v in VariantKind])
        if name == "gradcheck":
            p.add_argument("--d-hidden", type=int, default=4)
    return parser


# ---------------------------------------------------------------------------


def _config_from_args(args) -> ModelConfig:
    return ModelConfig(
        variant=args.variant,
        d_hidden=args.d_hidden,
        d_tag=args.d_tag,
        d_char=args.d_char,
        encoder_layers=args.layers,
        dropout=args.dropout,
        window=args.window,
        seed=args.seed,
    )


def _report_parameter_count(config: ModelConfig, vocab: Vocabularies) -> int:
    n = count_parameters(config, len(vocab.source), len(vocab.target), len(vocab.tags))
    print(f"parameters: {n:,}")
    defaults = ModelConfig(variant=config.variant, seed=config.seed, dropout=config.dropout)
    uses_default_sizes = all(
        getattr(config, f) == getattr(defaults, f) for f in ("d_hidden", "d_tag", "d_char", "encoder_layers", "window")
    )
    if uses_default_sizes and abs(n - REFERENCE_PARAMETER_COUNT) > 0.1 * REFERENCE_PARAMETER_COUNT:
        print(f"warning: default configuration has {n:,} parameters, more than 10% away from 8.6M", file=sys.stderr)
    return n


def cmd_train(args) -> int:
    task = TaskKind(args.task)
    split = load_split(task, args.train, args.dev, args.test, unknown_tags=args.unknown_tags)
    if not split.train or not split.dev:
        raise DataError("train and dev files must each contain at least one sample")
    config = _config_from_args(args)
    vocab = split.vocab
    _report_parameter_count(config, vocab)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vocab.source.save(out / "source.vocab")
    vocab.target.save(out / "target.vocab")
    vocab.tags.save(out / "tags.vocab")
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")

    model = Transducer(config, len(vocab.source), len(vocab.target), len(vocab.tags))
    train_config = TrainConfig(lr=args.lr, max_epochs=args.max_epochs, seed=args.seed)
    result = train(
        model, split.train, split.dev, task, train_config, out_dir=out, vocab=vocab,
        checkpoint_extra={"task": task.value},
    )
    print(f"best epoch {result.best_epoch} dev metric {result.best_metric:.4f} (stopped: {result.stopped_by})")
    if split.test:
        report = evaluate_samples(model, split.test)
        (out / "test_metrics.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        with (out / "test_predictions.txt").open("w", encoding="utf-8") as fh:
            for s in split.test:
                symbols = vocab.target.decode(greedy_decode(model, s.source, s.tags).symbols)
                fh.write(join_units(symbols, task) + "\n")
        print(report.table())
    return EXIT_OK if result.stopped_by != "divergence" else EXIT_NUMERIC


def cmd_predict(args) -> int:
    try:
        reject_beam(args.beam_width)
    except NotImplementedError as exc:
        raise UsageError(str(exc)) from exc
    model, vocab, extra = load_checkpoint(args.model)
    if vocab is None:
        raise DataError("checkpoint carries no vocabulary")
    task = TaskKind(extra.get("task", TaskKind.INFLECTION.value))
    lines = Path(args.input).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    dump = Path(args.dump_alignments).open("w", encoding="utf-8") if args.dump_alignments else None
    try:
        with Path(args.output).open("w", encoding="utf-8") as out:
            for line in lines:
                source_chars, tag_names = parse_source_line(line, task)
                source = np.array([1, *vocab.source.encode(source_chars), 2])
                tags = tuple(sorted(set(vocab.tags.encode(tag_names, unknown="ignore"))))
                result = greedy_decode(model, source, tags, args.max_length)
                symbols = vocab.target.decode(result.symbols)
                out.write(join_units(symbols, task) + "\n")
                if dump is not None:
                    dump.write(json.dumps(_alignment_record(model, source, tags, result, line, symbols)) + "\n")
    finally:
        if dump is not None:
            dump.close()
    return EXIT_OK


def _alignment_record(model, source, tags, result, line, symbols) -> dict:
    if model.variant is VariantKind.SOFT or len(result.scored_target) == 0:
        matrix = np.array(result.alignments)
        kind = "attention" if model.variant is VariantKind.SOFT else "posterior"
    else:
        with no_grad():
            tables = model.tables(source, result.scored_target, tags)
        matrix = lattice.posterior_alignment(tables.emit_gold, tables.transition)
        kind = "posterior"
    return {
        "input": line,
        "prediction": symbols,
        "terminated": result.terminated,
        "log_score": result.log_score,
        "kind": kind,
        "matrix": np.round(matrix, 6).tolist(),
    }


def _read_sequences(path, task: TaskKind) -> list[tuple[str, ...]]:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    out = []
    for line in lines:
        line = line.rstrip("\r")
        if "\t" in line:
            line = line.split("\t")[1]
        out.append(target_units(line, task))
    return out


def cmd_evaluate(args) -> int:
    task = TaskKind(args.task)
    predictions = _read_sequences(args.predictions, task)
    references = _read_sequences(args.references, task)
    if len(predictions) != len(references):
        raise DataError(f"{len(predictions)} predictions but {len(references)} references")
    report = metrics.evaluate(predictions, references)
    print(report.table())
    if args.report:
        Path(args.report).write_text(json.dumps({"task": task.value, **report.to_dict()}, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _variants(args, default):
    return tuple(VariantKind(v) for v in args.variants) if args.variants else default


def cmd_gradcheck(args) -> int:
    if args.trials <= 0:
        print("gradcheck: no trials requested")
        return EXIT_OK
    report = checks.gradcheck(_variants(args, checks.ALL_VARIANTS), args.trials, args.seed, args.d_hidden)
    print("\n".join(report.lines()))
    return EXIT_OK if report.passed else EXIT_NUMERIC


def cmd_enumcheck(args) -> int:
    variants = _variants(args, checks.HARD_VARIANTS)
    if VariantKind.SOFT in variants:
        raise UsageError("enumcheck applies to hard-attention variants only")
    if args.trials <= 0:
        print("enumcheck: no trials requested")
        return EXIT_OK
    report = checks.enumcheck(variants, args.trials, args.seed)
    print("\n".join(report.lines()))
    return EXIT_OK if report.passed else EXIT_NUMERIC


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
    "enumcheck": cmd_enumcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, VocabularyError, FileNotFoundError, UnicodeDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, ContractError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
