"""Evaluation metrics over symbol sequences (characters, or phonemes for G2P)."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

from .errors import ContractError

Seq = Sequence  # any sequence of hashable symbols, str included


def edit_distance(c: Seq, r: Seq) -> int:
    """Unit-cost Levenshtein distance."""
    if len(c) < len(r):
        c, r = r, c
    prev = list(range(len(r) + 1))
    for i, ci in enumerate(c, start=1):
        cur = [i]
        for j, rj in enumerate(r, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ci != rj)))
        prev = cur
    return prev[-1]


def _check_pairs(predictions, references) -> None:
    if len(predictions) != len(references):
        raise ContractError(f"{len(predictions)} predictions vs {len(references)} references")


def accuracy(predictions: Sequence[Seq], references: Sequence[Seq]) -> float:
    _check_pairs(predictions, references)
    if not references:
        return 0.0
    return sum(tuple(c) == tuple(r) for c, r in zip(predictions, references)) / len(references)


def wer(predictions: Sequence[Seq], references: Sequence[Seq]) -> float:
    return 1.0 - accuracy(predictions, references)


def per(predictions: Sequence[Seq], references: Sequence[Seq]) -> float:
    """Corpus-level phoneme error rate: total edits over total reference length."""
    _check_pairs(predictions, references)
    total = sum(len(r) for r in references)
    if total == 0:
        raise ContractError("PER needs a nonempty reference corpus")
    return sum(edit_distance(c, r) for c, r in zip(predictions, references)) / total


def lcs_length(c: Seq, r: Seq) -> float:
    return 0.5 * (len(c) + len(r) - edit_distance(c, r))


def fscore(c: Seq, r: Seq) -> float:
    if len(c) == 0 or len(r) == 0:
        return 0.0
    lcs = lcs_length(c, r)
    if lcs == 0:
        return 0.0
    recall, precision = lcs / len(r), lcs / len(c)
    return 2 * recall * precision / (recall + precision)


def mean_fscore(predictions: Sequence[Seq], references: Sequence[Seq]) -> float:
    _check_pairs(predictions, references)
    if not references:
        return 0.0
    return sum(fscore(c, r) for c, r in zip(predictions, references)) / len(references)


def mld(predictions: Sequence[Seq], references: Sequence[Seq]) -> float:
    _check_pairs(predictions, references)
    if not references:
        return 0.0
    return sum(edit_distance(c, r) for c, r in zip(predictions, references)) / len(references)


@dataclass
class MetricsReport:
    accuracy: float
    wer: float
    per: float
    mfs: float
    mld: float
    count: int

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [
            ("ACC", f"{100 * self.accuracy:.2f}"),
            ("WER", f"{100 * self.wer:.2f}"),
            ("PER", f"{self.per:.4f}"),
            ("MFS", f"{self.mfs:.4f}"),
            ("MLD", f"{self.mld:.4f}"),
            ("N", str(self.count)),
        ]
        return "\n".join(f"{name:<4}{value:>10}" for name, value in rows)


def evaluate(predictions: Sequence[Seq], references: Sequence[Seq]) -> MetricsReport:
    _check_pairs(predictions, references)
    has_ref = sum(len(r) for r in references) > 0
    acc = accuracy(predictions, references)
    return MetricsReport(
        accuracy=acc,
        wer=1.0 - acc,
        per=per(predictions, references) if has_ref else 0.0,
        mfs=mean_fscore(predictions, references),
        mld=mld(predictions, references),
        count=len(references),
    )
