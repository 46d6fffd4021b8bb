"""TSV loaders, vocabularies and sample wrapping.

File formats (UTF-8, tab separated, one sample per line):

* inflection: ``lemma<TAB>form<TAB>TAG;TAG;...``
* g2p: ``word<TAB>PH1 PH2 ...`` (space-delimited phoneme symbols)
* transliteration: ``source<TAB>target`` (character to character)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, VocabularyError

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
RESERVED = (PAD, BOS, EOS, UNK)
PAD_INDEX, BOS_INDEX, EOS_INDEX, UNK_INDEX = range(4)
VOCAB_HEADER = "#hardmono-vocab v1"


class TaskKind(str, enum.Enum):
    INFLECTION = "inflection"
    G2P = "g2p"
    TRANSLITERATION = "transliteration"


class Vocabulary:
    """Symbol <-> index map. Reserved symbols (if any) occupy the first indices."""

    def __init__(self, symbols: Iterable[str] = (), reserved: Sequence[str] = RESERVED):
        self.reserved = tuple(reserved)
        self._symbols: list[str] = []
        self._index: dict[str, int] = {}
        for s in self.reserved:
            self._add(s)
        for s in symbols:
            self._add(s)

    def _add(self, symbol: str) -> int:
        if symbol not in self._index:
            self._index[symbol] = len(self._symbols)
            self._symbols.append(symbol)
        return self._index[symbol]

    @classmethod
    def build(cls, sequences: Iterable[Iterable[str]], reserved: Sequence[str] = RESERVED) -> Vocabulary:
        """First-occurrence order over ``sequences``, after the reserved symbols."""
        vocab = cls(reserved=reserved)
        for seq in sequences:
            for s in seq:
                vocab._add(s)
        return vocab

    def __len__(self) -> int:
        return len(self._symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._symbols == other._symbols and self.reserved == other.reserved

    @property
    def symbols(self) -> list[str]:
        return list(self._symbols)

    @property
    def has_unk(self) -> bool:
        return UNK in self.reserved

    def index(self, symbol: str, unknown: str = "unk") -> int | None:
        """Look up ``symbol``. ``unknown`` is ``"unk"``, ``"error"`` or ``"ignore"``."""
        i = self._index.get(symbol)
        if i is not None:
            return i
        if unknown == "unk" and self.has_unk:
            return UNK_INDEX
        if unknown == "ignore":
            return None
        raise VocabularyError(f"unknown symbol {symbol!r}")

    def encode(self, symbols: Iterable[str], unknown: str = "unk") -> list[int]:
        out = (self.index(s, unknown) for s in symbols)
        return [i for i in out if i is not None]

    def symbol(self, index: int) -> str:
        if not 0 <= index < len(self._symbols):
            raise VocabularyError(f"index {index} outside vocabulary of size {len(self)}")
        return self._symbols[index]

    def decode(self, indices: Iterable[int]) -> list[str]:
        return [self.symbol(int(i)) for i in indices]

    def to_lines(self) -> list[str]:
        return [VOCAB_HEADER, f"#reserved {len(self.reserved)}", *self._symbols]

    @classmethod
    def from_lines(cls, lines: Sequence[str]) -> Vocabulary:
        if not lines or lines[0] != VOCAB_HEADER:
            raise DataError("not a vocabulary file (missing header)")
        try:
            n_reserved = int(lines[1].split()[1])
        except (IndexError, ValueError) as exc:
            raise DataError("vocabulary file has a malformed reserved-count line") from exc
        body = list(lines[2:])
        return cls(body[n_reserved:], reserved=body[:n_reserved])

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.to_lines()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> Vocabulary:
        text = Path(path).read_text(encoding="utf-8")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls.from_lines(lines)


@dataclass(frozen=True)
class RawExample:
    source: tuple[str, ...]
    target: tuple[str, ...]
    tags: tuple[str, ...] = ()


@dataclass
class TransductionSample:
    source: np.ndarray  # BOS x_1 ... x_n EOS
    target: np.ndarray  # y_1 ... y_m EOS
    tags: tuple[int, ...]
    raw: RawExample


@dataclass
class Vocabularies:
    source: Vocabulary
    target: Vocabulary
    tags: Vocabulary

    @classmethod
    def from_examples(cls, examples: Sequence[RawExample]) -> Vocabularies:
        return cls(
            Vocabulary.build(e.source for e in examples),
            Vocabulary.build(e.target for e in examples),
            Vocabulary.build((e.tags for e in examples), reserved=()),
        )

    def wrap(self, example: RawExample, unknown_tags: str = "error") -> TransductionSample:
        src = [BOS_INDEX, *self.source.encode(example.source), EOS_INDEX]
        tgt = [*self.target.encode(example.target), EOS_INDEX]
        tags = tuple(sorted(set(self.tags.encode(example.tags, unknown=unknown_tags))))
        return TransductionSample(np.array(src, dtype=np.int64), np.array(tgt, dtype=np.int64), tags, example)

    def to_dict(self) -> dict:
        return {name: getattr(self, name).to_lines() for name in ("source", "target", "tags")}

    @classmethod
    def from_dict(cls, d: dict) -> Vocabularies:
        return cls(*(Vocabulary.from_lines(d[name]) for name in ("source", "target", "tags")))


@dataclass
class DatasetSplit:
    task: TaskKind
    train: list[TransductionSample] = field(default_factory=list)
    dev: list[TransductionSample] = field(default_factory=list)
    test: list[TransductionSample] = field(default_factory=list)
    vocab: Vocabularies | None = None


# ---------------------------------------------------------------------------
# parsing


def _read_lines(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    lines = (line.rstrip("\r") for line in text.split("\n"))
    return [line for line in lines if line.strip()]


def _split(line: str, lineno: int, min_cols: int, max_cols: int) -> list[str]:
    cols = line.split("\t")
    if not min_cols <= len(cols) <= max_cols or not cols[0]:
        raise DataError(f"line {lineno}: expected {min_cols}-{max_cols} tab-separated columns, got {len(cols)}")
    return cols


def split_tags(bundle: str) -> tuple[str, ...]:
    return tuple(t for t in bundle.split(";") if t)


def target_units(text: str, task: TaskKind) -> tuple[str, ...]:
    if task is TaskKind.G2P:
        return tuple(text.split())
    return tuple(text)


def join_units(units: Sequence[str], task: TaskKind) -> str:
    return " ".join(units) if task is TaskKind.G2P else "".join(units)


def parse_line(line: str, task: TaskKind, lineno: int = 1) -> RawExample:
    task = TaskKind(task)
    if task is TaskKind.INFLECTION:
        lemma, form, bundle = _split(line, lineno, 3, 3)
        return RawExample(tuple(lemma), tuple(form), split_tags(bundle))
    source, target = _split(line, lineno, 2, 2)
    return RawExample(tuple(source), target_units(target, task))


def read_examples(path, task: TaskKind) -> list[RawExample]:
    return [parse_line(line, task, n) for n, line in enumerate(_read_lines(path), start=1)]


def format_example(example: RawExample, task: TaskKind) -> str:
    task = TaskKind(task)
    src = "".join(example.source)
    tgt = join_units(example.target, task)
    if task is TaskKind.INFLECTION:
        return f"{src}\t{tgt}\t{';'.join(example.tags)}"
    return f"{src}\t{tgt}"


def write_examples(path, examples: Sequence[RawExample], task: TaskKind) -> None:
    body = "".join(format_example(e, task) + "\n" for e in examples)
    Path(path).write_text(body, encoding="utf-8")


def parse_source_line(line: str, task: TaskKind) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Source characters and tags from a prediction input line.

    Accepts a bare source, a full training-format line, or (inflection only)
    ``lemma<TAB>tags``.
    """
    cols = line.rstrip("\r\n").split("\t")
    tags: tuple[str, ...] = ()
    if TaskKind(task) is TaskKind.INFLECTION and len(cols) >= 2:
        tags = split_tags(cols[-1])
    return tuple(cols[0]), tags


def load_split(
    task: TaskKind,
    train_path,
    dev_path=None,
    test_path=None,
    vocab: Vocabularies | None = None,
    unknown_tags: str = "error",
) -> DatasetSplit:
    """Load a task; vocabularies come from the training file unless given."""
    task = TaskKind(task)
    train_raw = read_examples(train_path, task) if train_path else []
    if vocab is None:
        vocab = Vocabularies.from_examples(train_raw)
    split = DatasetSplit(task, vocab=vocab)
    split.train = [vocab.wrap(e, unknown_tags) for e in train_raw]
    for name, path in (("dev", dev_path), ("test", test_path)):
        if path:
            setattr(split, name, [vocab.wrap(e, unknown_tags) for e in read_examples(path, task)])
    return split


def load_inflection(path, **kwargs) -> DatasetSplit:
    return load_split(TaskKind.INFLECTION, path, **kwargs)


def load_g2p(path, **kwargs) -> DatasetSplit:
    return load_split(TaskKind.G2P, path, **kwargs)


def load_translit(path, **kwargs) -> DatasetSplit:
    return load_split(TaskKind.TRANSLITERATION, path, **kwargs)
