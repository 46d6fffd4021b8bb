"""Adam, gradient clipping, the dev-driven learning-rate schedule and the training loop."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import metrics
from .autodiff import Tensor, no_grad
from .checkpoint import save_checkpoint
from .data import TaskKind, TransductionSample, Vocabularies
from .decoder import greedy_decode
from .errors import ContractError, NumericError
from .model import Transducer

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    lr_floor: float = 1e-5
    lr_decay: float = 0.5
    clip_norm: float | None = 5.0
    max_epochs: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True


class Adam:
    """Bias-corrected Adam over a fixed, named parameter set.

    Parameter arrays are rebound as views into one flat buffer so a step is a
    handful of vector operations regardless of how many tensors the model has.
    """

    def __init__(self, params: dict[str, Tensor], beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        sizes = [p.size for p in params.values()]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.flat = np.concatenate([p.data.ravel() for p in params.values()]) if sizes else np.zeros(0)
        for (lo, hi), p in zip(zip(self._offsets[:-1], self._offsets[1:]), params.values()):
            p.data = self.flat[lo:hi].reshape(p.shape)
        self.m = np.zeros_like(self.flat)
        self.v = np.zeros_like(self.flat)
        self.t = 0

    def flat_grad(self) -> np.ndarray:
        parts = [p.grad.ravel() if p.grad is not None else np.zeros(p.size) for p in self.params.values()]
        return np.concatenate(parts) if parts else np.zeros(0)

    def _check_finite(self, grad: np.ndarray) -> None:
        if np.all(np.isfinite(grad)):
            return
        for (lo, hi), name in zip(zip(self._offsets[:-1], self._offsets[1:]), self.params):
            if not np.all(np.isfinite(grad[lo:hi])):
                raise NumericError(f"non-finite gradient in parameter {name}")

    def step(self, lr: float, clip_norm: float | None = None) -> float:
        """Apply one update from the current ``.grad`` fields; returns the pre-clip norm."""
        g = self.flat_grad()
        self._check_finite(g)
        norm = float(np.sqrt(g @ g))
        if clip_norm is not None and norm > clip_norm:
            g *= clip_norm / norm
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1, c2 = 1.0 - b1**self.t, np.sqrt(1.0 - b2**self.t)
        self.m *= b1
        self.m += (1.0 - b1) * g
        np.multiply(g, g, out=g)
        g *= 1.0 - b2
        self.v *= b2
        self.v += g
        # m_hat / (sqrt(v_hat) + eps), folded into one set of in-place passes
        denom = np.sqrt(self.v)
        denom += self.eps * c2
        np.divide(self.m, denom, out=denom)
        denom *= lr * c2 / c1
        self.flat -= denom
        return norm


def global_grad_norm(params: Sequence[Tensor]) -> float:
    return float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params if p.grad is not None)))


def clip_gradients(params: Sequence[Tensor], max_norm: float = 5.0) -> float:
    """Rescale all gradients in place so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    norm = global_grad_norm(params)
    if norm > max_norm:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


class LRSchedule:
    """Halve the rate whenever dev NLL fails to beat the best seen so far."""

    def __init__(self, lr: float = 1e-3, floor: float = 1e-5, factor: float = 0.5):
        self.lr = lr
        self.floor = floor
        self.factor = factor
        self.best = np.inf

    def halve(self) -> None:
        self.lr *= self.factor

    def update(self, dev_nll: float) -> bool:
        """Record a dev NLL; returns True if the rate was halved."""
        if dev_nll < self.best:
            self.best = dev_nll
            return False
        self.halve()
        return True

    @property
    def finished(self) -> bool:
        return self.lr < self.floor


def select_best(series: Sequence[float], higher_is_better: bool = True) -> int:
    """Index of the first best value."""
    if not series:
        raise ContractError("no values to select from")
    values = np.asarray(series, dtype=float)
    return int(np.argmax(values) if higher_is_better else np.argmin(values))


def metric_for(task: TaskKind) -> tuple[str, bool]:
    """(MetricsReport field, higher-is-better) used for model selection."""
    return ("wer", False) if TaskKind(task) is TaskKind.G2P else ("accuracy", True)


def mean_nll(model: Transducer, samples: Sequence[TransductionSample]) -> float:
    if not samples:
        return float("nan")
    with no_grad():
        total = sum(-model.log_likelihood(s.source, s.target, s.tags).item() for s in samples)
    return total / len(samples)


def decode_samples(model: Transducer, samples: Sequence[TransductionSample]) -> list[list[int]]:
    return [greedy_decode(model, s.source, s.tags).symbols for s in samples]


def evaluate_samples(model: Transducer, samples: Sequence[TransductionSample]) -> metrics.MetricsReport:
    predictions = decode_samples(model, samples)
    references = [list(s.target[:-1]) for s in samples]
    return metrics.evaluate(predictions, references)


@dataclass
class EpochRecord:
    epoch: int
    train_nll: float
    dev_nll: float
    dev_metric: float
    lr: float
    seconds: float

    def line(self) -> str:
        return (
            f"{self.epoch}\t{self.train_nll:.6f}\t{self.dev_nll:.6f}\t"
            f"{self.dev_metric:.6f}\t{self.lr:.3e}\t{self.seconds:.1f}"
        )


LOG_HEADER = "epoch\ttrain_nll\tdev_nll\tdev_metric\tlr\tseconds"


@dataclass
class TrainResult:
    best_epoch: int
    best_metric: float
    history: list[EpochRecord] = field(default_factory=list)
    stopped_by: str = "max_epochs"
    checkpoint: Path | None = None


def train_epoch(
    model: Transducer,
    samples: Sequence[TransductionSample],
    optimizer: Adam,
    lr: float,
    clip_norm: float | None,
    rng: np.random.Generator,
    order: Sequence[int] | None = None,
) -> float:
    """One pass at batch size 1; returns mean training NLL."""
    order = range(len(samples)) if order is None else order
    total = 0.0
    for k in order:
        s = samples[k]
        model.zero_grad()
        loss = -model.log_likelihood(s.source, s.target, s.tags, training=True, rng=rng)
        value = loss.item()
        if not np.isfinite(value):
            raise NumericError(f"non-finite loss {value} on training sample {k}")
        loss.backward()
        optimizer.step(lr, clip_norm)
        total += value
    return total / max(len(samples), 1)


def train(
    model: Transducer,
    train_samples: Sequence[TransductionSample],
    dev_samples: Sequence[TransductionSample],
    task: TaskKind,
    config: TrainConfig = TrainConfig(),
    out_dir=None,
    vocab: Vocabularies | None = None,
    on_epoch_end: Callable[[EpochRecord, Transducer], bool] | None = None,
    checkpoint_extra: dict | None = None,
) -> TrainResult:
    """Train until the learning rate drops below its floor or ``max_epochs``.

    The model is left holding the parameters of the epoch with the best dev
    metric; if ``out_dir`` is given that state is also written to
    ``out_dir/model.npz`` and every epoch is appended to ``out_dir/train.log``.
    ``on_epoch_end`` may return True to stop early.
    """
    if not train_samples or not dev_samples:
        raise ContractError("training needs nonempty train and dev splits")
    rng = np.random.default_rng(config.seed)
    params = model.named_parameters()
    optimizer = Adam(params, config.beta1, config.beta2, config.eps)
    schedule = LRSchedule(config.lr, config.lr_floor, config.lr_decay)
    metric_name, higher = metric_for(task)

    out = Path(out_dir) if out_dir is not None else None
    log_fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        log_fh = (out / "train.log").open("w", encoding="utf-8")
        log_fh.write(LOG_HEADER + "\n")

    result = TrainResult(best_epoch=0, best_metric=np.nan)
    best_state: dict[str, np.ndarray] | None = None
    scores: list[float] = []
    try:
        for epoch in range(1, config.max_epochs + 1):
            start = time.perf_counter()
            order = rng.permutation(len(train_samples)) if config.shuffle else None
            lr = schedule.lr
            try:
                train_nll = train_epoch(model, train_samples, optimizer, lr, config.clip_norm, rng, order)
            except NumericError:
                result.stopped_by = "divergence"
                log.error("training diverged in epoch %d; keeping the best earlier state", epoch)
                break
            dev_nll = mean_nll(model, dev_samples)
            report = evaluate_samples(model, dev_samples)
            dev_metric = getattr(report, metric_name)
            record = EpochRecord(epoch, train_nll, dev_nll, dev_metric, lr, time.perf_counter() - start)
            result.history.append(record)
            scores.append(dev_metric)
            log.info(record.line())
            if log_fh is not None:
                log_fh.write(record.line() + "\n")
                log_fh.flush()
            if select_best(scores, higher) == len(scores) - 1:
                result.best_epoch, result.best_metric = epoch, dev_metric
                best_state = {k: p.data.copy() for k, p in params.items()}
                if out is not None:
                    extra = {**(checkpoint_extra or {}), "epoch": epoch, "dev_metric": dev_metric}
                    save_checkpoint(out / "model.npz", model, vocab, extra)
                    result.checkpoint = out / "model.npz"
            schedule.update(dev_nll)
            if on_epoch_end is not None and on_epoch_end(record, model):
                result.stopped_by = "callback"
                break
            if schedule.finished:
                result.stopped_by = "lr_floor"
                break
    finally:
        if log_fh is not None:
            log_fh.close()
    if best_state is not None:
        for k, p in params.items():
            p.data[...] = best_state[k]
    return result


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
