"""Greedy decoding.

Hard-attention variants pick, at every step, the symbol maximizing the
alignment-marginalized next-symbol probability under the current forward
row, then advance the row with the chosen symbol. Soft attention takes the
per-step argmax. Ties go to the lowest vocabulary index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import heads
from .autodiff import no_grad
from .config import VariantKind
from .data import BOS_INDEX, EOS_INDEX
from .errors import ContractError
from .lattice import _np_lse
from .model import Transducer


@dataclass
class DecodeResult:
    symbols: list[int]  # excludes EOS
    step_scores: list[float] = field(default_factory=list)  # log p(y*_i | y*_<i, x), EOS step included
    terminated: bool = True
    alignments: list[np.ndarray] = field(default_factory=list)  # per-step alignment marginals

    @property
    def log_score(self) -> float:
        return float(np.sum(self.step_scores))

    @property
    def scored_target(self) -> np.ndarray:
        """The sequence whose likelihood ``log_score`` is (EOS appended if emitted)."""
        tail = [EOS_INDEX] if self.terminated else []
        return np.array(self.symbols + tail, dtype=np.int64)


def _limit(model: Transducer, source, max_length: int | None) -> int:
    n = max_length if max_length is not None else model.config.decode_limit(len(source) - 2)
    if n < 1:
        raise ContractError("max_length must be >= 1")
    return n


def greedy_decode(model: Transducer, source, tags=(), max_length: int | None = None, **kwargs) -> DecodeResult:
    if model.variant is VariantKind.SOFT:
        return greedy_decode_soft(model, source, tags, max_length)
    return greedy_decode_hard(model, source, tags, max_length, **kwargs)


def greedy_decode_hard(
    model: Transducer,
    source,
    tags=(),
    max_length: int | None = None,
    use_trellis: bool | None = None,
) -> DecodeResult:
    """Greedy decoding with forward-row bookkeeping.

    HARD0 uses the zeroth-order step marginals by default; ``use_trellis=True``
    routes it through the first-order machinery with rows constant in the
    previous position instead.
    """
    n = _limit(model, source, max_length)
    first_order = model.variant.is_first_order
    if use_trellis is None:
        use_trellis = first_order
    if first_order and not use_trellis:
        raise ContractError("first-order variants always decode through the trellis")
    result = DecodeResult([], terminated=False)
    with no_grad():
        h_e = model.encode(np.asarray(source, dtype=np.int64))
        h_t = model.embed_tags(tags)
        state = model.initial_decoder_state()
        length = h_e.shape[0]
        alpha = np.full(length, -np.inf)
        alpha[0] = 0.0
        prev = None
        for _ in range(n):
            state = model.decode_step(state, BOS_INDEX if prev is None else prev, h_t)
            emission = heads.emission_logprobs(state.h, h_e, model.V, model.W).data
            trans = model.transition(state.h, h_e).data
            if use_trellis:
                if trans.ndim == 1:
                    trans = np.broadcast_to(trans[None, :], (length, length))
                prior = _np_lse(trans + alpha[:, None], axis=0)
            else:
                prior = trans  # log p(a_i = j); alpha is kept normalized below
            joint = prior[:, None] + emission
            symbol_scores = _np_lse(joint, axis=0)
            best = int(np.argmax(symbol_scores))
            new_alpha = joint[:, best]
            if use_trellis:
                result.step_scores.append(float(symbol_scores[best] - _np_lse(alpha)))
                alpha = new_alpha
            else:
                result.step_scores.append(float(symbol_scores[best]))
                alpha = new_alpha - symbol_scores[best]
            result.alignments.append(np.exp(new_alpha - _np_lse(new_alpha)))
            if best == EOS_INDEX:
                result.terminated = True
                break
            result.symbols.append(best)
            prev = best
    return result


def greedy_decode_soft(model: Transducer, source, tags=(), max_length: int | None = None) -> DecodeResult:
    n = _limit(model, source, max_length)
    result = DecodeResult([], terminated=False)
    with no_grad():
        h_e = model.encode(np.asarray(source, dtype=np.int64))
        h_t = model.embed_tags(tags)
        state = model.initial_decoder_state()
        prev = BOS_INDEX
        for _ in range(n):
            state = model.decode_step(state, prev, h_t)
            logp, weights, _ = heads.soft_attention_step(state.h, h_e, model.T, model.V, model.W)
            best = int(np.argmax(logp.data))
            result.step_scores.append(float(logp.data[best]))
            result.alignments.append(weights.data.copy())
            if best == EOS_INDEX:
                result.terminated = True
                break
            result.symbols.append(best)
            prev = best
    return result


def reject_beam(width: int) -> None:
    if width > 1:
        raise NotImplementedError("beam search is not implemented; decoding is greedy (width 1) only")
