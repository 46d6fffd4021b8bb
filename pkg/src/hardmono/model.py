"""Encoder, tag summary, decoder recurrence and per-variant scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import heads, lattice
from .autodiff import Tensor
from .config import ModelConfig, VariantKind
from .data import BOS_INDEX
from .errors import ConfigurationError, VocabularyError
from .layers import BiLSTMLayer, DropoutSpec, Embedding, LSTMCell, Module, bilstm_encode, dropout, uniform_parameter


@dataclass
class DecoderState:
    h: Tensor
    c: Tensor
    step: int = 0


@dataclass
class StepTables:
    """Per-step log-probability tables for one (x, y) pair under teacher forcing."""

    emission: Tensor  # (steps, |x|, |vocab|), or (steps, |vocab|) for SOFT
    emit_gold: Tensor | None  # (steps, |x|)
    transition: Tensor | None  # (steps, |x|) zeroth order, (steps, |x|, |x|) first order
    attention: Tensor | None = None  # SOFT only


class Transducer(Module):
    def __init__(
        self,
        config: ModelConfig,
        n_source: int,
        n_target: int,
        n_tags: int,
        rng: np.random.Generator | None = None,
    ):
        if n_source < 1 or n_target < 1 or n_tags < 0:
            raise ConfigurationError("vocabulary sizes must be positive")
        if rng is None:
            rng = np.random.default_rng(config.seed)
        self.config = config
        self.n_source, self.n_target, self.n_tags = n_source, n_target, n_tags
        d_h, d_t, d_c = config.d_hidden, config.d_tag, config.d_char

        self.source_embedding = Embedding(n_source, d_c, rng, "source_embedding")
        self.target_embedding = Embedding(n_target, d_c, rng, "target_embedding")
        self.tag_embedding = Embedding(n_tags, d_t, rng, "tag_embedding")
        self.Y = uniform_parameter(rng, (d_t, n_tags * d_t), 1.0 / np.sqrt(max(n_tags * d_t, 1)), "Y")
        self.encoder = [
            BiLSTMLayer(d_c if k == 0 else 2 * d_h, d_h, rng, f"encoder.{k}")
            for k in range(config.encoder_layers)
        ]
        self.decoder = LSTMCell(d_c + d_t, d_h, rng, "decoder")
        k = 1.0 / np.sqrt(d_h)
        self.V = uniform_parameter(rng, (3 * d_h, 3 * d_h), k, "V")
        self.W = uniform_parameter(rng, (n_target, 3 * d_h), k, "W")
        self.T = uniform_parameter(rng, (d_h, 2 * d_h), k, "T")
        if config.variant is VariantKind.MONO1:
            self.U = uniform_parameter(rng, (config.window + 1, 2 * d_h), k, "U")

    @property
    def variant(self) -> VariantKind:
        return self.config.variant

    # -- encoder / tags / decoder ---------------------------------------------

    def _dropout_spec(self, training: bool) -> DropoutSpec:
        return DropoutSpec(self.config.dropout, training)

    def encode(self, source: np.ndarray, training: bool = False, rng=None) -> Tensor:
        spec = self._dropout_spec(training)
        emb = dropout(self.source_embedding(source), spec, rng)
        return bilstm_encode(self.encoder, emb, spec, rng)

    def embed_tags(self, tags) -> Tensor:
        """ReLU(Y [slot_1; ...; slot_n]) where slot k is e_t(k) if tag k is present else 0."""
        present = np.zeros((self.n_tags, 1))
        idx = np.asarray(sorted(set(int(t) for t in tags)), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_tags):
            raise VocabularyError(f"tag index out of range for {self.n_tags} tags: {idx.tolist()}")
        present[idx] = 1.0
        slots = (self.tag_embedding.weight * present).reshape(-1)
        return ad.relu(self.Y @ slots)

    def initial_decoder_state(self) -> DecoderState:
        h, c = self.decoder.initial_state()
        return DecoderState(h, c, 0)

    def decode_step(self, state: DecoderState, prev_symbol: int, h_t: Tensor) -> DecoderState:
        """One decoder recurrence step consuming the previous target symbol."""
        emb = self.target_embedding([prev_symbol])[0]
        h, c = self.decoder.step(ad.concat([emb, h_t]), (state.h, state.c))
        return DecoderState(h, c, state.step + 1)

    def decoder_states(self, target: np.ndarray, h_t: Tensor, training: bool = False, rng=None) -> Tensor:
        """Teacher-forced decoder states for every target step -> (steps, d_h)."""
        prev = np.concatenate([[BOS_INDEX], np.asarray(target[:-1], dtype=np.int64)])
        emb = dropout(self.target_embedding(prev), self._dropout_spec(training), rng)
        tag_rows = h_t.reshape(1, -1) + np.zeros((len(prev), 1))
        return self.decoder.run(ad.concat([emb, tag_rows], axis=1))

    # -- heads ------------------------------------------------------------------

    def transition(self, h_d: Tensor, h_e: Tensor) -> Tensor:
        v = self.variant
        if v is VariantKind.HARD0:
            return heads.transition_logprobs_hard0(h_d, h_e, self.T)
        if v is VariantKind.MONO0:
            return heads.transition_logprobs_mono0(h_d, h_e, self.T)
        if v is VariantKind.MONO1:
            return heads.transition_logprobs_mono1(h_d, h_e, self.T, self.U, self.config.window)
        raise ConfigurationError("soft attention has no transition distribution")

    def step_tables(self, h_d: Tensor, h_e: Tensor, target: np.ndarray | None = None) -> StepTables:
        if self.variant is VariantKind.SOFT:
            logp, weights, _ = heads.soft_attention_step(h_d, h_e, self.T, self.V, self.W)
            return StepTables(logp, None, None, weights)
        emission = heads.emission_logprobs(h_d, h_e, self.V, self.W)
        gold = None
        if target is not None:
            steps, length = emission.shape[0], emission.shape[1]
            gold = emission[
                np.arange(steps)[:, None], np.arange(length)[None, :], np.asarray(target)[:, None]
            ]
        return StepTables(emission, gold, self.transition(h_d, h_e))

    def tables(self, source, target, tags, training: bool = False, rng=None) -> StepTables:
        target = np.asarray(target, dtype=np.int64)
        h_e = self.encode(np.asarray(source, dtype=np.int64), training, rng)
        h_t = self.embed_tags(tags)
        h_d = self.decoder_states(target, h_t, training, rng)
        return self.step_tables(h_d, h_e, target)

    def log_likelihood(self, source, target, tags=(), training: bool = False, rng=None) -> Tensor:
        """Exact marginal log p(y | x, t); ``target`` is scored exactly as given."""
        target = np.asarray(target, dtype=np.int64)
        if len(target) == 0:
            return Tensor(0.0)
        if target.min() < 0 or target.max() >= self.n_target:
            raise VocabularyError(f"target index out of range: {target.tolist()}")
        tables = self.tables(source, target, tags, training, rng)
        return score_tables(self.variant, tables, target)


def score_tables(variant: VariantKind, tables: StepTables, target: np.ndarray) -> Tensor:
    if variant is VariantKind.SOFT:
        return tables.emission[np.arange(len(target)), target].sum()
    if variant is VariantKind.HARD0:
        return lattice.loglik_order0(tables.emit_gold, tables.transition)
    return lattice.loglik_order1(tables.emit_gold, tables.transition)


def count_parameters(config: ModelConfig, n_source: int, n_target: int, n_tags: int) -> int:
    """Closed-form parameter count; agrees with ``Transducer.num_parameters``."""
    d_h, d_t, d_c = config.d_hidden, config.d_tag, config.d_char

    def lstm(inp):
        return 4 * d_h * (inp + d_h) + 4 * d_h

    total = (n_source + n_target) * d_c + n_tags * d_t + d_t * n_tags * d_t
    total += sum(2 * lstm(d_c if k == 0 else 2 * d_h) for k in range(config.encoder_layers))
    total += lstm(d_c + d_t)
    total += 9 * d_h * d_h + n_target * 3 * d_h + 2 * d_h * d_h
    if config.variant is VariantKind.MONO1:
        total += (config.window + 1) * 2 * d_h
    return total
