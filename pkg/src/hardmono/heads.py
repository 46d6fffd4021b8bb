"""Emission and transition distributions for the four model variants.

All functions are batched over decoder steps: ``h_d`` is ``(steps, d_h)`` and
``h_e`` is ``(|x|, 2 d_h)``. A 1-D ``h_d`` is treated as a single step and the
leading step axis is dropped from the result.

First-order transitions are returned as ``(steps, |x|, |x|)`` arrays whose
row ``[i, j_prev]`` is the log distribution over the next position. Disallowed
moves hold exactly ``-inf``.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

NEG_INF = -np.inf


def _batched(fn):
    def wrapper(h_d: Tensor, *args, **kwargs):
        if h_d.ndim == 1:
            out = fn(h_d.reshape(1, -1), *args, **kwargs)
            if isinstance(out, tuple):
                return tuple(o[0] for o in out)
            return out[0]
        return fn(h_d, *args, **kwargs)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _mlp(h_d: Tensor, h_src: Tensor, V: Tensor) -> Tensor:
    """tanh(V [h_d; h_src]) for every (step, source-row) pair -> (steps, rows, 3 d_h)."""
    n = h_d.shape[-1]
    left = h_d @ V[:, :n].T
    right = h_src @ V[:, n:].T
    steps, rows = h_d.shape[0], h_src.shape[0]
    return ad.tanh(left.reshape(steps, 1, -1) + right.reshape(1, rows, -1))


@_batched
def emission_logprobs(h_d: Tensor, h_e: Tensor, V: Tensor, W: Tensor) -> Tensor:
    """log p(y | a=j, y_<i, x) -> (steps, |x|, |vocab|)."""
    hidden = _mlp(h_d, h_e, V)
    steps, rows, width = hidden.shape
    logits = (hidden.reshape(steps * rows, width) @ W.T).reshape(steps, rows, -1)
    return ad.log_softmax(logits, axis=-1)


def bilinear_scores(h_d: Tensor, h_e: Tensor, T: Tensor) -> Tensor:
    return (h_d @ T) @ h_e.T


@_batched
def transition_logprobs_hard0(h_d: Tensor, h_e: Tensor, T: Tensor) -> Tensor:
    """Zeroth-order alignment distribution -> (steps, |x|)."""
    return ad.log_softmax(bilinear_scores(h_d, h_e, T), axis=-1)


def monotone_mask(length: int) -> np.ndarray:
    """Additive mask: 0 where j >= j_prev, -inf otherwise; indexed [j_prev, j]."""
    j_prev, j = np.indices((length, length))
    return np.where(j >= j_prev, 0.0, NEG_INF)


@_batched
def transition_logprobs_mono0(h_d: Tensor, h_e: Tensor, T: Tensor) -> Tensor:
    """Bilinear scores renormalized over j >= j_prev -> (steps, |x|, |x|)."""
    scores = bilinear_scores(h_d, h_e, T)
    steps, length = scores.shape
    masked = scores.reshape(steps, 1, length) + monotone_mask(length)[None]
    return ad.log_softmax(masked, axis=-1)


def offset_mask(length: int, window: int) -> np.ndarray:
    """Additive mask over offsets: -inf where j_prev + offset runs past the end."""
    j_prev, delta = np.indices((length, window + 1))
    return np.where(j_prev + delta <= length - 1, 0.0, NEG_INF)


def _offset_scatter_index(length: int, window: int):
    j_prev, j = np.indices((length, length))
    delta = j - j_prev
    valid = (delta >= 0) & (delta <= window)
    return j_prev, np.clip(delta, 0, window), valid


@_batched
def transition_logprobs_mono1(h_d: Tensor, h_e: Tensor, T: Tensor, U: Tensor, window: int) -> Tensor:
    """Offset-window transition -> (steps, |x|, |x|).

    ``softmax(U [h_d; T h_e[j_prev]])`` gives a distribution over offsets
    0..window; offsets past the last source position are masked before the
    softmax, so the remaining ones renormalize.
    """
    n = h_d.shape[-1]
    steps, length = h_d.shape[0], h_e.shape[0]
    if U.shape[0] != window + 1:
        raise ValueError(f"U has {U.shape[0]} rows but window {window} needs {window + 1}")
    from_decoder = h_d @ U[:, :n].T
    from_source = (h_e @ T.T) @ U[:, n:].T
    logits = (
        from_decoder.reshape(steps, 1, window + 1)
        + from_source.reshape(1, length, window + 1)
        + offset_mask(length, window)[None]
    )
    offsets = ad.log_softmax(logits, axis=-1)
    j_prev, delta, valid = _offset_scatter_index(length, window)
    spread = offsets[:, j_prev, delta]
    return ad.masked_fill(spread, ~valid[None], NEG_INF)


@_batched
def soft_attention_step(h_d: Tensor, h_e: Tensor, T: Tensor, V: Tensor, W: Tensor):
    """Soft attention baseline.

    Returns ``(log p(y | y_<i, x), attention weights, context)`` with shapes
    ``(steps, |vocab|)``, ``(steps, |x|)`` and ``(steps, 2 d_h)``.
    """
    weights = ad.softmax(bilinear_scores(h_d, h_e, T), axis=-1)
    context = weights @ h_e
    n = h_d.shape[-1]
    hidden = ad.tanh(h_d @ V[:, :n].T + context @ V[:, n:].T)
    return ad.log_softmax(hidden @ W.T, axis=-1), weights, context
