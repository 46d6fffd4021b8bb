"""Exact alignment marginalization in log space.

Inputs per target step ``i`` (0-based, one per symbol of the EOS-terminated
target):

* ``emit`` -- ``(steps, |x|)``: log p(y_i | a_i = j), the gold-symbol column of
  the emission distribution.
* ``trans`` -- zeroth order ``(steps, |x|)``: log p(a_i = j); first order
  ``(steps, |x|, |x|)``: log p(a_i = j | a_{i-1} = j_prev), indexed
  ``[i, j_prev, j]``.

First-order lattices start from a point mass on source position 0 (the BOS
symbol), so the first transition row is p(a_1 | <BOS>, x).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, DegenerateLatticeError


def _check_steps(emit: Tensor, trans: Tensor, order: int) -> None:
    if emit.ndim != 2:
        raise ContractError(f"emission scores must be (steps, |x|), got {emit.shape}")
    steps, length = emit.shape
    if steps < 1:
        raise ContractError("target must have at least one symbol")
    expected = (steps, length) if order == 0 else (steps, length, length)
    if trans.shape != expected:
        raise ContractError(f"transition shape {trans.shape} does not match expected {expected}")


def loglik_order0(emit: Tensor, trans: Tensor) -> Tensor:
    """sum_i logsumexp_j(log p(y_i | j) + log p(a_i = j))."""
    _check_steps(emit, trans, 0)
    return ad.logsumexp(emit + trans, axis=1).sum()


def initial_row(length: int) -> Tensor:
    row = np.full(length, -np.inf)
    row[0] = 0.0
    return Tensor(row)


def forward_step(alpha: Tensor, trans: Tensor, emit: Tensor) -> Tensor:
    """alpha'(j) = log p(y_i | j) + logsumexp_j'(log p(j | j') + alpha(j'))."""
    if not np.isfinite(alpha.data).any():
        raise DegenerateLatticeError("previous forward row has no finite entry")
    length = alpha.shape[0]
    if trans.shape != (length, length) or emit.shape != (length,):
        raise ContractError(
            f"forward_step shapes disagree: alpha {alpha.shape}, trans {trans.shape}, emit {emit.shape}"
        )
    return emit + ad.logsumexp(trans + alpha.reshape(length, 1), axis=0)


@dataclass
class ForwardTrellis:
    """Forward rows; ``rows[0]`` is the BOS initial condition."""

    rows: list[Tensor]

    @property
    def alpha(self) -> np.ndarray:
        return np.stack([r.data for r in self.rows])

    def log_likelihood(self) -> Tensor:
        return ad.logsumexp(self.rows[-1], axis=0)

    def prefix_log_marginals(self) -> np.ndarray:
        """log p(y_<=i) for i = 0..steps."""
        a = self.alpha
        return np.array([_np_lse(row) for row in a])


def forward(emit: Tensor, trans: Tensor) -> ForwardTrellis:
    _check_steps(emit, trans, 1)
    rows = [initial_row(emit.shape[1])]
    for i in range(emit.shape[0]):
        rows.append(forward_step(rows[-1], trans[i], emit[i]))
    return ForwardTrellis(rows)


def loglik_order1(emit: Tensor, trans: Tensor) -> Tensor:
    return forward(emit, trans).log_likelihood()


def broadcast_order0(trans0: Tensor) -> Tensor:
    """Embed a zeroth-order transition as first-order rows constant in j_prev."""
    steps, length = trans0.shape
    return trans0.reshape(steps, 1, length) + np.zeros((1, length, 1))


# ---------------------------------------------------------------------------
# posteriors (plain numpy, diagnostics only)


def _np_lse(x: np.ndarray, axis=None) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    return out.squeeze() if axis is None else np.squeeze(out, axis=axis)


def _as_first_order(trans: np.ndarray, steps: int, length: int) -> np.ndarray:
    if trans.ndim == 2:
        return np.broadcast_to(trans[:, None, :], (steps, length, length))
    return trans


def _forward_backward(emit: np.ndarray, trans: np.ndarray):
    steps, length = emit.shape
    trans = _as_first_order(trans, steps, length)
    alpha = np.full((steps + 1, length), -np.inf)
    alpha[0, 0] = 0.0
    for i in range(steps):
        alpha[i + 1] = emit[i] + _np_lse(trans[i] + alpha[i][:, None], axis=0)
    beta = np.full((steps + 1, length), -np.inf)
    beta[steps] = 0.0
    for i in range(steps, 0, -1):
        beta[i - 1] = _np_lse(trans[i - 1] + (emit[i - 1] + beta[i])[None, :], axis=1)
    log_z = _np_lse(alpha[steps])
    return alpha, beta, trans, log_z


def posterior_alignment(emit, trans) -> np.ndarray:
    """p(a_i = j | x, y) as a ``(steps, |x|)`` matrix via forward-backward.

    A zeroth-order ``trans`` is treated as first order with rows constant in
    the previous position; the marginals are the same.
    """
    emit = np.asarray(getattr(emit, "data", emit))
    trans = np.asarray(getattr(trans, "data", trans))
    alpha, beta, _, log_z = _forward_backward(emit, trans)
    return np.exp(alpha[1:] + beta[1:] - log_z)


def posterior_transitions(emit, trans) -> np.ndarray:
    """p(a_{i-1} = j', a_i = j | x, y) as ``(steps, |x|, |x|)``; step 0 starts at BOS."""
    emit = np.asarray(getattr(emit, "data", emit))
    trans = np.asarray(getattr(trans, "data", trans))
    alpha, beta, full, log_z = _forward_backward(emit, trans)
    joint = alpha[:-1, :, None] + full + (emit + beta[1:])[:, None, :] - log_z
    return np.exp(joint)


def sample_alignment(emit, trans, rng: np.random.Generator) -> np.ndarray:
    """Draw one alignment path from the exact posterior (backward sampling)."""
    emit = np.asarray(getattr(emit, "data", emit))
    trans = np.asarray(getattr(trans, "data", trans))
    alpha, _, full, _ = _forward_backward(emit, trans)
    steps, length = emit.shape
    path = np.empty(steps, dtype=np.int64)
    logits = alpha[steps]
    for i in range(steps, 0, -1):
        p = np.exp(logits - _np_lse(logits))
        path[i - 1] = rng.choice(length, p=p / p.sum())
        # p(a_{i-1} | a_i, y_<=i-1) is proportional to alpha_{i-1}(j') p(a_i | j')
        logits = alpha[i - 1] + full[i - 1][:, path[i - 1]]
    return path
