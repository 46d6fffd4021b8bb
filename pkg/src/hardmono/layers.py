"""Embedding tables, LSTM cells, bidirectional encoders and dropout."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError, ContractError


class Module:
    """Container whose Tensor attributes with ``requires_grad`` are parameters.

    Parameters are discovered by walking instance attributes in definition
    order, descending into sub-modules and lists of sub-modules.
    """

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        found: dict[str, Tensor] = {}
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Tensor) and value.requires_grad:
                found[name] = value
            elif isinstance(value, Module):
                found.update(value.named_parameters(name + "."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        found.update(item.named_parameters(f"{name}.{i}."))
        return found

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


def uniform_parameter(rng: np.random.Generator, shape, bound: float, name: str) -> Tensor:
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


class Embedding(Module):
    def __init__(self, num_embeddings: int, dim: int, rng: np.random.Generator, name: str = "embedding"):
        self.num_embeddings = num_embeddings
        self.dim = dim
        self.weight = uniform_parameter(rng, (num_embeddings, dim), 0.1, f"{name}.weight")

    def __call__(self, indices) -> Tensor:
        return ad.embedding_lookup(self.weight, indices)


class LSTMCell(Module):
    """Single LSTM layer; gates are ordered input, forget, candidate, output.

    Weights are stored input-major (``x @ w_input``) so that a whole sequence
    can be projected with one matrix product before the recurrence.
    """

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator, name: str = "lstm"):
        if input_dim <= 0 or hidden_dim <= 0:
            raise ConfigurationError(f"bad LSTM sizes: input={input_dim}, hidden={hidden_dim}")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        k = 1.0 / np.sqrt(hidden_dim)
        self.w_input = uniform_parameter(rng, (input_dim, 4 * hidden_dim), k, f"{name}.w_input")
        self.w_hidden = uniform_parameter(rng, (hidden_dim, 4 * hidden_dim), k, f"{name}.w_hidden")
        bias = rng.uniform(-k, k, size=4 * hidden_dim)
        bias[hidden_dim : 2 * hidden_dim] = 1.0
        self.bias = Tensor(bias, requires_grad=True, name=f"{name}.bias")

    def initial_state(self) -> tuple[Tensor, Tensor]:
        zeros = np.zeros(self.hidden_dim)
        return Tensor(zeros), Tensor(zeros)

    def _check_input(self, x: Tensor) -> None:
        if x.shape[-1] != self.input_dim:
            raise ConfigurationError(
                f"LSTM expects input dimension {self.input_dim}, got {x.shape[-1]}"
            )

    def step(self, x: Tensor, state: tuple[Tensor, Tensor]) -> tuple[Tensor, Tensor]:
        self._check_input(x)
        h, c = state
        z = x @ self.w_input + h @ self.w_hidden + self.bias
        return self._gates(z, c)

    def _gates(self, z: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        hc = ad.lstm_pointwise(z, c)
        n = self.hidden_dim
        return hc[:n], hc[n:]

    def run(self, xs: Tensor, reverse: bool = False, state=None) -> Tensor:
        """Run over rows of ``xs`` (length x input_dim); returns length x hidden."""
        self._check_input(xs)
        projected = xs @ self.w_input + self.bias
        h, c = state if state is not None else self.initial_state()
        steps = range(xs.shape[0] - 1, -1, -1) if reverse else range(xs.shape[0])
        outputs: list[Tensor] = [None] * xs.shape[0]  # type: ignore[list-item]
        for t in steps:
            h, c = self._gates(projected[t] + h @ self.w_hidden, c)
            outputs[t] = h
        return ad.stack(outputs)


class BiLSTMLayer(Module):
    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator, name: str = "bilstm"):
        self.forward_cell = LSTMCell(input_dim, hidden_dim, rng, f"{name}.forward")
        self.backward_cell = LSTMCell(input_dim, hidden_dim, rng, f"{name}.backward")

    def __call__(self, xs: Tensor) -> Tensor:
        fwd = self.forward_cell.run(xs)
        bwd = self.backward_cell.run(xs, reverse=True)
        return ad.concat([fwd, bwd], axis=1)


@dataclass(frozen=True)
class DropoutSpec:
    rate: float = 0.0
    training: bool = False

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ConfigurationError(f"dropout rate must lie in [0, 1), got {self.rate}")


def dropout(x: Tensor, spec: DropoutSpec, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; the identity in evaluation mode or at rate 0."""
    if not spec.training or spec.rate == 0.0:
        return x
    if rng is None:
        raise ContractError("training-mode dropout needs an RNG")
    keep = rng.random(x.shape) >= spec.rate
    return x * (keep / (1.0 - spec.rate))


def bilstm_encode(layers: list[BiLSTMLayer], embeddings: Tensor, spec: DropoutSpec = DropoutSpec(), rng=None) -> Tensor:
    """Stacked bidirectional encoding; dropout follows every layer.

    Every output row has dimension ``2 * hidden``: forward half first.
    """
    if embeddings.shape[0] == 0:
        raise ContractError("cannot encode an empty sequence")
    states = embeddings
    for layer in layers:
        states = dropout(layer(states), spec, rng)
    return states
