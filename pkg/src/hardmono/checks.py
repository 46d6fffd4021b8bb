"""Self-checks: finite-difference gradients and brute-force path enumeration.

The enumeration oracle sums explicit alignment paths in probability space
using only the per-step tables of the model; it never touches the lattice
code it is compared against.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import no_grad
from .config import ModelConfig, VariantKind
from .model import Transducer

HARD_VARIANTS = (VariantKind.HARD0, VariantKind.MONO0, VariantKind.MONO1)
ALL_VARIANTS = (VariantKind.SOFT, *HARD_VARIANTS)


def feasible(path, variant: VariantKind, window: int) -> bool:
    """Whether ``path`` (0-based source positions) is allowed, starting from BOS at 0."""
    if variant in (VariantKind.HARD0, VariantKind.SOFT):
        return True
    prev = 0
    for a in path:
        step = a - prev
        if step < 0 or (variant is VariantKind.MONO1 and step > window):
            return False
        prev = a
    return True


def enumerate_paths(length: int, steps: int, variant: VariantKind, window: int = 4):
    for path in itertools.product(range(length), repeat=steps):
        if feasible(path, variant, window):
            yield path


def brute_force_likelihood(emit: np.ndarray, trans: np.ndarray, variant: VariantKind, window: int = 4) -> float:
    """sum over feasible paths of prod_i p(y_i | a_i) p(a_i | a_{i-1}), in probability space."""
    emit = np.exp(emit)
    trans = np.exp(trans)
    steps, length = emit.shape
    total = 0.0
    for path in enumerate_paths(length, steps, variant, window):
        prob = 1.0
        prev = 0
        for i, a in enumerate(path):
            t = trans[i, a] if trans.ndim == 2 else trans[i, prev, a]
            prob *= emit[i, a] * t
            prev = a
        total += prob
    return total


def brute_force_posterior(emit: np.ndarray, trans: np.ndarray, variant: VariantKind, window: int = 4) -> np.ndarray:
    """Path-enumeration posterior p(a_i = j | x, y)."""
    pe, pt = np.exp(emit), np.exp(trans)
    steps, length = emit.shape
    post = np.zeros((steps, length))
    z = 0.0
    for path in enumerate_paths(length, steps, variant, window):
        prob, prev = 1.0, 0
        for i, a in enumerate(path):
            prob *= pe[i, a] * (pt[i, a] if pt.ndim == 2 else pt[i, prev, a])
            prev = a
        z += prob
        for i, a in enumerate(path):
            post[i, a] += prob
    return post / z


def random_instance(
    rng: np.random.Generator,
    config: ModelConfig,
    max_source: int = 4,
    max_target: int = 4,
    n_symbols: int = 4,
    n_tags: int = 3,
    min_tags: int = 0,
):
    """A randomly initialized model and a random (source, target, tags) triple.

    Source length (before BOS/EOS wrapping) is 1..max_source; the target,
    EOS included, has 1..max_target symbols.
    """
    vocab = 4 + n_symbols
    model = Transducer(config, vocab, vocab, n_tags, rng)
    src = [1, *rng.integers(4, vocab, size=rng.integers(1, max_source + 1)), 2]
    tgt = [*rng.integers(4, vocab, size=rng.integers(0, max_target)), 2]
    tags = tuple(int(t) for t in np.flatnonzero(rng.random(n_tags) < 0.5))
    if len(tags) < min_tags:
        tags = tuple(range(min_tags))
    return model, np.array(src), np.array(tgt), tags


def tiny_config(variant: VariantKind, seed: int = 0, d_hidden: int = 4, window: int = 2) -> ModelConfig:
    return ModelConfig(variant=variant, d_hidden=d_hidden, d_tag=3, d_char=4, encoder_layers=2, dropout=0.0, window=window, seed=seed)


# ---------------------------------------------------------------------------
# reports


@dataclass
class CheckReport:
    name: str
    threshold: float
    values: dict[str, float] = field(default_factory=dict)

    @property
    def worst(self) -> float:
        return max(self.values.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.worst <= self.threshold

    def lines(self) -> list[str]:
        out = [f"{key:<28} {value:.3e}" for key, value in self.values.items()]
        status = "PASS" if self.passed else "FAIL"
        out.append(f"{self.name}: max {self.worst:.3e} (threshold {self.threshold:.0e}) {status}")
        return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / (||a|| + ||n||); zero when both vanish."""
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    return 0.0 if denom == 0 else float(np.linalg.norm(analytic - numeric) / denom)


def parameter_group(name: str) -> str:
    head = name.split(".")[0]
    if head in ("encoder", "decoder"):
        return "LSTM"
    if head.endswith("embedding"):
        return "embeddings"
    return head


def finite_difference_gradients(model: Transducer, source, target, tags, eps: float = 1e-5):
    """Analytic and central-difference gradients of the NLL for every parameter."""
    model.zero_grad()
    loss = -model.log_likelihood(source, target, tags)
    loss.backward()
    out = {}
    with no_grad():
        for name, p in model.named_parameters().items():
            analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
            numeric = np.zeros_like(p.data)
            flat = p.data.reshape(-1)
            num_flat = numeric.reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + eps
                plus = -model.log_likelihood(source, target, tags).item()
                flat[k] = orig - eps
                minus = -model.log_likelihood(source, target, tags).item()
                flat[k] = orig
                num_flat[k] = (plus - minus) / (2 * eps)
            out[name] = (analytic.copy(), numeric)
    return out


def gradcheck(variants=ALL_VARIANTS, trials: int = 1, seed: int = 0, d_hidden: int = 4, eps: float = 1e-5, threshold: float = 1e-4) -> CheckReport:
    report = CheckReport("gradcheck", threshold)
    rng = np.random.default_rng(seed)
    for variant in variants:
        variant = VariantKind(variant)
        for _ in range(trials):
            model, src, tgt, tags = random_instance(rng, tiny_config(variant, d_hidden=d_hidden), min_tags=1)
            grads = finite_difference_gradients(model, src, tgt, tags, eps)
            groups: dict[str, list] = {}
            for name, (a, n) in grads.items():
                groups.setdefault(parameter_group(name), []).append((a.ravel(), n.ravel()))
            for group, pairs in groups.items():
                a = np.concatenate([p[0] for p in pairs])
                n = np.concatenate([p[1] for p in pairs])
                key = f"{variant.value}/{group}"
                report.values[key] = max(report.values.get(key, 0.0), relative_error(a, n))
    return report


def lattice_vs_enumeration(model: Transducer, source, target, tags) -> tuple[float, float]:
    """(lattice log-likelihood, log of the enumerated sum) for a hard variant."""
    with no_grad():
        ll = model.log_likelihood(source, target, tags).item()
        tables = model.tables(source, target, tags)
    brute = brute_force_likelihood(tables.emit_gold.data, tables.transition.data, model.variant, model.config.window)
    return ll, math.log(brute)


def enumcheck(
    variants=HARD_VARIANTS,
    trials: int = 100,
    seed: int = 0,
    threshold: float = 1e-9,
    max_source: int = 4,
    max_target: int = 4,
    window: int = 2,
) -> CheckReport:
    report = CheckReport("enumcheck", threshold)
    rng = np.random.default_rng(seed)
    for variant in variants:
        variant = VariantKind(variant)
        worst = 0.0
        for _ in range(trials):
            config = tiny_config(variant, d_hidden=3, window=window)
            model, src, tgt, tags = random_instance(rng, config, max_source, max_target)
            ll, brute = lattice_vs_enumeration(model, src, tgt, tags)
            worst = max(worst, abs(ll - brute))
        if trials:
            report.values[variant.value] = worst
    return report
