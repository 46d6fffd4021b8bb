import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardmono.autodiff import Tensor
from hardmono.checkpoint import load_checkpoint, read_meta, save_checkpoint
from hardmono.config import ModelConfig, VariantKind
from hardmono.data import TaskKind, Vocabularies
from hardmono.errors import ConfigurationError, ContractError, NumericError
from hardmono.model import Transducer
from hardmono.synthetic import identity, make_task
from hardmono.trainer import (
    LOG_HEADER,
    Adam,
    LRSchedule,
    TrainConfig,
    clip_gradients,
    global_grad_norm,
    mean_nll,
    metric_for,
    select_best,
    train,
    train_epoch,
)


def small_setup(variant="mono0", n=8, seed=0, d_hidden=8):
    rng = np.random.default_rng(seed)
    examples = make_task(n, rng, identity, alphabet_size=5, min_len=2, max_len=4, tags=("X",))
    vocab = Vocabularies.from_examples(examples)
    samples = [vocab.wrap(e) for e in examples]
    config = ModelConfig(variant=VariantKind(variant), d_hidden=d_hidden, d_tag=3, d_char=6, dropout=0.2, seed=seed)
    return Transducer(config, len(vocab.source), len(vocab.target), len(vocab.tags)), samples, vocab


def test_zero_gradients_leave_parameters_unchanged():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    opt = Adam({"p": p})
    p.grad = np.zeros(2)
    opt.step(1e-3)
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


@given(st.floats(1e-3, 1e3), st.sampled_from([1.0, -1.0]))
def test_first_step_moves_by_learning_rate(g, sign):
    p = Tensor(np.array([0.5]), requires_grad=True)
    opt = Adam({"p": p})
    p.grad = np.array([sign * g])
    opt.step(1e-3)
    # m_hat/sqrt(v_hat) = g/|g|, up to eps
    assert p.data[0] == pytest.approx(0.5 - sign * 1e-3, rel=1e-6)


def test_adam_matches_reference_over_several_steps():
    rng = np.random.default_rng(0)
    p = Tensor(rng.normal(size=3), requires_grad=True)
    ref = p.data.copy()
    m = v = np.zeros(3)
    opt = Adam({"p": p})
    for t in range(1, 6):
        g = rng.normal(size=3)
        p.grad = g.copy()
        opt.step(0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    np.testing.assert_allclose(p.data, ref, rtol=1e-12)


def test_nan_gradient_names_parameter():
    a = Tensor(np.ones(2), requires_grad=True)
    b = Tensor(np.ones(2), requires_grad=True)
    opt = Adam({"a": a, "b": b})
    a.grad, b.grad = np.zeros(2), np.array([0.0, np.nan])
    with pytest.raises(NumericError, match="parameter b"):
        opt.step(1e-3)


def test_identical_seeds_give_identical_parameters():
    runs = []
    for _ in range(2):
        model, samples, _ = small_setup()
        opt = Adam(model.named_parameters())
        train_epoch(model, samples, opt, 1e-3, 5.0, np.random.default_rng(4))
        runs.append(np.concatenate([p.data.ravel() for p in model.parameters()]))
    np.testing.assert_array_equal(runs[0], runs[1])


def grads_with_norm(norm):
    a = Tensor(np.zeros(2), requires_grad=True)
    b = Tensor(np.zeros(1), requires_grad=True)
    a.grad, b.grad = np.array([0.6, 0.0]) * norm, np.array([0.8]) * norm
    return [a, b]


def test_clip_small_norm_unchanged():
    ps = grads_with_norm(3.0)
    before = [p.grad.copy() for p in ps]
    assert clip_gradients(ps, 5.0) == pytest.approx(3.0)
    for p, g in zip(ps, before):
        np.testing.assert_array_equal(p.grad, g)


def test_clip_large_norm_scaled_to_max():
    ps = grads_with_norm(10.0)
    clip_gradients(ps, 5.0)
    assert abs(global_grad_norm(ps) - 5.0) < 1e-12


def test_clip_zero_gradients():
    ps = grads_with_norm(0.0)
    assert clip_gradients(ps) == 0.0
    assert all(np.all(p.grad == 0) for p in ps)


@pytest.mark.parametrize("norm", [0.5, 3.0, 10.0])
def test_optimizer_clipping_matches_standalone_clip(norm):
    a = [Tensor(np.ones(3), requires_grad=True) for _ in range(2)]
    b = [Tensor(np.ones(3), requires_grad=True) for _ in range(2)]
    g = [np.array([1.0, 2.0, 2.0]) * norm / 3 / np.sqrt(2)] * 2
    for p, gi in zip(a, g):
        p.grad = gi.copy()
    for p, gi in zip(b, g):
        p.grad = gi.copy()
    clip_gradients(b, 5.0)
    opt_a = Adam({str(i): p for i, p in enumerate(a)})
    opt_b = Adam({str(i): p for i, p in enumerate(b)})
    opt_a.step(0.1, clip_norm=5.0)
    opt_b.step(0.1, clip_norm=None)
    for pa, pb in zip(a, b):
        np.testing.assert_allclose(pa.data, pb.data, rtol=1e-12)


def test_clipping_irrelevant_below_threshold():
    model_a, samples, _ = small_setup(seed=1)
    model_b, _, _ = small_setup(seed=1)
    sample = samples[0]
    for model, clip in ((model_a, 5.0), (model_b, None)):
        opt = Adam(model.named_parameters())
        model.zero_grad()
        (-model.log_likelihood(sample.source, sample.target, sample.tags)).backward()
        norm = opt.step(1e-3, clip)
        assert norm < 5.0
    for pa, pb in zip(model_a.parameters(), model_b.parameters()):
        np.testing.assert_array_equal(pa.data, pb.data)


def test_forced_halving_sequence():
    s = LRSchedule(1e-3, 1e-5)
    seen = []
    while not s.finished:
        seen.append(s.lr)
        s.halve()
    expected = [1e-3 * 0.5**k for k in range(len(seen))]
    np.testing.assert_allclose(seen, expected)
    assert seen[-1] >= 1e-5 and s.lr < 1e-5 and len(seen) == 7


def test_schedule_halves_only_when_dev_nll_fails_to_improve():
    s = LRSchedule(1.0)
    assert [s.update(x) for x in [5.0, 4.0, 4.5, 3.0, 3.0]] == [False, False, True, False, True]
    assert s.lr == 0.25


@given(st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_select_best_picks_argmax(series):
    assert series[select_best(series)] == max(series)
    assert series[select_best(series, higher_is_better=False)] == min(series)


def test_select_best_empty():
    with pytest.raises(ContractError):
        select_best([])


def test_selection_metric_by_task():
    assert metric_for(TaskKind.G2P) == ("wer", False)
    assert metric_for(TaskKind.INFLECTION) == ("accuracy", True)


@pytest.mark.parametrize("variant", list(VariantKind))
def test_training_loss_trends_down(variant):
    model, samples, _ = small_setup(variant, n=6, seed=2)
    result = train(model, samples, samples, TaskKind.INFLECTION, TrainConfig(lr=3e-3, max_epochs=10, seed=0))
    losses = [r.train_nll for r in result.history]
    assert losses[-1] < losses[0]
    halves = losses[: len(losses) // 2], losses[len(losses) // 2 :]
    assert np.mean(halves[1]) < np.mean(halves[0])


def test_train_writes_log_and_best_checkpoint(tmp_path):
    model, samples, vocab = small_setup(n=6)
    seen = []
    result = train(
        model, samples, samples[:3], TaskKind.INFLECTION, TrainConfig(max_epochs=4), out_dir=tmp_path,
        vocab=vocab, on_epoch_end=lambda rec, m: seen.append(rec.epoch) or rec.epoch == 3,
    )
    assert seen == [1, 2, 3] and result.stopped_by == "callback"
    lines = (tmp_path / "train.log").read_text().splitlines()
    assert lines[0] == LOG_HEADER and len(lines) == 4
    best = max(result.history, key=lambda r: r.dev_metric)
    assert result.best_epoch == best.epoch
    assert read_meta(result.checkpoint)["extra"]["epoch"] == result.best_epoch
    # the in-memory model holds the selected state
    loaded, _, _ = load_checkpoint(result.checkpoint)
    for a, b in zip(model.parameters(), loaded.parameters()):
        np.testing.assert_array_equal(a.data, b.data)


def test_train_stops_at_lr_floor():
    model, samples, _ = small_setup(n=3)
    config = TrainConfig(lr=0.5, lr_floor=0.1, max_epochs=50)
    result = train(model, samples, samples, TaskKind.INFLECTION, config)
    assert result.stopped_by == "lr_floor"
    lrs = [r.lr for r in result.history]
    assert all(b <= a for a, b in zip(lrs, lrs[1:]))


def test_train_needs_data():
    model, samples, _ = small_setup(n=2)
    with pytest.raises(ContractError):
        train(model, samples, [], TaskKind.INFLECTION)


def test_divergence_keeps_last_good_state(tmp_path):
    model, samples, vocab = small_setup(n=3)
    calls = {"n": 0}

    def poison(record, m):
        calls["n"] += 1
        if calls["n"] == 2:
            m.W.data[0, 0] = np.nan
        return False

    result = train(model, samples, samples, TaskKind.INFLECTION, TrainConfig(max_epochs=5), tmp_path, vocab, poison)
    assert result.stopped_by == "divergence"
    assert all(np.all(np.isfinite(p.data)) for p in model.parameters())
    assert result.checkpoint.exists()


@pytest.mark.parametrize("variant", list(VariantKind))
def test_checkpoint_round_trip_reproduces_dev_loss(tmp_path, variant):
    model, samples, vocab = small_setup(variant)
    opt = Adam(model.named_parameters())
    train_epoch(model, samples, opt, 1e-2, 5.0, np.random.default_rng(0))
    before = mean_nll(model, samples)
    path = tmp_path / "m.npz"
    save_checkpoint(path, model, vocab, {"task": "inflection"})
    loaded, loaded_vocab, extra = load_checkpoint(path)
    assert abs(mean_nll(loaded, samples) - before) < 1e-9
    assert loaded.config == model.config
    assert loaded_vocab == vocab and extra == {"task": "inflection"}


def test_checkpoint_rejects_foreign_archives(tmp_path):
    model, _, _ = small_setup()
    path = tmp_path / "m.npz"
    save_checkpoint(path, model)
    with np.load(path) as archive:
        arrays = dict(archive)
    meta = json.loads(arrays["meta"].tobytes())
    for change in ({"format": "other"}, {"version": 99}):
        bad = dict(arrays, meta=np.frombuffer(json.dumps({**meta, **change}).encode(), dtype=np.uint8))
        np.savez(tmp_path / "bad.npz", **bad)
        with pytest.raises(ConfigurationError):
            load_checkpoint(tmp_path / "bad.npz")
    bad = {k: v for k, v in arrays.items() if k != "param/W"}
    np.savez(tmp_path / "bad.npz", **bad)
    with pytest.raises(ConfigurationError, match="missing"):
        load_checkpoint(tmp_path / "bad.npz")
    bad = dict(arrays, **{"param/W": np.zeros((2, 2))})
    np.savez(tmp_path / "bad.npz", **bad)
    with pytest.raises(ConfigurationError, match="shape"):
        load_checkpoint(tmp_path / "bad.npz")
