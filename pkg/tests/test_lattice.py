import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardmono import heads, lattice
from hardmono.autodiff import Tensor, no_grad
from hardmono.checks import brute_force_likelihood, brute_force_posterior, enumerate_paths, random_instance, tiny_config
from hardmono.config import VariantKind
from hardmono.errors import ContractError, DegenerateLatticeError


def random_tables(rng, steps, length, order):
    emit = np.log(rng.dirichlet(np.ones(6), size=(steps, length))[..., 0])
    if order == 0:
        trans = np.log(rng.dirichlet(np.ones(length), size=steps))
    else:
        trans = np.log(rng.dirichlet(np.ones(length), size=(steps, length)))
    return emit, trans


def monotone_tables(rng, steps, length):
    emit, _ = random_tables(rng, steps, length, 0)
    scores = rng.normal(size=(steps, length))
    trans = scores[:, None, :] + heads.monotone_mask(length)[None]
    trans = trans - lattice._np_lse(trans, axis=-1)[..., None]
    return emit, trans


def test_single_position_reduces_to_emissions():
    emit = np.log([[0.2], [0.5], [0.9]])
    ll = lattice.loglik_order0(Tensor(emit), Tensor(np.zeros((3, 1)))).item()
    assert ll == pytest.approx(np.log(0.2 * 0.5 * 0.9), abs=1e-15)


def test_two_positions_hand_example():
    emit = Tensor(np.log([[0.3, 0.7]]))
    trans = Tensor(np.log([[0.5, 0.5]]))
    assert lattice.loglik_order0(emit, trans).item() == pytest.approx(np.log(0.5), abs=1e-15)


def test_order0_against_all_27_paths(rng):
    emit, trans = random_tables(rng, 3, 3, 0)
    total = 0.0
    paths = list(itertools.product(range(3), repeat=3))
    assert len(paths) == 27
    for path in paths:
        total += np.prod([np.exp(emit[i, a] + trans[i, a]) for i, a in enumerate(path)])
    assert lattice.loglik_order0(Tensor(emit), Tensor(trans)).item() == pytest.approx(math.log(total), abs=1e-12)


def test_monotone_instance_against_20_paths(rng):
    emit, trans = monotone_tables(rng, 3, 4)
    paths = list(enumerate_paths(4, 3, VariantKind.MONO0))
    assert len(paths) == 20
    total = sum(
        np.prod([np.exp(emit[i, a] + trans[i, prev, a]) for i, (prev, a) in enumerate(zip((0, *p), p))])
        for p in paths
    )
    assert lattice.loglik_order1(Tensor(emit), Tensor(trans)).item() == pytest.approx(math.log(total), abs=1e-12)


def test_order0_shape_mismatch():
    with pytest.raises(ContractError):
        lattice.loglik_order0(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 4))))
    with pytest.raises(ContractError):
        lattice.loglik_order0(Tensor(np.zeros((0, 3))), Tensor(np.zeros((0, 3))))


def test_identity_transition_adds_emission(rng):
    alpha = Tensor(np.log(rng.dirichlet(np.ones(4))))
    emit = np.log(rng.random(4))
    with np.errstate(divide="ignore"):
        log_eye = np.log(np.eye(4))
    out = lattice.forward_step(alpha, Tensor(log_eye), Tensor(emit)).data
    np.testing.assert_allclose(out, alpha.data + emit, atol=1e-15)


def test_uniform_rows_drop_by_emission():
    length, steps = 2, 3
    emit = np.full((steps, length), np.log(0.25))
    trans = np.full((steps, length, length), np.log(0.5))
    rows = lattice.forward(Tensor(emit), Tensor(trans)).prefix_log_marginals()
    np.testing.assert_allclose(np.diff(rows), np.log(0.25), atol=1e-15)


def test_degenerate_row_rejected():
    with pytest.raises(DegenerateLatticeError):
        lattice.forward_step(Tensor(np.full(3, -np.inf)), Tensor(np.zeros((3, 3))), Tensor(np.zeros(3)))


def test_forward_step_shape_contract():
    with pytest.raises(ContractError):
        lattice.forward_step(Tensor(np.zeros(3)), Tensor(np.zeros((2, 2))), Tensor(np.zeros(3)))


@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 5))
def test_order1_collapses_to_order0(seed, steps, length):
    emit, trans0 = random_tables(np.random.default_rng(seed), steps, length, 0)
    o0 = lattice.loglik_order0(Tensor(emit), Tensor(trans0)).item()
    o1 = lattice.loglik_order1(Tensor(emit), lattice.broadcast_order0(Tensor(trans0))).item()
    assert o1 == pytest.approx(o0, abs=1e-12)
    assert o1 <= 0.0


@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 4))
def test_trellis_prefix_marginals_non_increasing(seed, steps, length):
    emit, trans = monotone_tables(np.random.default_rng(seed), steps, length)
    tr = lattice.forward(Tensor(emit), Tensor(trans))
    assert tr.alpha.shape == (steps + 1, length)
    marg = tr.prefix_log_marginals()
    assert marg[0] == 0.0
    assert np.all(np.diff(marg) <= 1e-12)
    # cells unreachable from BOS stay masked
    assert np.all(np.isneginf(tr.alpha[0, 1:]))


@given(st.integers(0, 10_000), st.sampled_from(list(VariantKind)[1:]))
def test_model_lattice_matches_enumeration(seed, variant):
    rng = np.random.default_rng(seed)
    model, src, tgt, tags = random_instance(rng, tiny_config(variant, d_hidden=3))
    with no_grad():
        ll = model.log_likelihood(src, tgt, tags).item()
        t = model.tables(src, tgt, tags)
    brute = brute_force_likelihood(t.emit_gold.data, t.transition.data, variant, model.config.window)
    assert abs(ll - math.log(brute)) < 1e-10


def test_single_position_posterior():
    post = lattice.posterior_alignment(np.log(np.full((3, 1), 0.4)), np.zeros((3, 1)))
    np.testing.assert_allclose(post, 1.0)


@given(st.integers(0, 10_000), st.sampled_from(list(VariantKind)[1:]))
def test_posterior_matches_enumeration(seed, variant):
    rng = np.random.default_rng(seed)
    model, src, tgt, tags = random_instance(rng, tiny_config(variant, d_hidden=3))
    with no_grad():
        t = model.tables(src, tgt, tags)
    post = lattice.posterior_alignment(t.emit_gold, t.transition)
    ref = brute_force_posterior(t.emit_gold.data, t.transition.data, variant, model.config.window)
    np.testing.assert_allclose(post, ref, atol=1e-12)
    np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-12)


@given(st.integers(0, 10_000), st.sampled_from([VariantKind.MONO0, VariantKind.MONO1]))
def test_sampled_paths_are_feasible(seed, variant):
    rng = np.random.default_rng(seed)
    model, src, tgt, tags = random_instance(rng, tiny_config(variant, d_hidden=3), max_source=6, max_target=6)
    with no_grad():
        t = model.tables(src, tgt, tags)
    for _ in range(20):
        path = lattice.sample_alignment(t.emit_gold, t.transition, rng)
        steps = np.diff(np.concatenate([[0], path]))
        assert np.all(steps >= 0)
        if variant is VariantKind.MONO1:
            assert np.all(steps <= model.config.window)


def test_sampling_frequencies_match_posterior():
    rng = np.random.default_rng(0)
    emit, trans = monotone_tables(rng, 3, 3)
    post = lattice.posterior_alignment(emit, trans)
    counts = np.zeros_like(post)
    n = 20_000
    for _ in range(n):
        counts[np.arange(3), lattice.sample_alignment(emit, trans, rng)] += 1
    np.testing.assert_allclose(counts / n, post, atol=0.02)


@given(st.integers(0, 10_000))
def test_edge_posteriors_consistent_with_node_posteriors(seed):
    emit, trans = monotone_tables(np.random.default_rng(seed), 4, 4)
    edges = lattice.posterior_transitions(emit, trans)
    nodes = lattice.posterior_alignment(emit, trans)
    np.testing.assert_allclose(edges.sum(axis=1), nodes, atol=1e-12)
    j_prev, j = np.indices((4, 4))
    assert np.all(edges[:, j < j_prev] == 0.0)


@given(st.integers(0, 10_000))
def test_monotone_paths_are_a_subset_of_order0_paths(seed):
    """Summing the order-0 path weights over monotone paths only can never
    exceed the full order-0 marginal, with parameters shared and frozen."""
    rng = np.random.default_rng(seed)
    model, src, tgt, tags = random_instance(rng, tiny_config(VariantKind.HARD0, d_hidden=3))
    with no_grad():
        t = model.tables(src, tgt, tags)
        full = model.log_likelihood(src, tgt, tags).item()
    restricted = brute_force_likelihood(
        t.emit_gold.data, lattice.broadcast_order0(t.transition).data + heads.monotone_mask(len(src))[None],
        VariantKind.MONO0,
    )
    assert math.log(restricted) <= full + 1e-12
