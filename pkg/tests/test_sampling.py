from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from structsgd import problems as P
from structsgd.sampling import (EnumerationTooLarge, RngStream, SamplingScheme, draw,
                                enumerate_exact, enumerate_support, mix64, stoch_grad,
                                stoch_loss, support_matrix)


def schemes(n=5):
    yield SamplingScheme.full(n)
    for b in range(1, n + 1):
        yield SamplingScheme.minibatch(n, b)
    yield SamplingScheme.uniform(n)
    yield SamplingScheme.importance(np.arange(1.0, n + 1))


def test_full_batch_is_all_ones():
    d = draw(SamplingScheme.full(4), RngStream(0, 0))
    assert np.array_equal(d.vector(4), np.ones(4))


def test_minibatch_b_equals_n_single_draw():
    s = SamplingScheme.minibatch(5, 5)
    assert len(enumerate_support(s)) == 1
    d = draw(s, RngStream(3, 1))
    assert np.array_equal(d.support, np.arange(5)) and np.all(d.weights == 1.0)


def test_minibatch_weights_exact():
    s = SamplingScheme.minibatch(7, 3)
    rng = RngStream(1, 2)
    for _ in range(50):
        d = draw(s, rng)
        assert d.support.size == 3 and np.unique(d.support).size == 3
        assert np.all(d.weights == 7 / 3)


def test_minibatch_uniform_over_subsets():
    s = SamplingScheme.minibatch(4, 2)
    rng = RngStream(2024, 0)
    counts = {}
    N = 10 ** 6
    for _ in range(N):
        key = tuple(draw(s, rng).support)
        counts[key] = counts.get(key, 0) + 1
    assert set(counts) == set(combinations(range(4), 2))
    for c in counts.values():
        assert abs(c / N - 1 / 6) <= 0.002


def test_single_sampling_frequencies_and_weights():
    p = np.array([0.5, 0.3, 0.2])
    s = SamplingScheme.single(p)
    rng = RngStream(5, 0)
    hits = np.zeros(3)
    for _ in range(60_000):
        d = draw(s, rng)
        i = d.support[0]
        assert d.weights[0] == 1.0 / p[i]
        hits[i] += 1
    assert np.allclose(hits / hits.sum(), p, atol=0.01)


def test_enumerate_minibatch_probabilities():
    out = enumerate_exact(SamplingScheme.minibatch(4, 2))
    assert len(out) == 6
    assert all(prob == Fraction(1, 6) for _, _, prob in out)


def test_enumerate_single():
    out = enumerate_support(SamplingScheme.single([0.5, 0.3, 0.2]))
    assert [prob for _, prob in out] == pytest.approx([0.5, 0.3, 0.2], abs=1e-16)


@pytest.mark.parametrize("scheme", list(schemes()), ids=lambda s: s.spec + str(s.b))
def test_unbiasedness_exact(scheme):
    exact = enumerate_exact(scheme)
    assert sum(prob for _, _, prob in exact) == 1
    V, probs = support_matrix(scheme)
    np.testing.assert_allclose(probs @ V, np.ones(scheme.n), atol=1e-12, rtol=0)


def test_enumeration_too_large():
    with pytest.raises(EnumerationTooLarge):
        enumerate_support(SamplingScheme.minibatch(40, 20))


def test_stoch_grad_full_equals_grad():
    p = P.random_least_squares(6, 3, seed=0, interpolated=False)
    x = np.random.default_rng(1).standard_normal(3)
    d = draw(SamplingScheme.full(6), RngStream(0, 0))
    np.testing.assert_allclose(stoch_grad(p, x, d), p.grad(x), rtol=1e-13)


def test_stoch_grad_two_component_example():
    A = np.array([[1.0, 2.0], [3.0, -1.0]])
    p = P.make_least_squares(A, np.array([1.0, 0.0]))
    s = SamplingScheme.single([0.5, 0.5])
    x = np.array([0.5, -0.25])
    d = [dr for dr, _ in enumerate_support(s)][0]
    assert d.weights[0] == 2.0
    expected = (A[0] @ x - 1.0) * A[0]
    np.testing.assert_allclose(stoch_grad(p, x, d), expected, rtol=1e-15)


@pytest.mark.parametrize("scheme", list(schemes(6)), ids=lambda s: s.spec + str(s.b))
def test_expected_gradient_and_loss(scheme):
    p = P.random_least_squares(6, 3, seed=2, interpolated=False)
    x = np.random.default_rng(3).standard_normal(3)
    g = sum(prob * stoch_grad(p, x, d) for d, prob in enumerate_support(scheme))
    f = sum(prob * stoch_loss(p, x, d)[0] for d, prob in enumerate_support(scheme))
    np.testing.assert_allclose(g, p.grad(x), rtol=1e-12, atol=1e-14)
    assert f == pytest.approx(p.value(x), rel=1e-12)


def test_stoch_loss_interpolated_zero_at_optimum():
    p = P.random_least_squares(6, 3, seed=4)
    for d, _ in enumerate_support(SamplingScheme.minibatch(6, 2)):
        f_v, f_v_star = stoch_loss(p, p.x_star, d)
        assert f_v == pytest.approx(0.0, abs=1e-28) and f_v_star == 0.0


def test_stoch_loss_full_batch():
    p = P.random_least_squares(5, 2, seed=4, interpolated=False)
    x = np.ones(2)
    d = draw(SamplingScheme.full(5), RngStream(0, 0))
    assert stoch_loss(p, x, d)[0] == pytest.approx(p.value(x), rel=1e-14)


def test_stoch_loss_needs_component_minima():
    p = P.random_least_squares(5, 2, seed=4)
    p.f_i_star = None
    with pytest.raises(ValueError):
        stoch_loss(p, np.ones(2), draw(SamplingScheme.full(5), RngStream(0, 0)))


def test_scheme_validation():
    with pytest.raises(ValueError):
        SamplingScheme.minibatch(4, 0)
    with pytest.raises(ValueError):
        SamplingScheme.minibatch(4, 5)
    with pytest.raises(ValueError):
        SamplingScheme.single([0.5, 0.6])
    with pytest.raises(ValueError):
        SamplingScheme.single([1.0, 0.0])


def test_parse_specs():
    L_i = np.array([1.0, 3.0])
    assert SamplingScheme.parse("full", 2).kind == "full"
    assert SamplingScheme.parse("minibatch:2", 2).b == 2
    assert np.allclose(SamplingScheme.parse("single:uniform", 2).p, 0.5)
    assert np.allclose(SamplingScheme.parse("single:importance", 2, L_i).p, [0.25, 0.75])
    for bad in ("minibatch", "minibatch:x", "single", "single:other", "full:2"):
        with pytest.raises(ValueError):
            SamplingScheme.parse(bad, 2, L_i)


def test_mix64_reference_values():
    # stream k of seed 0 is output k+1 of the reference splitmix64 sequence from state 0
    assert mix64(0, 0) == 0xE220A8397B1DCDAF
    assert mix64(0, 1) == 0x6E789E6AA1B965F4
    assert mix64(0, 2) == 0x06C45D188009454F


def test_rng_stream_determinism():
    s = SamplingScheme.minibatch(9, 4)
    a = [draw(s, RngStream(77, 3)).support.tolist() for _ in range(1)]
    r1, r2 = RngStream(77, 3), RngStream(77, 3)
    seq1 = [draw(s, r1).support.tolist() for _ in range(100)]
    seq2 = [draw(s, r2).support.tolist() for _ in range(100)]
    assert seq1 == seq2 and seq1[0] == a[0]
    r3 = RngStream(77, 4)
    assert [draw(s, r3).support.tolist() for _ in range(100)] != seq1


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n))),
       st.integers(0, 2 ** 63))
def test_draw_within_support_property(nb, seed):
    n, b = nb
    s = SamplingScheme.minibatch(n, b)
    d = draw(s, RngStream(seed, 0))
    assert d.support.size == b
    assert np.all(np.diff(d.support) > 0)
    assert d.support.min() >= 0 and d.support.max() < n


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.05, 10.0), min_size=1, max_size=6))
def test_importance_unbiased_property(L):
    s = SamplingScheme.importance(L)
    V, probs = support_matrix(s)
    np.testing.assert_allclose(probs @ V, np.ones(len(L)), atol=1e-12, rtol=0)
