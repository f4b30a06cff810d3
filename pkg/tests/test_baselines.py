import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairplan.baselines import (
    FeatureVector,
    complete_pairs,
    cosine_pairs,
    estimate_inference_cost,
    oneref_pairs,
    window_pairs,
)


def no_self_or_dupes(pairs):
    return all(i != j for i, j in pairs) and len(set(pairs)) == len(pairs)


@pytest.mark.parametrize("n, count", [(3, 6), (6, 30), (9, 72), (12, 132), (1, 0)])
def test_complete_counts(n, count):
    pairs = complete_pairs(n)
    assert len(pairs) == count == n * (n - 1)
    assert no_self_or_dupes(pairs)


@pytest.mark.parametrize("n, count", [(3, 4), (6, 10), (9, 16), (12, 22), (1, 0)])
def test_oneref_counts(n, count):
    pairs = oneref_pairs(n)
    assert len(pairs) == count
    assert no_self_or_dupes(pairs)


def test_oneref_default_reference_is_middle_view():
    assert {p[0] for p in oneref_pairs(5)[::2]} == {2}


def test_oneref_bad_reference():
    with pytest.raises(ValueError):
        oneref_pairs(4, 4)


@pytest.mark.parametrize("n, window, count", [(4, 1, 6), (3, 5, 6), (2, 1, 2)])
def test_window_examples(n, window, count):
    assert len(window_pairs(n, window)) == count


@given(st.integers(2, 15), st.integers(0, 5))
def test_wide_window_equals_complete(n, extra):
    assert set(window_pairs(n, n - 1 + extra)) == set(complete_pairs(n))


def test_window_has_no_wrap():
    assert (0, 3) not in window_pairs(4, 1)


def fv(values, k):
    return FeatureVector(np.asarray(values, dtype=float), k)


class TestCosine:
    def test_identical(self):
        assert cosine_pairs([fv([1, 2, 3], 0), fv([1, 2, 3], 1)], 1, 0.5) == [(0, 1), (1, 0)]

    def test_orthogonal(self):
        assert cosine_pairs([fv([1, 0], 0), fv([0, 1], 1)], 1, 0.5) == []

    def test_three_views(self):
        # cos(v0, v1) = 0.9, cos(v0, v2) = 0.2, cos(v1, v2) = 0.9*0.2 - sqrt(1-.81)*sqrt(1-.04)
        s1 = np.sqrt(1 - 0.81)
        v0 = [1.0, 0.0, 0.0]
        v1 = [0.9, s1, 0.0]
        v2 = [0.2, -np.sqrt(1 - 0.04), 0.0]
        sim12 = 0.9 * 0.2 - s1 * np.sqrt(0.96)
        assert sim12 < 0.2  # so v2's best neighbour is v0
        pairs = cosine_pairs([fv(v0, 0), fv(v1, 1), fv(v2, 2)], 1, 0.0)
        assert pairs == [(0, 1), (1, 0), (0, 2), (2, 0)]

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="zero feature vector"):
            cosine_pairs([fv([0, 0], 0), fv([1, 0], 1)])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            cosine_pairs([fv([1, 0], 0), fv([1, 0, 0], 1)])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 8), st.integers(1, 3), st.randoms(use_true_random=False))
    def test_permutation_consistent(self, n, k, rnd):
        rng = np.random.default_rng(rnd.randint(0, 2**32 - 1))
        vecs = rng.normal(size=(n, 6))
        perm = rng.permutation(n)
        base = cosine_pairs([fv(vecs[i], i) for i in range(n)], k, -1.0)
        # same vectors in a new order, relabelled through perm
        permuted = cosine_pairs([fv(vecs[i], int(perm[i])) for i in np.argsort(perm)], k, -1.0)
        relabelled = sorted((int(perm[i]), int(perm[j])) for i, j in base)
        assert sorted(permuted) == relabelled
        assert no_self_or_dupes(base)


@pytest.mark.parametrize("count, expected", [(0, 2000.0), (10, 3000.0), (30, 5000.0)])
def test_cost_examples(count, expected):
    assert estimate_inference_cost(count, 100, 2000) == expected


@given(st.integers(0, 10_000), st.integers(0, 10_000), st.integers(1, 4096), st.integers(0, 100_000))
def test_cost_affine(a, b, per_pair, base):
    # integer-valued inputs keep float arithmetic exact
    assert estimate_inference_cost(a + b, per_pair, base) - estimate_inference_cost(a, per_pair, base) == b * per_pair
