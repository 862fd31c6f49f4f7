"""Unit tests for the scale-invariant fitness / mutation-rate features."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from attnga.features import (build_joint_fitness_features,
                             build_sampled_parent_features, centered_ranks,
                             fitness_features, sigma_features, z_score)

finite_floats = st.floats(min_value=-1e3, max_value=1e3,
                          allow_nan=False, allow_infinity=False)


def _rank_oracle(f):
    """Average-rank oracle with explicit loops (1-based ranks)."""
    f = np.asarray(f, dtype=float)
    ranks = np.empty(f.size)
    for i, v in enumerate(f):
        less = np.sum(f < v)
        equal = np.sum(f == v)
        ranks[i] = less + (equal + 1) / 2.0
    return ranks


def test_centered_ranks_matches_oracle_with_ties():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(2, 20))
        f = rng.integers(0, 5, size=n).astype(float)  # plenty of ties
        expected = (_rank_oracle(f) - 1.0) / (n - 1.0) - 0.5
        np.testing.assert_allclose(centered_ranks(f), expected, atol=1e-12)


def test_centered_ranks_range_and_singleton():
    r = centered_ranks([3.0, 1.0, 2.0])
    np.testing.assert_allclose(sorted(r), [-0.5, 0.0, 0.5])
    np.testing.assert_array_equal(centered_ranks([7.0]), [0.0])
    with pytest.raises(ValueError):
        centered_ranks([1.0, np.inf])


def test_z_score_oracle_and_guards():
    f = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(z_score(f), (f - 2.5) / f.std(), atol=1e-12)
    np.testing.assert_array_equal(z_score(np.full(5, 3.7)), np.zeros(5))
    # Rows of the huge clip sentinel must be treated as converged even
    # though summation noise can make the raw std come out at ~1 ulp.
    np.testing.assert_array_equal(z_score(np.full(16, 1e30)), np.zeros(16))
    with pytest.raises(ValueError):
        z_score([np.nan, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=2, max_size=16),
       st.integers(-6, 6), st.integers(-160, 160))
def test_scale_invariance(values, log2_a, b16):
    """Positive affine rescaling leaves z-scores and ranks unchanged.

    Values live on a dyadic lattice and the scale is a power of two, so the
    rescaling is exact in binary floating point (no ties appear or vanish
    through rounding).
    """
    f = np.asarray(values, dtype=np.float64) / 16.0
    a, b = 2.0 ** log2_a, b16 / 16.0
    g = a * f + b
    np.testing.assert_allclose(z_score(g), z_score(f), atol=1e-6)
    np.testing.assert_allclose(centered_ranks(g), centered_ranks(f),
                               atol=1e-12)


def test_fitness_features_columns():
    f = np.array([5.0, 1.0, 3.0])
    feats = fitness_features(f, best_so_far=3.0)
    assert feats.shape == (3, 3)
    np.testing.assert_allclose(feats[:, 0], z_score(f))
    np.testing.assert_allclose(feats[:, 1], centered_ranks(f))
    # Strict improvement: 1.0 < 3.0 only.
    np.testing.assert_array_equal(feats[:, 2], [0.0, 1.0, 0.0])


def test_joint_features_share_one_normalization():
    children = np.array([1.0, 10.0])
    parents = np.array([4.0, 7.0, 2.0])
    joint, f_c, f_p = build_joint_fitness_features(children, parents, 5.0)
    both = np.concatenate([children, parents])
    np.testing.assert_allclose(joint[:, 0], z_score(both))
    np.testing.assert_allclose(joint[:, 1], centered_ranks(both))
    np.testing.assert_array_equal(f_c, joint[:2])
    np.testing.assert_array_equal(f_p, joint[2:])
    with pytest.raises(ValueError):
        build_joint_fitness_features(np.array([]), parents, 5.0)


def test_sigma_features_minmax_and_validation():
    sigma = np.array([0.1, 0.2, 0.4])
    feats = sigma_features(sigma)
    assert feats.shape == (3, 2)
    np.testing.assert_allclose(
        feats[:, 1], 2.0 * (sigma - 0.1) / 0.3 - 1.0)
    assert feats[:, 1].min() == -1.0 and feats[:, 1].max() == 1.0
    # Converged rates collapse to zeros instead of dividing by ~0.
    np.testing.assert_array_equal(sigma_features(np.full(4, 0.3)),
                                  np.zeros((4, 2)))
    with pytest.raises(ValueError):
        sigma_features([0.1, -0.2])
    with pytest.raises(ValueError):
        sigma_features([0.1, np.inf])


def test_sampled_parent_features_concatenation():
    f = np.array([2.0, 8.0])
    sigma = np.array([0.1, 0.3])
    feats = build_sampled_parent_features(f, sigma, best_so_far=5.0)
    assert feats.shape == (2, 5)
    np.testing.assert_array_equal(feats[:, :3], fitness_features(f, 5.0))
    np.testing.assert_array_equal(feats[:, 3:], sigma_features(sigma))
