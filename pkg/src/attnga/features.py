"""Scale-invariant fitness and mutation-rate features for the learned operators.

All transforms are invariant to positive affine rescaling of the raw fitness
values, which is what lets a single set of operator weights act across tasks
with wildly different objective scales. Zero-variance guards keep converged
populations from producing NaNs.
"""

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "centered_ranks",
    "z_score",
    "fitness_features",
    "build_joint_fitness_features",
    "sigma_features",
    "build_sampled_parent_features",
    "FITNESS_DIM",
    "SIGMA_DIM",
]

# Columns: z-score, centered rank, improvement flag.
FITNESS_DIM = 3
# Columns: z-score, min-max map to [-1, 1].
SIGMA_DIM = 2

# Relative std threshold below which a population is treated as converged.
# The guard scales with the mean magnitude: summing values near the clip
# sentinel (~1e30) leaves ulp-level noise in the std, which an absolute
# threshold would mistake for genuine spread.
_VAR_GUARD = 1e-10


def centered_ranks(f):
    """Ascending average ranks mapped linearly into [-0.5, 0.5]."""
    f = np.asarray(f, dtype=np.float64)
    if not np.all(np.isfinite(f)):
        raise ValueError("centered_ranks requires finite values")
    n = f.size
    if n == 1:
        return np.zeros(1)
    ranks = rankdata(f, method="average")
    return (ranks - 1.0) / (n - 1.0) - 0.5


def z_score(f):
    """Population z-score; all zeros when the variance guard fires."""
    f = np.asarray(f, dtype=np.float64)
    if not np.all(np.isfinite(f)):
        raise ValueError("z_score requires finite values")
    std = f.std()
    mean = f.mean()
    if std < _VAR_GUARD * max(1.0, abs(mean)):
        return np.zeros_like(f)
    return (f - mean) / std


def fitness_features(f, best_so_far):
    """(n, 3) matrix of [z-score, centered rank, strict-improvement flag]."""
    f = np.asarray(f, dtype=np.float64)
    flags = (f < best_so_far).astype(np.float64)
    return np.column_stack([z_score(f), centered_ranks(f), flags])


def build_joint_fitness_features(f_children, f_parents, best_so_far):
    """Joint child+parent fitness features, plus the two split views.

    The z-scores and centered ranks are computed over the concatenated
    ``[children, parents]`` vector so the two groups live on one common
    scale; the children occupy the first N rows of the joint matrix.
    """
    f_children = np.asarray(f_children, dtype=np.float64)
    f_parents = np.asarray(f_parents, dtype=np.float64)
    if f_children.size == 0 or f_parents.size == 0:
        raise ValueError("need at least one child and one parent")
    n = f_children.size
    joint = fitness_features(np.concatenate([f_children, f_parents]),
                             best_so_far)
    return joint, joint[:n], joint[n:]


def sigma_features(sigma):
    """(n, 2) matrix of [z-score, min-max map to [-1, 1]] of mutation rates."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0) or not np.all(np.isfinite(sigma)):
        raise ValueError("mutation rates must be positive and finite")
    lo, hi = sigma.min(), sigma.max()
    if hi - lo < _VAR_GUARD:
        minmax = np.zeros_like(sigma)
    else:
        minmax = 2.0 * (sigma - lo) / (hi - lo) - 1.0
    return np.column_stack([z_score(sigma), minmax])


def build_sampled_parent_features(f_sampled, sigma_sampled, best_so_far):
    """Concatenated fitness + mutation-rate features of the sampled parents.

    Fitness transforms are recomputed over the N sampled parents only (not
    the archive they were drawn from), so duplicated parents shift the
    normalization accordingly.
    """
    fit = fitness_features(f_sampled, best_so_far)
    sig = sigma_features(sigma_sampled)
    if fit.shape[0] != sig.shape[0]:
        raise ValueError("fitness/sigma length mismatch")
    return np.column_stack([fit, sig])
