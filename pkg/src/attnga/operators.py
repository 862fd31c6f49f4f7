"""Genetic operators: learned attention modules and white-box baselines.

All operators are pure given an explicit ``numpy.random.Generator``; the GA
engine composes them and owns the draw order.
"""

from dataclasses import dataclass

import numpy as np

from .attention import multi_head_sdpa, row_softmax, sdpa
from .features import z_score

__all__ = [
    "ParentArchive",
    "selection_logits",
    "learned_selection_probs",
    "sample_selection",
    "apply_selection",
    "mra_multiplier",
    "learned_mra",
    "learned_sampling_probs",
    "learned_crossover",
    "uniform_sample_parents",
    "gaussian_mutate",
    "truncation_selection",
    "mr_one_fifth",
    "samr_adapt",
    "gesmr_adapt",
    "categorical_indices",
]

# Mutation-rate clamps shared by the white-box adaptation rules.
SIGMA_MIN = 1e-8
SIGMA_MAX = 1e3
# The learned multiplicative adaptation is clamped to [e^-10, e^10].
LOG_DELTA_CLAMP = 10.0


@dataclass
class ParentArchive:
    """Elite solutions with fitness, mutation rates and survival ages."""

    x: np.ndarray       # (E, D)
    f: np.ndarray       # (E,)
    sigma: np.ndarray   # (E,), strictly positive
    age: np.ndarray     # (E,), generations survived

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.f = np.asarray(self.f, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        self.age = np.asarray(self.age, dtype=np.int64)
        if np.any(self.sigma <= 0):
            raise ValueError("archive mutation rates must be positive")
        if np.any(self.age < 0):
            raise ValueError("archive ages must be non-negative")

    @property
    def size(self):
        return self.f.size

    def copy(self):
        return ParentArchive(self.x.copy(), self.f.copy(),
                             self.sigma.copy(), self.age.copy())


def _attention_block(params, prefix, feat_q, feat_kv):
    """Shared per-head projection + attention for the selection/MRA blocks."""
    w = params.weights
    wq, wk, wv = w[f"{prefix}_q"], w[f"{prefix}_k"], w[f"{prefix}_v"]
    heads = [(feat_q @ wq[h], feat_kv @ wk[h], feat_kv @ wv[h])
             for h in range(wq.shape[0])]
    w_out = w.get(f"{prefix}_out")
    return multi_head_sdpa(heads, w_out)


def selection_logits(params, feats_parents, feats_children):
    """E x (N+1) selection logits; the last column is the fixed keep offset."""
    feats_parents = np.asarray(feats_parents, dtype=np.float64)
    feats_children = np.asarray(feats_children, dtype=np.float64)
    if feats_parents.shape[1] != params.cfg.d_fit:
        raise ValueError("parent feature width mismatch")
    if feats_children.shape[1] != params.cfg.d_fit:
        raise ValueError("child feature width mismatch")
    attn = _attention_block(params, "sel", feats_parents, feats_children)
    queries = attn @ params.weights["sel_q2"]
    keys = feats_children @ params.weights["sel_k2"]
    logits = queries @ keys.T / np.sqrt(params.cfg.d_k)
    keep = np.ones((logits.shape[0], 1))
    return np.concatenate([logits, keep], axis=1)


def learned_selection_probs(params, feats_parents, feats_children):
    """Row-stochastic replacement probabilities, keep-parent slot last."""
    return row_softmax(selection_logits(params, feats_parents,
                                        feats_children))


def categorical_indices(probs, u):
    """Row-wise inverse-CDF categorical draw from row-stochastic ``probs``."""
    probs = np.asarray(probs, dtype=np.float64)
    cdf = np.cumsum(probs, axis=-1)
    idx = np.sum(cdf < np.expand_dims(u, -1), axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def sample_selection(probs, rng):
    """One categorical draw per row, returned as a 0/1 selection matrix."""
    probs = np.asarray(probs, dtype=np.float64)
    idx = categorical_indices(probs, rng.random(probs.shape[0]))
    sample = np.zeros_like(probs)
    sample[np.arange(probs.shape[0]), idx] = 1.0
    return sample


def apply_selection(sample, child_x, child_f, child_sigma, archive):
    """Replace archive rows per the 0/1 selection matrix.

    Column N (the last one) keeps the parent and increments its age; any
    other column copies that child's solution, fitness and mutation rate and
    resets the age. A single child may replace several parents.
    """
    sample = np.asarray(sample)
    n = np.asarray(child_f).size
    if sample.shape != (archive.size, n + 1):
        raise ValueError("selection matrix shape mismatch")
    idx = sample.argmax(axis=1)
    keep = idx == n
    child_idx = np.minimum(idx, n - 1)
    new = archive.copy()
    new.x = np.where(keep[:, None], archive.x,
                     np.asarray(child_x, dtype=np.float64)[child_idx])
    new.f = np.where(keep, archive.f, np.asarray(child_f,
                                                 dtype=np.float64)[child_idx])
    new.sigma = np.where(keep, archive.sigma,
                         np.asarray(child_sigma, dtype=np.float64)[child_idx])
    new.age = np.where(keep, archive.age + 1, 0)
    return new


def mra_multiplier(params, mra_feats):
    """Per-member multiplicative mutation-rate change from self-attention."""
    mra_feats = np.asarray(mra_feats, dtype=np.float64)
    expected = params.cfg.d_fit + params.cfg.d_sigma
    if mra_feats.shape[1] != expected:
        raise ValueError(f"MRA feature width {mra_feats.shape[1]} != "
                         f"{expected}")
    attn = _attention_block(params, "mra", mra_feats, mra_feats)
    log_delta = 0.5 * (attn @ params.weights["mra_sigma"])[:, 0]
    return np.exp(np.clip(log_delta, -LOG_DELTA_CLAMP, LOG_DELTA_CLAMP))


def learned_mra(params, mra_feats, sigma_sampled):
    """Children mutation rates: clamped multiplier times the sampled rates."""
    sigma_sampled = np.asarray(sigma_sampled, dtype=np.float64)
    if np.any(sigma_sampled <= 0):
        raise ValueError("sampled mutation rates must be positive")
    return mra_multiplier(params, mra_feats) * sigma_sampled


def learned_sampling_probs(params, feats_parents, age):
    """Parent sampling distribution from fitness features plus age counter.

    tanh(age / 20) keeps resolution over typical 50-generation runs; the
    scalar attention output is renormalized with a final softmax.
    """
    if not params.cfg.with_sampling:
        raise ValueError("params carry no learned-sampling weights")
    feats_parents = np.asarray(feats_parents, dtype=np.float64)
    age = np.asarray(age, dtype=np.float64)
    feats = np.column_stack([feats_parents, np.tanh(age / 20.0)])
    w = params.weights
    raw = sdpa(feats @ w["smp_q"], feats @ w["smp_k"], feats @ w["smp_v"])
    return row_softmax(raw[:, 0][None, :])[0]


def learned_crossover(params, feats_parents, x_parents):
    """Additive per-dimension recombination across the parent set.

    For each search dimension a two-column diversity description of the
    parent coordinates (z-score and normalized absolute distance from the
    mean) is appended to the fitness features; a self-attention layer then
    produces an additive change per parent.
    """
    if not params.cfg.with_crossover:
        raise ValueError("params carry no learned cross-over weights")
    feats_parents = np.asarray(feats_parents, dtype=np.float64)
    x_parents = np.asarray(x_parents, dtype=np.float64)
    e, d = x_parents.shape
    mean = x_parents.mean(axis=0)
    std = x_parents.std(axis=0)
    safe = np.where(std < 1e-10, 1.0, std)
    zs = np.where(std < 1e-10, 0.0, (x_parents - mean) / safe)
    dist = np.where(std < 1e-10, 0.0, np.abs(x_parents - mean) / safe)

    # Batched over dimensions: feats_d has shape (D, E, d_fit + 2).
    fit = np.broadcast_to(feats_parents, (d, e, feats_parents.shape[1]))
    feats_d = np.concatenate(
        [fit, zs.T[:, :, None], dist.T[:, :, None]], axis=2)
    w = params.weights
    q = feats_d @ np.asarray(w["co_q"], dtype=np.float64)
    k = feats_d @ np.asarray(w["co_k"], dtype=np.float64)
    v = feats_d @ np.asarray(w["co_v"], dtype=np.float64)
    logits = q @ np.swapaxes(k, 1, 2) / np.sqrt(params.cfg.d_k)
    attn = row_softmax(logits) @ v
    delta = (attn @ np.asarray(w["co_dx"], dtype=np.float64))[:, :, 0]
    return x_parents + delta.T


def uniform_sample_parents(archive, n, rng):
    """N i.i.d. uniform draws with replacement from the archive."""
    if archive.size < 1:
        raise ValueError("archive is empty")
    idx = rng.integers(0, archive.size, size=n)
    return idx, archive.x[idx], archive.f[idx], archive.sigma[idx]


def gaussian_mutate(x, sigma, rng):
    """Isotropic Gaussian perturbation, one rate per row."""
    x = np.asarray(x, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma < 0):
        raise ValueError("mutation rates must be non-negative")
    return x + sigma[:, None] * rng.standard_normal(x.shape)


def truncation_selection(child_x, child_f, child_sigma, archive):
    """Keep the top-E of the joint child+parent pool (minimization).

    Ties resolve in favour of children, then lower index, so fresh
    solutions win and the sort is fully deterministic.
    """
    child_x = np.asarray(child_x, dtype=np.float64)
    child_f = np.asarray(child_f, dtype=np.float64)
    child_sigma = np.asarray(child_sigma, dtype=np.float64)
    n, e = child_f.size, archive.size
    pool_f = np.concatenate([child_f, archive.f])
    is_parent = np.concatenate([np.zeros(n), np.ones(e)])
    index = np.concatenate([np.arange(n), np.arange(e)])
    order = np.lexsort((index, is_parent, pool_f))[:e]

    pool_x = np.concatenate([child_x, archive.x], axis=0)
    pool_sigma = np.concatenate([child_sigma, archive.sigma])
    pool_age = np.concatenate([np.zeros(n, dtype=np.int64), archive.age + 1])
    return ParentArchive(pool_x[order], pool_f[order], pool_sigma[order],
                         pool_age[order])


def mr_one_fifth(sigma, successes, trials):
    """Double the rate when at least a fifth of perturbations improved."""
    if trials < 1:
        raise ValueError("need at least one trial")
    new = 2.0 * sigma if successes / trials >= 0.2 else 0.5 * sigma
    return float(np.clip(new, SIGMA_MIN, SIGMA_MAX))


def samr_adapt(sigma_parent, meta_rate, rng):
    """Self-adaptive rates: multiply or divide by the meta rate, 50/50.

    Accepts a scalar or a vector of parent rates; the adapted rates ride
    along with their children through selection (co-evolution).
    """
    sigma_parent = np.asarray(sigma_parent, dtype=np.float64)
    if np.any(sigma_parent <= 0) or meta_rate <= 0:
        raise ValueError("rates must be positive")
    u = rng.random(sigma_parent.shape)
    factor = np.where(u < 0.5, meta_rate, 1.0 / meta_rate)
    return np.clip(sigma_parent * factor, SIGMA_MIN, SIGMA_MAX)


def gesmr_adapt(sigma_groups, group_improvements, rng):
    """Group-elite mutation-rate sharing.

    The group with the best (lowest) fitness-improvement statistic keeps
    its rate; every other group resamples log-uniformly within one octave
    of the elite rate. Ties pick the lowest group index.
    """
    sigma_groups = np.asarray(sigma_groups, dtype=np.float64)
    group_improvements = np.asarray(group_improvements, dtype=np.float64)
    if sigma_groups.shape != group_improvements.shape:
        raise ValueError("group count mismatch")
    elite = int(np.argmin(group_improvements))
    draws = rng.uniform(-np.log(2.0), np.log(2.0), size=sigma_groups.size)
    new = sigma_groups[elite] * np.exp(draws)
    new[elite] = sigma_groups[elite]
    return np.clip(new, SIGMA_MIN, SIGMA_MAX)
