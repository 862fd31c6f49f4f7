"""Unit tests for the meta-training loop and the batched candidate sweep."""

import csv
import os

import numpy as np
import pytest

from attnga import engine, metabbo
from attnga.bbob import TaskFamily, TaskSpec
from attnga.features import z_score
from attnga.params import FeatureConfig, LgaParams


def _theta(m, seed=42, scale=0.1):
    n = LgaParams.zeros().n_params
    rng = np.random.default_rng(seed)
    return (scale * rng.standard_normal((m, n))).astype(np.float32)


def test_objective_reductions_on_hand_tensor():
    fitness = np.array([[3.0, 1.0], [2.0, 4.0]])   # (T=2, N=2)
    assert metabbo.reduce_scores(fitness, "minN-minT") == 1.0
    assert metabbo.reduce_scores(fitness, "minN-finalT") == 2.0
    assert metabbo.reduce_scores(fitness, "meanN-minT") == 2.0
    assert metabbo.reduce_scores(fitness, "meanN-finalT") == 3.0
    with pytest.raises(ValueError):
        metabbo.reduce_scores(fitness, "maxN-minT")


def test_reduce_scores_handles_leading_axes():
    fitness = np.stack([np.array([[3.0, 1.0], [2.0, 4.0]]),
                        np.array([[5.0, 5.0], [0.5, 9.0]])])
    np.testing.assert_array_equal(
        metabbo.reduce_scores(fitness, "minN-finalT"), [2.0, 0.5])


def test_meta_fitness_normalizes_per_task():
    scores = np.array([[1.0, 10.0, 3.0],
                       [2.0, 20.0, 1.0],
                       [3.0, 30.0, 2.0]])
    expected = np.median(
        np.column_stack([z_score(scores[:, j]) for j in range(3)]), axis=1)
    np.testing.assert_allclose(metabbo.meta_fitness(scores), expected)
    with pytest.raises(ValueError):
        metabbo.meta_fitness(np.array([[1.0, np.inf]]))


def test_patch_non_finite_uses_column_worst():
    scores = np.array([[1.0, np.nan], [np.inf, 2.0], [3.0, 5.0]])
    patched = metabbo._patch_non_finite(scores)
    np.testing.assert_array_equal(patched, [[1.0, 5.0], [3.0, 2.0],
                                            [3.0, 5.0]])


def test_meta_config_validation():
    with pytest.raises(ValueError):
        metabbo.MetaConfig(meta_popsize=7)
    with pytest.raises(ValueError):
        metabbo.MetaConfig(n_tasks=0)
    with pytest.raises(ValueError):
        metabbo.MetaConfig(objective="bestN")
    with pytest.raises(ValueError):
        metabbo.MetaConfig(feature_cfg=FeatureConfig(heads=2))


@pytest.mark.parametrize("noise", [False, True])
def test_batched_sweep_matches_engine_rollouts(noise):
    """The vectorized M-candidate evaluator is the engine, candidate-wise."""
    cfg = FeatureConfig()
    theta = _theta(4)
    task = TaskSpec(function="rastrigin", dim=3,
                    offset=np.array([1.0, -2.0, 0.5]), sigma0=0.2,
                    noise=noise)
    seed, t, n = [9, 0, int(noise)], 30, 16

    captured = {}
    original = metabbo.reduce_scores

    def capture(fitness, objective):
        captured["log"] = np.array(fitness)
        return original(fitness, objective)

    metabbo.reduce_scores = capture
    try:
        scores = metabbo.evaluate_candidates_on_task(
            theta, cfg, task, seed, n, t, "minN-finalT")
    finally:
        metabbo.reduce_scores = original

    for i in range(4):
        params = LgaParams.from_vector(cfg, theta[i])
        config = engine.GaConfig(n_pop=n, elite_ratio=1.0,
                                 sigma0=task.sigma0, selection="learned",
                                 mra="learned", generations=t, seed=seed)
        trajectory = engine.run(config, task, params=params)
        np.testing.assert_allclose(captured["log"][i], trajectory.fitness,
                                   rtol=1e-6, atol=1e-9)
        ref = metabbo.reduce_scores(trajectory.fitness, "minN-finalT")
        np.testing.assert_allclose(scores[i], ref, rtol=1e-6, atol=1e-9)


def test_batched_sweep_matches_inner_score_helper():
    cfg = FeatureConfig()
    theta = _theta(2, seed=7)
    task = TaskSpec(function="sphere", dim=2, offset=np.array([1.5, -0.5]),
                    sigma0=0.1)
    scores = metabbo.evaluate_candidates_on_task(
        theta, cfg, task, seed=[3, 1], inner_popsize=8,
        inner_generations=10, objective="minN-finalT")
    for i in range(2):
        ref = metabbo.inner_score(LgaParams.from_vector(cfg, theta[i]),
                                  [task], "minN-finalT", 8, 10, [[3, 1]])
        np.testing.assert_allclose(scores[i], ref[0], rtol=1e-6)


def test_duplicate_candidates_score_identically():
    """Shared-randomness invariance: scores depend only on the weights."""
    cfg = FeatureConfig()
    base = _theta(3, seed=11)
    theta = np.concatenate([base, base[1:2], base[0:1]], axis=0)
    task = TaskSpec(function="rosenbrock", dim=2,
                    offset=np.array([0.5, 0.5]), sigma0=0.15, noise=True)
    scores = metabbo.evaluate_candidates_on_task(
        theta, cfg, task, seed=[1, 2, 3], inner_popsize=8,
        inner_generations=15, objective="minN-finalT")
    assert scores[3] == scores[1]
    assert scores[4] == scores[0]
    assert scores[0] != scores[1]


def _tiny_config(workers=1, out_of=None):
    return metabbo.MetaConfig(
        meta_popsize=8, n_tasks=3, inner_popsize=8, inner_generations=8,
        meta_generations=3, seed=5,
        family=TaskFamily(functions=("sphere",), dim_range=(2, 3)),
        eval_every=2, checkpoint_every=2, workers=workers)


def test_meta_train_writes_checkpoints_and_log(tmp_path):
    out = tmp_path / "run"
    result = metabbo.meta_train(_tiny_config(), out_dir=str(out))
    assert result.params.n_params == 704
    assert result.mean_history.shape == (3, 704)
    assert len(result.log) == 3
    assert (out / "checkpoint_final.txt").exists()
    assert (out / "checkpoint_gen00002.txt").exists()
    loaded = LgaParams.load(out / "checkpoint_final.txt")
    np.testing.assert_array_equal(loaded.to_vector(),
                                  result.params.to_vector())
    with open(out / "meta_log.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert set(rows[0]) == set(metabbo.META_LOG_COLUMNS)
    # eval columns are filled on eval generations (0 and 2) only.
    assert rows[0]["eval_sphere"] != "" and rows[1]["eval_sphere"] == ""
    assert float(rows[0]["eval_sphere"]) > 0.0


def test_meta_train_mean_actually_moves():
    result = metabbo.meta_train(_tiny_config())
    assert np.linalg.norm(result.mean_history[-1]) > 0.0
    assert not np.array_equal(result.mean_history[0],
                              result.mean_history[-1])


def test_meta_train_is_deterministic_across_worker_counts(tmp_path):
    a = metabbo.meta_train(_tiny_config(workers=1),
                           out_dir=str(tmp_path / "w1"))
    b = metabbo.meta_train(_tiny_config(workers=4),
                           out_dir=str(tmp_path / "w4"))
    np.testing.assert_array_equal(a.mean_history, b.mean_history)
    assert (tmp_path / "w1" / "meta_log.csv").read_bytes() \
        == (tmp_path / "w4" / "meta_log.csv").read_bytes()
