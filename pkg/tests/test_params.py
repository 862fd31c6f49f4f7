"""Unit tests for weight layout, flat-vector packing and checkpoints."""

import numpy as np
import pytest

from attnga.params import FeatureConfig, LgaParams, weight_shapes


def _count_oracle(cfg):
    """Independent parameter count from the architecture description."""
    h, dk, df = cfg.heads, cfg.d_k, cfg.d_fit
    dm = df + cfg.d_sigma
    total = 3 * h * df * dk          # selection q/k/v projections
    total += dk * dk + df * dk       # second-stage selection query/key
    total += 3 * h * dm * dk + dk    # MRA q/k/v + sigma head
    if h > 1:
        total += 2 * h * dk * dk     # output projections
    if cfg.with_sampling:
        total += 2 * (df + 1) * dk + (df + 1)
    if cfg.with_crossover:
        total += 3 * (df + cfg.d_elite) * dk + dk
    return total


def test_default_parameter_count():
    assert LgaParams.zeros().n_params == 704


@pytest.mark.parametrize("cfg", [
    FeatureConfig(),
    FeatureConfig(heads=2),
    FeatureConfig(with_sampling=True),
    FeatureConfig(with_crossover=True),
    FeatureConfig(with_sampling=True, with_crossover=True),
    FeatureConfig(d_k=8, heads=3, with_sampling=True, with_crossover=True),
])
def test_parameter_count_matches_oracle(cfg):
    assert LgaParams.zeros(cfg).n_params == _count_oracle(cfg)


def test_vector_round_trip_preserves_layout():
    cfg = FeatureConfig(with_sampling=True, with_crossover=True)
    params = LgaParams.random(cfg, np.random.default_rng(5))
    vec = params.to_vector()
    assert vec.dtype == np.float32 and vec.size == params.n_params
    rebuilt = LgaParams.from_vector(cfg, vec)
    for name in weight_shapes(cfg):
        np.testing.assert_array_equal(rebuilt.weights[name],
                                      params.weights[name])
    with pytest.raises(ValueError):
        LgaParams.from_vector(cfg, vec[:-1])


def test_weight_validation():
    cfg = FeatureConfig()
    good = LgaParams.zeros(cfg).weights
    bad = dict(good)
    del bad["mra_sigma"]
    with pytest.raises(ValueError):
        LgaParams(cfg, bad)
    bad = dict(good)
    bad["sel_q"] = np.zeros((2, 2), dtype=np.float32)
    with pytest.raises(ValueError):
        LgaParams(cfg, bad)
    bad = dict(good)
    bad["sel_q"] = np.full_like(good["sel_q"], np.nan)
    with pytest.raises(ValueError):
        LgaParams(cfg, bad)


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    cfg = FeatureConfig(with_sampling=True, with_crossover=True)
    params = LgaParams.random(cfg, np.random.default_rng(6), scale=1e3)
    # Sprinkle in values that commonly lose digits in decimal round trips.
    params.weights["mra_sigma"][0, 0] = np.float32(1e-8)
    params.weights["mra_sigma"][1, 0] = np.float32(np.pi)
    params.weights["mra_sigma"][2, 0] = np.float32(-1.0 / 3.0)
    path = tmp_path / "ckpt.txt"
    params.save(path)
    loaded = LgaParams.load(path)
    assert loaded.cfg == cfg
    for name in weight_shapes(cfg):
        np.testing.assert_array_equal(
            loaded.weights[name].view(np.uint32),
            params.weights[name].view(np.uint32))


def test_checkpoint_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("format-version: 99\n[config]\n")
    with pytest.raises(ValueError):
        LgaParams.load(path)
    path.write_text("hello\n")
    with pytest.raises(ValueError):
        LgaParams.load(path)


def test_with_extra_operators_keeps_shared_weights():
    base = LgaParams.random(FeatureConfig(), np.random.default_rng(7))
    extended = base.with_extra_operators(sampling=True, crossover=True,
                                         rng=np.random.default_rng(8))
    assert extended.cfg.with_sampling and extended.cfg.with_crossover
    for name in weight_shapes(base.cfg):
        np.testing.assert_array_equal(extended.weights[name],
                                      base.weights[name])
    assert "smp_q" in extended.weights and "co_dx" in extended.weights


def test_feature_config_validation():
    with pytest.raises(ValueError):
        FeatureConfig(heads=0)
    with pytest.raises(ValueError):
        FeatureConfig(d_k=0)
