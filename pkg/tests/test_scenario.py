import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uplinkgame import (
    ScenarioGenParams,
    ScenarioParseError,
    ValidationError,
    generate_scenario,
    load_scenario,
    partition_channels,
    save_scenario,
)
from uplinkgame.scenario import sample_gains


def test_partition_paper_sizes():
    blocks = partition_channels(64, 4)
    assert [len(b) for b in blocks] == [16, 16, 16, 16]
    assert blocks[0] == list(range(1, 17))
    assert blocks[3] == list(range(49, 65))


def test_partition_identity_case():
    assert partition_channels(1, 1) == [[1]]


def test_partition_remainder_round_robin():
    blocks = partition_channels(5, 2)
    assert [len(b) for b in blocks] == [3, 2]
    assert blocks == [[1, 2, 3], [4, 5]]


def test_partition_rejects_k_below_w():
    with pytest.raises(ValidationError):
        partition_channels(3, 4)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40))
def test_partition_is_a_partition(k, w):
    if k < w:
        return
    blocks = partition_channels(k, w)
    flat = [c for b in blocks for c in b]
    assert sorted(flat) == list(range(1, k + 1))
    sizes = [len(b) for b in blocks]
    assert max(sizes) - min(sizes) <= 1


def test_generation_is_deterministic():
    params = ScenarioGenParams(num_mus=5, num_aps=2, num_channels=6, seed=11)
    a, b = generate_scenario(params), generate_scenario(params)
    assert np.array_equal(a.gain_sq, b.gain_sq)
    assert np.array_equal(a.mu_positions, b.mu_positions)
    assert np.array_equal(a.ap_positions, b.ap_positions)


def test_generated_scenarios_satisfy_invariants():
    for seed in range(25):
        sc = generate_scenario(
            ScenarioGenParams(num_mus=4, num_aps=3, num_channels=7, seed=seed)
        )
        assert np.all(sc.gain_sq > 0) and np.all(np.isfinite(sc.gain_sq))
        assert np.all(sc.noise > 0) and np.all(sc.budget > 0)
        flat = sorted(c for b in sc.ap_channels for c in b)
        assert flat == list(range(1, 8))
        assert np.all(sc.mu_positions >= 0) and np.all(sc.mu_positions <= 10)


def test_paper_experiment_shape():
    sc = generate_scenario(ScenarioGenParams(num_mus=20, num_aps=4, num_channels=64, seed=1))
    assert sc.gain_sq.shape == (20, 64)
    assert all(len(b) == 16 for b in sc.ap_channels)


def test_mean_gain_at_distance_ten():
    # Monte-Carlo oracle over the generator's gain sampler: mean 1/d^2.
    rng = np.random.default_rng(123)
    draws = sample_gains(rng, 10.0, 100_000)
    assert abs(draws.mean() - 0.01) / 0.01 < 0.05


def test_distance_clamp_bounds_mean_gain():
    rng = np.random.default_rng(1)
    close = sample_gains(rng, 0.0, 50_000)
    assert abs(close.mean() - 1e4) / 1e4 < 0.05  # clamped at d = 0.01


def test_round_trip_is_lossless(tmp_path):
    sc = generate_scenario(ScenarioGenParams(num_mus=3, num_aps=2, num_channels=5, seed=4))
    path = tmp_path / "s.scn"
    save_scenario(sc, path)
    back = load_scenario(path)
    assert back.ap_channels == sc.ap_channels
    assert np.array_equal(back.gain_sq, sc.gain_sq)
    assert np.array_equal(back.noise, sc.noise)
    assert np.array_equal(back.budget, sc.budget)
    assert np.array_equal(back.mu_positions, sc.mu_positions)
    assert np.array_equal(back.connection_cost, sc.connection_cost)
    assert back.seed == sc.seed


def _doc(tmp_path, **overrides):
    sc = generate_scenario(ScenarioGenParams(num_mus=2, num_aps=2, num_channels=2, seed=0))
    path = tmp_path / "s.scn"
    save_scenario(sc, path)
    doc = json.loads(path.read_text())
    doc.update(overrides)
    path.write_text(json.dumps(doc))
    return path


def test_overlapping_channels_rejected(tmp_path):
    path = _doc(tmp_path, ap_channels=[[1, 2], [2]])
    with pytest.raises(ValidationError, match="ap_channels"):
        load_scenario(path)


def test_zero_noise_rejected(tmp_path):
    path = _doc(tmp_path, noise=[0.0, 1.0])
    with pytest.raises(ValidationError, match="noise"):
        load_scenario(path)


def test_zero_gain_rejected(tmp_path):
    path = _doc(tmp_path, gain_sq=[[0.0, 1.0], [1.0, 1.0]])
    with pytest.raises(ValidationError, match="gain_sq"):
        load_scenario(path)


def test_missing_field_names_it(tmp_path):
    sc = generate_scenario(ScenarioGenParams(num_mus=2, num_aps=1, num_channels=2, seed=0))
    path = tmp_path / "s.scn"
    save_scenario(sc, path)
    doc = json.loads(path.read_text())
    del doc["budget"]
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError, match="budget"):
        load_scenario(path)


def test_malformed_file_reports_location(tmp_path):
    path = tmp_path / "bad.scn"
    path.write_text('{"num_mus": 2,,}')
    with pytest.raises(ScenarioParseError, match="line 1"):
        load_scenario(path)


def test_params_validation():
    with pytest.raises(ValidationError):
        ScenarioGenParams(num_mus=2, num_aps=4, num_channels=3)
    with pytest.raises(ValidationError):
        ScenarioGenParams(num_mus=2, num_aps=1, num_channels=2, area_side=0.0)
    with pytest.raises(ValidationError):
        ScenarioGenParams(num_mus=2, num_aps=1, num_channels=2, gain_distribution="rician")


def test_scenario_arrays_are_read_only():
    sc = generate_scenario(ScenarioGenParams(num_mus=2, num_aps=1, num_channels=2, seed=0))
    with pytest.raises(ValueError):
        sc.gain_sq[0, 0] = 2.0
