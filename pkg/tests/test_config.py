"""Configuration loading, validation, serialization and hashing."""

import numpy as np
import pytest

from uamsim.config import (
    ConfigError,
    ExperimentConfig,
    default_config,
    dump_config,
    load_config,
)


def test_default_config_is_valid(config):
    assert config.dt == 1e-3
    assert config.control_rate_hz == 250.0
    assert config.mission.target_force == 3.5


def test_dict_round_trip_preserves_hash(config):
    again = ExperimentConfig.from_dict(config.to_dict())
    assert again.config_hash() == config.config_hash()
    assert again.to_dict() == config.to_dict()


def test_yaml_round_trip(tmp_path, config):
    path = tmp_path / "run.yaml"
    path.write_text(dump_config(config))
    loaded = load_config(str(path))
    assert loaded.config_hash() == config.config_hash()


def test_hash_tracks_content(config):
    d = config.to_dict()
    d["seed"] = 43
    assert ExperimentConfig.from_dict(d).config_hash() != config.config_hash()
    assert len(config.config_hash()) == 16


def test_from_dict_rejects_unknown_keys(config):
    d = config.to_dict()
    d["turbo"] = True
    with pytest.raises(ConfigError, match="unknown configuration keys"):
        ExperimentConfig.from_dict(d)
    d = config.to_dict()
    d["surface"]["friction"] = 0.2
    with pytest.raises(ConfigError, match="unknown keys in 'surface'"):
        ExperimentConfig.from_dict(d)


def test_load_config_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/run.yaml")


def test_load_config_bad_yaml(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("seed: [unclosed\n")
    with pytest.raises(ConfigError, match="not valid YAML"):
        load_config(str(path))


def test_load_config_non_mapping(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(str(path))


# ---------------------------------------------------------------------------
# validation rules


def _mutated(config, section, key, value):
    d = config.to_dict()
    if section is None:
        d[key] = value
    else:
        d[section][key] = value
    return d


def test_rate_divisibility_enforced(config):
    with pytest.raises(ConfigError, match="does not divide"):
        ExperimentConfig.from_dict(_mutated(config, None, "control_rate_hz", 333.0))
    with pytest.raises(ConfigError, match="does not divide"):
        ExperimentConfig.from_dict(_mutated(config, None, "telemetry_rate_hz", 64.0))


def test_invalid_timing_rejected(config):
    with pytest.raises(ConfigError, match="dt"):
        ExperimentConfig.from_dict(_mutated(config, None, "dt", -1e-3))
    with pytest.raises(ConfigError, match="duration"):
        ExperimentConfig.from_dict(_mutated(config, None, "duration", 0.0))
    with pytest.raises(ConfigError, match="seed"):
        ExperimentConfig.from_dict(_mutated(config, None, "seed", -1))


def test_home_configuration_must_be_reachable(config):
    with pytest.raises(ConfigError, match="outside limits"):
        ExperimentConfig.from_dict(
            _mutated(config, "mission", "home_q", [0.0, 5.0, 0.0, 0.0, 0.0]))


def test_gain_definiteness_enforced(config):
    with pytest.raises(ConfigError, match="positive definite"):
        ExperimentConfig.from_dict(
            _mutated(config, "interaction", "stiffness_linear", -30.0))


def test_compliance_must_be_positive(config):
    with pytest.raises(ConfigError, match="must be positive"):
        ExperimentConfig.from_dict(
            _mutated(config, "interaction", "axis_compliance", 0.0))


def test_force_target_authority_check(config):
    with pytest.raises(ConfigError, match="beyond any plausible authority"):
        d = config.to_dict()
        d["mission"]["target_force"] = 1000.0
        d["mission"]["max_force"] = 2000.0
        ExperimentConfig.from_dict(d)


def test_surface_normal_must_oppose_approach(config):
    with pytest.raises(ConfigError, match="oppose the approach"):
        ExperimentConfig.from_dict(
            _mutated(config, "surface", "normal", [1.0, 0.0, 0.0]))


# ---------------------------------------------------------------------------
# carriage auto-offset


def test_carriage_offset_centres_home_posture(config):
    # Default carriage offset resolves so the battery parks at zero in
    # the home posture, leaving symmetric travel for the sweep.
    assert config.home_battery_x() == pytest.approx(0.0, abs=1e-12)


def test_carriage_offset_auto_keyword(config):
    d = config.to_dict()
    d["carriage"]["offset"] = "auto"
    cfg = ExperimentConfig.from_dict(d)
    assert cfg.home_battery_x() == pytest.approx(0.0, abs=1e-12)
    assert cfg.carriage.offset == pytest.approx(config.carriage.offset)


def test_carriage_explicit_offset_respected(config):
    d = config.to_dict()
    d["carriage"]["offset"] = 0.05
    cfg = ExperimentConfig.from_dict(d)
    assert cfg.carriage.offset == 0.05
    assert cfg.home_battery_x() != pytest.approx(0.0, abs=1e-6)


# ---------------------------------------------------------------------------
# gain adapters


def test_interaction_gain_builders(config):
    from uamsim.interaction import make_subspace_split

    split = make_subspace_split(0)
    imp = config.interaction.impedance_gains(split)
    np.testing.assert_allclose(np.diag(imp.stiffness), [30.0, 30.0, 0.1, 0.1, 0.1])
    frc = config.interaction.force_gains(split)
    np.testing.assert_allclose(frc.k_p, [[0.25]])
    assert frc.compliance[0, 0] == pytest.approx(1e-3)
