"""Config parsing: strict keys, field-path errors, schema versioning."""

from __future__ import annotations

import copy

import pytest

from sensorgame.config import ConfigError, load_config, parse_config

MINIMAL = {
    "schema_version": 1,
    "map": {"x_min": 0.0, "x_max": 600.0, "y_min": 0.0, "y_max": 600.0},
    "targets": [
        {"type": "cv", "init": [100.0, 100.0, 2.0, 1.0],
         "init_cov": [100.0, 100.0, 4.0, 4.0]}
    ],
    "sensors": [{"position": [50.0, 50.0], "z": 300.0}],
    "planning": {"mode": "ol", "k": 3},
    "run": {"num_steps": 10},
}


def variant(**updates):
    d = copy.deepcopy(MINIMAL)
    d.update(updates)
    return d


class TestParsing:
    def test_minimal_parses(self):
        cfg = parse_config(MINIMAL)
        assert cfg.planning.mode == "ol"
        assert cfg.planning.k == 3
        assert cfg.run.num_steps == 10
        assert len(cfg.targets) == 1
        assert cfg.sensors[0].pose.z == 300.0

    def test_defaults_applied(self):
        cfg = parse_config(MINIMAL)
        assert cfg.model.dt == 1.0
        assert cfg.planning.commit == 2
        assert cfg.run.num_mc_runs == 1
        assert cfg.sensors[0].caps.move_step_distances == (30.0, 60.0)

    def test_wrong_schema_version(self):
        with pytest.raises(ConfigError, match="schema_version"):
            parse_config(variant(schema_version=99))

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="config.bogus"):
            parse_config(variant(bogus=1))

    def test_unknown_nested_key_names_path(self):
        d = copy.deepcopy(MINIMAL)
        d["targets"][0]["oops"] = 1
        with pytest.raises(ConfigError, match=r"targets\[0\].oops"):
            parse_config(d)

    def test_missing_required_key_names_path(self):
        d = copy.deepcopy(MINIMAL)
        del d["planning"]["mode"]
        with pytest.raises(ConfigError, match="planning.mode"):
            parse_config(d)

    def test_bad_mode(self):
        d = copy.deepcopy(MINIMAL)
        d["planning"]["mode"] = "psychic"
        with pytest.raises(ConfigError, match="planning.mode"):
            parse_config(d)

    def test_dubins_keys_rejected_on_cv(self):
        d = copy.deepcopy(MINIMAL)
        d["targets"][0]["speed"] = 5.0
        with pytest.raises(ConfigError, match="dubins-only"):
            parse_config(d)

    def test_duplicate_sensor_altitudes(self):
        d = copy.deepcopy(MINIMAL)
        d["sensors"].append({"position": [60.0, 60.0], "z": 300.0})
        with pytest.raises(ConfigError, match="distinct"):
            parse_config(d)

    def test_no_targets(self):
        with pytest.raises(ConfigError, match="targets"):
            parse_config(variant(targets=[]))

    def test_inverted_bounds(self):
        d = copy.deepcopy(MINIMAL)
        d["map"]["x_max"] = -1.0
        with pytest.raises(ConfigError, match="map"):
            parse_config(d)

    def test_bad_init_cov(self):
        d = copy.deepcopy(MINIMAL)
        d["targets"][0]["init_cov"] = [1.0, 1.0, 1.0, -1.0]
        with pytest.raises(ConfigError, match=r"targets\[0\].init_cov"):
            parse_config(d)


class TestBundledScenarios:
    @pytest.mark.parametrize("name", ["hole", "survey"])
    def test_bundled_scenario_loads(self, name):
        import sensorgame

        path = f"{sensorgame.__path__[0]}/scenarios/{name}.toml"
        cfg = load_config(path)
        assert cfg.run.num_mc_runs >= 1

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("/nonexistent/nope.toml")
