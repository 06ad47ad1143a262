import json
import math
from dataclasses import replace

import pytest

from asprx.config import (
    ConfigError,
    OutputSpec,
    check_path,
    config_from_dict,
    config_hash,
    config_to_dict,
    load_config,
    set_path,
)
from asprx.core import ParameterError
from asprx.link import ScenarioConfig
from asprx.loop import LoopConfig
from asprx.optics import LaserSpec, RandomWalkDrift, SinusoidDrift
from asprx.scenarios import SCENARIO_NAMES, get_scenario


class TestParsing:
    def test_defaults(self):
        cfg, out = config_from_dict({})
        assert cfg == ScenarioConfig() and out == OutputSpec()

    @pytest.mark.parametrize("data", [
        {"bogus": 1},
        {"loop": {"kpp": 1.0}},
        {"channel": {"drift": [{"type": "random_walk", "rate": 1.0, "x": 2}]}},
        {"channel": {"drift": [{"type": "brownian"}]}},
        {"outputs": {"pdf": True}},
    ])
    def test_unknown_keys_rejected(self, data):
        with pytest.raises(ConfigError):
            config_from_dict(data)

    def test_aliases_and_inf(self):
        cfg, _ = config_from_dict({"duration_symbols": 12345, "laser": {"offset": 5.0}, "snr_db": "inf",
                                   "loop": {"closed": False}})
        assert cfg.n_symbols == 12345
        assert cfg.laser.center_frequency_offset == 5.0
        assert math.isinf(cfg.snr_db)

    def test_base_inheritance(self):
        cfg, _ = config_from_dict({"base": "fig7-closed", "seed": 9})
        assert replace(cfg, seed=1) == get_scenario("fig7-closed")

    def test_drift_list(self):
        cfg, _ = config_from_dict({"channel": {"drift": [
            {"type": "random_walk", "rate": 10.0}, {"type": "sinusoid", "frequency": 1e3, "amplitude": 0.5}]}})
        assert cfg.channel.drift == (RandomWalkDrift(10.0), SinusoidDrift(1e3, 0.5))
        cfg, _ = config_from_dict({"channel": {"drift": "none"}})
        assert cfg.channel.drift == ()

    def test_invalid_values_raise_parameter_error(self):
        with pytest.raises(ParameterError):
            config_from_dict({"laser": {"power": -1.0}})

    def test_closed_loop_with_frequency_offset_rejected(self):
        with pytest.raises(ParameterError, match="SSB"):
            config_from_dict({"laser": {"offset": 1e6}})

    @pytest.mark.parametrize("name", SCENARIO_NAMES)
    def test_round_trip(self, name):
        cfg = get_scenario(name)
        d = json.loads(json.dumps(config_to_dict(cfg)))
        back, _ = config_from_dict(d)
        assert back == cfg
        assert config_hash(back) == config_hash(cfg)

    def test_hash_changes_with_content(self):
        a = get_scenario("fig7-closed")
        assert config_hash(a) != config_hash(replace(a, seed=2))
        assert len(config_hash(a)) == 16

    def test_yaml_and_json_files(self, tmp_path):
        y = tmp_path / "s.yaml"
        y.write_text("base: fig4a\nseed: 3\nloop:\n  closed: false\noutputs:\n  svg: false\n")
        cfg, out = load_config(y)
        assert cfg.seed == 3 and cfg.name == "fig4a" and not out.svg
        e = tmp_path / "e.yaml"
        e.write_text("channel:\n  drift:\n    - {type: random_walk, rate: 1e3}\n")
        assert load_config(e)[0].channel.drift == (RandomWalkDrift(1000.0),)
        j = tmp_path / "s.json"
        j.write_text(json.dumps({"base": "fig4a", "seed": 4}))
        assert load_config(j)[0].seed == 4
        bad = tmp_path / "bad.yaml"
        bad.write_text("seed: [1\n")
        with pytest.raises(ConfigError):
            load_config(bad)
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.yaml")

    def test_emit_parse(self):
        assert OutputSpec.parse("csv,json") == OutputSpec(True, True, False)
        with pytest.raises(ConfigError):
            OutputSpec.parse("csv,png")


class TestPaths:
    def test_set_nested(self):
        cfg = get_scenario("fig7-closed")
        out = set_path(cfg, "laser.linewidth", 1e4)
        assert out.laser.linewidth == 1e4 and cfg.laser.linewidth != 1e4
        assert set_path(cfg, "laser.offset", 0.0).laser.center_frequency_offset == 0.0
        assert set_path(cfg, "duration_symbols", 50000).n_symbols == 50000

    @pytest.mark.parametrize("path", ["laser.nope", "nope", "seed.x", "loop.kp.x"])
    def test_unresolvable(self, path):
        with pytest.raises(ConfigError):
            check_path(get_scenario("fig7-closed"), path)

    def test_unknown_scenario(self):
        with pytest.raises(ParameterError):
            get_scenario("fig9")
