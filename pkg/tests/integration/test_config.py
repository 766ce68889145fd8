"""Integration tests for config loading with real file I/O."""

import hashlib
import json

import pytest
import yaml

from ringqed.config import DEFAULT_CONFIG_PATH, config_from_dict, load_config
from ringqed.errors import ValidationError


class TestLoadConfigWithFiles:

    def test_yaml_file(self, tmp_path):
        config_data = {
            "seed": 11,
            "workers": 2,
            "emitter": {"f_max": 5.0, "eta_ratio": 6.0},
            "tuning": {"sensitivity_nm_per_pa_l": 0.8},
            "spin": {"rabi_paths": ["grating_on"]},
        }
        config_path = tmp_path / "scenario.yaml"
        config_path.write_text(yaml.dump(config_data))

        cfg = load_config(str(config_path))

        assert cfg.seed == 11
        assert cfg.workers == 2
        assert cfg.emitter.f_max == 5.0
        assert cfg.tuning.sensitivity_nm_per_pa_l == 0.8
        assert cfg.spin.rabi_paths == ["grating_on"]
        assert cfg.cavity.tuned_diameter_um == 8.1

    def test_hash_is_sha256_of_file_bytes(self, tmp_config_file):
        with open(tmp_config_file, "rb") as f:
            raw = f.read()
        assert load_config(tmp_config_file).config_hash == hashlib.sha256(raw).hexdigest()

    def test_whitespace_changes_hash_not_content(self, tmp_path, sample_config_dict):
        compact = tmp_path / "compact.json"
        pretty = tmp_path / "pretty.json"
        compact.write_text(json.dumps(sample_config_dict))
        pretty.write_text(json.dumps(sample_config_dict, indent=4))

        a, b = load_config(str(compact)), load_config(str(pretty))

        assert a.config_hash != b.config_hash
        assert a.decay == b.decay
        assert a.spin == b.spin

    def test_yaml_and_json_agree(self, tmp_path, sample_config_dict):
        json_path = tmp_path / "scenario.json"
        yaml_path = tmp_path / "scenario.yml"
        json_path.write_text(json.dumps(sample_config_dict))
        yaml_path.write_text(yaml.dump(sample_config_dict))

        a, b = load_config(str(json_path)), load_config(str(yaml_path))

        assert (a.seed, a.decay, a.spin, a.tuning) == (b.seed, b.decay, b.spin, b.tuning)

    def test_empty_yaml_file(self, tmp_path):
        config_path = tmp_path / "scenario.yaml"
        config_path.write_text("")
        with pytest.raises(ValidationError, match="seed"):
            load_config(str(config_path))

    def test_unknown_key_in_file(self, tmp_path):
        config_path = tmp_path / "scenario.json"
        config_path.write_text('{"seed": 1, "decay": {"bins": 100}}')
        with pytest.raises(ValidationError, match="bins"):
            load_config(str(config_path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(str(tmp_path / "nope.json"))

    def test_shipped_scenario_matches_defaults(self):
        with open(DEFAULT_CONFIG_PATH) as f:
            data = json.load(f)
        shipped = load_config(DEFAULT_CONFIG_PATH)
        defaults = config_from_dict({"seed": data["seed"]})

        assert shipped.cavity == defaults.cavity
        assert shipped.emitter == defaults.emitter
        assert shipped.tuning == defaults.tuning
        assert shipped.decay == defaults.decay
        assert shipped.spin == defaults.spin
        assert shipped.noise == defaults.noise
