"""Config file parsing and flag/file/default precedence."""

from __future__ import annotations

import pytest

from metonymy.config import ConfigError, RunConfig, load_config, parse_config_file


class TestParseConfigFile:
    def test_basic_values_and_comments(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text(
            "# a comment\n"
            "\n"
            "model = my-model\n"
            "votes = 5\n"
            "cot_temperature = 0.8   # inline comment\n"
            "with_context = true\n"
            'endpoint = "http://localhost:8000/v1/chat/completions"\n'
            "cache_dir = none\n"
        )
        got = parse_config_file(path)
        assert got == {
            "model": "my-model",
            "votes": 5,
            "cot_temperature": 0.8,
            "with_context": True,
            "endpoint": "http://localhost:8000/v1/chat/completions",
            "cache_dir": None,
        }

    def test_unknown_key_names_line(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("model = x\nvolume = 11\n")
        with pytest.raises(ConfigError, match=r":2: unknown config key 'volume'"):
            parse_config_file(path)

    def test_missing_equals(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("just some words\n")
        with pytest.raises(ConfigError, match="KEY = value"):
            parse_config_file(path)

    def test_bad_int(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("votes = three\n")
        with pytest.raises(ConfigError, match="bad value for votes"):
            parse_config_file(path)

    def test_bad_bool(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("with_context = perhaps\n")
        with pytest.raises(ConfigError, match="bad boolean"):
            parse_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config_file(tmp_path / "nope.conf")


class TestLoadConfig:
    def test_defaults(self):
        cfg = load_config(None, {})
        assert cfg == RunConfig()
        assert cfg.strategy == "cot2s" and cfg.votes is None

    def test_file_overrides_defaults(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("strategy = cot\nseed = 11\n")
        cfg = load_config(path, {})
        assert cfg.strategy == "cot" and cfg.seed == 11
        assert cfg.concurrency == 1  # untouched default

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("strategy = cot\nvotes = 3\n")
        cfg = load_config(path, {"strategy": "basic", "votes": None})
        assert cfg.strategy == "basic"  # flag wins
        assert cfg.votes == 3  # None override means "not given on the command line"

    def test_unknown_override(self):
        with pytest.raises(ConfigError, match="unknown config override"):
            load_config(None, {"volume": 11})
