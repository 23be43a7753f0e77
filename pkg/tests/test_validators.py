import pytest
from pydantic import ValidationError

from config import Config, config
from utils.validators import (
    ExperimentConfig, dump_experiment, load_experiment, sanitize_filename, validate_environment_config,
)

EXPERIMENT = """
[experiment]
schema = salem-lab/1
construction = cantor
s = 0.5
seed = 7
levels = 12
formats = json, csv

[tolerances]
retry_cap = 128
"""


def _write(tmp_path, text, name="experiment.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestExperimentConfig:
    def test_defaults(self):
        cfg = ExperimentConfig(construction="kaufman")
        assert cfg.s == 0.5
        assert cfg.schema_id == config.REPORT_SCHEMA
        assert cfg.formats == ["json"]

    def test_oneline_alias(self):
        assert ExperimentConfig(construction="oneline", seed=1).construction == "one_line"

    def test_dimension_outside_interval(self):
        with pytest.raises(ValidationError, match=r"\(0, 1\]"):
            ExperimentConfig(construction="convolution", s=1.5, seed=1)
        with pytest.raises(ValidationError):
            ExperimentConfig(construction="convolution", s=0.0, seed=1)

    def test_seed_required_for_random_constructions(self):
        with pytest.raises(ValidationError, match="seed is mandatory"):
            ExperimentConfig(construction="cantor")

    def test_seed_range(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(construction="cantor", seed=2 ** 64)

    def test_unknown_key(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(construction="arc", seed=1, colour="blue")

    def test_unknown_tolerance(self):
        with pytest.raises(ValidationError, match="unknown tolerance"):
            ExperimentConfig(construction="arc", seed=1, tolerances={"speed": 2.0})

    def test_schema_mismatch(self):
        with pytest.raises(ValidationError, match="unsupported schema"):
            ExperimentConfig(construction="arc", seed=1, schema="salem-lab/0")

    def test_limits(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(construction="brownian", seed=1, paths=50)
        with pytest.raises(ValidationError):
            ExperimentConfig(construction="arc", seed=1, rmax=1e6)
        with pytest.raises(ValidationError):
            ExperimentConfig(construction="kaufman", n=3)

    def test_echo_uses_file_key(self):
        echo = ExperimentConfig(construction="kaufman").echo()
        assert echo["schema"] == config.REPORT_SCHEMA
        assert "schema_id" not in echo


class TestExperimentFile:
    def test_load(self, tmp_path):
        cfg = load_experiment(_write(tmp_path, EXPERIMENT))
        assert cfg.construction == "cantor"
        assert cfg.levels == 12
        assert cfg.formats == ["json", "csv"]
        assert cfg.tolerances == {"retry_cap": 128.0}

    def test_round_trip(self, tmp_path):
        cfg = ExperimentConfig(construction="kaufman", s=0.75, q=[1e4, 1e7], cs=2.0,
                               tolerances={"kaufman_tail_tol": 1e-9})
        again = load_experiment(_write(tmp_path, dump_experiment(cfg)))
        assert again.dict() == cfg.dict()

    def test_schema_key_required(self, tmp_path):
        text = EXPERIMENT.replace("schema = salem-lab/1\n", "")
        with pytest.raises(ValueError, match="missing schema"):
            load_experiment(_write(tmp_path, text))

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ValueError, match="unknown sections"):
            load_experiment(_write(tmp_path, EXPERIMENT + "\n[extras]\nx = 1\n"))

    def test_unknown_key_in_file(self, tmp_path):
        text = EXPERIMENT.replace("levels = 12", "levels = 12\nwidth = 3")
        with pytest.raises(ValidationError):
            load_experiment(_write(tmp_path, text))


def test_sanitize_filename():
    assert sanitize_filename("cantor:7/../x") == "cantor_7_.._x"
    assert sanitize_filename("...") == "report"


def test_environment_config_clean():
    assert validate_environment_config() == []


class TestSettings:
    def test_lattice_sampling_accepted(self):
        assert Config(BAND_SAMPLING="LATTICE").BAND_SAMPLING == "lattice"

    def test_increment_constant_must_be_positive(self):
        with pytest.raises(ValidationError):
            Config(CANTOR_INCREMENT_C=0.0)
        assert config.CANTOR_INCREMENT_C == 32.0

    def test_increment_tolerances_accepted(self):
        cfg = ExperimentConfig(construction="cantor", seed=1,
                               tolerances={"increment_c": 16.0, "increment_eps": -0.1})
        assert cfg.tolerances["increment_eps"] == -0.1
