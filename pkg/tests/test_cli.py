import json

import pytest
from click.testing import CliRunner

import main
from main import EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK, cli


@pytest.fixture
def runner():
    return CliRunner()


def test_help_lists_constructions(runner):
    assert main.__doc__.startswith("Command-line entry point")
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == EXIT_OK
    for name in ("convolution", "cantor", "brownian", "kaufman", "arc", "oneline", "criteria"):
        assert name in result.output


def test_convolution_writes_report(runner, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["--seed", "42", "--out", str(out), "--format", "json", "--format", "csv",
                                 "convolution", "--s", "0.5", "--levels", "3"])
    assert result.exit_code == EXIT_OK, result.output
    report = json.loads((out / "convolution_42.json").read_text(encoding="utf-8"))
    assert report["schema"] == "salem-lab/1"
    assert report["config"]["levels"] == 3
    assert (out / "convolution_42_bands_mu.csv").exists()


def test_invalid_dimension(runner, tmp_path):
    result = runner.invoke(cli, ["--out", str(tmp_path), "convolution", "--s", "1.5"])
    assert result.exit_code == EXIT_ERROR
    assert "s=1.5" in result.output


def test_build_failure_still_emits(runner, tmp_path):
    result = runner.invoke(cli, ["--seed", "1", "--out", str(tmp_path), "convolution", "--levels", "13"])
    assert result.exit_code == EXIT_ERROR
    report = json.loads((tmp_path / "convolution_1.json").read_text(encoding="utf-8"))
    assert report["failures"][0]["stage"] == "build"


def test_config_file(runner, tmp_path):
    ini = tmp_path / "arc.ini"
    ini.write_text("[experiment]\nschema = salem-lab/1\nconstruction = arc\nseed = 9\n"
                   "gram_k = 8\nrmax = 32\nsamples = 4\n", encoding="utf-8")
    result = runner.invoke(cli, ["--config", str(ini), "--out", str(tmp_path), "arc"])
    assert result.exit_code in (EXIT_OK, EXIT_CHECK_FAILED), result.output
    report = json.loads((tmp_path / "arc_9.json").read_text(encoding="utf-8"))
    assert report["checks"]["gram"]["passed"]


def test_config_file_for_other_construction(runner, tmp_path):
    ini = tmp_path / "arc.ini"
    ini.write_text("[experiment]\nschema = salem-lab/1\nconstruction = arc\nseed = 9\n", encoding="utf-8")
    result = runner.invoke(cli, ["--config", str(ini), "cantor"])
    assert result.exit_code != EXIT_OK
    assert "describes" in result.output


def test_criteria_command(runner, tmp_path):
    payload = tmp_path / "ratios.json"
    payload.write_text(json.dumps({"ratios": [3.0, 6.0, 10.0, 15.0, 21.0, 28.0]}), encoding="utf-8")
    result = runner.invoke(cli, ["--out", str(tmp_path), "criteria", "--input", str(payload)])
    assert result.exit_code == EXIT_OK, result.output
    verdicts = json.loads((tmp_path / "ratios.verdicts.json").read_text(encoding="utf-8"))
    assert verdicts["criteria"][0]["verdict"] == "no_frame_indicated"


def test_criteria_bad_payload(runner, tmp_path):
    payload = tmp_path / "bad.json"
    payload.write_text(json.dumps({"lambda": [1.0]}), encoding="utf-8")
    result = runner.invoke(cli, ["--out", str(tmp_path), "criteria", "--input", str(payload)])
    assert result.exit_code == EXIT_ERROR
