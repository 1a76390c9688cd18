"""Config parsing, CSV emission, experiment runs, exit codes, and
scheduling-independence of the outputs."""

import json
import os

import numpy as np
import pytest

from ebmlab import cli, runner
from ebmlab.config import (
    ExperimentConfig,
    canonical_form,
    config_digest,
    parse_config,
    validate_config,
)
from ebmlab.csvio import emit_csv, format_value
from ebmlab.errors import IoFailure, MalformedJson, RangeViolation, UnknownKey


def write_config(tmp_path, name="cfg.json", **overrides):
    payload = {"experiment": "evolve", "seed": 7}
    payload.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestParseConfig:
    def test_defaults_filled(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, experiment="verify-db"))
        assert cfg.experiment == "verify-db"
        assert cfg.seed == 7
        assert cfg.beta == 1.0
        assert cfg.steps == 200
        assert cfg.n_states == 32
        assert cfg.lambda_grid == ()
        assert cfg.threshold_b is None

    def test_negative_beta_names_key(self, tmp_path):
        with pytest.raises(RangeViolation, match="beta"):
            parse_config(write_config(tmp_path, beta=-1))

    def test_unknown_key_named(self, tmp_path):
        with pytest.raises(UnknownKey, match="typo_key"):
            parse_config(write_config(tmp_path, typo_key=1))

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(MalformedJson):
            parse_config(str(path))
        with pytest.raises(MalformedJson):
            parse_config(str(tmp_path / "missing.json"))
        array = tmp_path / "arr.json"
        array.write_text("[1, 2]")
        with pytest.raises(MalformedJson):
            parse_config(str(array))

    def test_experiment_required_and_known(self):
        with pytest.raises(RangeViolation, match="experiment"):
            validate_config({"seed": 1})
        with pytest.raises(RangeViolation, match="experiment"):
            validate_config({"experiment": "mystery"})

    def test_bad_seed_and_grid(self, tmp_path):
        with pytest.raises(RangeViolation, match="seed"):
            parse_config(write_config(tmp_path, seed=-1))
        with pytest.raises(RangeViolation, match="seed"):
            parse_config(write_config(tmp_path, seed=2**64))
        with pytest.raises(RangeViolation, match="lambda_grid"):
            parse_config(write_config(tmp_path, lambda_grid=[-0.5]))
        with pytest.raises(RangeViolation, match="lambda_grid"):
            parse_config(write_config(tmp_path, lambda_grid="nope"))

    def test_subcommand_mismatch(self, tmp_path):
        path = write_config(tmp_path, experiment="evolve")
        with pytest.raises(RangeViolation, match="experiment"):
            parse_config(path, expected_experiment="spectral")

    def test_all_subcommand_accepts_any(self, tmp_path):
        path = write_config(tmp_path, experiment="evolve")
        cfg = parse_config(path, expected_experiment="all")
        assert cfg.experiment == "evolve"

    def test_round_trip_is_canonical(self, tmp_path):
        path = write_config(tmp_path, experiment="spectral", beta=0.5,
                            lambda_grid=[0.0, 0.25], threshold_b=1.5)
        cfg = parse_config(path)
        text = canonical_form(cfg)
        reparsed = validate_config(json.loads(text))
        assert reparsed == cfg
        assert canonical_form(reparsed) == text
        assert config_digest(reparsed) == config_digest(cfg)


class TestEmitCsv:
    def test_header_only(self, tmp_path):
        path = str(tmp_path / "empty.csv")
        emit_csv(path, ["a", "b"], [])
        assert open(path).read() == "a,b\n"

    def test_byte_identical_rewrites(self, tmp_path):
        rows = [(1, 0.1, "x"), (2, 2.0 / 3.0, "y,z")]
        p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        emit_csv(p1, ["i", "v", "s"], rows)
        emit_csv(p2, ["i", "v", "s"], rows)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_float_formatting_is_lossless(self):
        for value in (0.1, 2.0 / 3.0, 1e-300, 123456.789):
            assert float(format_value(value)) == value

    def test_quoting(self):
        assert format_value('he said "hi"') == '"he said ""hi"""'
        assert format_value("a,b") == '"a,b"'
        assert format_value(True) == "true"

    def test_unwritable_path(self, tmp_path):
        target = tmp_path / "file.csv"
        target.write_text("x")
        with pytest.raises(IoFailure):
            emit_csv(str(target / "nested.csv"), ["a"], [])


def small_config(**overrides):
    base = dict(
        experiment="evolve",
        seed=11,
        n_states=10,
        n_prompts=4,
        n_responses=6,
        beta=1.0,
        steps=20,
        threshold_b=None,
        lambda_grid=(),
        output_path="out",
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestRunner:
    def test_evolve_row_count(self, tmp_path):
        manifest = runner.run(small_config(steps=17), out_dir=str(tmp_path),
                              workers=1)
        assert manifest.ok
        lines = open(tmp_path / "evolve.csv").read().splitlines()
        assert lines[0] == "t,kl,expected_potential"
        assert len(lines) == 1 + 18

    def test_manifest_checks_unique_and_written(self, tmp_path):
        manifest = runner.run(small_config(experiment="verify-db"),
                              out_dir=str(tmp_path), workers=1)
        names = [c.name for c in manifest.checks]
        assert len(names) == len(set(names))
        on_disk = json.loads(open(tmp_path / "manifest.json").read())
        assert on_disk["ok"] is True
        assert on_disk["config_digest"] == manifest.config_digest
        assert {c["name"] for c in on_disk["checks"]} == set(names)

    def test_all_runs_every_kind(self, tmp_path):
        manifest = runner.run(small_config(experiment="all", beta=0.1, steps=40),
                              out_dir=str(tmp_path), workers=1)
        assert manifest.ok
        prefixes = {c.name.split("/")[0] for c in manifest.checks}
        assert prefixes == {
            "verify-db", "evolve", "hitting", "spectral",
            "rlvr-identities", "rlvr-flow", "entropy-trace",
        }
        assert manifest.calibration["trace_association_max"] == -0.95

    def test_trace_non_applicable_still_passes(self, tmp_path):
        manifest = runner.run(small_config(experiment="entropy-trace", beta=4.0,
                                           steps=10),
                              out_dir=str(tmp_path), workers=1)
        assert manifest.ok
        fit_lines = open(tmp_path / "entropy_trace_fit.csv").read().splitlines()
        assert any("false" in line for line in fit_lines[1:])

    def test_worker_invariance(self, tmp_path):
        cfg = small_config(experiment="verify-db", n_states=8)
        runner.run(cfg, out_dir=str(tmp_path / "w1"), workers=1)
        runner.run(cfg, out_dir=str(tmp_path / "w2"), workers=2)
        for name in sorted(os.listdir(tmp_path / "w1")):
            a = open(tmp_path / "w1" / name, "rb").read()
            b = open(tmp_path / "w2" / name, "rb").read()
            assert a == b, name

    def test_lab_workers_env(self, monkeypatch):
        monkeypatch.setenv("LAB_WORKERS", "3")
        assert runner._worker_count() == 3
        monkeypatch.delenv("LAB_WORKERS")
        assert runner._worker_count() >= 1

    def test_seed_isolation(self):
        """Earlier scenario streams are untouched by how many exist."""
        from ebmlab import scenarios

        a = scenarios.random_scenario(99, 3, n_states=8)
        # draw a pile of later scenarios, then regenerate index 3
        for i in range(4, 40):
            scenarios.random_scenario(99, i, n_states=8)
        b = scenarios.random_scenario(99, 3, n_states=8)
        np.testing.assert_array_equal(a.h, b.h)
        np.testing.assert_array_equal(a.proposal_graph, b.proposal_graph)
        np.testing.assert_array_equal(a.p_data.probs, b.p_data.probs)


class TestCliExitCodes:
    def test_ok_run(self, tmp_path, capsys):
        cfg = write_config(tmp_path, experiment="evolve", n_states=8, steps=10,
                           output_path=str(tmp_path / "out"))
        assert cli.main(["evolve", "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert "[PASS] evolve/kl-monotone" in out

    def test_config_error_exit_two(self, tmp_path, capsys):
        cfg = write_config(tmp_path, beta=-2)
        assert cli.main(["evolve", "--config", cfg]) == 2
        assert "beta" in capsys.readouterr().err

    def test_subcommand_mismatch_exit_two(self, tmp_path):
        cfg = write_config(tmp_path, experiment="evolve")
        assert cli.main(["spectral", "--config", cfg]) == 2

    def test_missing_file_exit_two(self, tmp_path):
        assert cli.main(["evolve", "--config", str(tmp_path / "nope.json")]) == 2

    def test_seed_override_changes_output(self, tmp_path):
        cfg = write_config(tmp_path, experiment="evolve", n_states=8, steps=5,
                           output_path=str(tmp_path / "a"))
        assert cli.main(["evolve", "--config", cfg]) == 0
        assert cli.main(["evolve", "--config", cfg, "--out",
                         str(tmp_path / "b"), "--seed", "12345"]) == 0
        a = open(tmp_path / "a" / "evolve.csv").read()
        b = open(tmp_path / "b" / "evolve.csv").read()
        assert a != b

    def test_numerical_failure_exit_four(self, tmp_path, monkeypatch):
        from ebmlab import spectral

        monkeypatch.setattr(spectral, "JACOBI_MAX_SWEEPS", 0)
        cfg = write_config(tmp_path, experiment="spectral", n_states=8,
                           steps=10, output_path=str(tmp_path / "out"))
        assert cli.main(["spectral", "--config", cfg]) == 4

    def test_failed_check_exit_three(self, tmp_path, monkeypatch, capsys):
        # an impossible tolerance turns a healthy run into a failed check
        monkeypatch.setattr(runner, "STRUCTURAL", -1.0)
        cfg = write_config(tmp_path, experiment="evolve", n_states=8, steps=5,
                           output_path=str(tmp_path / "out"))
        assert cli.main(["evolve", "--config", cfg]) == 3
        assert "[FAIL]" in capsys.readouterr().out
