"""End-to-end CLI tests on a small synthetic run, plus config parsing."""

import json

import pytest

from beamwatch import autoencoder as ae
from beamwatch import config as cfgmod
from beamwatch.cli import main
from beamwatch.errors import ConfigError

SMALL_CFG = """
# small run so the tests stay fast
synth_duration = 900
synth_n_faults = 3
synth_seed = 5
epochs = 3
hidden_dim = 8
merge_max_gap = 3
"""


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """One synth+train+detect+eval run shared by the read-only tests."""
    root = tmp_path_factory.mktemp("pipeline")
    cfg = root / "run.cfg"
    cfg.write_text(SMALL_CFG)
    for command in ("synth", "train", "detect", "eval"):
        assert main([command, "--config", str(cfg)]) == 0
    return root


class TestConfigParsing:
    def test_defaults(self):
        cfg = cfgmod.parse_run_config("")
        assert cfg.window_k == 30
        assert cfg.hidden_dim == 64
        assert cfg.dropout_rate == 0.2
        assert cfg.fault_margin == 10
        assert cfg.lead_window == 10
        assert cfg.threshold_multiplier == 3.0
        assert cfg.train_fraction == 0.5
        assert cfg.epochs == 50
        assert cfg.merge_max_gap is None

    def test_values_and_comments(self):
        cfg = cfgmod.parse_run_config(
            "# comment\nwindow_k = 12\nseries_files = a.csv, b.csv\nmerge_max_gap = 4\n")
        assert cfg.window_k == 12
        assert cfg.series_files == ("a.csv", "b.csv")
        assert cfg.merge_max_gap == 4

    def test_overrides_win(self):
        cfg = cfgmod.parse_run_config("window_k = 12\n", {"window_k": "15"})
        assert cfg.window_k == 15

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            cfgmod.parse_run_config("no_such_key = 1\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match="line 1"):
            cfgmod.parse_run_config("just some text\n")

    def test_bad_value(self):
        with pytest.raises(ConfigError):
            cfgmod.parse_run_config("window_k = thirty\n")

    def test_bad_scoring_mode(self):
        with pytest.raises(ConfigError):
            cfgmod.parse_run_config("scoring_mode = magic\n")

    def test_relative_paths_resolve_against_config(self, tmp_path):
        cfg_file = tmp_path / "deep" / "run.cfg"
        cfg_file.parent.mkdir()
        cfg_file.write_text("model_file = m.json\n")
        cfg = cfgmod.load_run_config(cfg_file)
        assert cfg.model_file == str(tmp_path / "deep" / "m.json")


class TestPipeline:
    def test_synth_outputs(self, pipeline_dir):
        for name in ("wiresum.csv", "xpos.csv", "ypos.csv", "current.csv", "faults.csv"):
            assert (pipeline_dir / name).exists(), name

    def test_train_artifacts(self, pipeline_dir):
        model = ae.load_model(pipeline_dir / "model.json")
        assert model.threshold is not None and model.threshold >= 0
        assert model.channel_stats is not None
        assert model.channel_stats.channels == ("wiresum", "xpos", "ypos")
        report = json.loads((pipeline_dir / "out" / "train_report.json").read_text())
        assert len(report["loss_history"]) == 3
        assert report["threshold"] == model.threshold
        assert report["threshold_to_max_error_ratio"] > 0

    def test_detect_outputs(self, pipeline_dir):
        out = pipeline_dir / "out"
        anomalies = (out / "anomalies.csv").read_text()
        assert anomalies.splitlines()[0] == "timestamp,error"
        # the run has injected faults in the test half, so some windows flag
        assert len(anomalies.splitlines()) > 1
        assert (out / "anomaly_events.csv").exists()

    def test_eval_report(self, pipeline_dir):
        doc = json.loads((pipeline_dir / "out" / "eval_report.json").read_text())
        for key in ("precision", "recall", "accuracy", "f1"):
            assert 0.0 <= doc[key] <= 1.0
        assert doc["total_faults"] >= 1
        assert doc["mode"] == "lead_plus_duration"
        text = (pipeline_dir / "out" / "eval_report.txt").read_text()
        assert "precision" in text

    def test_detect_ignores_fault_files(self, pipeline_dir, capsys):
        # test data stays untouched: detection must not read fault files
        code = main(["detect", "--config", str(pipeline_dir / "run.cfg"),
                     "--set", "fault_files=no_such_faults.csv"])
        assert code == 0

    def test_missing_series_file_fails_with_diagnostic(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("")
        code = main(["train", "--config", str(cfg)])
        captured = capsys.readouterr()
        assert code == 1
        assert "error:" in captured.err
        assert "wiresum.csv" in captured.err
        assert len(captured.err.strip().splitlines()) == 1

    def test_channel_count_mismatch_fails(self, pipeline_dir, capsys):
        code = main(["detect", "--config", str(pipeline_dir / "run.cfg"),
                     "--set", "series_files=wiresum.csv,xpos.csv"])
        assert code == 1
        assert "channels" in capsys.readouterr().err

    def test_high_threshold_empty_anomalies(self, pipeline_dir, tmp_path):
        import dataclasses
        model = ae.load_model(pipeline_dir / "model.json")
        lifted = dataclasses.replace(model, threshold=1e9)
        ae.save_model(lifted, tmp_path / "lifted.json")
        out = tmp_path / "quiet"
        code = main(["detect", "--config", str(pipeline_dir / "run.cfg"),
                     "--set", f"model_file={tmp_path / 'lifted.json'}",
                     "--set", f"output_dir={out}"])
        assert code == 0
        assert (out / "anomalies.csv").read_text() == "timestamp,error\n"

    def test_uncalibrated_model_rejected(self, pipeline_dir, tmp_path, capsys):
        model = ae.load_model(pipeline_dir / "model.json")
        import dataclasses
        bare = dataclasses.replace(model, threshold=None, channel_stats=None)
        ae.save_model(bare, tmp_path / "bare.json")
        code = main(["detect", "--config", str(pipeline_dir / "run.cfg"),
                     "--set", f"model_file={tmp_path / 'bare.json'}"])
        assert code == 1

    def test_no_partial_outputs_on_failure(self, pipeline_dir, tmp_path, capsys):
        # malformed anomalies.csv: eval must fail without writing any report
        out = tmp_path / "evalout"
        out.mkdir()
        (out / "anomalies.csv").write_text("timestamp,error\nbroken\n")
        code = main(["eval", "--config", str(pipeline_dir / "run.cfg"),
                     "--set", f"output_dir={out}"])
        assert code == 1
        assert not (out / "eval_report.json").exists()
        assert not (out / "eval_report.txt").exists()


class TestDeterminism:
    def test_byte_identical_artifacts_and_reports(self, tmp_path):
        digests = []
        for name in ("a", "b"):
            box = tmp_path / name
            box.mkdir()
            cfg = box / "run.cfg"
            cfg.write_text(SMALL_CFG)
            for command in ("synth", "train", "detect", "eval"):
                assert main([command, "--config", str(cfg)]) == 0
            digests.append({
                p.name: p.read_bytes()
                for p in [box / "model.json", box / "out" / "anomalies.csv",
                          box / "out" / "eval_report.json", box / "faults.csv"]
            })
        assert digests[0] == digests[1]


class TestEvalScenario:
    def test_hand_built_lead_window_match(self, tmp_path):
        # fault at 150 inside the test half [100, 199]; anomaly 5 s before
        box = tmp_path
        (box / "run.cfg").write_text("scoring_mode = lead_only\n")
        current = "timestamp,value\n" + "".join(
            f"{t},90.0\n" for t in range(200))
        (box / "current.csv").write_text(current)
        (box / "faults.csv").write_text("start\n150\n")
        out = box / "out"
        out.mkdir()
        (out / "anomalies.csv").write_text("timestamp,error\n145,2.5\n")
        assert main(["eval", "--config", str(box / "run.cfg")]) == 0
        doc = json.loads((out / "eval_report.json").read_text())
        assert doc["precision"] == 1.0
        assert doc["recall"] == 1.0
        assert doc["true_positives"] == 1
        assert doc["frame_span"] == [100, 199]

    def test_vacuous_eval(self, tmp_path):
        box = tmp_path
        (box / "run.cfg").write_text("")
        (box / "current.csv").write_text(
            "timestamp,value\n" + "".join(f"{t},90.0\n" for t in range(40)))
        (box / "faults.csv").write_text("start\n")
        out = box / "out"
        out.mkdir()
        (out / "anomalies.csv").write_text("timestamp,error\n")
        assert main(["eval", "--config", str(box / "run.cfg")]) == 0
        doc = json.loads((out / "eval_report.json").read_text())
        assert doc["precision"] == 1.0 and doc["recall"] == 1.0

    def test_anomalies_far_from_faults_zero_recall(self, tmp_path):
        box = tmp_path
        (box / "run.cfg").write_text("scoring_mode = lead_only\n")
        (box / "current.csv").write_text(
            "timestamp,value\n" + "".join(f"{t},90.0\n" for t in range(200)))
        (box / "faults.csv").write_text("start\n150\n")
        out = box / "out"
        out.mkdir()
        (out / "anomalies.csv").write_text("timestamp,error\n110,2.0\n")
        assert main(["eval", "--config", str(box / "run.cfg")]) == 0
        doc = json.loads((out / "eval_report.json").read_text())
        assert doc["recall"] == 0.0
        assert doc["false_positives"] == 1
