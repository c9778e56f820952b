"""
Integration tests for the mcs-kpi command line: subcommands and exit codes.
"""
import json
from unittest.mock import patch

import pytest

SCENARIO = {
    "seed": 11,
    "hours": 48,
    "stations": 2,
    "pointsPerStation": 2,
    "faultsPerConnector": 1,
    "gridOutages": 1,
    "commsOutages": 1,
    "offlineSessions": 3,
    "priceProfile": [0.4, 0.5],
    "surgeCount": 1,
    "surgeMultiplier": 3.0,
    "arrivalRatePerH": 0.5,
    "heartbeatsExpected": 100,
    "tlsAttempts": 20,
    "demandPoints": 3,
}
WINDOW = "2025-01-01T00:00:00Z/2025-01-03T00:00:00Z"


@pytest.fixture(autouse=True)
def quiet_environment(monkeypatch):
    """Keep tracing off and ignore any configured weight file."""
    monkeypatch.setenv("MCS_KPI_TRACE_EXPORTER", "none")
    monkeypatch.delenv("MCS_KPI_CONFIG", raising=False)


def simulate(tmp_path):
    from main import run

    spec = tmp_path / "scenario.json"
    spec.write_text(json.dumps(SCENARIO), encoding="utf-8")
    feeds = tmp_path / "feeds"
    assert run(["simulate", "--spec", str(spec), "--out", str(feeds)]) == 0
    return feeds


def feed_args(feeds):
    return [
        "--inventory", str(feeds / "inventory.json"),
        "--status", str(feeds / "status.jsonl"),
        "--queue", str(feeds / "queue.jsonl"),
        "--cyber", str(feeds / "cyber.json"),
        "--demand", str(feeds / "demand.json"),
    ]


class TestSuccessfulRuns:
    """Each subcommand on simulated feeds exits 0."""

    def test_simulate_writes_feeds_and_truth(self, tmp_path):
        """Test that simulate writes every feed plus ground truth."""
        feeds = simulate(tmp_path)
        for name in ("inventory.json", "status.jsonl", "queue.jsonl", "cyber.json", "demand.json",
                     "ground_truth.json"):
            assert (feeds / name).exists(), name
        truth = json.loads((feeds / "ground_truth.json").read_text(encoding="utf-8"))
        assert "K9" in truth["exact"]

    def test_compute_then_explain(self, tmp_path):
        """Test compute writes the report and explain audits it."""
        from main import run

        feeds = simulate(tmp_path)
        out = tmp_path / "out"
        assert run(["compute", *feed_args(feeds), "--window", WINDOW, "--out", str(out)]) == 0
        for name in ("report.json", "report.csv", "radar.csv"):
            assert (out / name).exists(), name
        assert run(["explain", "--report", str(out / "report.json")]) == 0

    def test_compute_with_config_and_level(self, tmp_path):
        """Test the example TOML config and a station breakdown."""
        from pathlib import Path

        from main import run

        feeds = simulate(tmp_path)
        config = Path(__file__).resolve().parents[2] / "config" / "weights.example.toml"
        out = tmp_path / "out"
        code = run(["compute", *feed_args(feeds), "--window", WINDOW, "--config", str(config),
                    "--level", "station", "--out", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert len(report["hierarchy"]) == 2

    def test_validate_without_window(self, tmp_path):
        """Test validate on the feeds with the open default window."""
        from main import run

        feeds = simulate(tmp_path)
        assert run(["validate", *feed_args(feeds)]) == 0

    def test_iri(self, tmp_path, capsys):
        """Test the readiness index for Tier A feeds."""
        from main import run

        assert run(["iri", "--feeds", "datex_static, datex_status"]) == 0
        result = json.loads(capsys.readouterr().out)
        assert 0.0 < result["iriPercent"] < 100.0


class TestFailureExitCodes:
    """Usage, schema, audit and data-sufficiency failures."""

    def test_unknown_flag_is_usage_error(self):
        """Test that an unknown flag exits 64."""
        from main import run

        with pytest.raises(SystemExit) as excinfo:
            run(["compute", "--no-such-flag"])
        assert excinfo.value.code == 64

    def test_missing_subcommand_is_usage_error(self):
        """Test that no subcommand exits 64."""
        from main import run

        with pytest.raises(SystemExit) as excinfo:
            run([])
        assert excinfo.value.code == 64

    def test_malformed_inventory(self, tmp_path):
        """Test that unparseable inventory JSON exits 2."""
        from main import run

        inventory = tmp_path / "inventory.json"
        inventory.write_text("{not json", encoding="utf-8")
        assert run(["compute", "--inventory", str(inventory), "--window", WINDOW, "--out", str(tmp_path)]) == 2

    def test_duplicate_identifier(self, tmp_path):
        """Test that a repeated station id exits 2."""
        from main import run

        feeds = simulate(tmp_path)
        document = json.loads((feeds / "inventory.json").read_text(encoding="utf-8"))
        document["stations"].append(document["stations"][0])
        (feeds / "inventory.json").write_text(json.dumps(document), encoding="utf-8")
        assert run(["validate", "--inventory", str(feeds / "inventory.json")]) == 2

    def test_missing_config_file(self, tmp_path):
        """Test that a missing config file exits 2."""
        from main import run

        feeds = simulate(tmp_path)
        code = run(["compute", *feed_args(feeds), "--window", WINDOW,
                    "--config", str(tmp_path / "absent.toml"), "--out", str(tmp_path / "out")])
        assert code == 2

    def test_zero_service_rate_config(self, tmp_path):
        """Test that a config with a zero service rate exits 2 instead of crashing in the queue model."""
        from main import run

        feeds = simulate(tmp_path)
        config = tmp_path / "weights.toml"
        config.write_text("[thresholds]\nserviceRatePerCharger = 0\nchargers = 4\n", encoding="utf-8")
        code = run(["compute", *feed_args(feeds), "--window", WINDOW, "--config", str(config),
                    "--out", str(tmp_path / "out")])
        assert code == 2

    @patch("main.compute_report")
    def test_computation_error_maps_to_exit_2(self, mock_compute, tmp_path):
        """Test that any engine error raised while computing exits 2."""
        from core.kpi_market_queue import BadRates
        from main import run

        mock_compute.side_effect = BadRates("service rate must be positive")
        feeds = simulate(tmp_path)
        code = run(["compute", *feed_args(feeds), "--window", WINDOW, "--out", str(tmp_path / "out")])
        assert code == 2

    def test_insufficient_data(self, tmp_path):
        """Test that weights only on status KPIs, without a status feed, exit 3."""
        from main import run

        feeds = simulate(tmp_path)
        config = tmp_path / "weights.json"
        config.write_text(json.dumps({"weights": {"K9": 0.5, "K10": 0.5}}), encoding="utf-8")
        code = run(["compute", "--inventory", str(feeds / "inventory.json"), "--window", WINDOW,
                    "--config", str(config), "--out", str(tmp_path / "out")])
        assert code == 3

    @patch("main.flush_traces")
    def test_traces_flushed_on_error(self, mock_flush, tmp_path):
        """Test that spans are flushed even when the command fails."""
        from main import run

        assert run(["validate", "--inventory", str(tmp_path / "absent.json")]) == 2
        mock_flush.assert_called_once()

    def test_tampered_report_fails_audit(self, tmp_path):
        """Test that explain exits 1 when the stored score was edited."""
        from main import run

        feeds = simulate(tmp_path)
        out = tmp_path / "out"
        assert run(["compute", *feed_args(feeds), "--window", WINDOW, "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        report["srs"]["srs"] = report["srs"]["srs"] + 0.1
        (out / "report.json").write_text(json.dumps(report), encoding="utf-8")
        assert run(["explain", "--report", str(out / "report.json")]) == 1
