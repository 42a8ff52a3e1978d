"""
Integration tests for the command-line surface: every subcommand through main(argv).
"""
import json

import pytest
import yaml

from app import main
from core.clients.trace_file_client import TraceFileClient
from core.services.trace_service import synth_workload
from core.utils.config import SynthSpec

pytestmark = pytest.mark.integration


@pytest.fixture
def config_file(tmp_path, small_run_config):
    path = tmp_path / "run.yaml"
    data = small_run_config.model_dump(mode="json")
    data.pop("out_dir")
    path.write_text(yaml.safe_dump(data))
    return path


@pytest.fixture
def trace_file(tmp_path, config_file):
    path = tmp_path / "trace.csv"
    assert main(["--config", str(config_file), "--seed", "1", "gen", "--output", str(path)]) == 0
    return path


def _run(config_file, trace_file, out, *args):
    return main(["--config", str(config_file), "--trace", str(trace_file), "--out", str(out), *args])


class TestGen:

    def test_zero_tasks_writes_header_only(self, tmp_path):
        target = tmp_path / "empty.csv"
        assert main(["gen", "--tasks", "0", "--output", str(target)]) == 0
        assert target.read_text() == "timestamp,vm_id,cpu,mem\n"

    def test_generated_trace_matches_generator(self, tmp_path):
        out = tmp_path / "out"
        assert main(["--seed", "9", "--out", str(out), "gen", "--tasks", "3"]) == 0
        parsed = TraceFileClient().load(out / "trace.csv")
        expected = synth_workload(SynthSpec(tasks=3), seed=9)
        assert [s.vm_id for s in parsed] == [s.vm_id for s in expected]
        assert all((a.demands == b.demands).all() for a, b in zip(parsed, expected))

    def test_dry_run_writes_nothing(self, tmp_path):
        out = tmp_path / "out"
        assert main(["--out", str(out), "--dry-run", "gen"]) == 0
        assert not out.exists()


class TestUsageErrors:

    def test_missing_trace_names_the_path(self, tmp_path, capsys):
        missing = tmp_path / "absent.csv"
        assert main(["--trace", str(missing), "train"]) == 1
        assert str(missing) in capsys.readouterr().err

    def test_invalid_config_names_the_field(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("tade:\n  population: 2\n")
        assert main(["--config", str(path), "gen"]) == 1
        assert "tade.population" in capsys.readouterr().err

    def test_unknown_command(self):
        assert main(["launch"]) == 1

    def test_bad_choice(self, trace_file):
        assert main(["--trace", str(trace_file), "train", "--trainer", "adam"]) == 1

    def test_help(self, capsys):
        assert main(["--help"]) == 0
        assert "simulate" in capsys.readouterr().out

    def test_unknown_vm(self, config_file, trace_file, tmp_path, capsys):
        assert _run(config_file, trace_file, tmp_path / "out", "train", "--vm-id", "vm-none") == 1
        assert "vm-none" in capsys.readouterr().err


class TestTrainAndPredict:

    def test_same_seed_gives_identical_artifacts(self, config_file, trace_file, tmp_path):
        for name in ("a", "b"):
            assert _run(config_file, trace_file, tmp_path / name, "--seed", "4", "train",
                        "--vm-id", "vm-0000", "--gmax", "6") == 0
        first = (tmp_path / "a" / "predictors" / "vm-0000.json").read_bytes()
        second = (tmp_path / "b" / "predictors" / "vm-0000.json").read_bytes()
        assert first == second

    def test_convergence_log_is_bounded_by_gmax(self, config_file, trace_file, tmp_path):
        out = tmp_path / "out"
        assert _run(config_file, trace_file, out, "train", "--vm-id", "vm-0001", "--gmax", "6") == 0
        lines = (out / "convergence" / "vm-0001.csv").read_text().strip().splitlines()
        assert 1 <= len(lines) - 1 <= 6
        summary = json.loads((out / "train_summary.json").read_text())
        assert summary["tasks"][0]["vm_id"] == "vm-0001"

    @pytest.mark.parametrize("trainer", ["sade", "backprop"])
    def test_comparator_trainers(self, config_file, trace_file, tmp_path, trainer):
        out = tmp_path / "out"
        assert _run(config_file, trace_file, out, "train", "--trainer", trainer, "--vm-id", "vm-0000") == 0
        document = json.loads((out / "predictors" / "vm-0000.json").read_text())
        assert document["trainer"] == trainer

    def test_predict_uses_saved_predictors(self, config_file, trace_file, tmp_path):
        out = tmp_path / "out"
        assert _run(config_file, trace_file, out, "train", "--vm-id", "vm-0002", "--gmax", "3") == 0
        assert _run(config_file, trace_file, out, "predict", "--vm-id", "vm-0002") == 0
        rows = (out / "forecasts.csv").read_text().strip().splitlines()
        assert rows[0].startswith("vm_id,resource,predicted,padding,padded_demand")
        assert len(rows) == 3

    def test_predict_without_artifacts(self, config_file, trace_file, tmp_path):
        assert _run(config_file, trace_file, tmp_path / "out", "predict") == 1


class TestAutoscaleAndPlace:

    def test_autoscale_conserves_tasks(self, config_file, trace_file, tmp_path):
        out = tmp_path / "out"
        assert _run(config_file, trace_file, out, "autoscale", "--interval", "10") == 0
        payload = json.loads((out / "autoscale.json").read_text())
        assert sum(payload["counts"].values()) + payload["idle_tasks"] == payload["tasks"] == 6
        assert payload["interval"] == 10

    def test_interval_out_of_range(self, config_file, trace_file, tmp_path):
        assert _run(config_file, trace_file, tmp_path / "out", "autoscale", "--interval", "9999") == 1

    @pytest.mark.parametrize("engine", ["GA", "BestFit", "RandomFit"])
    def test_place(self, config_file, trace_file, tmp_path, engine):
        out = tmp_path / "out"
        assert _run(config_file, trace_file, out, "place", "--engine", engine) == 0
        payload = json.loads((out / "placement.json").read_text())
        assert payload["engine"] == engine
        assert payload["pw"] > 0
        assert len((out / "placement.csv").read_text().strip().splitlines()) == payload["vms"] + 1


class TestSimulate:

    def test_single_scenario_writes_one_metrics_file(self, config_file, trace_file, tmp_path):
        out = tmp_path / "out"
        assert _run(config_file, trace_file, out, "simulate", "--scenario", "WPWA") == 0
        assert sorted(p.name for p in out.glob("metrics_*.csv")) == ["metrics_WPWA.csv"]
        summary = json.loads((out / "summary.json").read_text())
        assert [row["scenario"] for row in summary["scenarios"]] == ["WPWA"]

    def test_all_scenarios_in_order(self, config_file, trace_file, tmp_path):
        out = tmp_path / "out"
        assert _run(config_file, trace_file, out, "simulate", "--engine", "BestFit") == 0
        summary = json.loads((out / "summary.json").read_text())
        assert [row["scenario"] for row in summary["scenarios"]] == ["OA", "PA", "PWA", "WPWA"]
        assert 0.0 <= summary["ordering"]["pw_increasing"] <= 1.0
        for row in summary["scenarios"]:
            assert row["intervals"] == 4

    def test_same_seed_same_summary(self, config_file, trace_file, tmp_path):
        for name in ("a", "b"):
            assert _run(config_file, trace_file, tmp_path / name, "simulate",
                        "--scenario", "OA", "--scenario", "WPWA") == 0
        assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()

    def test_dry_run_writes_nothing(self, config_file, trace_file, tmp_path):
        out = tmp_path / "out"
        assert _run(config_file, trace_file, out, "--dry-run", "simulate") == 0
        assert not out.exists()


def test_report(config_file, trace_file, tmp_path):
    out = tmp_path / "out"
    assert _run(config_file, trace_file, out, "report", "--pws-set", "10") == 0
    header = (out / "prediction_errors.csv").read_text().splitlines()[0]
    assert header.split(",")[:4] == ["pws_minutes", "vm_id", "model", "trainer"]
    assert "seconds" not in header
    assert "seconds" in (out / "prediction_cost.csv").read_text().splitlines()[0]
