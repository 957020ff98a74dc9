import json
import signal
import subprocess
import sys

import pytest
from click.testing import CliRunner

from exammon.cli import main
from exammon.dataset import SynthSpec, save_dataset, synthesize
from exammon.session import ViolationPolicy, new_session, observe, Verdict
from exammon.landmarks import Label


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, args, **kw):
    result = runner.invoke(main, args, catch_exceptions=False, **kw)
    return result


class TestTrain:
    def test_synthetic_training_writes_model_and_history(self, runner, tmp_path):
        out = tmp_path / "model.json"
        hist = tmp_path / "history.csv"
        result = invoke(runner, [
            "train", "--synth-n", "200", "--synth-seed", "5", "--epochs", "20",
            "--out", str(out), "--history", str(hist),
        ])
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output.strip().splitlines()[-1])
        assert summary["samples"] == {"train": 160, "val": 40, "rejected": 0}
        assert summary["epochs"] == 20
        assert out.exists()
        assert len(hist.read_text().strip().splitlines()) == 21

    def test_identical_invocations_identical_outputs(self, runner, tmp_path):
        args = ["train", "--synth-n", "100", "--epochs", "5", "--out"]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        invoke(runner, args + [str(a)])
        invoke(runner, args + [str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_data_and_synth_are_exclusive(self, runner, tmp_path):
        ds_path = tmp_path / "ds.ndjson"
        save_dataset(synthesize(SynthSpec(n=10, seed=0)), ds_path)
        result = runner.invoke(main, [
            "train", "--data", str(ds_path), "--synth-n", "5", "--out", str(tmp_path / "m.json"),
        ])
        assert result.exit_code == 2

    def test_dataset_file_training(self, runner, tmp_path):
        ds_path = tmp_path / "ds.ndjson"
        save_dataset(synthesize(SynthSpec(n=100, seed=2)), ds_path)
        result = invoke(runner, [
            "train", "--data", str(ds_path), "--epochs", "5", "--out", str(tmp_path / "m.json"),
        ])
        assert result.exit_code == 0, result.output


class TestEval:
    def test_all_correct_prints_accuracy_1000(self, runner, tmp_path, model_path):
        result = invoke(runner, [
            "eval", "--model", str(model_path), "--synth-n", "100", "--synth-seed", "123",
        ])
        assert result.exit_code == 0, result.output
        assert "accuracy   1.000" in result.output
        metrics = json.loads(result.output.strip().splitlines()[-1])
        assert metrics["accuracy"] == 1.0

    def test_json_out(self, runner, tmp_path, model_path):
        out = tmp_path / "metrics.json"
        invoke(runner, [
            "eval", "--model", str(model_path), "--synth-n", "50", "--json-out", str(out),
        ])
        assert set(json.loads(out.read_text())) >= {"accuracy", "precision", "recall", "tp"}


class TestFeaturize:
    def test_frames_to_features(self, runner, tmp_path):
        ds_path = tmp_path / "ds.ndjson"
        save_dataset(synthesize(SynthSpec(n=8, seed=1)), ds_path)
        out = tmp_path / "features.ndjson"
        result = invoke(runner, ["featurize", "--data", str(ds_path), "--mode", "dist171", "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 8
        assert all(len(l["values"]) == 171 for l in lines)
        assert all(l["label"] in ("normal", "abnormal") for l in lines)

    def test_raw478_mode(self, runner, tmp_path):
        ds_path = tmp_path / "ds.ndjson"
        save_dataset(synthesize(SynthSpec(n=3, seed=1)), ds_path)
        out = tmp_path / "features.ndjson"
        invoke(runner, ["featurize", "--data", str(ds_path), "--mode", "raw478", "--out", str(out)])
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert all(len(l["values"]) == 956 for l in lines)


class TestReplayCommand:
    def test_golden_lock_log(self, runner, tmp_path):
        policy = ViolationPolicy()
        session = new_session("alice", policy)
        ts = 0
        all_events = []
        for _ in range(4):
            for i in range(15):
                session, events = observe(
                    session, Verdict(label=Label.ABNORMAL, p_abnormal=0.9, frame_id=f"f{i}"), ts)
                all_events.extend(events)
                ts += 40
            ts += 6000
        log_path = tmp_path / "events.ndjson"
        with open(log_path, "w") as fh:
            for n, ev in enumerate(all_events, start=1):
                fh.write(json.dumps({"room_seq": n, "student_id": "alice", "event": ev.as_dict()}) + "\n")

        result = invoke(runner, ["replay", "--log", str(log_path)])
        assert result.exit_code == 0, result.output
        assert "Locked" in result.output and "count 4" in result.output
        roster = json.loads(result.output.strip().splitlines()[-1])
        assert roster["students"][0]["violation_count"] == 4

    def test_corrupt_log_fails(self, runner, tmp_path):
        log_path = tmp_path / "events.ndjson"
        log_path.write_text('{"room_seq": 5, "student_id": "x", "event": {"seq": 1, "ts_ms": 0, "kind": "ended", "payload": {}}}\n')
        result = runner.invoke(main, ["replay", "--log", str(log_path)])
        assert result.exit_code == 1
        assert "room_seq" in result.output


class TestConfigFile:
    def test_config_supplies_defaults(self, runner, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"train": {"synth_n": 120, "epochs": 4}}))
        out = tmp_path / "m.json"
        result = invoke(runner, ["--config", str(cfg), "train", "--out", str(out)])
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output.strip().splitlines()[-1])
        assert summary["epochs"] == 4
        assert summary["samples"]["train"] == 96

    def test_env_overrides_config(self, runner, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"train": {"synth_n": 120, "epochs": 4}}))
        out = tmp_path / "m.json"
        result = invoke(
            runner, ["--config", str(cfg), "train", "--out", str(out)],
            env={"EXAMMON_TRAIN_EPOCHS": "2"},
        )
        assert result.exit_code == 0, result.output
        assert json.loads(result.output.strip().splitlines()[-1])["epochs"] == 2


class TestServeSimulate:
    def test_serve_then_simulate_subprocess(self, tmp_path, model_path):
        tokens = tmp_path / "tokens.json"
        tokens.write_text(json.dumps({"student": "s-tok", "proctor": "p-tok"}))
        proc = subprocess.Popen(
            [sys.executable, "-u", "-m", "exammon", "serve",
             "--listen", "127.0.0.1:0", "--http", "127.0.0.1:0",
             "--model", str(model_path), "--tokens", str(tokens),
             "--data-dir", str(tmp_path / "data")],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
        )
        try:
            line = proc.stdout.readline()
            info = json.loads(line)
            tcp = info["tcp"].rsplit(":", 1)[1]
            report_path = tmp_path / "report.json"
            result = subprocess.run(
                [sys.executable, "-m", "exammon", "simulate",
                 "--server", f"127.0.0.1:{tcp}", "--token", "s-tok",
                 "--clients", "2", "--fps", "10", "--duration", "1",
                 "--report", str(report_path)],
                capture_output=True, text=True, timeout=30,
            )
            assert result.returncode == 0, result.stderr
            report = json.loads(report_path.read_text())
            assert report["clients"] == 2
            assert report["acknowledged"] >= 16
            assert not report["incomplete"]
        finally:
            proc.send_signal(signal.SIGTERM)
            proc.wait(timeout=10)
