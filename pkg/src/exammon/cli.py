"""Command-line entry point: train, eval, featurize, serve, simulate, replay.

Flag defaults can come from a JSON config file (--config, keyed by
subcommand); environment variables with the EXAMMON_ prefix override the
config file, explicit flags override everything.
"""

from __future__ import annotations

import asyncio
import json
import signal
from pathlib import Path

import click

from . import classifier as clf
from . import dataset as ds
from . import load as loadmod
from .errors import ExamMonError
from .landmarks import FeatureMode, featurize
from .server import MonitorServer, ServerConfig, roster_from_log
from .session import ViolationPolicy

MODES = [m.value for m in FeatureMode]


def fail(exc: Exception) -> "click.ClickException":
    return click.ClickException(str(exc))


def parse_hostport(value: str, what: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise click.BadParameter(f"{what} must look like host:port, got {value!r}")
    return host, int(port)


@click.group(context_settings={"auto_envvar_prefix": "EXAMMON", "show_default": True})
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON config file with per-subcommand flag defaults.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Exam-monitoring toolkit: feature extraction, training, serving, load testing."""
    if config_path:
        try:
            ctx.default_map = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise click.ClickException(f"cannot read config {config_path}: {exc}")


def dataset_options(f):
    f = click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
                     default=None, help="Labeled dataset file (newline-delimited frame records).")(f)
    f = click.option("--synth-config", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="JSON generator spec (keys: n, abnormal_ratio, theta_deg, jitter, seed).")(f)
    f = click.option("--synth-n", type=int, default=None, help="Synthetic sample count.")(f)
    f = click.option("--synth-ratio", type=float, default=None, help="Synthetic abnormal ratio.")(f)
    f = click.option("--synth-theta", type=float, default=None, help="Synthetic pose threshold (degrees).")(f)
    f = click.option("--synth-jitter", type=float, default=None, help="Synthetic landmark jitter.")(f)
    f = click.option("--synth-seed", type=int, default=None, help="Synthetic generator seed.")(f)
    return f


def resolve_dataset(data_path, synth_config, synth_n, synth_ratio, synth_theta,
                    synth_jitter, synth_seed) -> tuple[ds.Dataset, int]:
    synth_flags = {
        "n": synth_n, "abnormal_ratio": synth_ratio, "theta_deg": synth_theta,
        "jitter": synth_jitter, "seed": synth_seed,
    }
    overrides = {k: v for k, v in synth_flags.items() if v is not None}
    if data_path is not None:
        if overrides or synth_config:
            raise click.UsageError("--data and --synth-* are mutually exclusive")
        return ds.load_dataset(data_path)
    config = {}
    if synth_config is not None:
        config = json.loads(Path(synth_config).read_text(encoding="utf-8"))
    config.update(overrides)
    if not config:
        raise click.UsageError("provide --data or a synthetic generator spec (--synth-n / --synth-config)")
    return ds.synthesize(ds.synth_spec_from_config(config)), 0


@main.command()
@dataset_options
@click.option("--mode", type=click.Choice(MODES), default="dist171", help="Feature selection mode.")
@click.option("--hidden-dims", default="128,64", help="Comma-separated hidden layer widths.")
@click.option("--epochs", type=int, default=100)
@click.option("--learning-rate", type=float, default=0.01)
@click.option("--momentum", type=float, default=0.9)
@click.option("--batch-size", type=int, default=32)
@click.option("--threshold", type=float, default=0.5)
@click.option("--seed", type=int, default=0, help="Weight initialization seed.")
@click.option("--shuffle-seed", type=int, default=0, help="Epoch shuffle seed.")
@click.option("--split-ratio", type=float, default=0.8)
@click.option("--split-seed", type=int, default=0)
@click.option("--out", "model_out", type=click.Path(dir_okay=False), required=True, help="Model file to write.")
@click.option("--history", "history_out", type=click.Path(dir_okay=False), default=None,
              help="Per-epoch training history CSV.")
def train(data_path, synth_config, synth_n, synth_ratio, synth_theta, synth_jitter, synth_seed,
          mode, hidden_dims, epochs, learning_rate, momentum, batch_size, threshold,
          seed, shuffle_seed, split_ratio, split_seed, model_out, history_out):
    """Train a classifier on a dataset (file or synthetic) and save the model."""
    try:
        dataset, rejected = resolve_dataset(data_path, synth_config, synth_n, synth_ratio,
                                            synth_theta, synth_jitter, synth_seed)
        feature_mode = FeatureMode(mode)
        train_set, val_set = ds.split(dataset, split_ratio, seed=split_seed)
        x_train, y_train = ds.featurize_dataset(train_set, feature_mode)
        x_val, y_val = ds.featurize_dataset(val_set, feature_mode)
        dims = (feature_mode.dims, *(int(d) for d in hidden_dims.split(",") if d), 2)
        cfg = clf.TrainConfig(epochs=epochs, learning_rate=learning_rate, momentum=momentum,
                              batch_size=batch_size, shuffle_seed=shuffle_seed, threshold=threshold)
        model = clf.init_model(dims, seed=seed, feature_mode=feature_mode)
        trained, history = clf.train(model, x_train, y_train, x_val, y_val, cfg)
        clf.save_model(trained, model_out)
        if history_out:
            clf.write_history_csv(history, history_out)
    except (ExamMonError, ValueError) as exc:
        raise fail(exc)
    last = history[-1]
    click.echo(json.dumps({
        "model": str(model_out),
        "samples": {"train": len(train_set), "val": len(val_set), "rejected": rejected},
        "epochs": len(history),
        "final_loss": last.loss,
        "val_accuracy": last.val_accuracy,
        "val_precision": last.val_precision,
        "val_recall": last.val_recall,
    }))


@main.command("eval")
@dataset_options
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--threshold", type=float, default=0.5)
@click.option("--json-out", type=click.Path(dir_okay=False), default=None, help="Also write metrics JSON here.")
def eval_cmd(data_path, synth_config, synth_n, synth_ratio, synth_theta, synth_jitter, synth_seed,
             model_path, threshold, json_out):
    """Evaluate a saved model on a labeled dataset."""
    try:
        dataset, rejected = resolve_dataset(data_path, synth_config, synth_n, synth_ratio,
                                            synth_theta, synth_jitter, synth_seed)
        model = clf.load_model(model_path)
        x, y = ds.featurize_dataset(dataset, model.feature_mode, model.selection)
        metrics = clf.evaluate(model, x, y, threshold=threshold)
    except (ExamMonError, ValueError) as exc:
        raise fail(exc)
    click.echo(f"samples    {metrics.total} (rejected {rejected})")
    click.echo(f"accuracy   {metrics.accuracy:.3f}")
    click.echo(f"precision  {metrics.precision:.3f}")
    click.echo(f"recall     {metrics.recall:.3f}")
    click.echo(f"confusion  tp={metrics.tp} fp={metrics.fp} fn={metrics.fn} tn={metrics.tn}")
    payload = json.dumps(metrics.as_dict())
    click.echo(payload)
    if json_out:
        Path(json_out).write_text(payload + "\n", encoding="utf-8")


@main.command("featurize")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Frame records (labels optional).")
@click.option("--mode", type=click.Choice(MODES), default="dist171")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Features file to write (one JSON object per line).")
def featurize_cmd(data_path, mode, out_path):
    """Convert a frames file into a features file."""
    try:
        feature_mode = FeatureMode(mode)
        pairs, rejected = ds.load_frames(data_path)
        with open(out_path, "w", encoding="utf-8") as fh:
            for frame, label in pairs:
                fv = featurize(frame, feature_mode)
                rec = {"id": frame.frame_id, "mode": feature_mode.value, "values": fv.values.tolist()}
                if label is not None:
                    rec["label"] = label.value
                fh.write(json.dumps(rec) + "\n")
    except (ExamMonError, OSError, ValueError) as exc:
        raise fail(exc)
    click.echo(json.dumps({"written": len(pairs), "rejected": rejected, "out": str(out_path)}))


def policy_options(f):
    f = click.option("--window-frames", type=int, default=15,
                     help="Consecutive abnormal frames per violation.")(f)
    f = click.option("--cooldown-ms", type=int, default=5000,
                     help="Minimum gap between counted violations.")(f)
    f = click.option("--lock-threshold", type=int, default=3,
                     help="Lock once violations exceed this count.")(f)
    f = click.option("--keep-count-on-unlock", is_flag=True, default=False,
                     help="Do not reset the violation count when a proctor unlocks.")(f)
    return f


def build_policy(window_frames, cooldown_ms, lock_threshold, keep_count_on_unlock) -> ViolationPolicy:
    return ViolationPolicy(
        window_frames=window_frames,
        cooldown_ms=cooldown_ms,
        lock_threshold=lock_threshold,
        reset_on_unlock=not keep_count_on_unlock,
    )


@main.command()
@click.option("--listen", default="127.0.0.1:7460", help="TCP message channel address.")
@click.option("--http", "http_addr", default="127.0.0.1:7461", help="HTTP/WebSocket address.")
@click.option("--data-dir", type=click.Path(file_okay=False), default="./exammon-data",
              help="Event logs and image blobs live here.")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--room", "room_id", default="default", help="Room to create at startup.")
@click.option("--tokens", "tokens_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help='JSON token file: {"student": ..., "proctor": ...}.')
@click.option("--student-token", default=None, help="Overrides the token file.")
@click.option("--proctor-token", default=None, help="Overrides the token file.")
@policy_options
@click.option("--threshold", type=float, default=0.5, help="Abnormal probability threshold.")
@click.option("--fsync", is_flag=True, default=False, help="fsync the event log on every append.")
def serve(listen, http_addr, data_dir, model_path, room_id, tokens_path, student_token,
          proctor_token, window_frames, cooldown_ms, lock_threshold, keep_count_on_unlock,
          threshold, fsync):
    """Run the monitoring server with one room."""
    tokens = {}
    if tokens_path:
        try:
            tokens = json.loads(Path(tokens_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise fail(exc)
    if student_token:
        tokens["student"] = student_token
    if proctor_token:
        tokens["proctor"] = proctor_token
    if not tokens.get("student") or not tokens.get("proctor"):
        raise click.UsageError("provide student and proctor tokens (--tokens file or --*-token flags)")

    tcp_host, tcp_port = parse_hostport(listen, "--listen")
    http_host, http_port = parse_hostport(http_addr, "--http")
    config = ServerConfig(
        tcp_host=tcp_host, tcp_port=tcp_port,
        http_host=http_host, http_port=http_port,
        data_dir=Path(data_dir), fsync=fsync,
    )
    policy = build_policy(window_frames, cooldown_ms, lock_threshold, keep_count_on_unlock)

    async def run() -> None:
        server = MonitorServer(config)
        try:
            server.create_room(room_id, model_path, policy, tokens, threshold=threshold)
        except ExamMonError as exc:
            raise fail(exc)
        await server.start()
        click.echo(json.dumps({
            "room_id": room_id,
            "tcp": f"{config.tcp_host}:{server.tcp_port}",
            "http": f"http://{config.http_host}:{server.http_port}",
        }), err=False)
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            loop.add_signal_handler(sig, stop.set)
        await stop.wait()
        await server.stop()

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        pass


@main.command()
@click.option("--server", "server_addr", default="127.0.0.1:7460", help="Monitor server TCP address.")
@click.option("--room", "room_id", default="default")
@click.option("--token", required=True, help="Student token for the room.")
@click.option("--clients", type=int, default=20)
@click.option("--fps", type=float, default=27.0)
@click.option("--duration", type=float, default=30.0, help="Seconds of paced streaming per client.")
@click.option("--seed", type=int, default=0)
@click.option("--schedule", "schedule_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON behavior schedule: [[label, frames], ...].")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None,
              help="Write the JSON report here instead of stdout.")
@click.option("--latency-csv", type=click.Path(dir_okay=False), default=None,
              help="Optional 1 ms-bucket latency histogram CSV.")
def simulate(server_addr, room_id, token, clients, fps, duration, seed, schedule_path,
             report_path, latency_csv):
    """Stream synthetic exam clients against a live server and report."""
    host, port = parse_hostport(server_addr, "--server")
    try:
        schedule = loadmod.load_schedule_file(schedule_path) if schedule_path else None
        cfg = loadmod.LoadConfig(
            host=host, port=port, room_id=room_id, token=token,
            clients=clients, fps=fps, duration_s=duration, seed=seed, schedule=schedule,
        )
        report = loadmod.run_load(cfg)
        if latency_csv:
            loadmod.write_latency_histogram_csv(report, latency_csv)
    except (ExamMonError, ValueError, OSError) as exc:
        raise fail(exc)
    payload = json.dumps(report.as_dict(), indent=2)
    if report_path:
        Path(report_path).write_text(payload + "\n", encoding="utf-8")
        click.echo(json.dumps({"report": report_path}))
    else:
        click.echo(payload)


@main.command()
@click.option("--log", "log_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Room event log (newline-delimited JSON).")
@policy_options
def replay(log_path, window_frames, cooldown_ms, lock_threshold, keep_count_on_unlock):
    """Rebuild the final roster from an event log."""
    policy = build_policy(window_frames, cooldown_ms, lock_threshold, keep_count_on_unlock)
    try:
        roster = roster_from_log(log_path, policy)
    except ExamMonError as exc:
        raise fail(exc)
    for row in roster["students"]:
        click.echo(f"{row['student_id']:<24} {row['state'].capitalize():<12} count {row['violation_count']}")
    click.echo(json.dumps(roster))


if __name__ == "__main__":
    main()
