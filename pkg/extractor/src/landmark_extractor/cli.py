"""CLI for the landmark extractor sidecar."""

from __future__ import annotations

import json

import click

from .engine import EngineUnavailable, make_engine
from .extract import EmptyInput, ExtractionConfig, extract_batch
from .stream import CameraUnavailable, ConnectFailure, StreamConfig, camera_frames, stream_frames

ENGINES = ["auto", "mediapipe", "synthetic"]


@click.group()
def main() -> None:
    """Turn images or a webcam feed into landmark frame records."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="Image file or directory of images.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Records file to write (newline-delimited JSON).")
@click.option("--crop", is_flag=True, default=False, help="Center-crop inputs to 640x480 first.")
@click.option("--label", default=None, type=click.Choice(["normal", "abnormal"]),
              help="Label to stamp on every record (dataset creation).")
@click.option("--engine", "engine_name", default="auto", type=click.Choice(ENGINES))
def extract(input_path, out_path, crop, label, engine_name):
    """Extract landmarks from still images into a records file."""
    try:
        engine = make_engine(engine_name)
        cfg = ExtractionConfig(center_crop=crop, label=label)
        summary = extract_batch(input_path, out_path, cfg, engine)
    except (EngineUnavailable, EmptyInput) as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(summary))
    if summary["errors"]:
        raise SystemExit(1)


@main.command()
@click.option("--camera", "camera_index", type=int, default=0, help="Camera device index.")
@click.option("--server", required=True, help="Monitor server TCP address host:port.")
@click.option("--room", "room_id", default="default")
@click.option("--token", required=True, help="Student token.")
@click.option("--id", "student_id", required=True, help="Student id to join as.")
@click.option("--fps-cap", type=float, default=27.0)
@click.option("--crop", is_flag=True, default=False, help="Center-crop frames to 640x480.")
@click.option("--engine", "engine_name", default="auto", type=click.Choice(ENGINES))
@click.option("--max-frames", type=int, default=None, help="Stop after this many frames.")
def stream(camera_index, server, room_id, token, student_id, fps_cap, crop, engine_name, max_frames):
    """Stream webcam landmarks to an exam room as a student client."""
    host, _, port = server.rpartition(":")
    if not host or not port.isdigit():
        raise click.BadParameter("--server must look like host:port")
    try:
        engine = make_engine(engine_name)
        cfg = StreamConfig(
            host=host, port=int(port), room_id=room_id, token=token, student_id=student_id,
            extraction=ExtractionConfig(center_crop=crop, fps_cap=fps_cap),
        )
        stats = stream_frames(camera_frames(camera_index), cfg, engine, max_frames=max_frames)
    except (EngineUnavailable, CameraUnavailable, ConnectFailure) as exc:
        raise click.ClickException(str(exc))
    for notice in stats.notices:
        click.echo(notice, err=True)
    click.echo(json.dumps({
        "sent": stats.sent, "verdicts": stats.verdicts, "warnings": stats.warnings,
        "locks": stats.locks, "no_face": stats.no_face, "reconnects": stats.reconnects,
    }))


if __name__ == "__main__":
    main()
