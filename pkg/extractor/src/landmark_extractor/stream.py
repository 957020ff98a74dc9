"""Live streaming to a monitor-service room over the student wire protocol.

One newline-delimited JSON message per line on a plain TCP socket:
hello {role, token, room_id, id}, then frame {seq, ts_ms, width, height,
landmarks, image_b64?}. Verdict replies are drained between sends; after a
warning verdict the next frame carries a JPEG capture (best-effort). Frames
are paced at the fps cap; when no face is found the all-zero sentinel is
sent so the server sees the absence.
"""

from __future__ import annotations

import base64
import json
import math
import select
import socket
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import cv2
import numpy as np

from .extract import ExtractionConfig, center_crop, sentinel_points


class ConnectFailure(RuntimeError):
    pass


class CameraUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class StreamConfig:
    host: str
    port: int
    room_id: str
    token: str
    student_id: str
    extraction: ExtractionConfig = ExtractionConfig()
    attach_capture_on_warning: bool = True
    max_reconnect_s: float = 5.0
    hello_timeout_s: float = 10.0


@dataclass
class StreamStats:
    sent: int = 0
    verdicts: int = 0
    warnings: int = 0
    locks: int = 0
    no_face: int = 0
    reconnects: int = 0
    notices: list[str] = field(default_factory=list)


class _LineSocket:
    """Blocking-connect, non-blocking-drain NDJSON socket."""

    def __init__(self, host: str, port: int):
        try:
            self.sock = socket.create_connection((host, port), timeout=10.0)
        except OSError as exc:
            raise ConnectFailure(f"cannot reach {host}:{port}: {exc}") from exc
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._buf = b""

    def send(self, msg: dict) -> None:
        self.sock.sendall(json.dumps(msg, separators=(",", ":")).encode() + b"\n")

    def recv_line_blocking(self, timeout: float) -> dict | None:
        self.sock.settimeout(timeout)
        try:
            while b"\n" not in self._buf:
                chunk = self.sock.recv(65536)
                if not chunk:
                    return None
                self._buf += chunk
        except socket.timeout:
            return None
        finally:
            self.sock.settimeout(None)
        line, self._buf = self._buf.split(b"\n", 1)
        return json.loads(line)

    def drain(self) -> Iterator[dict]:
        """Yield whatever complete messages have already arrived."""
        while True:
            readable, _, _ = select.select([self.sock], [], [], 0)
            if readable:
                chunk = self.sock.recv(65536)
                if not chunk:
                    raise ConnectionResetError("server closed the connection")
                self._buf += chunk
            while b"\n" in self._buf:
                line, self._buf = self._buf.split(b"\n", 1)
                yield json.loads(line)
            if not readable:
                return

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def _connect(cfg: StreamConfig) -> _LineSocket:
    conn = _LineSocket(cfg.host, cfg.port)
    conn.send({
        "type": "hello", "role": "student", "token": cfg.token,
        "room_id": cfg.room_id, "id": cfg.student_id,
    })
    first = conn.recv_line_blocking(cfg.hello_timeout_s)
    if first is None or first.get("type") != "welcome":
        conn.close()
        raise ConnectFailure(f"join rejected: {first}")
    return conn


def stream_frames(frames: Iterable[np.ndarray], cfg: StreamConfig, engine,
                  max_frames: int | None = None) -> StreamStats:
    """Pace frames from any BGR-image source into the room.

    Reconnects with capped exponential backoff on connection loss; the seq
    counter restarts per connection, as the protocol requires.
    """
    stats = StreamStats()
    conn = _connect(cfg)
    seq = 0
    interval = 1.0 / cfg.extraction.fps_cap
    next_at = time.monotonic()
    attach_capture = False
    backoff = 0.5

    for image in frames:
        if max_frames is not None and stats.sent >= max_frames:
            break
        now = time.monotonic()
        if now < next_at:
            time.sleep(next_at - now)
        if cfg.extraction.center_crop:
            image = center_crop(image)
        h, w = image.shape[:2]
        points = engine.detect(image)
        if points is None:
            stats.no_face += 1
        seq += 1
        msg = {
            "type": "frame", "seq": seq, "ts_ms": int(time.time_ns() // 1_000_000),
            "width": int(w), "height": int(h),
            "landmarks": sentinel_points() if points is None else np.round(points, 6).tolist(),
        }
        if attach_capture and cfg.attach_capture_on_warning:
            ok, jpeg = cv2.imencode(".jpg", image)
            if ok:
                msg["image_b64"] = base64.b64encode(jpeg.tobytes()).decode()
            attach_capture = False
        try:
            conn.send(msg)
            stats.sent += 1
            for reply in conn.drain():
                kind = reply.get("type")
                if kind == "verdict":
                    stats.verdicts += 1
                    if reply.get("warning"):
                        stats.warnings += 1
                        attach_capture = True
                elif kind == "locked":
                    stats.locks += 1
                    stats.notices.append("exam locked by the server; streaming continues")
                elif kind in ("resumed", "ended"):
                    stats.notices.append(f"session {kind}")
            backoff = 0.5
        except (ConnectionResetError, BrokenPipeError, OSError):
            conn.close()
            time.sleep(backoff)
            backoff = min(backoff * 2, cfg.max_reconnect_s)
            try:
                conn = _connect(cfg)
                stats.reconnects += 1
                seq = 0
            except ConnectFailure:
                continue
        next_at += interval
        behind = time.monotonic() - next_at
        if behind > 0:
            next_at += math.ceil(behind / interval) * interval

    # collect any straggler verdicts before closing
    deadline = time.monotonic() + 1.0
    try:
        while time.monotonic() < deadline and stats.verdicts < stats.sent:
            reply = conn.recv_line_blocking(deadline - time.monotonic())
            if reply is None:
                break
            if reply.get("type") == "verdict":
                stats.verdicts += 1
                if reply.get("warning"):
                    stats.warnings += 1
            elif reply.get("type") == "locked":
                stats.locks += 1
    except (ConnectionResetError, OSError):
        pass
    conn.close()
    return stats


def camera_frames(index: int) -> Iterator[np.ndarray]:
    """Webcam source; raises when the device cannot be opened."""
    cap = cv2.VideoCapture(index)
    if not cap.isOpened():
        raise CameraUnavailable(f"cannot open camera {index}")
    try:
        while True:
            ok, frame = cap.read()
            if not ok:
                return
            yield frame
    finally:
        cap.release()
