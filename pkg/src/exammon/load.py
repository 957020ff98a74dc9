"""Multi-client load harness.

Spawns N concurrent exam clients streaming synthetic landmark frames at a
target per-client rate against a live server, measures send-to-verdict round
trips, and reports throughput plus latency percentiles. Frame content is
deterministic per seed; pacing uses a fixed-interval scheduler that skips
missed slots instead of bursting to catch up.
"""

from __future__ import annotations

import asyncio
import csv
import gc
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import wire
from .dataset import frame_from_pose, sample_pose
from .errors import AuthFailure, BadSchedule, ConnectFailure
from .landmarks import Label, LandmarkFrame, featurize

Schedule = tuple[tuple[Label, int], ...]

DEFAULT_THETA_DEG = 15.0
DEFAULT_JITTER = 0.002


@dataclass(frozen=True)
class LoadConfig:
    host: str
    port: int
    room_id: str
    token: str
    clients: int = 20
    fps: float = 27.0
    duration_s: float = 30.0
    seed: int = 0
    schedule: Schedule | None = None  # None: a 2 s all-Normal cycle
    payload: str = "landmarks"  # or "features": precomputed, trusted from
    client_prefix: str = "load-"  # authed clients; reduces server load
    drain_s: float = 2.0

    def __post_init__(self) -> None:
        if self.clients < 1:
            raise ValueError("clients must be >= 1")
        if not self.fps > 0:
            raise ValueError("fps must be > 0")
        if not self.duration_s > 0:
            raise ValueError("duration must be > 0")
        if self.payload not in ("landmarks", "features"):
            raise ValueError("payload must be landmarks or features")


@dataclass
class LoadReport:
    clients: int
    fps: float
    duration_s: float
    sent: int = 0
    acknowledged: int = 0
    dropped: int = 0
    verdicts_per_s: float = 0.0
    latency_p50_ms: float = 0.0
    latency_p95_ms: float = 0.0
    latency_p99_ms: float = 0.0
    per_client_fps: list[float] = field(default_factory=list)
    violations: int = 0
    locks: int = 0
    incomplete: bool = False
    latencies_ms: list[float] = field(default_factory=list, repr=False)

    @property
    def in_flight(self) -> int:
        return self.sent - self.acknowledged - self.dropped

    def as_dict(self) -> dict:
        return {
            "clients": self.clients,
            "fps": self.fps,
            "duration_s": self.duration_s,
            "sent": self.sent,
            "acknowledged": self.acknowledged,
            "dropped": self.dropped,
            "in_flight": self.in_flight,
            "verdicts_per_s": self.verdicts_per_s,
            "latency_ms": {
                "p50": self.latency_p50_ms,
                "p95": self.latency_p95_ms,
                "p99": self.latency_p99_ms,
            },
            "per_client_fps": self.per_client_fps,
            "violations": self.violations,
            "locks": self.locks,
            "incomplete": self.incomplete,
        }


def scripted_stream(
    seed: int,
    schedule: Sequence[tuple[Label | str, int]],
    theta_deg: float = DEFAULT_THETA_DEG,
    jitter: float = DEFAULT_JITTER,
) -> list[LandmarkFrame]:
    """Deterministic frames matching each phase's label geometry."""
    if not schedule:
        raise BadSchedule("schedule must contain at least one (label, count) phase")
    phases = []
    for entry in schedule:
        try:
            label, count = entry
            label = Label(label)
            count = int(count)
        except (TypeError, ValueError) as exc:
            raise BadSchedule(f"bad schedule entry {entry!r}: {exc}") from exc
        if count < 1:
            raise BadSchedule(f"phase count must be >= 1, got {count}")
        phases.append((label, count))

    rng = np.random.default_rng(seed)
    frames = []
    i = 0
    for label, count in phases:
        for _ in range(count):
            pose = sample_pose(label, theta_deg, rng)
            frames.append(frame_from_pose(pose, frame_id=f"script-{seed}-{i}", ts_ms=i, jitter=jitter, rng=rng))
            i += 1
    return frames


def load_schedule_file(path: str | Path) -> Schedule:
    """Schedule file: JSON list of [label, count] pairs."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return tuple((Label(label), int(count)) for label, count in raw)
    except (OSError, ValueError, TypeError) as exc:
        raise BadSchedule(f"cannot read schedule {path}: {exc}") from exc


@dataclass
class _ClientTally:
    sent: int = 0
    acknowledged: int = 0
    dropped: int = 0
    violations: int = 0
    locks: int = 0
    latencies_ms: list[float] = field(default_factory=list)
    failed: bool = False


def _encode_payloads(frames: list[LandmarkFrame], payload: str) -> list[str]:
    """Pre-encode the expensive part of each frame message.

    Coordinates are rounded to 6 decimals on the wire (sub-micrometer at
    640 px; real landmark engines emit float32 anyway), roughly halving the
    frame size the server has to parse.
    """
    if payload == "features":
        return [
            '"features":{"mode":"dist171","values":'
            + json.dumps(np.round(featurize(f).values, 6).tolist(), separators=(",", ":"))
            + "}"
            for f in frames
        ]
    return [
        f'"width":{f.width},"height":{f.height},"landmarks":'
        + json.dumps(np.round(f.points, 6).tolist(), separators=(",", ":"))
        for f in frames
    ]


async def _run_client(cfg: LoadConfig, index: int, start_at: float, tally: _ClientTally) -> None:
    schedule = cfg.schedule or ((Label.NORMAL, max(1, int(round(cfg.fps * 2)))),)
    payloads = _encode_payloads(scripted_stream(cfg.seed + index, schedule), cfg.payload)

    try:
        reader, writer = await asyncio.open_connection(cfg.host, cfg.port, limit=wire.MAX_LINE_BYTES)
    except OSError as exc:
        raise ConnectFailure(f"cannot reach {cfg.host}:{cfg.port}: {exc}") from exc

    student_id = f"{cfg.client_prefix}{index}"
    writer.write(wire.encode({
        "type": "hello", "role": "student", "token": cfg.token,
        "room_id": cfg.room_id, "id": student_id,
    }))
    await writer.drain()
    first = await wire.read_message(reader)
    if first is None or first.get("type") == "error":
        writer.close()
        detail = (first or {}).get("message", "connection closed")
        if (first or {}).get("code") in ("auth_failure", "unknown_room"):
            raise AuthFailure(f"{student_id}: {detail}")
        raise ConnectFailure(f"{student_id}: {detail}")

    send_times: dict[int, float] = {}
    done_sending = asyncio.Event()

    async def receive() -> None:
        while True:
            msg = await wire.read_message(reader)
            if msg is None:
                return
            kind = msg.get("type")
            if kind == "verdict":
                t0 = send_times.pop(int(msg["seq"]), None)
                if t0 is not None:
                    tally.latencies_ms.append((time.perf_counter() - t0) * 1000.0)
                tally.acknowledged += 1
                if msg.get("warning"):
                    tally.violations += 1
            elif kind == "error":
                seq = msg.get("seq")
                if seq is not None:
                    send_times.pop(int(seq), None)
                tally.dropped += 1
            elif kind == "locked":
                tally.locks += 1
            if done_sending.is_set() and not send_times:
                return

    receiver = asyncio.create_task(receive())

    interval = 1.0 / cfg.fps
    loop = asyncio.get_running_loop()
    await asyncio.sleep(max(0.0, start_at - loop.time()))
    t_start = loop.time()
    t_end = t_start + cfg.duration_s
    next_at = t_start
    seq = 0
    n_frames = len(payloads)
    try:
        while True:
            now = loop.time()
            if now >= t_end:
                break
            if now < next_at:
                await asyncio.sleep(next_at - now)
                if loop.time() >= t_end:
                    break
            seq += 1
            message = (
                f'{{"type":"frame","seq":{seq},"ts_ms":{time.time_ns() // 1_000_000},'
                f'{payloads[(seq - 1) % n_frames]}}}\n'
            )
            send_times[seq] = time.perf_counter()
            tally.sent += 1
            writer.write(message.encode())
            await writer.drain()
            next_at += interval
            behind = loop.time() - next_at
            if behind > 0:
                # skip whole missed slots on the same grid: no catch-up burst,
                # and the client keeps its phase offset
                next_at += math.ceil(behind / interval) * interval
        done_sending.set()
        await asyncio.wait_for(receiver, timeout=cfg.drain_s)
    except (asyncio.TimeoutError, ConnectionResetError, BrokenPipeError):
        pass
    finally:
        if not receiver.done():
            receiver.cancel()
        writer.close()
        try:
            await writer.wait_closed()
        except (ConnectionResetError, BrokenPipeError):
            pass


def _percentile(sorted_ms: list[float], q: float) -> float:
    if not sorted_ms:
        return 0.0
    idx = max(0, math.ceil(q * len(sorted_ms)) - 1)
    return sorted_ms[idx]


async def run_load_async(cfg: LoadConfig) -> LoadReport:
    # GC pauses on the generator side would be charged to round-trip latency
    gc.collect()
    gc.freeze()
    gc.set_threshold(200_000, 100, 100)
    tallies = [_ClientTally() for _ in range(cfg.clients)]
    base = asyncio.get_running_loop().time() + 0.2  # let every client connect first
    # spread client phases across one frame interval, like uncorrelated webcams
    interval = 1.0 / cfg.fps
    tasks = [
        asyncio.create_task(_run_client(cfg, i, base + interval * i / cfg.clients, tallies[i]))
        for i in range(cfg.clients)
    ]
    results = await asyncio.gather(*tasks, return_exceptions=True)

    failures = [r for r in results if isinstance(r, BaseException)]
    if failures and all(isinstance(r, BaseException) for r in results):
        raise failures[0] if isinstance(failures[0], (ConnectFailure, AuthFailure)) else ConnectFailure(str(failures[0]))

    report = LoadReport(clients=cfg.clients, fps=cfg.fps, duration_s=cfg.duration_s)
    all_lat: list[float] = []
    for i, (tally, result) in enumerate(zip(tallies, results)):
        report.sent += tally.sent
        report.acknowledged += tally.acknowledged
        report.dropped += tally.dropped
        report.violations += tally.violations
        report.locks += tally.locks
        report.per_client_fps.append(tally.sent / cfg.duration_s)
        all_lat.extend(tally.latencies_ms)
        if isinstance(result, BaseException):
            report.incomplete = True

    all_lat.sort()
    report.latencies_ms = all_lat
    report.latency_p50_ms = _percentile(all_lat, 0.50)
    report.latency_p95_ms = _percentile(all_lat, 0.95)
    report.latency_p99_ms = _percentile(all_lat, 0.99)
    report.verdicts_per_s = report.acknowledged / cfg.duration_s
    return report


def run_load(cfg: LoadConfig) -> LoadReport:
    """Synchronous entry point for the harness."""
    return asyncio.run(run_load_async(cfg))


def write_latency_histogram_csv(report: LoadReport, path: str | Path) -> None:
    """1 ms-bucket round-trip histogram."""
    buckets: dict[int, int] = {}
    for ms in report.latencies_ms:
        buckets[int(ms)] = buckets.get(int(ms), 0) + 1
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bucket_ms", "count"])
        for bucket in sorted(buckets):
            writer.writerow([bucket, buckets[bucket]])
