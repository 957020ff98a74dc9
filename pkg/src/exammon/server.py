"""Multi-client monitoring server.

Students and proctors speak newline-delimited JSON over a persistent TCP
channel; the same messages are exposed to browsers over a WebSocket endpoint.
Per frame the server runs validate -> featurize -> predict -> observe, appends
every emitted session event to the room's append-only log *before* the verdict
reply is queued, and fans alerts/state changes out to proctor subscriptions.

Wire messages
-------------
client->server:  hello {role, token, room_id, id}
                 frame {seq, ts_ms, width, height, landmarks|features, image_b64?}
                 action {student_id, action: unlock|end}        (proctor)
server->student: welcome, verdict {seq, label, p_abnormal, state,
                 violation_count, warning?, no_face?}, locked, resumed, ended
server->proctor: roster, alert {student_id, ts_ms, p_abnormal,
                 violation_count, image_ref?}, state_change, ack
HTTP:            POST /rooms, GET /rooms/{id}/snapshot, /blobs/{ref}, /log,
                 /replay; WS /rooms/{id}/ws (proctor channel for browsers)
"""

from __future__ import annotations

import asyncio
import base64
import binascii
import gc
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import uvicorn
from fastapi import FastAPI, HTTPException, Query, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse, Response
from pydantic import BaseModel

from . import wire
from .classifier import ClassifierModel, load_model, predict
from .errors import (
    AuthFailure,
    CorruptLog,
    DuplicateRoom,
    ExamMonError,
    InvalidTransition,
    LandmarkError,
    AllZeroLandmarks,
    ModelLoadFailure,
    SessionEnded,
    StaleSeq,
    UnknownRoom,
    UnknownStudent,
)
from .landmarks import FeatureMode, FeatureVector, Label, featurize, validate_frame
from .session import (
    EventKind,
    ExamSession,
    SessionEvent,
    Verdict,
    ViolationPolicy,
    new_session,
    proctor_end,
    proctor_unlock,
    observe,
    replay,
    session_row,
)

log = logging.getLogger(__name__)

ROLE_STUDENT = "student"
ROLE_PROCTOR = "proctor"


@dataclass(frozen=True)
class AlertEvent:
    """Violation alert delivered to proctor subscriptions."""

    room_id: str
    student_id: str
    ts_ms: int
    p_abnormal: float
    violation_count: int
    image_ref: str | None = None

    def __post_init__(self) -> None:
        if self.violation_count <= 0:
            raise ValueError("alerts only exist for counted violations")

    def as_message(self) -> dict[str, Any]:
        return {
            "type": "alert",
            "room_id": self.room_id,
            "student_id": self.student_id,
            "ts_ms": self.ts_ms,
            "p_abnormal": self.p_abnormal,
            "violation_count": self.violation_count,
            "image_ref": self.image_ref,
        }


@dataclass
class ServerConfig:
    tcp_host: str = "127.0.0.1"
    tcp_port: int = 7460
    http_host: str = "127.0.0.1"
    http_port: int = 7461
    data_dir: Path = Path("./exammon-data")
    fsync: bool = False
    queue_frames: int = 64  # per-student backpressure bound (oldest dropped)


def now_ms() -> int:
    return time.time_ns() // 1_000_000


class Room:
    """One exam room: model, policy, sessions, event log, blob store, fanout."""

    def __init__(
        self,
        room_id: str,
        model: ClassifierModel,
        policy: ViolationPolicy,
        tokens: dict[str, str],
        data_dir: Path,
        threshold: float = 0.5,
        fsync: bool = False,
    ):
        self.room_id = room_id
        self.model = model
        self.policy = policy
        self.tokens = dict(tokens)
        self.threshold = threshold
        self.fsync = fsync

        self.sessions: dict[str, ExamSession] = {}
        self.drops: dict[str, int] = {}
        self.last_image_ref: dict[str, str] = {}
        self.proctor_subs: set[asyncio.Queue] = set()
        self.student_writers: dict[str, asyncio.StreamWriter] = {}

        root = data_dir / room_id
        root.mkdir(parents=True, exist_ok=True)
        self.blob_dir = root / "blobs"
        self.blob_dir.mkdir(exist_ok=True)
        self.log_path = root / "events.ndjson"
        self._log_fh = open(self.log_path, "a", encoding="utf-8")
        self.room_seq = 0

    def close(self) -> None:
        self._log_fh.close()

    def check_token(self, role: str, token: str) -> None:
        if role not in (ROLE_STUDENT, ROLE_PROCTOR) or self.tokens.get(role) != token:
            raise AuthFailure(f"token does not authorize role {role!r}")

    def append_events(self, student_id: str, events: tuple[SessionEvent, ...]) -> None:
        """Write-ahead append + flush; callers queue replies only afterwards."""
        if not events:
            return
        chunks = []
        for ev in events:
            self.room_seq += 1
            chunks.append(json.dumps(
                {"room_seq": self.room_seq, "student_id": student_id, "event": ev.as_dict()},
                separators=(",", ":"),
            ))
        self._log_fh.write("\n".join(chunks) + "\n")
        self._log_fh.flush()
        if self.fsync:
            os.fsync(self._log_fh.fileno())

    def store_blob(self, data: bytes) -> str:
        """Content-addressed blob store; returns the reference."""
        ref = hashlib.sha256(data).hexdigest()
        path = self.blob_dir / ref
        if not path.exists():
            path.write_bytes(data)
        return ref

    def blob_path(self, ref: str) -> Path:
        if not ref.isalnum():
            raise KeyError(ref)
        return self.blob_dir / ref

    def broadcast(self, msg: dict[str, Any]) -> None:
        for sub in self.proctor_subs:
            sub.put_nowait(msg)

    def notify_student(self, student_id: str, msg: dict[str, Any]) -> None:
        writer = self.student_writers.get(student_id)
        if writer is not None and not writer.is_closing():
            writer.write(wire.encode(msg))

    def snapshot(self) -> dict[str, Any]:
        students = [
            session_row(s) | {"dropped": self.drops.get(sid, 0)}
            for sid, s in sorted(self.sessions.items())
        ]
        return {"room_id": self.room_id, "students": students}

    def apply_action(self, student_id: str, action: str, actor: str, ts_ms: int) -> tuple[ExamSession, tuple[SessionEvent, ...]]:
        session = self.sessions.get(student_id)
        if session is None:
            raise UnknownStudent(f"no session for {student_id!r}")
        if action == "unlock":
            session, events = proctor_unlock(session, actor, ts_ms)
        elif action == "end":
            session, events = proctor_end(session, actor, ts_ms)
        else:
            raise ValueError(f"unknown action {action!r}")
        self.sessions[student_id] = session
        self.append_events(student_id, events)
        return session, events


ERROR_CODES = {
    AuthFailure: "auth_failure",
    UnknownRoom: "unknown_room",
    UnknownStudent: "unknown_student",
    StaleSeq: "stale_seq",
    SessionEnded: "session_ended",
    InvalidTransition: "invalid_transition",
}


def error_message(exc: Exception, **extra: Any) -> dict[str, Any]:
    code = ERROR_CODES.get(type(exc))
    if code is None:
        code = "bad_frame" if isinstance(exc, LandmarkError) else "bad_message"
    return {"type": "error", "code": code, "message": str(exc), **extra}


class MonitorServer:
    def __init__(self, config: ServerConfig | None = None):
        self.config = config or ServerConfig()
        self.rooms: dict[str, Room] = {}
        self._tcp_server: asyncio.base_events.Server | None = None
        self._http_server: uvicorn.Server | None = None
        self._http_task: asyncio.Task | None = None

    # room management

    def create_room(
        self,
        room_id: str,
        model_path: str | Path,
        policy: ViolationPolicy,
        tokens: dict[str, str],
        threshold: float = 0.5,
    ) -> Room:
        if room_id in self.rooms:
            raise DuplicateRoom(f"room {room_id!r} already exists")
        if not tokens.get(ROLE_STUDENT) or not tokens.get(ROLE_PROCTOR):
            raise ValueError("tokens must include non-empty student and proctor entries")
        try:
            model = load_model(model_path)
        except ExamMonError as exc:
            raise ModelLoadFailure(f"cannot load model {model_path}: {exc}") from exc
        room = Room(
            room_id=room_id,
            model=model,
            policy=policy,
            tokens=tokens,
            data_dir=self.config.data_dir,
            threshold=threshold,
            fsync=self.config.fsync,
        )
        self.rooms[room_id] = room
        return room

    def get_room(self, room_id: str) -> Room:
        room = self.rooms.get(room_id)
        if room is None:
            raise UnknownRoom(f"no room {room_id!r}")
        return room

    # lifecycle

    async def start(self) -> None:
        # cyclic-GC pauses (tens to hundreds of ms on gen2 scans) would blow
        # the per-frame latency budget; startup objects are long-lived anyway
        gc.collect()
        gc.freeze()
        gc.set_threshold(200_000, 100, 100)
        self._tcp_server = await asyncio.start_server(
            self._handle_conn,
            self.config.tcp_host,
            self.config.tcp_port,
            limit=wire.MAX_LINE_BYTES,
        )
        http_config = uvicorn.Config(
            build_http_app(self),
            host=self.config.http_host,
            port=self.config.http_port,
            log_level="warning",
            lifespan="off",
            access_log=False,
        )
        self._http_server = uvicorn.Server(http_config)
        self._http_task = asyncio.create_task(self._http_server.serve())
        while not self._http_server.started:
            if self._http_task.done():
                self._http_task.result()  # surface bind errors
                raise RuntimeError("http server exited during startup")
            await asyncio.sleep(0.01)

    async def stop(self) -> None:
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self._http_server is not None:
            self._http_server.should_exit = True
            await self._http_task
        for room in self.rooms.values():
            room.close()

    @property
    def tcp_port(self) -> int:
        return self._tcp_server.sockets[0].getsockname()[1]

    @property
    def http_port(self) -> int:
        return self._http_server.servers[0].sockets[0].getsockname()[1]

    # fanout

    def _after_events(
        self, room: Room, student_id: str, events: tuple[SessionEvent, ...], image_ref: str | None = None
    ) -> None:
        """Alert/state-change fanout and student notifications for logged events."""
        for ev in events:
            if ev.kind is EventKind.VIOLATION:
                alert = AlertEvent(
                    room_id=room.room_id,
                    student_id=student_id,
                    ts_ms=ev.ts_ms,
                    p_abnormal=float(ev.payload["p_abnormal"]),
                    violation_count=int(ev.payload["violation_count"]),
                    image_ref=image_ref,
                )
                room.broadcast(alert.as_message())
            elif ev.kind is EventKind.LOCKED:
                # the student's own `locked` notice rides the reply queue so it
                # lands after the verdict of the frame that caused it
                room.broadcast({"type": "state_change", "student_id": student_id, "state": "locked"})
            elif ev.kind is EventKind.UNLOCKED:
                room.broadcast({"type": "state_change", "student_id": student_id, "state": "monitoring"})
                room.notify_student(student_id, {"type": "resumed", "actor": str(ev.payload.get("actor", ""))})
            elif ev.kind is EventKind.ENDED:
                room.broadcast({"type": "state_change", "student_id": student_id, "state": "ended"})
                room.notify_student(student_id, {"type": "ended", "actor": str(ev.payload.get("actor", ""))})

    # frame pipeline

    def ingest_frame(self, room: Room, student_id: str, msg: dict[str, Any], last_seq: int) -> tuple[int, list[dict[str, Any]]]:
        """Run one frame through the pipeline; returns (new last_seq, replies).

        Events are appended to the room log before any reply is produced.
        """
        try:
            seq = int(msg["seq"])
        except (KeyError, TypeError, ValueError):
            return last_seq, [error_message(ValueError("frame requires an integer seq"))]
        if seq <= last_seq:
            return last_seq, [error_message(StaleSeq(f"seq {seq} <= last {last_seq}"), seq=seq)]
        last_seq = seq

        ts_ms = int(msg.get("ts_ms", now_ms()))
        has_landmarks = "landmarks" in msg
        has_features = "features" in msg
        if has_landmarks == has_features:
            return last_seq, [error_message(ValueError("frame payload must be exactly one of landmarks|features"), seq=seq)]

        no_face = False
        try:
            if has_landmarks:
                record = {
                    "id": str(seq),
                    "ts_ms": ts_ms,
                    "width": msg.get("width"),
                    "height": msg.get("height"),
                    "landmarks": msg.get("landmarks"),
                }
                try:
                    frame = validate_frame(record)
                    features = featurize(frame, room.model.feature_mode, room.model.selection)
                except AllZeroLandmarks:
                    no_face = True
                    features = None
            else:
                raw = msg["features"]
                mode = FeatureMode(raw["mode"])
                if mode is not room.model.feature_mode:
                    return last_seq, [error_message(
                        ValueError(f"model consumes {room.model.feature_mode.value}, got {mode.value}"), seq=seq)]
                features = FeatureVector(mode, raw["values"])
        except LandmarkError as exc:
            return last_seq, [error_message(exc, seq=seq)]
        except (KeyError, TypeError, ValueError) as exc:
            return last_seq, [error_message(ValueError(f"bad frame payload: {exc}"), seq=seq)]

        if no_face:
            # an absent face defeats monitoring: counts as an abnormal observation
            label, p_abnormal = Label.ABNORMAL, 1.0
        else:
            label, p_abnormal = predict(room.model, features, room.threshold)

        session = room.sessions[student_id]
        verdict = Verdict(label=label, p_abnormal=p_abnormal, frame_id=str(seq), no_face=no_face)
        try:
            session, events = observe(session, verdict, ts_ms)
        except SessionEnded as exc:
            return last_seq, [error_message(exc, seq=seq)]
        room.sessions[student_id] = session

        image_ref = None
        if msg.get("image_b64"):
            try:
                image_ref = room.store_blob(base64.b64decode(msg["image_b64"], validate=True))
                room.last_image_ref[student_id] = image_ref
            except (binascii.Error, ValueError):
                pass  # a bad capture must not take the verdict down with it
        alert_ref = image_ref or room.last_image_ref.get(student_id)

        room.append_events(student_id, events)
        self._after_events(room, student_id, events, image_ref=alert_ref)

        reply = {
            "type": "verdict",
            "seq": seq,
            "label": label.value,
            "p_abnormal": p_abnormal,
            "state": session.state.value,
            "violation_count": session.violation_count,
        }
        if any(ev.kind is EventKind.WARNING for ev in events):
            reply["warning"] = True
        if no_face:
            reply["no_face"] = True
        replies = [reply]
        for ev in events:
            if ev.kind is EventKind.LOCKED:
                replies.append({
                    "type": "locked", "ts_ms": ev.ts_ms,
                    "violation_count": int(ev.payload["violation_count"]),
                })
        return last_seq, replies

    # TCP channel

    async def _handle_conn(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            try:
                hello = await asyncio.wait_for(wire.read_message(reader), timeout=30.0)
            except (wire.ProtocolError, asyncio.TimeoutError) as exc:
                writer.write(wire.encode(error_message(ValueError(f"bad hello: {exc}"))))
                await writer.drain()
                return
            if hello is None:
                return
            if hello.get("type") != "hello":
                writer.write(wire.encode(error_message(ValueError("first message must be hello"))))
                await writer.drain()
                return

            role = str(hello.get("role", ""))
            client_id = str(hello.get("id", ""))
            try:
                room = self.get_room(str(hello.get("room_id", "")))
                room.check_token(role, str(hello.get("token", "")))
                if not client_id:
                    raise ValueError("hello requires a non-empty id")
            except (UnknownRoom, AuthFailure, ValueError) as exc:
                writer.write(wire.encode(error_message(exc)))
                await writer.drain()
                return

            if role == ROLE_STUDENT:
                await self._run_student(room, client_id, reader, writer)
            else:
                await self._run_proctor(room, client_id, reader, writer)
        except (ConnectionResetError, BrokenPipeError):
            pass
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass

    async def _pump_outbox(self, outbox: asyncio.Queue, writer: asyncio.StreamWriter) -> None:
        while True:
            msg = await outbox.get()
            writer.write(wire.encode(msg))
            await writer.drain()

    async def _run_student(self, room: Room, student_id: str, reader, writer) -> None:
        if student_id in room.student_writers:
            writer.write(wire.encode(error_message(AuthFailure(f"{student_id!r} is already connected"))))
            await writer.drain()
            return
        session = room.sessions.get(student_id)
        if session is None:
            session = new_session(student_id, room.policy)
            room.sessions[student_id] = session
            room.drops.setdefault(student_id, 0)
            room.broadcast({"type": "state_change", "student_id": student_id, "state": session.state.value})

        frames: asyncio.Queue = asyncio.Queue(maxsize=self.config.queue_frames)
        room.student_writers[student_id] = writer
        writer.write(wire.encode({
            "type": "welcome",
            "role": ROLE_STUDENT,
            "room_id": room.room_id,
            "id": student_id,
            "state": session.state.value,
            "violation_count": session.violation_count,
        }))

        async def process() -> None:
            # replies go straight out; a stalled client backs up into `frames`
            # where the reader's drop-oldest policy takes over
            last_seq = 0
            try:
                while True:
                    msg = await frames.get()
                    last_seq, replies = self.ingest_frame(room, student_id, msg, last_seq)
                    for reply in replies:
                        writer.write(wire.encode(reply))
                    await writer.drain()
            except (ConnectionResetError, BrokenPipeError):
                pass

        processor_task = asyncio.create_task(process())
        try:
            while True:
                try:
                    msg = await wire.read_message(reader)
                except wire.ProtocolError as exc:
                    writer.write(wire.encode(error_message(ValueError(str(exc)))))
                    break
                if msg is None:
                    break
                if msg.get("type") == "frame":
                    if frames.full():
                        frames.get_nowait()  # drop the oldest unprocessed frame
                        room.drops[student_id] = room.drops.get(student_id, 0) + 1
                    frames.put_nowait(msg)
                else:
                    writer.write(wire.encode(error_message(ValueError(f"unexpected message type {msg.get('type')!r}"))))
        except (ConnectionResetError, BrokenPipeError):
            pass
        finally:
            # let queued frames finish so their events/replies are not lost
            # (bounded: the peer may already be gone)
            deadline = asyncio.get_running_loop().time() + 2.0
            while (
                not frames.empty()
                and not processor_task.done()
                and asyncio.get_running_loop().time() < deadline
            ):
                await asyncio.sleep(0.005)
            processor_task.cancel()
            room.student_writers.pop(student_id, None)

    async def _run_proctor(self, room: Room, proctor_id: str, reader, writer) -> None:
        queue: asyncio.Queue = asyncio.Queue()
        room.proctor_subs.add(queue)
        queue.put_nowait({"type": "roster", **room.snapshot()})
        writer_task = asyncio.create_task(self._pump_outbox(queue, writer))
        try:
            while True:
                try:
                    msg = await wire.read_message(reader)
                except wire.ProtocolError as exc:
                    queue.put_nowait(error_message(ValueError(str(exc))))
                    break
                if msg is None:
                    break
                if msg.get("type") == "action":
                    queue.put_nowait(self._handle_action(room, msg, actor=proctor_id))
                elif msg.get("type") == "snapshot":
                    queue.put_nowait({"type": "roster", **room.snapshot()})
                else:
                    queue.put_nowait(error_message(ValueError(f"unexpected message type {msg.get('type')!r}")))
        finally:
            deadline = asyncio.get_running_loop().time() + 2.0
            while not queue.empty() and not writer_task.done() and asyncio.get_running_loop().time() < deadline:
                await asyncio.sleep(0.005)
            writer_task.cancel()
            room.proctor_subs.discard(queue)

    def _handle_action(self, room: Room, msg: dict[str, Any], actor: str) -> dict[str, Any]:
        student_id = str(msg.get("student_id", ""))
        action = str(msg.get("action", ""))
        try:
            session, events = room.apply_action(student_id, action, actor, now_ms())
        except (UnknownStudent, InvalidTransition, SessionEnded, ValueError) as exc:
            return error_message(exc, student_id=student_id, action=action)
        self._after_events(room, student_id, events)
        return {"type": "ack", "student_id": student_id, "action": action, "state": session.state.value}


# event-log reading / replay

def load_room_log(path: str | Path) -> list[dict[str, Any]]:
    """Parse a room log, tolerating a torn trailing line from a crash."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CorruptLog(f"cannot read log {path}: {exc}") from exc
    records: list[dict[str, Any]] = []
    lines = data.split(b"\n")
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict) or "room_seq" not in rec or "event" not in rec:
                raise ValueError("missing envelope fields")
        except (json.JSONDecodeError, ValueError) as exc:
            if i == len(lines) - 1 and not data.endswith(b"\n"):
                break  # torn tail write: valid prefix ends here
            raise CorruptLog(f"{path}: line {i + 1}: {exc}") from exc
        records.append(rec)
    return records


def replay_room_log(
    records: list[dict[str, Any]], policy: ViolationPolicy
) -> dict[str, ExamSession]:
    """Rebuild every student session from a room log."""
    per_student: dict[str, list[SessionEvent]] = {}
    expected_seq = 1
    for rec in records:
        if int(rec["room_seq"]) != expected_seq:
            raise CorruptLog(f"room_seq {rec['room_seq']}, expected {expected_seq}")
        expected_seq += 1
        per_student.setdefault(str(rec["student_id"]), []).append(SessionEvent.from_dict(rec["event"]))
    return {sid: replay(sid, events, policy) for sid, events in per_student.items()}


def roster_from_log(path: str | Path, policy: ViolationPolicy) -> dict[str, Any]:
    sessions = replay_room_log(load_room_log(path), policy)
    return {"students": [session_row(s) for _, s in sorted(sessions.items())]}


# HTTP surface

class PolicyBody(BaseModel):
    window_frames: int = 15
    cooldown_ms: int = 5000
    lock_threshold: int = 3
    reset_on_unlock: bool = True

    def to_policy(self) -> ViolationPolicy:
        return ViolationPolicy(
            window_frames=self.window_frames,
            cooldown_ms=self.cooldown_ms,
            lock_threshold=self.lock_threshold,
            reset_on_unlock=self.reset_on_unlock,
        )


class TokensBody(BaseModel):
    student: str
    proctor: str


class RoomCreateBody(BaseModel):
    room_id: str
    model_path: str
    tokens: TokensBody
    policy: PolicyBody = PolicyBody()
    threshold: float = 0.5


def build_http_app(server: MonitorServer) -> FastAPI:
    app = FastAPI(title="exammon monitor service")
    # the proctor dashboard is served from its own origin; auth is token-based
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    def room_or_404(room_id: str) -> Room:
        try:
            return server.get_room(room_id)
        except UnknownRoom as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    def require_proctor(room: Room, token: str) -> None:
        try:
            room.check_token(ROLE_PROCTOR, token)
        except AuthFailure as exc:
            raise HTTPException(status_code=401, detail=str(exc)) from exc

    @app.post("/rooms", status_code=201)
    def create_room(body: RoomCreateBody):
        try:
            server.create_room(
                body.room_id,
                body.model_path,
                body.policy.to_policy(),
                {"student": body.tokens.student, "proctor": body.tokens.proctor},
                threshold=body.threshold,
            )
        except DuplicateRoom as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except (ModelLoadFailure, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"room_id": body.room_id}

    @app.get("/rooms/{room_id}/snapshot")
    def snapshot(room_id: str, token: str = Query("")):
        room = room_or_404(room_id)
        require_proctor(room, token)
        return room.snapshot()

    @app.get("/rooms/{room_id}/blobs/{ref}")
    def blob(room_id: str, ref: str, token: str = Query("")):
        room = room_or_404(room_id)
        require_proctor(room, token)
        try:
            path = room.blob_path(ref)
            data = path.read_bytes()
        except (KeyError, OSError):
            raise HTTPException(status_code=404, detail=f"no blob {ref!r}") from None
        return Response(content=data, media_type="application/octet-stream")

    @app.get("/rooms/{room_id}/log")
    def event_log(room_id: str, token: str = Query("")):
        room = room_or_404(room_id)
        require_proctor(room, token)
        try:
            text = room.log_path.read_text(encoding="utf-8")
        except OSError:
            text = ""
        return PlainTextResponse(text, media_type="application/x-ndjson")

    @app.get("/rooms/{room_id}/replay")
    def replay_log(room_id: str, token: str = Query("")):
        room = room_or_404(room_id)
        require_proctor(room, token)
        try:
            return roster_from_log(room.log_path, room.policy)
        except CorruptLog as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc

    @app.websocket("/rooms/{room_id}/ws")
    async def ws_channel(websocket: WebSocket, room_id: str, token: str = Query(""), id: str = Query("dashboard")):
        await websocket.accept()
        room = server.rooms.get(room_id)
        if room is None:
            await websocket.close(code=4404)
            return
        try:
            room.check_token(ROLE_PROCTOR, token)
        except AuthFailure:
            await websocket.close(code=4401)
            return
        queue: asyncio.Queue = asyncio.Queue()
        room.proctor_subs.add(queue)
        queue.put_nowait({"type": "roster", **room.snapshot()})

        async def pump() -> None:
            while True:
                msg = await queue.get()
                await websocket.send_text(json.dumps(msg, separators=(",", ":")) + "\n")

        async def receive() -> None:
            while True:
                raw = await websocket.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    queue.put_nowait(error_message(ValueError("invalid JSON message")))
                    continue
                if isinstance(msg, dict) and msg.get("type") == "action":
                    queue.put_nowait(server._handle_action(room, msg, actor=id))
                elif isinstance(msg, dict) and msg.get("type") == "snapshot":
                    queue.put_nowait({"type": "roster", **room.snapshot()})
                else:
                    queue.put_nowait(error_message(ValueError("unexpected message")))

        pump_task = asyncio.create_task(pump())
        try:
            await receive()
        except WebSocketDisconnect:
            pass
        finally:
            pump_task.cancel()
            room.proctor_subs.discard(queue)

    return app
