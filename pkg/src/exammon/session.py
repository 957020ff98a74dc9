"""Per-student proctoring state machine.

Frame verdicts are debounced into violations: a run of consecutive abnormal
frames of length `window_frames` registers one violation (with a cooldown
between counted violations), each violation raises a warning, and the session
locks once the count exceeds the lock threshold. Proctors unlock (resetting
the count) or end the session. Transitions are pure: same (session, input)
gives the same (session', events), and replaying the emitted events rebuilds
the exact live state.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .errors import CorruptLog, InvalidTransition, SessionEnded
from .landmarks import Label


class SessionState(str, Enum):
    MONITORING = "monitoring"
    LOCKED = "locked"
    ENDED = "ended"


class EventKind(str, Enum):
    FRAME_VERDICT = "frame_verdict"
    WARNING = "warning"
    VIOLATION = "violation"
    LOCKED = "locked"
    UNLOCKED = "unlocked"
    ENDED = "ended"


@dataclass(frozen=True)
class ViolationPolicy:
    """Debounce window, cooldown between counted violations, lock threshold."""

    window_frames: int = 15
    cooldown_ms: int = 5000
    lock_threshold: int = 3
    reset_on_unlock: bool = True

    def __post_init__(self) -> None:
        if self.window_frames < 1:
            raise ValueError("window_frames must be >= 1")
        if self.cooldown_ms < 0:
            raise ValueError("cooldown_ms must be >= 0")
        if self.lock_threshold < 1:
            raise ValueError("lock_threshold must be >= 1")


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    ts_ms: int
    kind: EventKind
    payload: Mapping[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {"seq": self.seq, "ts_ms": self.ts_ms, "kind": self.kind.value, "payload": dict(self.payload)}

    @classmethod
    def from_dict(cls, rec: Mapping[str, Any]) -> "SessionEvent":
        try:
            return cls(
                seq=int(rec["seq"]),
                ts_ms=int(rec["ts_ms"]),
                kind=EventKind(rec["kind"]),
                payload=dict(rec.get("payload", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptLog(f"malformed event record: {exc}") from exc


@dataclass(frozen=True)
class Verdict:
    """Per-frame classifier output fed into the state machine."""

    label: Label
    p_abnormal: float
    frame_id: str
    no_face: bool = False


@dataclass(frozen=True)
class ExamSession:
    student_id: str
    policy: ViolationPolicy = ViolationPolicy()
    state: SessionState = SessionState.MONITORING
    violation_count: int = 0
    abnormal_streak: int = 0
    cooldown_until_ms: int = 0
    last_verdict_ts_ms: int | None = None
    last_p_abnormal: float | None = None
    last_no_face: bool = False
    events: tuple[SessionEvent, ...] = ()

    @property
    def next_seq(self) -> int:
        return len(self.events) + 1


def new_session(student_id: str, policy: ViolationPolicy = ViolationPolicy()) -> ExamSession:
    """Fresh Monitoring session with zero violations and empty debounce."""
    return ExamSession(student_id=student_id, policy=policy)


def observe(session: ExamSession, verdict: Verdict, ts_ms: int) -> tuple[ExamSession, tuple[SessionEvent, ...]]:
    """Fold one frame verdict into the session.

    Every verdict is recorded as a FrameVerdict event. While Monitoring, an
    abnormal run of window_frames (cooldown permitting) emits Violation +
    Warning, and Locked once the count exceeds the threshold. While Locked
    the debounce does not advance; an Ended session rejects verdicts.
    """
    if session.state is SessionState.ENDED:
        raise SessionEnded(f"session {session.student_id} has ended")

    ts_ms = int(ts_ms)
    seq = session.next_seq
    emitted = [SessionEvent(
        seq=seq,
        ts_ms=ts_ms,
        kind=EventKind.FRAME_VERDICT,
        payload={
            "frame_id": verdict.frame_id,
            "label": verdict.label.value,
            "p_abnormal": float(verdict.p_abnormal),
            "no_face": bool(verdict.no_face),
        },
    )]
    seq += 1

    state = session.state
    count = session.violation_count
    streak = session.abnormal_streak
    cooldown_until = session.cooldown_until_ms

    if state is SessionState.MONITORING:
        if verdict.label is Label.ABNORMAL:
            streak += 1
            if streak >= session.policy.window_frames and ts_ms >= cooldown_until:
                count += 1
                emitted.append(SessionEvent(
                    seq=seq, ts_ms=ts_ms, kind=EventKind.VIOLATION,
                    payload={
                        "frame_id": verdict.frame_id,
                        "p_abnormal": float(verdict.p_abnormal),
                        "violation_count": count,
                    },
                ))
                seq += 1
                emitted.append(SessionEvent(
                    seq=seq, ts_ms=ts_ms, kind=EventKind.WARNING,
                    payload={"violation_count": count},
                ))
                seq += 1
                streak = 0
                cooldown_until = ts_ms + session.policy.cooldown_ms
                if count > session.policy.lock_threshold:
                    emitted.append(SessionEvent(
                        seq=seq, ts_ms=ts_ms, kind=EventKind.LOCKED,
                        payload={"violation_count": count},
                    ))
                    seq += 1
                    state = SessionState.LOCKED
        else:
            streak = 0

    updated = replace(
        session,
        state=state,
        violation_count=count,
        abnormal_streak=streak,
        cooldown_until_ms=cooldown_until,
        last_verdict_ts_ms=ts_ms,
        last_p_abnormal=float(verdict.p_abnormal),
        last_no_face=bool(verdict.no_face),
        events=session.events + tuple(emitted),
    )
    return updated, tuple(emitted)


def proctor_unlock(session: ExamSession, actor: str, ts_ms: int) -> tuple[ExamSession, tuple[SessionEvent, ...]]:
    """Resume a Locked session: state Monitoring, count reset, debounce cleared."""
    if session.state is SessionState.ENDED:
        raise SessionEnded(f"session {session.student_id} has ended")
    if session.state is not SessionState.LOCKED:
        raise InvalidTransition(f"cannot unlock a session in state {session.state.value}")
    event = SessionEvent(
        seq=session.next_seq, ts_ms=int(ts_ms), kind=EventKind.UNLOCKED, payload={"actor": actor},
    )
    updated = replace(
        session,
        state=SessionState.MONITORING,
        violation_count=0 if session.policy.reset_on_unlock else session.violation_count,
        abnormal_streak=0,
        cooldown_until_ms=0,
        events=session.events + (event,),
    )
    return updated, (event,)


def proctor_end(session: ExamSession, actor: str, ts_ms: int) -> tuple[ExamSession, tuple[SessionEvent, ...]]:
    """Terminate the session; Ended is terminal."""
    if session.state is SessionState.ENDED:
        raise SessionEnded(f"session {session.student_id} has already ended")
    event = SessionEvent(
        seq=session.next_seq, ts_ms=int(ts_ms), kind=EventKind.ENDED, payload={"actor": actor},
    )
    updated = replace(session, state=SessionState.ENDED, events=session.events + (event,))
    return updated, (event,)


def replay(
    student_id: str,
    events: Sequence[SessionEvent] | Iterable[SessionEvent],
    policy: ViolationPolicy = ViolationPolicy(),
) -> ExamSession:
    """Rebuild a session by re-running the transitions recorded in its log.

    Each input event (FrameVerdict, Unlocked, Ended) is re-applied through
    the live transition functions, and the derived events (Violation,
    Warning, Locked) the transitions emit must match the log exactly.
    Seq gaps, regressions, or impossible transitions raise CorruptLog.
    """
    events = tuple(events)
    for i, ev in enumerate(events):
        if ev.seq != i + 1:
            raise CorruptLog(f"event seq {ev.seq} at position {i}, expected {i + 1}")

    session = new_session(student_id, policy)
    i = 0
    while i < len(events):
        ev = events[i]
        try:
            if ev.kind is EventKind.FRAME_VERDICT:
                verdict = Verdict(
                    label=Label(ev.payload["label"]),
                    p_abnormal=float(ev.payload["p_abnormal"]),
                    frame_id=str(ev.payload.get("frame_id", "")),
                    no_face=bool(ev.payload.get("no_face", False)),
                )
                session, emitted = observe(session, verdict, ev.ts_ms)
            elif ev.kind is EventKind.UNLOCKED:
                session, emitted = proctor_unlock(session, str(ev.payload.get("actor", "")), ev.ts_ms)
            elif ev.kind is EventKind.ENDED:
                session, emitted = proctor_end(session, str(ev.payload.get("actor", "")), ev.ts_ms)
            else:
                raise CorruptLog(f"derived event {ev.kind.value} at seq {ev.seq} has no preceding cause")
        except (SessionEnded, InvalidTransition, KeyError, ValueError) as exc:
            raise CorruptLog(f"impossible transition at seq {ev.seq}: {exc}") from exc

        expected = events[i:i + len(emitted)]
        if tuple(emitted) != expected:
            raise CorruptLog(
                f"log diverges from transition at seq {ev.seq}: "
                f"expected {[e.kind.value for e in emitted]}, "
                f"logged {[e.kind.value for e in expected]}"
            )
        i += len(emitted)
    return session


def session_row(session: ExamSession) -> dict[str, Any]:
    """Roster view of one session (the log-derivable fields)."""
    return {
        "student_id": session.student_id,
        "state": session.state.value,
        "violation_count": session.violation_count,
        "last_verdict_ts_ms": session.last_verdict_ts_ms,
        "last_p_abnormal": session.last_p_abnormal,
        "no_face": session.last_no_face,
    }
