import numpy as np
import pytest

from exammon.errors import CorruptLog, InvalidTransition, SessionEnded
from exammon.landmarks import Label
from exammon.session import (
    EventKind,
    SessionEvent,
    SessionState,
    Verdict,
    ViolationPolicy,
    new_session,
    observe,
    proctor_end,
    proctor_unlock,
    replay,
    session_row,
)


def abnormal(i=0, p=0.9):
    return Verdict(label=Label.ABNORMAL, p_abnormal=p, frame_id=f"f{i}")


def normal(i=0, p=0.1):
    return Verdict(label=Label.NORMAL, p_abnormal=p, frame_id=f"f{i}")


def feed(session, verdicts, start_ts=0, step_ms=40):
    """Observe a list of verdicts at a fixed frame interval."""
    events = []
    ts = start_ts
    for v in verdicts:
        session, emitted = observe(session, v, ts)
        events.extend(emitted)
        ts += step_ms
    return session, events


def drive_to_lock(policy=ViolationPolicy()):
    """Default-policy script: four violations -> Locked."""
    session = new_session("alice", policy)
    ts = 0
    for _ in range(4):
        for i in range(policy.window_frames):
            session, _ = observe(session, abnormal(i), ts)
            ts += 40
        ts += policy.cooldown_ms  # let the cooldown expire before the next burst
    return session


class TestNewSession:
    def test_fresh_state(self):
        s = new_session("bob")
        assert s.state is SessionState.MONITORING
        assert s.violation_count == 0
        assert s.abnormal_streak == 0
        assert s.events == ()

    def test_policy_invariants(self):
        with pytest.raises(ValueError):
            ViolationPolicy(window_frames=0)
        with pytest.raises(ValueError):
            ViolationPolicy(cooldown_ms=-1)
        with pytest.raises(ValueError):
            ViolationPolicy(lock_threshold=0)

    def test_threshold_one_locks_on_second_violation(self):
        policy = ViolationPolicy(window_frames=2, cooldown_ms=0, lock_threshold=1)
        s = new_session("bob", policy)
        s, _ = feed(s, [abnormal(), abnormal()])
        assert s.state is SessionState.MONITORING and s.violation_count == 1
        s, events = feed(s, [abnormal(), abnormal()], start_ts=1000)
        assert s.state is SessionState.LOCKED and s.violation_count == 2
        assert events[-1].kind is EventKind.LOCKED


class TestObserve:
    def test_window_of_abnormal_yields_one_violation(self):
        s = new_session("alice")
        s, events = feed(s, [abnormal(i) for i in range(15)])
        kinds = [e.kind for e in events]
        assert kinds.count(EventKind.VIOLATION) == 1
        assert kinds.count(EventKind.WARNING) == 1
        assert s.violation_count == 1
        assert s.abnormal_streak == 0

    def test_normal_resets_debounce(self):
        s = new_session("alice")
        s, events = feed(s, [abnormal(i) for i in range(14)] + [normal()])
        assert s.violation_count == 0
        assert all(e.kind is EventKind.FRAME_VERDICT for e in events)

    def test_every_verdict_logged(self):
        s = new_session("alice")
        s, events = feed(s, [normal(i) for i in range(5)])
        assert len(events) == 5
        assert [e.seq for e in s.events] == [1, 2, 3, 4, 5]

    def test_lock_on_fourth_violation(self):
        s = drive_to_lock()
        assert s.state is SessionState.LOCKED
        assert s.violation_count == 4
        kinds = [e.kind for e in s.events]
        assert kinds.count(EventKind.VIOLATION) == 4
        assert kinds.count(EventKind.LOCKED) == 1

    def test_third_violation_does_not_lock(self):
        policy = ViolationPolicy()
        s = new_session("alice", policy)
        ts = 0
        for _ in range(3):
            for i in range(policy.window_frames):
                s, _ = observe(s, abnormal(i), ts)
                ts += 40
            ts += policy.cooldown_ms
        assert s.state is SessionState.MONITORING and s.violation_count == 3

    def test_cooldown_suppresses_double_count(self):
        policy = ViolationPolicy(window_frames=3, cooldown_ms=10_000)
        s = new_session("alice", policy)
        s, events = feed(s, [abnormal(i) for i in range(12)], step_ms=40)
        # 12 abnormal frames in ~0.5 s: one violation, rest inside cooldown
        assert s.violation_count == 1

    def test_violation_fires_after_cooldown_expiry(self):
        policy = ViolationPolicy(window_frames=3, cooldown_ms=100)
        s = new_session("alice", policy)
        s, _ = feed(s, [abnormal(i) for i in range(3)], step_ms=10)
        assert s.violation_count == 1
        s, _ = feed(s, [abnormal(i) for i in range(3)], start_ts=5000, step_ms=10)
        assert s.violation_count == 2

    def test_verdicts_while_locked_do_not_advance(self):
        s = drive_to_lock()
        before = s.violation_count
        s, events = feed(s, [abnormal(i) for i in range(40)], start_ts=10**7)
        assert s.state is SessionState.LOCKED
        assert s.violation_count == before
        assert all(e.kind is EventKind.FRAME_VERDICT for e in events)

    def test_observe_after_end_rejected(self):
        s = new_session("alice")
        s, _ = proctor_end(s, "proctor-1", 0)
        with pytest.raises(SessionEnded):
            observe(s, normal(), 1)

    def test_pure_transition(self):
        s = new_session("alice")
        a1, e1 = observe(s, abnormal(), 100)
        a2, e2 = observe(s, abnormal(), 100)
        assert a1 == a2 and e1 == e2


class TestProctorActions:
    def test_unlock_resets(self):
        s = drive_to_lock()
        s, events = proctor_unlock(s, "proctor-1", 10**6)
        assert s.state is SessionState.MONITORING
        assert s.violation_count == 0
        assert s.abnormal_streak == 0
        assert events[0].kind is EventKind.UNLOCKED
        assert events[0].payload["actor"] == "proctor-1"

    def test_unlock_while_monitoring_rejected(self):
        s = new_session("alice")
        with pytest.raises(InvalidTransition):
            proctor_unlock(s, "proctor-1", 0)

    def test_relock_after_unlock(self):
        s = drive_to_lock()
        s, _ = proctor_unlock(s, "p", 10**6)
        ts = 10**6 + 10**4
        for _ in range(4):
            for i in range(15):
                s, _ = observe(s, abnormal(i), ts)
                ts += 40
            ts += 5000
        assert s.state is SessionState.LOCKED and s.violation_count == 4

    def test_end_from_locked_and_monitoring(self):
        s = drive_to_lock()
        s, events = proctor_end(s, "p", 10**6)
        assert s.state is SessionState.ENDED
        assert events[0].kind is EventKind.ENDED

        s2 = new_session("bob")
        s2, _ = proctor_end(s2, "p", 0)
        assert s2.state is SessionState.ENDED

    def test_end_twice_rejected(self):
        s = new_session("alice")
        s, _ = proctor_end(s, "p", 0)
        with pytest.raises(SessionEnded):
            proctor_end(s, "p", 1)

    def test_no_unlock_after_end(self):
        s = drive_to_lock()
        s, _ = proctor_end(s, "p", 10**6)
        with pytest.raises(SessionEnded):
            proctor_unlock(s, "p", 10**6 + 1)


class TestMonotonicity:
    def test_violation_count_monotone_between_unlocks(self):
        policy = ViolationPolicy(window_frames=2, cooldown_ms=0)
        s = new_session("alice", policy)
        prev = 0
        ts = 0
        rng = np.random.default_rng(0)
        for i in range(200):
            if s.state is not SessionState.MONITORING:
                break
            v = abnormal(i) if rng.random() < 0.7 else normal(i)
            s, _ = observe(s, v, ts)
            ts += 40
            assert s.violation_count >= prev
            prev = s.violation_count


class TestReplay:
    def test_empty_log(self):
        s = replay("alice", [])
        assert s == new_session("alice")

    def test_golden_lock_scenario(self):
        live = drive_to_lock()
        rebuilt = replay("alice", live.events)
        assert rebuilt == live
        assert rebuilt.state is SessionState.LOCKED and rebuilt.violation_count == 4

    def test_seq_gap_detected(self):
        live = drive_to_lock()
        gap = [e for e in live.events if e.seq != 5]
        with pytest.raises(CorruptLog):
            replay("alice", gap)

    def test_impossible_transition_detected(self):
        events = [SessionEvent(seq=1, ts_ms=0, kind=EventKind.UNLOCKED, payload={"actor": "p"})]
        with pytest.raises(CorruptLog):
            replay("alice", events)

    def test_orphan_derived_event_detected(self):
        events = [SessionEvent(seq=1, ts_ms=0, kind=EventKind.VIOLATION, payload={"violation_count": 1})]
        with pytest.raises(CorruptLog):
            replay("alice", events)

    def test_fuzz_replay_equals_live(self):
        rng = np.random.default_rng(42)
        for script in range(100):
            policy = ViolationPolicy(
                window_frames=int(rng.integers(1, 6)),
                cooldown_ms=int(rng.integers(0, 300)),
                lock_threshold=int(rng.integers(1, 4)),
            )
            live = new_session(f"s{script}", policy)
            ts = 0
            for _ in range(int(rng.integers(5, 60))):
                ts += int(rng.integers(1, 120))
                roll = rng.random()
                try:
                    if roll < 0.75:
                        v = abnormal(p=float(rng.random())) if rng.random() < 0.6 else normal()
                        live, _ = observe(live, v, ts)
                    elif roll < 0.9:
                        live, _ = proctor_unlock(live, "p", ts)
                    else:
                        live, _ = proctor_end(live, "p", ts)
                except (InvalidTransition, SessionEnded):
                    continue
            rebuilt = replay(f"s{script}", live.events, policy)
            assert rebuilt == live


class TestSessionRow:
    def test_row_fields(self):
        s = new_session("alice")
        s, _ = observe(s, abnormal(p=0.77), 1234)
        row = session_row(s)
        assert row == {
            "student_id": "alice",
            "state": "monitoring",
            "violation_count": 0,
            "last_verdict_ts_ms": 1234,
            "last_p_abnormal": 0.77,
            "no_face": False,
        }


class TestEventSerialization:
    def test_round_trip(self):
        live = drive_to_lock()
        for ev in live.events:
            assert SessionEvent.from_dict(ev.as_dict()) == ev
