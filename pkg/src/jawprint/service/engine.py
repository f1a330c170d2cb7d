"""Continuous-authentication engine: sessions, scoring, warnings, actions.

The operational rule is warn-don't-terminate: a below-threshold window emits
a failure event, W consecutive failures (or a high rolling failure rate)
raise a warning, and only an operator action ever terminates a session. The
event log is append-only and every state snapshot is a pure fold over it.
"""

from __future__ import annotations

import queue
import threading
import time
import uuid
from dataclasses import dataclass, field, asdict

import numpy as np

from ..errors import (
    InvalidTransition,
    SessionNotActive,
    SessionNotFound,
    UnknownLocation,
    UnknownUser,
)
from ..features import compute_window_features, fuse
from ..pipeline import lstm_probabilities, mode_locations, svm_probability, window_channels
from ..signal import SensorLocation, Window, WindowOrigin
from ..verifiers import LstmModel, SvmModel

STATUS_ACTIVE = "active"
STATUS_TERMINATED = "terminated"
STATUS_PENDING_STEPUP = "verified-pending-stepup"

KIND_WINDOW_PASS = "window_pass"
KIND_WINDOW_FAILURE = "window_failure"
KIND_WARNING = "warning_triggered"
KIND_STEPUP = "stepup_requested"
KIND_TERMINATED = "terminated"
KIND_VERIFIED = "verified"
KIND_DATA_GAP = "data_gap"

ACTIONS = ("terminate", "request_stepup", "mark_verified")

RECENT_SCORES = 100
SUBSCRIBER_BUFFER = 1000


@dataclass(frozen=True)
class WarningPolicy:
    consecutive_failures: int = 3      # W
    rolling_window: int = 20
    rolling_rate: float = 0.30

    def __post_init__(self):
        if self.consecutive_failures < 1:
            raise ValueError("consecutive_failures must be >= 1")


@dataclass(frozen=True)
class WarningEvent:
    session_id: str
    window_index: int  # -1 for action/stream events without a window
    kind: str
    score: float | None
    threshold: float | None
    timestamp: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SessionState:
    session_id: str
    user_id: str
    status: str = STATUS_ACTIVE
    window_count: int = 0
    failure_count: int = 0
    consecutive_failures: int = 0
    recent_scores: list = field(default_factory=list)
    event_count: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def fold_events(session_id: str, user_id: str, events) -> SessionState:
    """Rebuild the snapshot purely from the event log."""
    state = SessionState(session_id=session_id, user_id=user_id)
    for ev in events:
        state.event_count += 1
        if ev.kind in (KIND_WINDOW_PASS, KIND_WINDOW_FAILURE):
            state.window_count += 1
            state.recent_scores.append(ev.score)
            if len(state.recent_scores) > RECENT_SCORES:
                state.recent_scores.pop(0)
            if ev.kind == KIND_WINDOW_FAILURE:
                state.failure_count += 1
                state.consecutive_failures += 1
            else:
                state.consecutive_failures = 0
        elif ev.kind == KIND_TERMINATED:
            state.status = STATUS_TERMINATED
        elif ev.kind == KIND_STEPUP:
            state.status = STATUS_PENDING_STEPUP
        elif ev.kind == KIND_VERIFIED:
            state.status = STATUS_ACTIVE
            state.consecutive_failures = 0
    return state


class WindowScorer:
    """Scores one aligned window group exactly like the batch pipeline."""

    def __init__(self, model, threshold: float, mode: str):
        self.model = model
        self.threshold = float(threshold)
        self.mode = mode
        self.locations = mode_locations(mode)

    def score(self, windows_by_location: dict) -> float:
        if isinstance(self.model, SvmModel):
            per_loc = {loc: compute_window_features(windows_by_location[loc]) for loc in self.locations}
            vector = fuse(per_loc) if len(self.locations) == 3 else per_loc[self.locations[0]]
            return float(svm_probability(self.model, vector))
        if isinstance(self.model, LstmModel):
            seq = window_channels(windows_by_location, self.locations)
            return float(lstm_probabilities(self.model, [seq])[0])
        raise TypeError(f"unsupported model {type(self.model).__name__}")


class _Session:
    def __init__(self, session_id: str, user_id: str, scorer: WindowScorer, policy: WarningPolicy,
                 window_length: int, rate: float):
        self.session_id = session_id
        self.user_id = user_id
        self.scorer = scorer
        self.policy = policy
        self.window_length = window_length
        self.rate = rate
        self.lock = threading.Lock()
        self.events: list[WarningEvent] = []
        self.state = SessionState(session_id=session_id, user_id=user_id)
        self.buffers = {loc: [] for loc in scorer.locations}
        self.last_t = {loc: None for loc in scorer.locations}
        self.window_index = 0
        self.rolling: list[bool] = []  # True = failure
        self.rolling_alarmed = False
        self.gap_alarmed = False
        self.subscribers: list[queue.Queue] = []

    # -- internals; all called with the lock held --

    def _emit(self, kind: str, window_index: int = -1, score=None, threshold=None) -> WarningEvent:
        ev = WarningEvent(
            session_id=self.session_id,
            window_index=window_index,
            kind=kind,
            score=score,
            threshold=threshold,
            timestamp=time.time(),
        )
        self.events.append(ev)
        self._apply(ev)
        dead = []
        for q in self.subscribers:
            try:
                q.put_nowait(ev)
            except queue.Full:
                dead.append(q)  # slow subscriber: drop it, never stall ingestion
        for q in dead:
            self.subscribers.remove(q)
        return ev

    def _apply(self, ev: WarningEvent) -> None:
        st = self.state
        st.event_count += 1
        if ev.kind in (KIND_WINDOW_PASS, KIND_WINDOW_FAILURE):
            st.window_count += 1
            st.recent_scores.append(ev.score)
            if len(st.recent_scores) > RECENT_SCORES:
                st.recent_scores.pop(0)
            if ev.kind == KIND_WINDOW_FAILURE:
                st.failure_count += 1
                st.consecutive_failures += 1
            else:
                st.consecutive_failures = 0
        elif ev.kind == KIND_TERMINATED:
            st.status = STATUS_TERMINATED
        elif ev.kind == KIND_STEPUP:
            st.status = STATUS_PENDING_STEPUP
        elif ev.kind == KIND_VERIFIED:
            st.status = STATUS_ACTIVE
            st.consecutive_failures = 0

    def _close_window(self) -> list[WarningEvent]:
        group = {}
        for loc in self.scorer.locations:
            rows = self.buffers[loc][: self.window_length]
            del self.buffers[loc][: self.window_length]
            group[loc] = Window(
                location=loc,
                rate=self.rate,
                data=np.array([r[1] for r in rows], dtype=np.float64),
                origin=WindowOrigin(self.user_id, "live", 0, self.window_index),
            )
        score = self.scorer.score(group)
        passed = score >= self.scorer.threshold
        emitted = [
            self._emit(
                KIND_WINDOW_PASS if passed else KIND_WINDOW_FAILURE,
                window_index=self.window_index,
                score=score,
                threshold=self.scorer.threshold,
            )
        ]
        if not passed and self.state.consecutive_failures == self.policy.consecutive_failures:
            emitted.append(
                self._emit(KIND_WARNING, window_index=self.window_index, score=score,
                           threshold=self.scorer.threshold)
            )
        self.rolling.append(not passed)
        if len(self.rolling) > self.policy.rolling_window:
            self.rolling.pop(0)
        if len(self.rolling) == self.policy.rolling_window:
            rate = sum(self.rolling) / len(self.rolling)
            if rate >= self.policy.rolling_rate and not self.rolling_alarmed:
                self.rolling_alarmed = True
                emitted.append(
                    self._emit(KIND_WARNING, window_index=self.window_index, score=score,
                               threshold=self.scorer.threshold)
                )
            elif rate < self.policy.rolling_rate:
                self.rolling_alarmed = False
        self.window_index += 1
        return emitted


class AuthEngine:
    """Session registry; safe for concurrent use across many sessions."""

    def __init__(self, scorers: dict, policy: WarningPolicy = WarningPolicy(),
                 window_length: int = 250, rate: float = 100.0):
        self._scorers = scorers  # user_id -> WindowScorer
        self._policy = policy
        self._window_length = window_length
        self._rate = rate
        self._sessions: dict[str, _Session] = {}
        self._registry_lock = threading.Lock()

    def users(self) -> list[str]:
        return sorted(self._scorers)

    def create_session(self, user_id: str) -> str:
        if user_id not in self._scorers:
            raise UnknownUser(f"no enrolled model for {user_id!r}")
        session_id = uuid.uuid4().hex
        session = _Session(
            session_id, user_id, self._scorers[user_id], self._policy,
            self._window_length, self._rate,
        )
        with self._registry_lock:
            self._sessions[session_id] = session
        return session_id

    def _get(self, session_id: str) -> _Session:
        with self._registry_lock:
            if session_id not in self._sessions:
                raise SessionNotFound(session_id)
            return self._sessions[session_id]

    def session_ids(self) -> list[str]:
        with self._registry_lock:
            return list(self._sessions)

    def ingest_samples(self, session_id: str, location_token: str, samples) -> list[WarningEvent]:
        """Buffer a batch of (t, ax, ay, az); score every completed window."""
        session = self._get(session_id)
        try:
            location = SensorLocation.from_token(location_token)
        except ValueError:
            raise UnknownLocation(location_token) from None
        with session.lock:
            if session.state.status == STATUS_TERMINATED:
                raise SessionNotActive(f"session {session_id} is terminated")
            if location not in session.buffers:
                raise UnknownLocation(f"{location_token} is not enrolled for this session")
            for s in samples:
                t, ax, ay, az = float(s[0]), float(s[1]), float(s[2]), float(s[3])
                session.buffers[location].append((t, (ax, ay, az)))
                session.last_t[location] = t

            emitted: list[WarningEvent] = []
            while all(len(session.buffers[loc]) >= session.window_length for loc in session.scorer.locations):
                emitted.extend(session._close_window())

            # Straggler check: one location running >2 s ahead of another.
            known = [t for t in session.last_t.values() if t is not None]
            if len(known) == len(session.last_t) and known:
                lag = max(known) - min(known)
                if lag > 2.0 and not session.gap_alarmed:
                    session.gap_alarmed = True
                    emitted.append(session._emit(KIND_DATA_GAP))
                elif lag <= 2.0:
                    session.gap_alarmed = False
            return emitted

    def operator_action(self, session_id: str, action: str) -> SessionState:
        session = self._get(session_id)
        if action not in ACTIONS:
            raise InvalidTransition(f"unknown action {action!r}")
        with session.lock:
            status = session.state.status
            if status == STATUS_TERMINATED:
                raise InvalidTransition("session already terminated")
            if action == "terminate":
                session._emit(KIND_TERMINATED)
            elif action == "request_stepup":
                if status == STATUS_PENDING_STEPUP:
                    raise InvalidTransition("step-up already pending")
                session._emit(KIND_STEPUP)
            elif action == "mark_verified":
                session._emit(KIND_VERIFIED)
        return self.get_status(session_id)

    def get_status(self, session_id: str) -> SessionState:
        session = self._get(session_id)
        with session.lock:
            st = session.state
            return SessionState(
                session_id=st.session_id,
                user_id=st.user_id,
                status=st.status,
                window_count=st.window_count,
                failure_count=st.failure_count,
                consecutive_failures=st.consecutive_failures,
                recent_scores=list(st.recent_scores),
                event_count=st.event_count,
            )

    def events_snapshot(self, session_id: str, start: int = 0) -> list[WarningEvent]:
        session = self._get(session_id)
        with session.lock:
            return list(session.events[start:])

    def subscribe(self, session_id: str) -> tuple[list[WarningEvent], queue.Queue]:
        """Atomically snapshot the log and register a live queue (no gaps)."""
        session = self._get(session_id)
        q: queue.Queue = queue.Queue(maxsize=SUBSCRIBER_BUFFER)
        with session.lock:
            snapshot = list(session.events)
            session.subscribers.append(q)
        return snapshot, q

    def unsubscribe(self, session_id: str, q: queue.Queue) -> None:
        try:
            session = self._get(session_id)
        except SessionNotFound:
            return
        with session.lock:
            if q in session.subscribers:
                session.subscribers.remove(q)

    def rebuild_state(self, session_id: str) -> SessionState:
        """Fold the event log; used to cross-check incremental state."""
        session = self._get(session_id)
        with session.lock:
            return fold_events(session.session_id, session.user_id, session.events)
