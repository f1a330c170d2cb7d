import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from jawprint.dataset import Dataset
from jawprint.errors import (
    InvalidTransition,
    SessionNotActive,
    SessionNotFound,
    UnknownLocation,
    UnknownUser,
)
from jawprint.pipeline import (
    evaluate_user,
    load_cohort,
    mode_locations,
    svm_probability,
)
from jawprint.features import compute_window_features, fuse
from jawprint.service import (
    AuthEngine,
    WarningPolicy,
    WindowScorer,
    create_app,
    fold_events,
    load_scorers,
)
from jawprint.service.engine import (
    KIND_DATA_GAP,
    KIND_TERMINATED,
    KIND_WARNING,
    KIND_WINDOW_FAILURE,
    KIND_WINDOW_PASS,
    STATUS_ACTIVE,
    STATUS_PENDING_STEPUP,
    STATUS_TERMINATED,
)
from jawprint.signal import Activity, LOCATION_ORDER
from jawprint.synthgen import write_dataset
from jawprint.verifiers import save_model


class StubScorer(WindowScorer):
    """Score = the window's first chin ax sample; lets tests steer outcomes."""

    def __init__(self, threshold=0.5):
        self.threshold = threshold
        self.mode = "chin"
        self.locations = mode_locations("chin")

    def score(self, windows_by_location):
        return float(windows_by_location[self.locations[0]].data[0, 0])


def chin_batch(value, n=250, t0=0.0):
    return [(t0 + i / 100.0, value, 0.0, 0.0) for i in range(n)]


@pytest.fixture
def engine():
    return AuthEngine({"alice": StubScorer()}, policy=WarningPolicy(), window_length=250, rate=100.0)


class TestSessionLifecycle:
    def test_create_for_enrolled_user(self, engine):
        sid = engine.create_session("alice")
        assert engine.get_status(sid).status == STATUS_ACTIVE

    def test_unknown_user(self, engine):
        with pytest.raises(UnknownUser):
            engine.create_session("mallory")

    def test_distinct_ids_per_session(self, engine):
        assert engine.create_session("alice") != engine.create_session("alice")

    def test_unknown_session(self, engine):
        with pytest.raises(SessionNotFound):
            engine.get_status("nope")


class TestIngest:
    def test_incomplete_window_no_events(self, engine):
        sid = engine.create_session("alice")
        events = engine.ingest_samples(sid, "chin", chin_batch(0.9, n=249))
        assert events == []
        assert engine.get_status(sid).window_count == 0

    def test_window_closes_at_250(self, engine):
        sid = engine.create_session("alice")
        events = engine.ingest_samples(sid, "chin", chin_batch(0.9))
        assert [e.kind for e in events] == [KIND_WINDOW_PASS]
        assert engine.get_status(sid).window_count == 1

    def test_three_consecutive_failures_one_warning(self, engine):
        sid = engine.create_session("alice")
        kinds = []
        for k in range(4):
            evs = engine.ingest_samples(sid, "chin", chin_batch(0.1, t0=k * 2.5))
            kinds.extend(e.kind for e in evs)
        assert kinds.count(KIND_WARNING) == 1
        assert kinds == [
            KIND_WINDOW_FAILURE,
            KIND_WINDOW_FAILURE,
            KIND_WINDOW_FAILURE,
            KIND_WARNING,
            KIND_WINDOW_FAILURE,
        ]

    def test_pass_resets_consecutive_counter(self, engine):
        sid = engine.create_session("alice")
        values = (0.1, 0.1, 0.9, 0.1)
        kinds = []
        for k, v in enumerate(values):
            kinds.extend(e.kind for e in engine.ingest_samples(sid, "chin", chin_batch(v, t0=k * 2.5)))
        assert KIND_WARNING not in kinds
        assert engine.get_status(sid).consecutive_failures == 1

    def test_rolling_rate_warning(self):
        engine = AuthEngine(
            {"alice": StubScorer()},
            policy=WarningPolicy(consecutive_failures=100, rolling_window=10, rolling_rate=0.3),
        )
        sid = engine.create_session("alice")
        kinds = []
        pattern = [0.9, 0.9, 0.1, 0.9, 0.1, 0.9, 0.9, 0.9, 0.1, 0.9]  # 3 failures in 10
        for k, v in enumerate(pattern):
            kinds.extend(e.kind for e in engine.ingest_samples(sid, "chin", chin_batch(v, t0=k * 2.5)))
        assert kinds.count(KIND_WARNING) == 1

    def test_unknown_location(self, engine):
        sid = engine.create_session("alice")
        with pytest.raises(UnknownLocation):
            engine.ingest_samples(sid, "forehead", chin_batch(0.5))

    def test_data_gap_event(self):
        scorer = WindowScorer.__new__(WindowScorer)
        scorer.threshold = 0.5
        scorer.mode = "fused"
        scorer.locations = mode_locations("fused")
        scorer.score = lambda group: 0.9
        engine = AuthEngine({"alice": scorer})
        sid = engine.create_session("alice")
        engine.ingest_samples(sid, "chin", chin_batch(0.9, n=100))
        events = engine.ingest_samples(
            sid, "upper_left_cheek", [(5.0, 0.0, 0.0, 0.0)]
        )  # cheek sample arrives 4 s ahead of the chin buffer
        assert KIND_DATA_GAP not in [e.kind for e in events]
        events = engine.ingest_samples(sid, "lower_right_cheek", [(5.1, 0.0, 0.0, 0.0)])
        assert KIND_DATA_GAP in [e.kind for e in events]


class TestActions:
    def test_terminate(self, engine):
        sid = engine.create_session("alice")
        state = engine.operator_action(sid, "terminate")
        assert state.status == STATUS_TERMINATED
        with pytest.raises(SessionNotActive):
            engine.ingest_samples(sid, "chin", chin_batch(0.9))

    def test_stepup_then_verified(self, engine):
        sid = engine.create_session("alice")
        assert engine.operator_action(sid, "request_stepup").status == STATUS_PENDING_STEPUP
        assert engine.operator_action(sid, "mark_verified").status == STATUS_ACTIVE

    def test_double_stepup_rejected(self, engine):
        sid = engine.create_session("alice")
        engine.operator_action(sid, "request_stepup")
        with pytest.raises(InvalidTransition):
            engine.operator_action(sid, "request_stepup")

    def test_actions_after_terminate_rejected(self, engine):
        sid = engine.create_session("alice")
        engine.operator_action(sid, "terminate")
        for action in ("terminate", "request_stepup", "mark_verified"):
            with pytest.raises(InvalidTransition):
                engine.operator_action(sid, action)


class TestEventLog:
    def test_snapshot_equals_fold(self, engine, rng):
        sid = engine.create_session("alice")
        for k in range(12):
            engine.ingest_samples(sid, "chin", chin_batch(float(rng.random()), t0=k * 2.5))
            if rng.random() < 0.3:
                try:
                    engine.operator_action(sid, str(rng.choice(["request_stepup", "mark_verified"])))
                except InvalidTransition:
                    pass
        snap = engine.get_status(sid)
        fold = engine.rebuild_state(sid)
        assert snap.to_dict() == {**fold.to_dict(), "session_id": snap.session_id, "user_id": "alice"}

    def test_random_event_sequences_never_terminate_via_ingest(self, rng):
        for trial in range(60):
            engine = AuthEngine({"u": StubScorer()}, policy=WarningPolicy())
            sid = engine.create_session("u")
            for k in range(int(rng.integers(1, 8))):
                engine.ingest_samples(sid, "chin", chin_batch(float(rng.random()), t0=k * 2.5))
            state = engine.get_status(sid)
            assert state.status == STATUS_ACTIVE
            assert state.to_dict() == {**engine.rebuild_state(sid).to_dict(), "session_id": sid, "user_id": "u"}

    def test_replay_returns_all_events_in_order(self, engine):
        sid = engine.create_session("alice")
        for k in range(5):
            engine.ingest_samples(sid, "chin", chin_batch(0.2, t0=k * 2.5))
        events = engine.events_snapshot(sid)
        assert [e.window_index for e in events if e.kind in (KIND_WINDOW_PASS, KIND_WINDOW_FAILURE)] == list(range(5))

    def test_two_subscribers_see_identical_sequences(self, engine):
        sid = engine.create_session("alice")
        engine.ingest_samples(sid, "chin", chin_batch(0.9))
        snap_a, q_a = engine.subscribe(sid)
        snap_b, q_b = engine.subscribe(sid)
        for k in range(1, 4):
            engine.ingest_samples(sid, "chin", chin_batch(0.1, t0=k * 2.5))

        def drain(snapshot, q):
            out = [e.kind for e in snapshot]
            while not q.empty():
                out.append(q.get().kind)
            return out

        assert drain(snap_a, q_a) == drain(snap_b, q_b)


@pytest.fixture(scope="module")
def trained_setup(tmp_path_factory):
    root = tmp_path_factory.mktemp("svcdata")
    write_dataset(root, n_users=3, seed=31, duration=40.0, with_landmarks=False)
    cohort = load_cohort(Dataset(root), Activity.SEATED)
    result, model = evaluate_user(cohort, "user00", "svm", "fused")
    return cohort, result, model


class TestServiceMatchesBatch:
    def test_scores_bit_equal(self, trained_setup):
        cohort, result, model = trained_setup
        scorer = WindowScorer(model, result.threshold, "fused")
        engine = AuthEngine({"user00": scorer})
        sid = engine.create_session("user00")

        session = cohort.session("user00", 2)
        n_windows = 4
        events = []
        for loc in LOCATION_ORDER:
            samples = []
            for w in range(n_windows):
                win = session.windows[loc][w]
                t0 = w * 2.5
                samples.extend(
                    (t0 + i / 100.0, *win.data[i]) for i in range(win.length)
                )
            events.extend(engine.ingest_samples(sid, loc.value, samples))

        service_scores = [e.score for e in events if e.kind in (KIND_WINDOW_PASS, KIND_WINDOW_FAILURE)]
        batch_scores = []
        for w in range(n_windows):
            vector = fuse({loc: compute_window_features(session.windows[loc][w]) for loc in LOCATION_ORDER})
            batch_scores.append(svm_probability(model, vector))
        assert service_scores == batch_scores  # bit-for-bit


class TestHttpApi:
    @pytest.fixture
    def client(self):
        engine = AuthEngine({"alice": StubScorer()})
        return TestClient(create_app(engine))

    def test_create_and_status(self, client):
        r = client.post("/sessions", json={"user_id": "alice"})
        assert r.status_code == 200
        sid = r.json()["session_id"]
        status = client.get(f"/sessions/{sid}/status").json()
        assert status["user_id"] == "alice"
        assert status["window_count"] == 0
        assert client.get("/sessions").json()[0]["session_id"] == sid

    def test_unknown_user_404(self, client):
        assert client.post("/sessions", json={"user_id": "mallory"}).status_code == 404

    def test_ingest_and_events_replay(self, client):
        sid = client.post("/sessions", json={"user_id": "alice"}).json()["session_id"]
        batch = {
            "location": "chin",
            "samples": [{"t": i / 100.0, "ax": 0.1, "ay": 0.0, "az": 0.0} for i in range(250)],
        }
        r = client.post(f"/sessions/{sid}/samples", json=batch)
        assert r.status_code == 200
        assert [e["kind"] for e in r.json()["events"]] == ["window_failure"]

        replay = client.get(f"/sessions/{sid}/events", params={"follow": "false"})
        lines = [json.loads(l) for l in replay.text.splitlines() if l]
        assert [e["kind"] for e in lines] == ["window_failure"]
        assert lines[0]["score"] == pytest.approx(0.1)

    def test_bad_location_400(self, client):
        sid = client.post("/sessions", json={"user_id": "alice"}).json()["session_id"]
        r = client.post(
            f"/sessions/{sid}/samples",
            json={"location": "nose", "samples": [{"t": 0, "ax": 0, "ay": 0, "az": 0}]},
        )
        assert r.status_code == 400

    def test_actions_round_trip(self, client):
        sid = client.post("/sessions", json={"user_id": "alice"}).json()["session_id"]
        r = client.post(f"/sessions/{sid}/actions", json={"action": "request_stepup"})
        assert r.json()["status"] == "verified-pending-stepup"
        r = client.post(f"/sessions/{sid}/actions", json={"action": "terminate"})
        assert r.json()["status"] == "terminated"
        r = client.post(f"/sessions/{sid}/actions", json={"action": "terminate"})
        assert r.status_code == 409
        batch = {"location": "chin", "samples": [{"t": 0, "ax": 0, "ay": 0, "az": 0}]}
        assert client.post(f"/sessions/{sid}/samples", json=batch).status_code == 409

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/zzz/status").status_code == 404
        assert client.post("/sessions/zzz/actions", json={"action": "terminate"}).status_code == 404


class TestLoadScorers:
    def test_loads_models_from_threshold_index(self, trained_setup, tmp_path):
        _, result, model = trained_setup
        save_model(model, tmp_path / "user00.svm.jwpr")
        (tmp_path / "thresholds.json").write_text(
            json.dumps(
                {
                    "users": {
                        "user00": {
                            "svm": {
                                "model": "user00.svm.jwpr",
                                "threshold": result.threshold,
                                "eer": result.eer,
                                "mode": "fused",
                            }
                        }
                    }
                }
            )
        )
        scorers = load_scorers(tmp_path, "svm")
        assert list(scorers) == ["user00"]
        assert scorers["user00"].threshold == result.threshold
        assert load_scorers(tmp_path, "lstm") == {}
