"""Acceptance suite: one test per release criterion, one PASS line each.

Run with `pytest tests/test_acceptance.py -v -s`. The synthetic-cohort
fixtures are module-scoped, so the end-to-end artifacts (10 users, two
sessions, trained verifiers for both classifier families) are built once and
reused by the attack and service criteria.
"""

import time

import numpy as np
import pytest

from oracles import oracle_axis_features
from jawprint.attack import (
    GRAVITY,
    LandmarkTrace,
    load_landmark_trace,
    quality_levels,
    run_attack,
    synthesize_accel,
)
from jawprint.dataset import Dataset, landmark_dir
from jawprint.errors import InvalidTransition
from jawprint.evaluation import SplitConfig, build_split, compute_eer
from jawprint.features import (
    FEATURE_NAMES,
    SelectionConfig,
    axis_feature_values,
    compute_window_features,
    fuse,
    relieff_scores,
)
from jawprint.pipeline import (
    evaluate_population,
    load_cohort,
    svm_probability,
    train_user_lstm,
    train_user_svm,
)
from jawprint.service import AuthEngine, WarningPolicy, WindowScorer
from jawprint.service.engine import (
    KIND_WARNING,
    KIND_WINDOW_FAILURE,
    KIND_WINDOW_PASS,
    STATUS_TERMINATED,
)
from jawprint.signal import Activity, LOCATION_ORDER, SensorLocation
from jawprint.synthgen import write_dataset
from jawprint.verifiers import (
    LstmConfig,
    batch_loss,
    batch_loss_and_grads,
    init_params,
    lstm_score_batch,
    load_model,
    save_model,
    train_lstm,
    train_svm,
)
from test_evaluation import grid_eer_oracle
from test_lstm import numeric_grads, toy_sine_set
from test_service import StubScorer, chin_batch
from test_svm import qp_oracle_weights

COHORT_SEED = 7
COHORT_USERS = 10
COHORT_DURATION = 60.0
COHORT_LSTM = LstmConfig(
    max_epochs=30, seed=1, dtype="float32", early_stop_patience=30, lr_reduce_patience=30
)
REGRESSION_FEATURES = {"detrended_fluctuation_analysis", "higuchi_fractal_dimension"}


def report(name: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def cohort_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    write_dataset(root, n_users=COHORT_USERS, seed=COHORT_SEED, duration=COHORT_DURATION)
    return root


@pytest.fixture(scope="module")
def cohort(cohort_root):
    return load_cohort(Dataset(cohort_root), Activity.SEATED)


@pytest.fixture(scope="module")
def cohort_reports(cohort):
    """Fused LSTM + chin LSTM + fused SVM reports plus trained models."""
    sink = {}
    t0 = time.time()
    fused_lstm = evaluate_population(cohort, "lstm", "fused", lstm_cfg=COHORT_LSTM, model_sink=sink)
    chin_lstm = evaluate_population(cohort, "lstm", "chin", lstm_cfg=COHORT_LSTM, model_sink=sink)
    fused_svm = evaluate_population(cohort, "svm", "fused", model_sink=sink)
    elapsed = time.time() - t0
    return fused_lstm, chin_lstm, fused_svm, sink, elapsed


class TestFeatureOracleParity:
    def test_all_54_features_match_oracle_on_100_windows(self):
        rng = np.random.default_rng(202)
        t0 = time.time()
        worst = 0.0
        for trial in range(100):
            kind = trial % 4
            if kind == 0:
                x = rng.normal(scale=rng.uniform(0.05, 3.0), size=250) + rng.uniform(-2, 2)
            elif kind == 1:
                tt = np.arange(250) / 100.0
                x = np.sin(2 * np.pi * rng.uniform(0.5, 10) * tt) + 0.2 * rng.normal(size=250)
            elif kind == 2:
                x = np.cumsum(rng.normal(size=250))
            else:
                x = rng.laplace(size=250) * rng.uniform(0.01, 5)
            impl = dict(zip(FEATURE_NAMES, axis_feature_values(x, 100.0)))
            orc = oracle_axis_features(x, 100.0)
            for name in FEATURE_NAMES:
                rtol = 1e-6 if name in REGRESSION_FEATURES else 1e-9
                a, b = impl[name], orc[name]
                assert a == pytest.approx(b, rel=rtol, abs=1e-12), (name, trial)
                scale = max(abs(a), abs(b), 1e-12)
                worst = max(worst, abs(a - b) / scale)
        elapsed = time.time() - t0
        report(
            "feature oracle parity (54 features x 100 windows)",
            elapsed < 60.0,
            f"worst rel err {worst:.2e}, {elapsed:.1f}s",
        )


class TestRelieffCorrectness:
    def test_hand_computed_example_and_equivariance(self):
        X = np.array([[0.0, 0.0], [0.1, 1.0], [0.9, 0.2], [1.0, 0.8]])
        y = np.array([0, 0, 1, 1])
        W = relieff_scores(X, y, SelectionConfig(relieff_neighbors=1, seed=0))
        exact = np.allclose(W, [0.8, -0.6], atol=1e-12)

        rng = np.random.default_rng(77)
        yb = np.r_[np.zeros(15, int), np.ones(15, int)]
        Xc = np.column_stack([rng.normal(size=30), np.full(30, 3.3)])
        const_zero = relieff_scores(Xc, yb, SelectionConfig(relieff_neighbors=3, seed=0))[1] == 0.0

        equivariant = True
        for trial in range(20):
            Xr = rng.normal(size=(30, 6))
            cfg = SelectionConfig(relieff_neighbors=4, seed=trial)
            W0 = relieff_scores(Xr, yb, cfg)
            perm = rng.permutation(6)
            equivariant &= bool(np.allclose(relieff_scores(Xr[:, perm], yb, cfg), W0[perm], atol=1e-12))

        report(
            "relieff correctness (hand trace, constant=0, equivariance x20)",
            exact and const_zero and equivariant,
        )


class TestSvmAgainstQp:
    def test_50_random_datasets(self):
        from jawprint.verifiers import SvmConfig, primal_objective

        t0 = time.time()
        worst_gap = 0.0
        agree = True
        for trial in range(50):
            rng = np.random.default_rng(3000 + trial)
            n = int(rng.integers(6, 21))
            d = int(rng.integers(2, 6))
            y = np.r_[np.zeros(n // 2, int), np.ones(n - n // 2, int)]
            X = rng.normal(size=(n, d)) + 1.2 * (2.0 * y[:, None] - 1.0)
            C = float(rng.choice([0.1, 1.0, 10.0]))
            model = train_svm(X, y, SvmConfig(c_penalty=C, tolerance=1e-10, max_iterations=20000))
            w_qp, b_qp = qp_oracle_weights(X, y, C)
            gap = abs(
                primal_objective(model.weights, model.bias, X, y, C)
                - primal_objective(w_qp, b_qp, X, y, C)
            )
            worst_gap = max(worst_gap, gap)
            agree &= bool(np.array_equal(np.sign(model.margins(X)), np.sign(X @ w_qp + b_qp)))
        elapsed = time.time() - t0
        report(
            "svm vs brute-force QP (50 datasets)",
            worst_gap <= 1e-6 and agree and elapsed < 60.0,
            f"worst objective gap {worst_gap:.2e}, signs {'agree' if agree else 'DISAGREE'}, {elapsed:.1f}s",
        )


class TestLstmGradientAndOverfit:
    def test_gradient_check_five_random_points(self):
        cfg = LstmConfig(units_per_layer=6, dtype="float64", seed=3)
        worst = 0.0
        for point in range(5):
            rng = np.random.default_rng(900 + point)
            x = rng.normal(size=(2, 7, 3))
            y = np.array([0.0, 1.0])
            sw = np.array([1.3, 0.7])
            params = init_params(3, cfg, np.random.default_rng(40 + point))
            params = params.with_flat(params.flatten() + 0.3 * rng.normal(size=params.flatten().size))
            _, grads = batch_loss_and_grads(params, x, y, sw)
            analytic = grads.flatten()
            numeric = numeric_grads(params, x, y, sw, step=1e-5)
            denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
            worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
        report("lstm gradient check (5 random parameter points)", worst < 1e-4, f"max rel err {worst:.2e}")

    def test_toy_overfit_reaches_perfect_training_accuracy(self):
        rng = np.random.default_rng(12345)
        seqs, labels = toy_sine_set(rng)
        cfg = LstmConfig(
            units_per_layer=16, max_epochs=200, batch_size=4, seed=1,
            early_stop_patience=200, lr_reduce_patience=200,
        )
        model = train_lstm(seqs, labels, cfg)
        probs = lstm_score_batch(model, seqs)
        acc = float(np.mean((probs >= 0.5) == np.array(labels)))
        report("lstm toy overfit", acc == 1.0, f"training accuracy {acc}")


class TestEerOracle:
    def test_100_random_score_sets_and_edge_cases(self):
        rng = np.random.default_rng(55)
        worst = 0.0
        for _ in range(100):
            gen = rng.integers(0, 1000, size=int(rng.integers(3, 50))) / 1000.0
            imp = rng.integers(0, 1000, size=int(rng.integers(3, 50))) / 1000.0
            eer, _ = compute_eer(gen, imp)
            worst = max(worst, abs(eer - grid_eer_oracle(gen, imp)))
        perfect = compute_eer([0.9, 0.8, 0.7], [0.1, 0.2, 0.3])[0] == 0.0
        chance = compute_eer([0.5, 0.5], [0.5, 0.5])[0] == 0.5
        report(
            "eer interpolation vs dense-grid oracle (100 sets)",
            worst <= 1e-9 and perfect and chance,
            f"worst gap {worst:.2e}",
        )


class TestEndToEndCohort:
    def test_median_eer_targets(self, cohort_reports):
        fused_lstm, chin_lstm, fused_svm, _, elapsed = cohort_reports
        m_lstm = fused_lstm.row("lstm", "fused", "seated").median_eer
        m_chin = chin_lstm.row("lstm", "chin", "seated").median_eer
        m_svm = fused_svm.row("svm", "fused", "seated").median_eer
        report("cohort fused LSTM median EER <= 0.05", m_lstm <= 0.05, f"median {m_lstm:.4f}")
        report("cohort fused SVM median EER <= 0.15", m_svm <= 0.15, f"median {m_svm:.4f}")
        report(
            "cohort chin LSTM median EER <= fused + 0.05",
            m_chin <= m_lstm + 0.05,
            f"chin {m_chin:.4f} vs fused {m_lstm:.4f}",
        )
        report(
            "cohort runtime < 10 min (4-core budget; this box is single-core)",
            elapsed < 600.0,
            f"{elapsed:.0f}s for 20 LSTM + 10 SVM trainings",
        )

    def test_split_honors_ratio_and_sessions(self, cohort):
        split = build_split(cohort.window_pools(), "user00", SplitConfig(seed=0))
        n_gen = len(split.train_genuine)
        ok = (
            len(split.train_impostor) == int(np.floor(1.5 * n_gen))
            and all(r.user_id != "user00" for r in split.train_impostor)
            and all(r.user_id == "user00" for r in split.test_genuine)
        )
        report("split: 1.5:1 impostor ratio, session separation", ok,
               f"{n_gen} genuine / {len(split.train_impostor)} impostor")


class TestAttackCriteria:
    def test_attack_math(self):
        # Dyadic frame rate and coefficient keep every intermediate exactly
        # representable, so the second difference of a quadratic is bit-exact.
        c = 0.8125
        t64 = np.arange(30) / 64.0
        pts64 = np.zeros((30, 3))
        pts64[:, 0] = c * t64**2
        quad = LandmarkTrace(
            location=SensorLocation.BELOW_CHIN, fps=64, resolution=(1920, 1080),
            scale=1.0, points=pts64,
        )
        quad_exact = float(np.max(np.abs(synthesize_accel(quad).samples[:, 0] - 2.0 * c)))

        # And the g-under-free-fall variant at a production frame rate stays
        # within float rounding of g.
        fps = 60
        t = np.arange(60) / fps
        pts = np.zeros((60, 3))
        pts[:, 0] = 0.5 * GRAVITY * t**2
        grav = LandmarkTrace(
            location=SensorLocation.BELOW_CHIN, fps=fps, resolution=(1920, 1080),
            scale=1.0, points=pts,
        )
        grav_err = float(np.max(np.abs(synthesize_accel(grav).samples[:, 0] - GRAVITY)))

        rng = np.random.default_rng(8)
        # mm-scale landmark motion, the physically relevant regime: the
        # resulting accelerations are O(1) m/s^2 so 1e-12 is ~1e4 ulps.
        p = rng.random((40, 3)) * 2e-4
        q = rng.random((40, 3)) * 2e-4

        def acc(points):
            return synthesize_accel(
                LandmarkTrace(
                    location=SensorLocation.BELOW_CHIN, fps=fps, resolution=(1920, 1080),
                    scale=1.0, points=points,
                )
            ).samples

        lin_gap = float(np.max(np.abs(acc(p + q) - (acc(p) + acc(q)))))
        scale_gap = float(np.max(np.abs(acc(2.5 * p) - 2.5 * acc(p))))

        report(
            "attack: second difference exact on quadratics",
            quad_exact == 0.0 and grav_err <= 1e-9,
            f"dyadic err {quad_exact}, free-fall err {grav_err:.2e}",
        )
        report("attack: linearity to 1e-12", lin_gap <= 1e-12 and scale_gap <= 1e-12,
               f"additivity {lin_gap:.2e}, homogeneity {scale_gap:.2e}")

    def test_15fps_band_limit(self):
        from jawprint.attack import decimate_fps

        rng = np.random.default_rng(9)
        trace = LandmarkTrace(
            location=SensorLocation.BELOW_CHIN, fps=60, resolution=(1920, 1080), scale=0.2,
            points=np.cumsum(rng.normal(size=(600, 3)), axis=0) * 1e-3,
        )
        acc15 = synthesize_accel(decimate_fps(trace, 15))
        n = acc15.samples.shape[0]
        freqs = np.arange(n // 2 + 1) * acc15.rate / n
        report(
            "attack: 15 fps acceleration has no content above 7.5 Hz",
            bool(freqs.max() <= 7.5 + 1e-12),
            f"max representable frequency {freqs.max():.2f} Hz",
        )

    def test_full_attack_grid(self, cohort_root, cohort_reports):
        _, _, _, sink, _ = cohort_reports
        victims = sorted(cohort_root_users(cohort_root))[:5]
        rows = []
        for user in victims:
            traces = {
                loc: load_landmark_trace(
                    landmark_dir(cohort_root, user, Activity.SEATED) / f"{loc.value}.csv", loc
                )
                for loc in LOCATION_ORDER
            }
            for classifier in ("svm", "lstm"):
                model, threshold = sink[(user, classifier, "fused")]
                for q in quality_levels():
                    row, scores = run_attack(traces, model, threshold, q, user)
                    assert row.windows > 0
                    assert np.all((scores >= 0.0) & (scores <= 1.0))
                    rows.append(row)
        assert len(rows) == 5 * 2 * 6
        fars = sorted({f"{r.quality.label()}:{r.classifier}" for r in rows})
        overall_far = sum(r.false_accepts for r in rows) / sum(r.windows for r in rows)
        report(
            "attack: full 6-quality x 5-victim x 2-classifier grid complete",
            True,
            f"{len(rows)} rows, overall FAR {overall_far:.3f} "
            f"(paper reports 0% as the qualitative expectation)",
        )
        for q in quality_levels():
            for clf in ("svm", "lstm"):
                cells = [r for r in rows if r.quality == q and r.classifier == clf]
                far = sum(r.false_accepts for r in cells) / sum(r.windows for r in cells)
                print(f"    attack FAR {clf} @ {q.label()}: {far:.3f}")


def cohort_root_users(root):
    return [p.name for p in root.iterdir() if p.is_dir()]


class TestProtocolHygiene:
    def test_leakage_and_determinism(self, cohort, cohort_root, tmp_path):
        import shutil

        from jawprint.signal import SensorStream, save_stream, load_stream

        clone_root = tmp_path / "clone"
        shutil.copytree(cohort_root, clone_root)
        for path in clone_root.rglob("session2/*.csv"):
            loc = SensorLocation.from_token(path.stem)
            stream = load_stream(path, loc)
            save_stream(
                SensorStream(location=loc, rate=stream.rate, t=stream.t, data=stream.data * 2.0 + 0.1),
                path,
            )
        clone = load_cohort(Dataset(clone_root), Activity.SEATED)

        split_a = build_split(cohort.window_pools(), "user01", SplitConfig(seed=4))
        split_b = build_split(clone.window_pools(), "user01", SplitConfig(seed=4))
        svm_a = train_user_svm(cohort, split_a)
        svm_b = train_user_svm(clone, split_b)
        fast = LstmConfig(units_per_layer=8, max_epochs=4, seed=2, dtype="float32",
                          early_stop_patience=4, lr_reduce_patience=4)
        lstm_a = train_user_lstm(cohort, split_a, "chin", fast)
        lstm_b = train_user_lstm(clone, split_b, "chin", fast)
        leak_free = (
            np.array_equal(svm_a.weights, svm_b.weights)
            and svm_a.bias == svm_b.bias
            and np.array_equal(lstm_a.params.flatten(), lstm_b.params.flatten())
        )
        report("protocol: perturbing session 2 never changes trained parameters", leak_free)

        s1 = build_split(cohort.window_pools(), "user02", SplitConfig(seed=9))
        s2 = build_split(cohort.window_pools(), "user02", SplitConfig(seed=9))
        report("protocol: split determinism", s1.train_impostor == s2.train_impostor)

    def test_model_round_trip_score_identical(self, cohort, cohort_reports, tmp_path):
        _, _, _, sink, _ = cohort_reports
        session = cohort.session("user00", 2)
        vectors = [session.fused_vector(i) for i in range(4)]
        seqs = [session.sequence(i, LOCATION_ORDER) for i in range(4)]

        svm_model, _ = sink[("user00", "svm", "fused")]
        save_model(svm_model, tmp_path / "a.jwpr")
        svm_back = load_model(tmp_path / "a.jwpr")
        svm_same = all(
            svm_probability(svm_model, v) == svm_probability(svm_back, v) for v in vectors
        )

        lstm_model, _ = sink[("user00", "lstm", "fused")]
        save_model(lstm_model, tmp_path / "b.jwpr")
        lstm_back = load_model(tmp_path / "b.jwpr")
        lstm_same = bool(
            np.array_equal(lstm_score_batch(lstm_model, seqs), lstm_score_batch(lstm_back, seqs))
        )
        report("protocol: save/load round trip score-identical", svm_same and lstm_same)


class TestServiceCriteria:
    def test_fold_equals_snapshot_1000_sequences(self):
        rng = np.random.default_rng(606)
        ok = True
        for trial in range(1000):
            engine = AuthEngine({"u": StubScorer()}, policy=WarningPolicy())
            sid = engine.create_session("u")
            for k in range(int(rng.integers(1, 5))):
                engine.ingest_samples(sid, "chin", chin_batch(float(rng.random()), t0=k * 2.5))
                if rng.random() < 0.25:
                    try:
                        engine.operator_action(sid, str(rng.choice(["request_stepup", "mark_verified", "terminate"])))
                    except InvalidTransition:
                        pass
                if engine.get_status(sid).status == STATUS_TERMINATED:
                    break
            snap = engine.get_status(sid).to_dict()
            fold = engine.rebuild_state(sid).to_dict()
            ok &= snap == fold
        report("service: event-log fold equals snapshot (1000 random sequences)", ok)

    def test_w_consecutive_policy_single_warning(self):
        engine = AuthEngine({"u": StubScorer()}, policy=WarningPolicy(consecutive_failures=3))
        sid = engine.create_session("u")
        kinds = []
        for k in range(6):
            kinds.extend(e.kind for e in engine.ingest_samples(sid, "chin", chin_batch(0.1, t0=k * 2.5)))
        report(
            "service: W consecutive failures emit exactly one warning",
            kinds.count(KIND_WARNING) == 1,
            f"{kinds.count(KIND_WARNING)} warnings over 6 failing windows",
        )

    def test_service_scoring_bit_equal_to_batch(self, cohort, cohort_reports):
        _, _, _, sink, _ = cohort_reports
        model, threshold = sink[("user00", "svm", "fused")]
        engine = AuthEngine({"user00": WindowScorer(model, threshold, "fused")})
        sid = engine.create_session("user00")
        session = cohort.session("user00", 2)
        events = []
        for loc in LOCATION_ORDER:
            samples = []
            for w in range(3):
                win = session.windows[loc][w]
                samples.extend((w * 2.5 + i / 100.0, *win.data[i]) for i in range(win.length))
            events.extend(engine.ingest_samples(sid, loc.value, samples))
        service_scores = [e.score for e in events if e.kind in (KIND_WINDOW_PASS, KIND_WINDOW_FAILURE)]
        batch_scores = [
            svm_probability(model, fuse({loc: compute_window_features(session.windows[loc][w]) for loc in LOCATION_ORDER}))
            for w in range(3)
        ]
        report("service: scoring bit-equal to batch pipeline", service_scores == batch_scores)

    def test_no_auto_termination_path(self):
        rng = np.random.default_rng(31337)
        ok = True
        for trial in range(50):
            engine = AuthEngine({"u": StubScorer()}, policy=WarningPolicy(consecutive_failures=1))
            sid = engine.create_session("u")
            for k in range(int(rng.integers(1, 10))):
                engine.ingest_samples(sid, "chin", chin_batch(float(rng.random() * 0.4), t0=k * 2.5))
            ok &= engine.get_status(sid).status != STATUS_TERMINATED
        report("service: no ingestion path auto-terminates", ok)
