"""Shared orchestration: dataset windows to per-user verifiers and scores.

Everything that scores a window goes through the helpers here; the streaming
service reuses them verbatim, which is what makes service scores bit-equal
to batch scores.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import MissingSession
from .evaluation import (
    EvalReport,
    EvalSplit,
    SplitConfig,
    UserResult,
    aggregate_report,
    build_split,
    compute_eer,
)
from .features import (
    FeatureVector,
    SelectionConfig,
    apply_normalizer,
    compute_window_features,
    fit_normalizer,
    fuse,
    relieff_rank,
    select_top,
)
from .signal import LOCATION_ORDER, Activity, RecordingSession, SensorLocation, Window, segment
from .verifiers import (
    LstmConfig,
    LstmModel,
    SvmConfig,
    SvmModel,
    lstm_score_batch,
    train_lstm,
    train_svm,
)

MODE_FUSED = "fused"
MODES = (MODE_FUSED,) + tuple(loc.value for loc in LOCATION_ORDER)


def mode_locations(mode: str) -> tuple[SensorLocation, ...]:
    if mode == MODE_FUSED:
        return LOCATION_ORDER
    return (SensorLocation.from_token(mode),)


def channel_labels(locations) -> tuple[str, ...]:
    return tuple(f"{loc.value}:{axis}" for loc in locations for axis in "XYZ")


def window_channels(windows_by_location: dict, locations) -> np.ndarray:
    """Stack one aligned window per location into a (T, 3*len(locations)) matrix."""
    return np.hstack([windows_by_location[loc].data for loc in locations])


@dataclass
class SessionData:
    """Windows and feature vectors of one (user, activity, session)."""

    user_id: str
    session_index: int
    windows: dict  # SensorLocation -> list[Window]
    features: dict  # SensorLocation -> list[FeatureVector]

    @property
    def n_windows(self) -> int:
        return min(len(v) for v in self.windows.values())

    def fused_vector(self, index: int) -> FeatureVector:
        return fuse({loc: self.features[loc][index] for loc in LOCATION_ORDER})

    def feature_row(self, index: int, locations) -> np.ndarray:
        if len(locations) == 3:
            return self.fused_vector(index).values
        return self.features[locations[0]][index].values

    def sequence(self, index: int, locations) -> np.ndarray:
        return window_channels({loc: self.windows[loc][index] for loc in locations}, locations)


def session_data(session: RecordingSession, window_length: int = 250) -> SessionData:
    windows = {}
    features = {}
    for loc in LOCATION_ORDER:
        ws = segment(
            session.streams[loc],
            window_length,
            user_id=session.user_id,
            activity=session.activity.value,
            session_index=session.session_index,
        )
        windows[loc] = ws
        features[loc] = [compute_window_features(w) for w in ws]
    return SessionData(
        user_id=session.user_id,
        session_index=session.session_index,
        windows=windows,
        features=features,
    )


@dataclass
class CohortData:
    """All sessions of one activity across a user cohort."""

    activity: Activity
    sessions: dict = field(default_factory=dict)  # (user_id, session_index) -> SessionData
    languages: dict = field(default_factory=dict)  # user_id -> language tag

    def users(self) -> list[str]:
        return sorted({u for u, _ in self.sessions})

    def session(self, user_id: str, session_index: int) -> SessionData:
        key = (user_id, session_index)
        if key not in self.sessions:
            raise MissingSession(f"{user_id} session {session_index} not loaded")
        return self.sessions[key]

    def window_pools(self) -> dict:
        pools = {1: {}, 2: {}}
        for (user, sess), data in self.sessions.items():
            pools[sess][user] = data.n_windows
        return pools

    def rows(self, refs, session_index: int, locations) -> np.ndarray:
        return np.stack(
            [self.session(r.user_id, session_index).feature_row(r.index, locations) for r in refs]
        )

    def sequences(self, refs, session_index: int, locations) -> list:
        return [self.session(r.user_id, session_index).sequence(r.index, locations) for r in refs]


def load_cohort(dataset: Dataset, activity: Activity, window_length: int = 250, workers: int = 1) -> CohortData:
    cohort = CohortData(activity=activity)
    keys = [
        (user, sess)
        for user in dataset.users()
        for sess in (1, 2)
        if dataset.has_session(user, activity, sess)
    ]

    def build(key):
        user, sess = key
        return key, session_data(dataset.session(user, activity, sess), window_length)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for key, data in pool.map(build, keys):
                cohort.sessions[key] = data
    else:
        for key in keys:
            cohort.sessions[key] = build(key)[1]
    for user in dataset.users():
        cohort.languages[user] = dataset.meta(user).language_tag
    return cohort


def fused_columns(cohort: CohortData, locations) -> tuple:
    some = next(iter(cohort.sessions.values()))
    if len(locations) == 3:
        return some.fused_vector(0).columns
    return some.features[locations[0]][0].columns


# --- scoring helpers (single source of truth for batch and service) --------

def svm_probability(model: SvmModel, vector: FeatureVector) -> float:
    """Score one raw feature vector: select the model's columns, then z-score."""
    lookup = {c: i for i, c in enumerate(vector.columns)}
    idx = [lookup[c] for c in model.columns]
    z = apply_normalizer(model.normalizer, vector.values[idx])
    from .verifiers import svm_score

    return svm_score(model, z).probability


def svm_probabilities(model: SvmModel, X: np.ndarray, columns) -> np.ndarray:
    lookup = {c: i for i, c in enumerate(columns)}
    idx = [lookup[c] for c in model.columns]
    Z = apply_normalizer(model.normalizer, X[:, idx])
    from .verifiers import logistic

    margins = model.margins(Z)
    return np.array([logistic(model.platt_a * m + model.platt_b) for m in margins])


def lstm_probabilities(model: LstmModel, sequences) -> np.ndarray:
    return lstm_score_batch(model, sequences)


# --- per-user training ------------------------------------------------------

def train_user_svm(
    cohort: CohortData,
    split: EvalSplit,
    mode: str = MODE_FUSED,
    select_cfg: SelectionConfig = SelectionConfig(),
    svm_cfg: SvmConfig = SvmConfig(),
) -> SvmModel:
    locations = mode_locations(mode)
    columns = fused_columns(cohort, locations)
    refs = split.train_genuine + split.train_impostor
    y = np.r_[np.ones(len(split.train_genuine), int), np.zeros(len(split.train_impostor), int)]
    X = cohort.rows(refs, 1, locations)

    ranked = relieff_rank(X, y, select_cfg, columns)
    k = min(select_cfg.k_top, len(columns))
    selected = select_top(ranked, k)
    lookup = {c: i for i, c in enumerate(columns)}
    idx = [lookup[c] for c in selected]
    normalizer = fit_normalizer(X[:, idx])
    model = train_svm(apply_normalizer(normalizer, X[:, idx]), y, svm_cfg)
    model.normalizer = normalizer
    model.columns = tuple(selected)
    return model


def train_user_lstm(
    cohort: CohortData,
    split: EvalSplit,
    mode: str = MODE_FUSED,
    lstm_cfg: LstmConfig = LstmConfig(),
) -> LstmModel:
    locations = mode_locations(mode)
    refs = split.train_genuine + split.train_impostor
    y = np.r_[np.ones(len(split.train_genuine), int), np.zeros(len(split.train_impostor), int)]
    seqs = cohort.sequences(refs, 1, locations)
    stacked = np.concatenate(seqs, axis=0)
    normalizer = fit_normalizer(stacked)
    normalized = [apply_normalizer(normalizer, s) for s in seqs]
    return train_lstm(
        normalized,
        y,
        lstm_cfg,
        normalizer=normalizer,
        columns=channel_labels(locations),
    )


def evaluate_user(
    cohort: CohortData,
    target_user: str,
    classifier: str,
    mode: str = MODE_FUSED,
    split_cfg: SplitConfig = SplitConfig(),
    select_cfg: SelectionConfig = SelectionConfig(),
    svm_cfg: SvmConfig = SvmConfig(),
    lstm_cfg: LstmConfig = LstmConfig(),
):
    """Train on session 1, score session 2, return (result, model)."""
    split = build_split(cohort.window_pools(), target_user, split_cfg)
    locations = mode_locations(mode)

    if classifier == "svm":
        model = train_user_svm(cohort, split, mode, select_cfg, svm_cfg)
        columns = fused_columns(cohort, locations)
        gen_scores = svm_probabilities(model, cohort.rows(split.test_genuine, 2, locations), columns)
        imp_scores = svm_probabilities(model, cohort.rows(split.test_impostor, 2, locations), columns)
    elif classifier == "lstm":
        model = train_user_lstm(cohort, split, mode, lstm_cfg)
        gen_scores = lstm_probabilities(model, cohort.sequences(split.test_genuine, 2, locations))
        imp_scores = lstm_probabilities(model, cohort.sequences(split.test_impostor, 2, locations))
    else:
        raise ValueError(f"unknown classifier {classifier!r}")

    eer, threshold = compute_eer(gen_scores, imp_scores)
    result = UserResult(
        user_id=target_user,
        classifier=classifier,
        mode=mode,
        activity=cohort.activity.value,
        language=cohort.languages.get(target_user, "native"),
        eer=eer,
        threshold=threshold,
        n_train=len(split.train_genuine) + len(split.train_impostor),
        n_test=len(split.test_genuine) + len(split.test_impostor),
    )
    return result, model


def evaluate_population(
    cohort: CohortData,
    classifier: str,
    mode: str = MODE_FUSED,
    split_cfg: SplitConfig = SplitConfig(),
    select_cfg: SelectionConfig = SelectionConfig(),
    svm_cfg: SvmConfig = SvmConfig(),
    lstm_cfg: LstmConfig = LstmConfig(),
    workers: int = 1,
    model_sink: dict | None = None,
) -> EvalReport:
    """Per-user EERs and the aggregated report.

    ``mode`` may be `fused`, a location token, or `per-location` which runs
    all three single-location modes. ``model_sink`` collects
    (user, classifier, mode) -> (model, threshold) for persistence.
    """
    users = cohort.users()
    if len(users) < 2:
        raise MissingSession("population evaluation needs at least 2 users")
    modes = list(MODES[1:]) if mode == "per-location" else [mode]

    jobs = [(user, m) for m in modes for user in users]

    def run(job):
        user, m = job
        return evaluate_user(
            cohort, user, classifier, m,
            split_cfg=split_cfg, select_cfg=select_cfg, svm_cfg=svm_cfg, lstm_cfg=lstm_cfg,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run, jobs))
    else:
        outputs = [run(j) for j in jobs]

    results = []
    for (user, m), (result, model) in zip(jobs, outputs):
        results.append(result)
        if model_sink is not None:
            model_sink[(user, classifier, m)] = (model, result.threshold)
    return aggregate_report(results)
