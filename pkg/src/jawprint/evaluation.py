"""Authentication evaluation protocol: splits, EER, thresholds, reports.

Per-user two-class setup: train on session 1 only, test on session 2 only,
impostor windows sampled 1.5:1 against genuine ones from all other users.
The population statistic is the median of user-level EERs, with the user
distribution bucketed for reporting.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyScores, MissingSession, NotEnoughImpostors

BUCKET_LABELS = ("<0.05", "0.05-0.10", "0.10-0.30", ">0.30")


@dataclass(frozen=True)
class SplitConfig:
    impostor_ratio: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.impostor_ratio <= 0:
            raise ValueError("impostor_ratio must be positive")


@dataclass(frozen=True)
class WindowRef:
    """A window identified by its owner and position in that session pool."""

    user_id: str
    index: int


@dataclass
class EvalSplit:
    target_user: str
    train_genuine: list
    train_impostor: list
    test_genuine: list
    test_impostor: list
    metadata: dict = field(default_factory=dict)


def _user_rng(seed: int, user_id: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(user_id.encode("utf-8"))])


def build_split(session_pools: dict, target_user: str, cfg: SplitConfig) -> EvalSplit:
    """Assemble the per-user split from window counts.

    ``session_pools`` maps session index (1|2) to {user_id: window_count}.
    Genuine windows are all of the target's; impostors are drawn uniformly
    without replacement from the pooled windows of every other user, floor-
    rounding the 1.5:1 ratio when it is not exactly attainable.
    """
    rng = _user_rng(cfg.seed, target_user)
    halves = {}
    for session in (1, 2):
        pool = session_pools.get(session, {})
        if target_user not in pool or pool[target_user] == 0:
            raise MissingSession(f"{target_user} has no windows in session {session}")
        genuine = [WindowRef(target_user, i) for i in range(pool[target_user])]
        others = [
            WindowRef(uid, i)
            for uid in sorted(pool)
            if uid != target_user
            for i in range(pool[uid])
        ]
        wanted = int(np.floor(cfg.impostor_ratio * len(genuine)))
        if len(others) < wanted:
            raise NotEnoughImpostors(
                f"session {session}: need {wanted} impostor windows, pool has {len(others)}"
            )
        picks = rng.choice(len(others), size=wanted, replace=False)
        impostor = [others[i] for i in np.sort(picks)]
        halves[session] = (genuine, impostor, wanted)

    meta = {
        "impostor_ratio": cfg.impostor_ratio,
        "train_counts": (len(halves[1][0]), halves[1][2]),
        "test_counts": (len(halves[2][0]), halves[2][2]),
    }
    return EvalSplit(
        target_user=target_user,
        train_genuine=halves[1][0],
        train_impostor=halves[1][1],
        test_genuine=halves[2][0],
        test_impostor=halves[2][1],
        metadata=meta,
    )


def compute_eer(genuine_scores, impostor_scores) -> tuple[float, float]:
    """Equal error rate and its threshold.

    FAR(t) = fraction of impostor scores >= t, FRR(t) = fraction of genuine
    scores < t. Both are step functions; the EER is found by sweeping every
    distinct score as a threshold and linearly interpolating the crossing of
    the (FAR - FRR) sign change.
    """
    gen = np.asarray(genuine_scores, dtype=np.float64)
    imp = np.asarray(impostor_scores, dtype=np.float64)
    if gen.size == 0 or imp.size == 0:
        raise EmptyScores("both score lists must be non-empty")

    thresholds = np.unique(np.concatenate([gen, imp]))
    thresholds = np.append(thresholds, thresholds[-1] + 1.0)  # above-max sentinel
    gen_sorted = np.sort(gen)
    imp_sorted = np.sort(imp)
    far = 1.0 - np.searchsorted(imp_sorted, thresholds, side="left") / imp.size
    frr = np.searchsorted(gen_sorted, thresholds, side="left") / gen.size

    diff = far - frr
    for i in range(thresholds.size):
        if diff[i] == 0.0:
            return float(far[i]), float(thresholds[i])
        if diff[i] < 0.0:
            if i == 0:
                return float(far[0]), float(thresholds[0])
            t = diff[i - 1] / (diff[i - 1] - diff[i])
            eer = far[i - 1] + t * (far[i] - far[i - 1])
            thr = thresholds[i - 1] + t * (thresholds[i] - thresholds[i - 1])
            return float(eer), float(thr)
    return float(far[-1]), float(thresholds[-1])


def threshold_decision(probability: float, threshold: float) -> bool:
    """Accept when the score reaches the user's operating threshold."""
    return probability >= threshold


def bucket_counts(eers) -> list[int]:
    counts = [0, 0, 0, 0]
    for e in eers:
        if e < 0.05:
            counts[0] += 1
        elif e < 0.10:
            counts[1] += 1
        elif e <= 0.30:
            counts[2] += 1
        else:
            counts[3] += 1
    return counts


@dataclass(frozen=True)
class UserResult:
    user_id: str
    classifier: str
    mode: str  # fused | chin | upper_left_cheek | lower_right_cheek
    activity: str
    language: str
    eer: float
    threshold: float
    n_train: int
    n_test: int


@dataclass(frozen=True)
class ReportRow:
    classifier: str
    mode: str
    activity: str
    language: str  # all | native | non-native
    n_users: int
    median_eer: float
    bucket_percent: tuple


@dataclass
class EvalReport:
    users: list
    rows: list

    def row(self, classifier: str, mode: str, activity: str, language: str = "all") -> ReportRow:
        for r in self.rows:
            if (r.classifier, r.mode, r.activity, r.language) == (classifier, mode, activity, language):
                return r
        raise KeyError((classifier, mode, activity, language))


def aggregate_report(users: list) -> EvalReport:
    rows = []
    groups = sorted({(u.classifier, u.mode, u.activity) for u in users})
    for classifier, mode, activity in groups:
        members = [u for u in users if (u.classifier, u.mode, u.activity) == (classifier, mode, activity)]
        for language in ("all", "native", "non-native"):
            subset = members if language == "all" else [u for u in members if u.language == language]
            if not subset:
                continue
            eers = [u.eer for u in subset]
            counts = bucket_counts(eers)
            pct = tuple(100.0 * c / len(subset) for c in counts)
            rows.append(
                ReportRow(
                    classifier=classifier,
                    mode=mode,
                    activity=activity,
                    language=language,
                    n_users=len(subset),
                    median_eer=float(np.median(eers)),
                    bucket_percent=pct,
                )
            )
    return EvalReport(users=sorted(users, key=lambda u: (u.classifier, u.mode, u.activity, u.user_id)), rows=rows)


def write_report_csv(report: EvalReport, users_path, summary_path) -> None:
    with open(users_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "classifier", "mode", "activity", "language", "eer", "threshold", "n_train", "n_test"])
        for u in report.users:
            w.writerow([u.user_id, u.classifier, u.mode, u.activity, u.language, repr(u.eer), repr(u.threshold), u.n_train, u.n_test])
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["classifier", "mode", "activity", "language", "n_users", "median_eer"] + [f"pct_{b}" for b in BUCKET_LABELS])
        for r in report.rows:
            w.writerow([r.classifier, r.mode, r.activity, r.language, r.n_users, repr(r.median_eer)] + [repr(p) for p in r.bucket_percent])


def format_report_table(report: EvalReport) -> str:
    """Text summary mirroring the median-EER and bucket-distribution tables."""
    lines = []
    activities = sorted({r.activity for r in report.rows})
    modes = ["fused", "chin", "upper_left_cheek", "lower_right_cheek"]
    classifiers = sorted({r.classifier for r in report.rows})

    lines.append("Median EER by activity and sensor mode")
    header = f"{'activity':<14}" + "".join(f"{m:>20}" for m in modes)
    for clf in classifiers:
        lines.append(f"[{clf}]")
        lines.append(header)
        for act in activities:
            cells = []
            for m in modes:
                try:
                    cells.append(f"{report.row(clf, m, act).median_eer:>20.3f}")
                except KeyError:
                    cells.append(f"{'-':>20}")
            lines.append(f"{act:<14}" + "".join(cells))

    lines.append("")
    lines.append("User-level EER distribution (% of users)")
    lines.append(f"{'classifier':<10}{'mode':<20}{'activity':<14}" + "".join(f"{b:>12}" for b in BUCKET_LABELS))
    for r in report.rows:
        if r.language != "all":
            continue
        lines.append(
            f"{r.classifier:<10}{r.mode:<20}{r.activity:<14}"
            + "".join(f"{p:>11.1f}%" for p in r.bucket_percent)
        )

    lines.append("")
    lines.append("Median EER by language background")
    lines.append(f"{'classifier':<10}{'mode':<20}{'activity':<14}{'language':<12}{'median_eer':>12}")
    for r in report.rows:
        if r.language == "all":
            continue
        lines.append(f"{r.classifier:<10}{r.mode:<20}{r.activity:<14}{r.language:<12}{r.median_eer:>12.3f}")
    return "\n".join(lines) + "\n"
