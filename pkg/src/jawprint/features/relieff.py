"""ReliefF feature weighting and top-K selection.

Binary two-class form: per sampled instance, the k nearest same-class
neighbours (hits) pull a feature's weight down by its value difference and
the k nearest other-class neighbours (misses) push it up, each normalized by
m*k. Features are scaled to [0, 1] per column internally, so scores land in
[-1, 1].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DegenerateClass, KTooLarge
from .catalog import FeatureDescriptor


@dataclass(frozen=True)
class SelectionConfig:
    k_top: int = 50
    relieff_neighbors: int = 10
    relieff_iterations: int | None = None  # None: every sample
    seed: int = 42


@dataclass(frozen=True)
class RankedFeatures:
    """(descriptor, score) pairs sorted by score descending, ties by column order."""

    entries: tuple[tuple[FeatureDescriptor, float], ...]

    def __len__(self) -> int:
        return len(self.entries)

    def descriptors(self) -> list[FeatureDescriptor]:
        return [d for d, _ in self.entries]

    def scores(self) -> list[float]:
        return [s for _, s in self.entries]


def relieff_scores(X: np.ndarray, y: np.ndarray, cfg: SelectionConfig) -> np.ndarray:
    """Raw per-column ReliefF weights, aligned with the input columns."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(int)
    n, n_feat = X.shape
    k = cfg.relieff_neighbors
    for cls in np.unique(y):
        if np.sum(y == cls) < k + 1:
            raise DegenerateClass(f"class {cls} has fewer than {k + 1} members")

    # Per-column max-min scaling; constant columns scale to 0 so their
    # diffs vanish and their weight stays exactly 0.
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    Z = (X - lo) / safe
    Z[:, span == 0] = 0.0

    m = n if cfg.relieff_iterations is None else min(cfg.relieff_iterations, n)
    rng = np.random.default_rng(cfg.seed)
    picks = rng.choice(n, size=m, replace=False)

    W = np.zeros(n_feat, dtype=np.float64)
    for idx in picks:
        diffs = np.abs(Z - Z[idx])
        dist = diffs.sum(axis=1)
        same = y == y[idx]
        # Deterministic neighbour choice: distance, then row index.
        order = np.lexsort((np.arange(n), dist))
        hits = [j for j in order if same[j] and j != idx][:k]
        misses = [j for j in order if not same[j]][:k]
        W -= diffs[hits].sum(axis=0) / (m * k)
        W += diffs[misses].sum(axis=0) / (m * k)
    return W


def relieff_rank(
    X: np.ndarray,
    y: np.ndarray,
    cfg: SelectionConfig,
    columns: Sequence[FeatureDescriptor],
) -> RankedFeatures:
    """Rank columns by ReliefF weight, descending; ties keep column order."""
    W = relieff_scores(X, y, cfg)
    order = np.lexsort((np.arange(len(columns)), -W))
    return RankedFeatures(entries=tuple((columns[i], float(W[i])) for i in order))


def select_top(ranked: RankedFeatures, k: int = 50) -> list[FeatureDescriptor]:
    if k > len(ranked):
        raise KTooLarge(f"asked for top {k} of {len(ranked)} ranked features")
    return ranked.descriptors()[:k]


def write_ranking_csv(ranked: RankedFeatures, path) -> None:
    """`rank,feature,axis,location,score` rows, rank starting at 1."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "feature", "axis", "location", "score"])
        for rank, (desc, score) in enumerate(ranked.entries, start=1):
            writer.writerow([rank, desc.name, desc.axis, desc.location.value, repr(score)])


def read_ranking_csv(path) -> RankedFeatures:
    entries = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            from ..signal import SensorLocation

            desc = FeatureDescriptor(name=row[1], axis=row[2], location=SensorLocation.from_token(row[3]))
            entries.append((desc, float(row[4])))
    return RankedFeatures(entries=tuple(entries))
