"""Window-level feature vectors, three-sensor fusion, and matrix I/O."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import MissingLocation
from ..signal import LOCATION_ORDER, SensorLocation, Window, WindowOrigin
from .axis import axis_feature_values
from .catalog import AXES, FEATURE_NAMES, FeatureDescriptor, axis_descriptors, fused_descriptors


@dataclass(frozen=True)
class FeatureVector:
    """Ordered feature values plus the descriptors naming each column."""

    values: np.ndarray
    columns: tuple[FeatureDescriptor, ...]
    origin: WindowOrigin

    def __post_init__(self):
        if self.values.shape[0] != len(self.columns):
            raise ValueError("values/columns length mismatch")


def compute_window_features(window: Window) -> FeatureVector:
    """162 features of one window: 54 per axis, name-major, axis X->Y->Z."""
    per_axis = [axis_feature_values(window.data[:, a], window.rate) for a in range(3)]
    values = np.empty(54 * 3, dtype=np.float64)
    for f in range(54):
        for a in range(3):
            values[f * 3 + a] = per_axis[a][f]
    return FeatureVector(
        values=values,
        columns=tuple(axis_descriptors(window.location)),
        origin=window.origin,
    )


def fuse(per_location: Mapping[SensorLocation, FeatureVector]) -> FeatureVector:
    """Concatenate the three per-location vectors in fixed location order."""
    missing = [loc for loc in LOCATION_ORDER if loc not in per_location]
    if missing:
        raise MissingLocation(f"missing locations: {[m.value for m in missing]}")
    parts = [per_location[loc] for loc in LOCATION_ORDER]
    origin = parts[0].origin
    for p in parts[1:]:
        if p.origin != origin:
            raise ValueError("fused vectors must share a window origin")
    values = np.concatenate([p.values for p in parts])
    columns = tuple(c for p in parts for c in p.columns)
    return FeatureVector(values=values, columns=columns, origin=origin)


@dataclass(frozen=True)
class FeatureMatrix:
    """Stacked FeatureVectors sharing one column layout."""

    X: np.ndarray  # (n_windows, n_columns)
    columns: tuple[FeatureDescriptor, ...]
    origins: tuple[WindowOrigin, ...]

    def column_index(self, descriptors: Sequence[FeatureDescriptor]) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.columns)}
        return np.array([lookup[d] for d in descriptors], dtype=int)

    def select(self, descriptors: Sequence[FeatureDescriptor]) -> np.ndarray:
        return self.X[:, self.column_index(descriptors)]


def matrix_from_vectors(vectors: Sequence[FeatureVector]) -> FeatureMatrix:
    if not vectors:
        raise ValueError("no feature vectors")
    columns = vectors[0].columns
    for v in vectors[1:]:
        if v.columns != columns:
            raise ValueError("inconsistent column layouts")
    X = np.stack([v.values for v in vectors])
    return FeatureMatrix(X=X, columns=columns, origins=tuple(v.origin for v in vectors))


def extract_windows(windows: Sequence[Window], workers: int = 1) -> list[FeatureVector]:
    """Feature vectors for many windows, output order matching input order."""
    if workers <= 1 or len(windows) < 4:
        return [compute_window_features(w) for w in windows]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(compute_window_features, windows))


def write_matrix_csv(matrix: FeatureMatrix, path) -> None:
    """CSV with an origin tag column followed by `<feature>__<axis>__<location>` columns."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["origin"] + [c.column() for c in matrix.columns])
        for origin, row in zip(matrix.origins, matrix.X):
            writer.writerow([origin.tag()] + [repr(float(v)) for v in row])


def read_matrix_csv(path) -> FeatureMatrix:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        columns = tuple(FeatureDescriptor.from_column(c) for c in header[1:])
        origins = []
        rows = []
        for row in reader:
            user, activity, session, widx = row[0].split("/")
            origins.append(WindowOrigin(user, activity, int(session), int(widx)))
            rows.append([float(v) for v in row[1:]])
    return FeatureMatrix(X=np.array(rows, dtype=np.float64), columns=columns, origins=tuple(origins))
