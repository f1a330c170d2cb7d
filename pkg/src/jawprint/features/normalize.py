"""Per-column z-score normalization fitted on training data only."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, EmptyMatrix


@dataclass(frozen=True)
class NormalizerState:
    mean: np.ndarray
    std: np.ndarray  # population std; zero kept as zero (column maps to 0)


def fit_normalizer(train_matrix: np.ndarray) -> NormalizerState:
    X = np.asarray(train_matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyMatrix("training matrix must be a non-empty 2-D array")
    return NormalizerState(mean=X.mean(axis=0), std=X.std(axis=0))


def apply_normalizer(state: NormalizerState, matrix: np.ndarray) -> np.ndarray:
    X = np.asarray(matrix, dtype=np.float64)
    one_row = X.ndim == 1
    if one_row:
        X = X[None, :]
    if X.shape[1] != state.mean.shape[0]:
        raise DimensionMismatch(f"matrix has {X.shape[1]} columns, normalizer expects {state.mean.shape[0]}")
    safe = np.where(state.std > 0, state.std, 1.0)
    Z = (X - state.mean) / safe
    Z[:, state.std == 0] = 0.0
    return Z[0] if one_row else Z
