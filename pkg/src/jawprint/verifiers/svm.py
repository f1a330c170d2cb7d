"""Linear soft-margin verifier trained by dual coordinate descent.

Solves min_w 1/2||w||^2 + C * sum_i max(0, 1 - y_i w.x_i) with the bias
folded in as a regularized constant feature, then fits Platt calibration on
the training margins so scores come out as probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, NonConvergence, SingleClass
from ..features.normalize import NormalizerState


@dataclass(frozen=True)
class SvmConfig:
    c_penalty: float = 1.0
    seed: int = 42
    max_iterations: int = 4000   # full coordinate sweeps
    tolerance: float = 1e-8      # max projected gradient at convergence

    def __post_init__(self):
        if self.c_penalty <= 0:
            raise ValueError("c_penalty must be positive")


@dataclass
class SvmModel:
    weights: np.ndarray
    bias: float
    platt_a: float
    platt_b: float
    normalizer: NormalizerState | None = None
    columns: tuple = ()          # FeatureDescriptors of the selected inputs
    config: SvmConfig = field(default_factory=SvmConfig)

    def margin(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.weights.shape[0]:
            raise DimensionMismatch(
                f"input has {x.shape[-1]} features, model expects {self.weights.shape[0]}"
            )
        return float(x @ self.weights + self.bias)

    def margins(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.weights.shape[0]:
            raise DimensionMismatch(
                f"input has {X.shape[1]} features, model expects {self.weights.shape[0]}"
            )
        return X @ self.weights + self.bias


def _signed_labels(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y).astype(int)
    classes = np.unique(y)
    if classes.shape[0] != 2:
        raise SingleClass(f"need exactly 2 classes, got {classes.tolist()}")
    return np.where(y == classes.max(), 1.0, -1.0)


def primal_objective(weights: np.ndarray, bias: float, X, y, c_penalty: float) -> float:
    """1/2||w~||^2 + C * hinge, with the bias regularized like a weight."""
    ys = _signed_labels(y)
    margins = np.asarray(X, float) @ weights + bias
    hinge = np.maximum(0.0, 1.0 - ys * margins).sum()
    return 0.5 * (float(weights @ weights) + bias * bias) + c_penalty * float(hinge)


def train_svm(X: np.ndarray, y: np.ndarray, cfg: SvmConfig = SvmConfig()) -> SvmModel:
    """Fit the verifier on an already-normalized feature matrix."""
    X = np.asarray(X, dtype=np.float64)
    ys = _signed_labels(y)
    n, d = X.shape
    C = cfg.c_penalty

    Xa = np.hstack([X, np.ones((n, 1))])  # regularized bias feature
    q = np.einsum("ij,ij->i", Xa, Xa)
    alpha = np.zeros(n)
    w = np.zeros(d + 1)
    rng = np.random.default_rng(cfg.seed)

    converged = False
    for _ in range(cfg.max_iterations):
        max_pg = 0.0
        for i in rng.permutation(n):
            g = ys[i] * float(Xa[i] @ w) - 1.0
            if alpha[i] <= 0.0:
                pg = min(g, 0.0)
            elif alpha[i] >= C:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg != 0.0:
                max_pg = max(max_pg, abs(pg))
                new = min(max(alpha[i] - g / q[i], 0.0), C)
                if new != alpha[i]:
                    w += (new - alpha[i]) * ys[i] * Xa[i]
                    alpha[i] = new
        if max_pg < cfg.tolerance:
            converged = True
            break
    if not converged:
        raise NonConvergence(cfg.max_iterations)

    margins = Xa @ w
    a, b = fit_platt(margins, ys)
    return SvmModel(weights=w[:d].copy(), bias=float(w[d]), platt_a=a, platt_b=b, config=cfg)


def fit_platt(margins: np.ndarray, signed_labels: np.ndarray, max_iter: int = 100) -> tuple[float, float]:
    """Newton fit of p = logistic(a*margin + b) with Platt's damped targets.

    Returns (a, b) in the increasing-in-margin orientation, i.e. a >= 0 on
    any sanely trained model.
    """
    margins = np.asarray(margins, dtype=np.float64)
    pos = signed_labels > 0
    n_pos = int(pos.sum())
    n_neg = int((~pos).sum())
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    target = np.where(pos, hi, lo)

    # Internally uses Platt's F(m) = 1/(1+exp(A m + B)) parameterization.
    A = 0.0
    B = math.log((n_neg + 1.0) / (n_pos + 1.0))
    sigma = 1e-12
    min_step = 1e-10

    def objective(a_, b_):
        f = a_ * margins + b_
        # Stable cross-entropy on targets: log(1+e^f) = max(f,0) + log1p(e^-|f|).
        return float(np.sum(np.maximum(f, 0.0) + np.log1p(np.exp(-np.abs(f))) + (target - 1.0) * f))

    fval = objective(A, B)
    for _ in range(max_iter):
        f = A * margins + B
        p = np.empty_like(f)  # P(positive) = logistic(-f), branch-stable
        nonneg = f >= 0
        p[nonneg] = np.exp(-f[nonneg]) / (1.0 + np.exp(-f[nonneg]))
        p[~nonneg] = 1.0 / (1.0 + np.exp(f[~nonneg]))
        d1 = target - p
        d2 = p * (1 - p)
        g1 = float(np.sum(margins * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < 1e-12 and abs(g2) < 1e-12:
            break
        h11 = float(np.sum(margins * margins * d2)) + sigma
        h22 = float(np.sum(d2)) + sigma
        h21 = float(np.sum(margins * d2))
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            newA, newB = A + step * dA, B + step * dB
            newf = objective(newA, newB)
            if newf < fval + 1e-4 * step * gd:
                A, B, fval = newA, newB, newf
                break
            step /= 2.0
        else:
            break
    return -A, -B


@dataclass(frozen=True)
class Score:
    probability: float
    origin: object = None

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must lie in [0, 1]")


def logistic(u: float) -> float:
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


def svm_score(model: SvmModel, x: np.ndarray, origin=None) -> Score:
    """Probability that a normalized feature vector is the enrolled user."""
    m = model.margin(x)
    return Score(probability=logistic(model.platt_a * m + model.platt_b), origin=origin)
