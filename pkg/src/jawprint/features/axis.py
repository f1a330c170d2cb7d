"""Per-axis computation of the 54-feature catalog.

The definitions here are the normative ones (docs/FEATURES.md); the test
suite re-derives every value with an independent straight-from-definition
oracle. Degenerate inputs (constants, zero energy, impulses) hit documented
fallbacks and never produce NaN/Inf.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import SeriesTooShort
from .catalog import FEATURE_NAMES

HISTOGRAM_BINS = 10
HIGUCHI_KMAX = 10
DFA_NUM_SIZES = 10
NEIGHBOURHOOD = 5
WAVELET_WIDTHS = tuple(range(1, 11))
HUMAN_RANGE_HZ = (0.6, 2.5)


def _histogram(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """10 equal-width bins over [min, max]; final bin right-inclusive."""
    lo = float(x.min())
    hi = float(x.max())
    edges = lo + (hi - lo) * np.arange(HISTOGRAM_BINS + 1) / HISTOGRAM_BINS
    idx = np.searchsorted(edges, x, side="right") - 1
    idx = np.clip(idx, 0, HISTOGRAM_BINS - 1)
    counts = np.bincount(idx, minlength=HISTOGRAM_BINS)
    return counts, edges


def _ols_slope(u: np.ndarray, v: np.ndarray) -> float:
    ub = u.mean()
    vb = v.mean()
    denom = float(np.sum((u - ub) ** 2))
    if denom == 0.0:
        return 0.0
    return float(np.sum((u - ub) * (v - vb)) / denom)


def _higuchi(x: np.ndarray) -> float:
    n = x.shape[0]
    ks = []
    ls = []
    for k in range(1, min(HIGUCHI_KMAX, n - 1) + 1):
        lengths = []
        for m in range(k):
            steps = (n - 1 - m) // k
            if steps < 1:
                continue
            sub = x[m : m + steps * k + 1 : k]
            lm = np.abs(np.diff(sub)).sum() * (n - 1) / (steps * k) / k
            lengths.append(lm)
        if lengths:
            lk = float(np.mean(lengths))
            if lk > 0.0:
                ks.append(k)
                ls.append(lk)
    if len(ks) < 2:
        return 0.0
    return _ols_slope(np.log(1.0 / np.array(ks, dtype=float)), np.log(np.array(ls)))


def _dfa_box_sizes(n: int) -> np.ndarray:
    if n < 16:
        return np.array([], dtype=int)
    raw = np.logspace(math.log10(4.0), math.log10(n / 4.0), DFA_NUM_SIZES)
    sizes = np.unique(np.floor(raw).astype(int))
    return sizes[sizes >= 4]


def _dfa(x: np.ndarray) -> float:
    n = x.shape[0]
    sizes = _dfa_box_sizes(n)
    if sizes.shape[0] < 2:
        return 0.0
    y = np.cumsum(x - x.mean())
    log_s = []
    log_f = []
    for s in sizes:
        nb = n // s
        boxes = y[: nb * s].reshape(nb, s)
        # Closed-form per-box linear detrend on abscissa 0..s-1.
        tau = np.arange(s, dtype=float)
        tau_c = tau - tau.mean()
        denom = float(np.sum(tau_c**2))
        slopes = boxes @ tau_c / denom
        trends = boxes.mean(axis=1)[:, None] + slopes[:, None] * tau_c[None, :]
        resid = boxes - trends
        f = math.sqrt(float(np.mean(resid**2)))
        if f > 0.0:
            log_s.append(math.log(s))
            log_f.append(math.log(f))
    if len(log_s) < 2:
        return 0.0
    return _ols_slope(np.array(log_s), np.array(log_f))


def _lz76_phrases(bits: np.ndarray) -> int:
    """LZ76 phrase count of a 0/1 sequence.

    Each phrase is grown while it can still be copied from somewhere strictly
    before its own start (overlap into the phrase itself allowed); the final,
    possibly reproducible, chunk counts as a phrase.
    """
    s = np.ascontiguousarray(bits, dtype=np.uint8).tobytes()
    n = len(s)
    phrases = 0
    pos = 0
    while pos < n:
        length = 1
        while pos + length <= n and s.find(s[pos : pos + length], 0, pos + length - 1) >= 0:
            length += 1
        phrases += 1
        pos += length
    return phrases


def _ricker(points: int, width: float) -> np.ndarray:
    amp = 2.0 / (math.sqrt(3.0 * width) * math.pi**0.25)
    tau = np.arange(points, dtype=float) - (points - 1) / 2.0
    return amp * (1.0 - (tau / width) ** 2) * np.exp(-(tau**2) / (2.0 * width**2))


def _wavelet_entropy(x: np.ndarray) -> float:
    n = x.shape[0]
    energies = []
    for w in WAVELET_WIDTHS:
        wav = _ricker(min(10 * w, n), w)
        coef = np.convolve(x, wav, mode="same")
        energies.append(float(np.sum(coef**2)))
    total = sum(energies)
    if total <= 0.0:
        return 0.0
    h = 0.0
    for e in energies:
        p = e / total
        if p > 0.0:
            h -= p * math.log(p)
    return h


def _cum_threshold_freq(values: np.ndarray, freqs: np.ndarray, fraction: float) -> float:
    total = float(values.sum())
    if total <= 0.0:
        return 0.0
    cum = np.cumsum(values)
    idx = int(np.searchsorted(cum, fraction * total))
    idx = min(idx, values.shape[0] - 1)
    return float(freqs[idx])


def axis_feature_values(series: np.ndarray, rate: float) -> np.ndarray:
    """All 54 catalog features of one axis series, in catalog order."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 2:
        raise SeriesTooShort("axis series needs at least 2 samples")
    if not np.isfinite(x).all():
        raise ValueError("axis series must be finite")
    if rate <= 0:
        raise ValueError("rate must be positive")

    n = x.shape[0]
    t = np.arange(n, dtype=np.float64) / rate
    # An exactly constant series has zero central deviation by definition;
    # enforcing that here keeps every degenerate fallback exact instead of
    # leaving ulp-level residues from mean subtraction.
    constant = float(x.max()) == float(x.min())
    xbar = float(x[0]) if constant else float(x.mean())
    dev = np.zeros_like(x) if constant else x - xbar
    var = float(np.mean(dev**2))
    std = math.sqrt(var)
    d = np.diff(x)
    energy = float(np.sum(x**2))

    out: dict[str, float] = {}
    out["mean"] = xbar
    out["median"] = float(np.median(x))
    out["maximum"] = float(x.max())
    out["minimum_value"] = float(x.min())
    out["standard_deviation"] = std
    out["variance"] = var
    out["root_mean_square"] = math.sqrt(energy / n)
    out["skewness"] = float(np.mean(dev**3) / std**3) if std > 0 else 0.0
    out["kurtosis"] = float(np.mean(dev**4) / std**4 - 3.0) if std > 0 else 0.0
    out["interquartile_range"] = float(np.percentile(x, 75) - np.percentile(x, 25))
    out["mean_absolute_deviation"] = float(np.mean(np.abs(dev)))
    out["median_absolute_deviation"] = float(np.median(np.abs(x - np.median(x))))
    out["peak_to_peak_distance"] = float(x.max() - x.min())
    out["mean_squared_error"] = var

    counts, edges = _histogram(x)
    mode_bin = int(np.argmax(counts))
    if x.max() == x.min():
        out["histogram_mode"] = xbar
        out["histogram_entropy"] = 0.0
    else:
        out["histogram_mode"] = float((edges[mode_bin] + edges[mode_bin + 1]) / 2.0)
        p = counts[counts > 0] / n
        out["histogram_entropy"] = float(-np.sum(p * np.log(p)))

    xs = np.sort(x)
    q50 = float(xs[math.ceil(0.5 * n) - 1])
    q75 = float(xs[math.ceil(0.75 * n) - 1])
    out["ecdf_slope"] = 0.25 / (q75 - q50) if q75 != q50 else 0.0

    out["mean_absolute_difference"] = float(np.mean(np.abs(d)))
    out["sum_of_absolute_differences"] = float(np.sum(np.abs(d)))
    out["mean_first_differences"] = float(np.mean(d))
    out["median_first_differences"] = float(np.median(d))
    out["signal_distance"] = float(np.sum(np.sqrt(1.0 + d**2)))
    out["absolute_energy"] = energy
    out["average_power"] = energy * rate / (n - 1)
    out["total_energy"] = energy / rate
    out["area_under_curve"] = float(np.trapezoid(x, dx=1.0 / rate))
    out["temporal_centroid"] = float(np.sum(t * x**2) / energy) if energy > 0 else 0.0
    out["zero_crossing_count"] = float(np.sum(x[:-1] * x[1:] < 0))
    out["positive_turning_count"] = float(np.sum((d[:-1] > 0) & (d[1:] < 0)))
    out["negative_turning_count"] = float(np.sum((d[:-1] < 0) & (d[1:] > 0)))

    if n > 2 * NEIGHBOURHOOD:
        # Strict local maxima over a +/-5 sample neighbourhood.
        sw = np.lib.stride_tricks.sliding_window_view(x, NEIGHBOURHOOD).max(axis=1)
        centers = x[NEIGHBOURHOOD : n - NEIGHBOURHOOD]
        left = sw[: n - 2 * NEIGHBOURHOOD]
        right = sw[NEIGHBOURHOOD + 1 : n - NEIGHBOURHOOD + 1]
        out["neighbourhood_peak_count"] = float(np.sum((centers > left) & (centers > right)))
    else:
        out["neighbourhood_peak_count"] = 0.0

    denom = float(np.sum(dev**2))
    out["lag1_autocorrelation"] = float(np.sum(dev[:-1] * dev[1:]) / denom) if denom > 0 else 0.0
    out["linear_trend_slope"] = _ols_slope(t, x)

    sign_changes = int(np.sum(d[:-1] * d[1:] < 0))
    out["petrosian_fractal_dimension"] = math.log10(n) / (
        math.log10(n) + math.log10(n / (n + 0.4 * sign_changes))
    )
    out["higuchi_fractal_dimension"] = _higuchi(x)
    out["detrended_fluctuation_analysis"] = _dfa(x)

    bits = (x > np.median(x)).astype(np.int8)
    out["lempel_ziv_complexity"] = _lz76_phrases(bits) * math.log2(n) / n

    # Spectral block: plain magnitude DFT of the raw (untapered) series. A
    # constant series has an exactly DC-only spectrum.
    if constant:
        mag = np.zeros(n // 2 + 1)
        mag[0] = n * abs(xbar)
    else:
        mag = np.abs(np.fft.rfft(x))
    power = mag**2
    freqs = np.arange(mag.shape[0], dtype=np.float64) * rate / n
    mag_total = float(mag.sum())
    pow_total = float(power.sum())

    if mag_total > 0:
        pmag = mag / mag_total
        centroid = float(np.sum(freqs * pmag))
        spread_sq = float(np.sum((freqs - centroid) ** 2 * pmag))
        spread = math.sqrt(max(spread_sq, 0.0))
        out["spectral_centroid"] = centroid
        out["spectral_spread"] = spread
        if spread > 0:
            out["spectral_skewness"] = float(np.sum((freqs - centroid) ** 3 * pmag) / spread**3)
            out["spectral_kurtosis"] = float(np.sum((freqs - centroid) ** 4 * pmag) / spread**4)
        else:
            out["spectral_skewness"] = 0.0
            out["spectral_kurtosis"] = 0.0
    else:
        out["spectral_centroid"] = 0.0
        out["spectral_spread"] = 0.0
        out["spectral_skewness"] = 0.0
        out["spectral_kurtosis"] = 0.0

    out["spectral_slope"] = _ols_slope(freqs, mag)
    tail = float(mag[1:].sum())
    if tail > 0:
        ks = np.arange(1, mag.shape[0], dtype=np.float64)
        out["spectral_decrease"] = float(np.sum((mag[1:] - mag[0]) / ks) / tail)
    else:
        out["spectral_decrease"] = 0.0

    if pow_total > 0:
        pp = power / pow_total
        nz = pp[pp > 0]
        out["spectral_entropy"] = float(-np.sum(nz * np.log(nz)) / math.log(pp.shape[0]))
    else:
        out["spectral_entropy"] = 0.0

    out["spectral_rolloff"] = _cum_threshold_freq(power, freqs, 0.95)

    h = n // 2
    if constant:
        m1 = np.zeros(h // 2 + 1)
        m1[0] = h * abs(xbar)
        m2 = m1
    else:
        m1 = np.abs(np.fft.rfft(x[:h]))
        m2 = np.abs(np.fft.rfft(x[h : 2 * h]))
    n1 = float(np.sqrt(np.sum(m1**2)))
    n2 = float(np.sqrt(np.sum(m2**2)))
    if n1 > 0 and n2 > 0:
        out["spectral_variation"] = 1.0 - float(np.sum(m1 * m2)) / (n1 * n2)
    else:
        out["spectral_variation"] = 0.0

    dm = np.diff(mag)
    out["spectral_positive_turning"] = float(np.sum((dm[:-1] > 0) & (dm[1:] < 0)))
    out["median_frequency"] = _cum_threshold_freq(power, freqs, 0.5)
    out["maximum_frequency"] = _cum_threshold_freq(mag, freqs, 0.95)

    if mag.shape[0] > 1 and float(mag[1:].max()) > 0:
        out["fundamental_frequency"] = float(freqs[1 + int(np.argmax(mag[1:]))])
    else:
        out["fundamental_frequency"] = 0.0
    out["max_power_spectrum"] = float(power.max())

    if pow_total > 0:
        lo = _cum_threshold_freq(power, freqs, 0.05)
        hi = _cum_threshold_freq(power, freqs, 0.95)
        out["power_bandwidth"] = hi - lo
        band = (freqs >= HUMAN_RANGE_HZ[0]) & (freqs <= HUMAN_RANGE_HZ[1])
        out["human_range_energy"] = float(power[band].sum() / pow_total)
    else:
        out["power_bandwidth"] = 0.0
        out["human_range_energy"] = 0.0

    out["wavelet_entropy"] = _wavelet_entropy(x)

    values = np.array([out[name] for name in FEATURE_NAMES], dtype=np.float64)
    if not np.isfinite(values).all():
        bad = [FEATURE_NAMES[i] for i in np.flatnonzero(~np.isfinite(values))]
        raise AssertionError(f"non-finite feature values: {bad}")
    return values


def compute_axis_features(series: np.ndarray, rate: float) -> dict[str, float]:
    """Public per-axis entry point: the 54 named feature values."""
    values = axis_feature_values(series, rate)
    return {name: float(v) for name, v in zip(FEATURE_NAMES, values)}
