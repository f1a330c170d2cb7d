"""Ingestion, validation, segmentation, and resampling of inertial streams.

A stream is a time-ordered list of tri-axial acceleration samples from one
lower-face sensor location. All operations here are pure: they never mutate
their inputs and are safe to call concurrently.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    MalformedRow,
    MissingFile,
    NonMonotoneTimestamp,
    StreamTooShort,
)

DEFAULT_RATE_HZ = 100.0
WINDOW_LENGTH = 250


class SensorLocation(Enum):
    """The three strap mount points around the mouth."""

    BELOW_CHIN = "chin"
    UPPER_LEFT_CHEEK = "upper_left_cheek"
    LOWER_RIGHT_CHEEK = "lower_right_cheek"

    @classmethod
    def from_token(cls, token: str) -> "SensorLocation":
        for loc in cls:
            if loc.value == token:
                return loc
        raise ValueError(f"unknown sensor location {token!r}")


# Fixed fusion / iteration order everywhere in the pipeline.
LOCATION_ORDER = (
    SensorLocation.BELOW_CHIN,
    SensorLocation.UPPER_LEFT_CHEEK,
    SensorLocation.LOWER_RIGHT_CHEEK,
)


class Activity(Enum):
    SEATED = "seated"
    WALK_FLAT = "walk_flat"
    WALK_STAIRS = "walk_stairs"

    @classmethod
    def from_token(cls, token: str) -> "Activity":
        for act in cls:
            if act.value == token:
                return act
        raise ValueError(f"unknown activity {token!r}")


@dataclass(frozen=True)
class SensorStream:
    """Validated acceleration stream from one sensor location.

    ``t`` holds strictly increasing timestamps in seconds, ``data`` is an
    (N, 3) float64 array of (ax, ay, az) in g-units. ``rate`` is the nominal
    sampling rate; timestamps always come from the source, never from the
    rate.
    """

    location: SensorLocation
    rate: float
    t: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "data", data)
        if data.ndim != 2 or data.shape[1] != 3 or data.shape[0] != t.shape[0]:
            raise ValueError("stream data must be (N, 3) aligned with timestamps")

    def __len__(self) -> int:
        return int(self.t.shape[0])

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self) >= 2 else 0.0

    def median_gap(self) -> float:
        if len(self) < 2:
            return math.nan
        return float(np.median(np.diff(self.t)))


@dataclass(frozen=True)
class WindowOrigin:
    """Provenance tag carried by every window through the pipeline."""

    user_id: str = ""
    activity: str = ""
    session_index: int = 0
    window_index: int = 0

    def tag(self) -> str:
        return f"{self.user_id}/{self.activity}/{self.session_index}/{self.window_index}"


@dataclass(frozen=True)
class Window:
    """Fixed-length segment of a stream: the unit of feature extraction."""

    location: SensorLocation
    rate: float
    data: np.ndarray  # (length, 3), finite
    origin: WindowOrigin

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.ndim != 2 or data.shape[1] != 3:
            raise ValueError("window data must be (length, 3)")
        if not np.isfinite(data).all():
            raise ValueError("window data must be finite")

    @property
    def length(self) -> int:
        return int(self.data.shape[0])


@dataclass(frozen=True)
class RecordingSession:
    """One user's streams for all three locations in one session."""

    user_id: str
    activity: Activity
    session_index: int
    streams: dict  # SensorLocation -> SensorStream

    def __post_init__(self):
        if self.session_index not in (1, 2):
            raise ValueError("session_index must be 1 or 2")
        missing = [loc for loc in LOCATION_ORDER if loc not in self.streams]
        if missing:
            raise MissingFile(f"session missing locations: {[m.value for m in missing]}")


def _parse_float(token: str, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MalformedRow(line, f"not a number: {token!r}") from None
    if not math.isfinite(value):
        raise MalformedRow(line, f"non-finite value: {token!r}")
    return value


def load_stream(path, location: SensorLocation, rate: float | None = None) -> SensorStream:
    """Parse a ``t,ax,ay,az`` CSV into a validated stream.

    Rows are numbered from 1 (excluding the header). Non-finite or
    unparseable rows raise MalformedRow with that index; a timestamp that
    fails to strictly increase raises NonMonotoneTimestamp. When ``rate`` is
    omitted it is inferred from the median inter-sample gap.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))

    ts: list[float] = []
    rows: list[tuple[float, float, float]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "ax", "ay", "az"]:
            raise MalformedRow(0, "expected header 't,ax,ay,az'")
        for line, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 4:
                raise MalformedRow(line, f"expected 4 fields, got {len(row)}")
            t = _parse_float(row[0], line)
            ax = _parse_float(row[1], line)
            ay = _parse_float(row[2], line)
            az = _parse_float(row[3], line)
            if ts and t <= ts[-1]:
                raise NonMonotoneTimestamp(line)
            ts.append(t)
            rows.append((ax, ay, az))

    t_arr = np.array(ts, dtype=np.float64)
    data = np.array(rows, dtype=np.float64).reshape(len(rows), 3)
    if rate is None:
        if len(ts) >= 2:
            rate = 1.0 / float(np.median(np.diff(t_arr)))
            # The nominal rate is metadata; snap float noise from the gap
            # inversion so e.g. 10 ms gaps give exactly 100 Hz.
            if abs(rate - round(rate)) < 1e-6 * rate:
                rate = float(round(rate))
        else:
            rate = DEFAULT_RATE_HZ
    return SensorStream(location=location, rate=float(rate), t=t_arr, data=data)


def save_stream(stream: SensorStream, path) -> None:
    """Write a stream back out in the ingestion CSV format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("t,ax,ay,az\n")
        for i in range(len(stream)):
            t = float(stream.t[i])
            ax, ay, az = (float(v) for v in stream.data[i])
            fh.write(f"{t:.4f},{ax!r},{ay!r},{az!r}\n")


def segment(
    stream: SensorStream,
    length: int = WINDOW_LENGTH,
    hop: int | None = None,
    user_id: str = "",
    activity: str = "",
    session_index: int = 0,
) -> list[Window]:
    """Cut a stream into fixed-length windows.

    Windows start at sample 0 and advance by ``hop`` (default: ``length``,
    i.e. non-overlapping). A trailing remainder shorter than ``length`` is
    discarded, never padded.
    """
    if length < 2:
        raise ValueError("window length must be >= 2")
    hop = length if hop is None else hop
    if hop < 1:
        raise ValueError("hop must be >= 1")
    n = len(stream)
    if n < length:
        raise StreamTooShort(f"stream has {n} samples, window needs {length}")

    windows = []
    index = 0
    for start in range(0, n - length + 1, hop):
        origin = WindowOrigin(user_id, activity, session_index, index)
        windows.append(
            Window(
                location=stream.location,
                rate=stream.rate,
                data=stream.data[start : start + length],
                origin=origin,
            )
        )
        index += 1
    return windows


def resample(stream: SensorStream, target_rate: float) -> SensorStream:
    """Linearly interpolate a stream onto a uniform grid at ``target_rate``.

    The grid spans [t_first, t_last]; the first sample is always preserved
    exactly, and so is any original sample whose timestamp lands on the grid.
    """
    if len(stream) < 2:
        raise StreamTooShort("resampling needs at least 2 samples")
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")

    t0 = float(stream.t[0])
    t1 = float(stream.t[-1])
    # Tiny slack so t_last lands on the grid despite float rounding.
    count = int(math.floor((t1 - t0) * target_rate * (1.0 + 1e-12))) + 1
    grid = t0 + np.arange(count, dtype=np.float64) / target_rate
    out = np.empty((count, 3), dtype=np.float64)
    for axis in range(3):
        out[:, axis] = np.interp(grid, stream.t, stream.data[:, axis])
    return SensorStream(location=stream.location, rate=float(target_rate), t=grid, data=out)


def window_means(stream: SensorStream, span: float = 0.5) -> list[tuple[float, float, float]]:
    """Per-axis means over consecutive ``span``-second blocks.

    Blocks are sample-index based: block k covers indices
    [floor(k*span*rate), floor((k+1)*span*rate)). Output length equals
    floor(duration/span) with duration = N/rate.
    """
    if span <= 0:
        raise ValueError("span must be positive")
    n = len(stream)
    block = span * stream.rate
    count = int(math.floor(n / block))
    if count < 1:
        raise StreamTooShort(f"stream spans less than {span} s")
    means = []
    for k in range(count):
        lo = int(math.floor(k * block))
        hi = int(math.floor((k + 1) * block))
        seg = stream.data[lo:hi]
        m = seg.mean(axis=0)
        means.append((float(m[0]), float(m[1]), float(m[2])))
    return means


def stack_windows(windows: Sequence[Window]) -> np.ndarray:
    """Concatenate window rows in order; inverse of non-overlapping segment."""
    return np.concatenate([w.data for w in windows], axis=0)
