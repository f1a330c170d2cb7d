"""Video-driven impersonation attack.

A victim's facial-landmark trajectories (tracked from public footage at
1080p/60) are degraded across six quality levels, double-differenced into
synthetic acceleration traces, upsampled to the sensor rate, and scored
against the victim's verifier at their EER threshold.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    MalformedRow,
    MissingFile,
    NonIntegerDecimation,
    TooFewFrames,
    UpscalingRejected,
)
from .evaluation import threshold_decision
from .features import compute_window_features, fuse
from .pipeline import mode_locations, svm_probability, lstm_probabilities, window_channels
from .signal import SensorLocation, SensorStream, resample, segment
from .verifiers import LstmModel, SvmModel

GRAVITY = 9.80665  # m/s^2 per g-unit
MASTER_FPS = 60
MASTER_RESOLUTION = (1920, 1080)
FPS_LEVELS = (60, 30, 15)
RESOLUTION_LEVELS = ((1920, 1080), (1280, 720))
DEFAULT_SCALE_M = 0.20  # metres per normalized face-width unit


@dataclass(frozen=True)
class QualityLevel:
    fps: int
    resolution: tuple

    def label(self) -> str:
        return f"{self.fps}fps/{self.resolution[1]}p"


def quality_levels() -> list[QualityLevel]:
    """The six fps x resolution combinations, best first."""
    return [QualityLevel(fps, res) for res in RESOLUTION_LEVELS for fps in FPS_LEVELS]


@dataclass(frozen=True)
class LandmarkTrace:
    location: SensorLocation
    fps: int
    resolution: tuple  # (width, height)
    scale: float       # metres per normalized coordinate unit
    points: np.ndarray  # (n_frames, 3) normalized x, y and relative depth z

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must be (n_frames, 3)")
        if pts.shape[0] < 3:
            raise TooFewFrames("a trace needs at least 3 frames")

    @property
    def n_frames(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class SyntheticAccelTrace:
    location: SensorLocation
    rate: float  # equals the trace fps
    samples: np.ndarray  # (n, 3) in m/s^2


def load_landmark_trace(path, location: SensorLocation, require_master: bool = True) -> LandmarkTrace:
    """Read a `frame,t,x,y,z` CSV plus its `.meta.json` sidecar."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    if not meta_path.is_file():
        raise MissingFile(str(meta_path))
    meta = json.loads(meta_path.read_text(encoding="utf-8"))

    points = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["frame", "t", "x", "y", "z"]:
            raise MalformedRow(0, "expected header 'frame,t,x,y,z'")
        for line, row in enumerate(reader, start=1):
            if len(row) != 5:
                raise MalformedRow(line, f"expected 5 fields, got {len(row)}")
            try:
                vals = [float(v) for v in row[2:]]
            except ValueError:
                raise MalformedRow(line, "non-numeric coordinate") from None
            if not all(math.isfinite(v) for v in vals):
                raise MalformedRow(line, "non-finite coordinate")
            points.append(vals)
    if len(points) < 3:
        raise TooFewFrames(f"{path}: {len(points)} frames")

    fps = int(meta["fps"])
    resolution = (int(meta["width"]), int(meta["height"]))
    if require_master and (fps != MASTER_FPS or resolution != MASTER_RESOLUTION):
        raise MalformedRow(0, f"master trace must be 1080p {MASTER_FPS} fps, got {resolution} {fps} fps")
    return LandmarkTrace(
        location=location,
        fps=fps,
        resolution=resolution,
        scale=float(meta.get("scale", DEFAULT_SCALE_M)),
        points=np.array(points, dtype=np.float64),
    )


def save_landmark_trace(trace: LandmarkTrace, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("frame,t,x,y,z\n")
        for i, row in enumerate(trace.points):
            x, y, z = (float(v) for v in row)
            fh.write(f"{i},{i / trace.fps:.6f},{x!r},{y!r},{z!r}\n")
    meta = {
        "fps": trace.fps,
        "width": trace.resolution[0],
        "height": trace.resolution[1],
        "location": trace.location.value,
        "scale": trace.scale,
    }
    path.with_suffix(path.suffix + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def decimate_fps(trace: LandmarkTrace, target_fps: int) -> LandmarkTrace:
    """Keep every (fps/target)-th frame starting at frame 0."""
    if target_fps <= 0 or trace.fps % target_fps != 0:
        raise NonIntegerDecimation(f"{trace.fps} fps cannot decimate to {target_fps} fps")
    stride = trace.fps // target_fps
    return replace(trace, fps=target_fps, points=trace.points[::stride])


def quantize_resolution(trace: LandmarkTrace, resolution: tuple) -> LandmarkTrace:
    """Snap x/y to the target pixel grid; estimated depth is left alone."""
    width, height = resolution
    if width > trace.resolution[0] or height > trace.resolution[1]:
        raise UpscalingRejected(f"cannot upscale {trace.resolution} to {resolution}")
    pts = trace.points.copy()
    pts[:, 0] = np.round(pts[:, 0] * width) / width
    pts[:, 1] = np.round(pts[:, 1] * height) / height
    return replace(trace, resolution=resolution, points=pts)


def degrade(trace: LandmarkTrace, quality: QualityLevel) -> LandmarkTrace:
    return quantize_resolution(decimate_fps(trace, quality.fps), quality.resolution)


def synthesize_accel(trace: LandmarkTrace) -> SyntheticAccelTrace:
    """Second central difference of the metre-scaled points, in m/s^2."""
    if trace.n_frames < 3:
        raise TooFewFrames("second difference needs at least 3 frames")
    p = trace.points * trace.scale
    accel = (p[2:] - 2.0 * p[1:-1] + p[:-2]) * float(trace.fps) ** 2
    return SyntheticAccelTrace(location=trace.location, rate=float(trace.fps), samples=accel)


def accel_to_stream(accel: SyntheticAccelTrace) -> SensorStream:
    """Convert to g-units on the interior-frame time grid."""
    n = accel.samples.shape[0]
    t = (np.arange(n, dtype=np.float64) + 1.0) / accel.rate
    return SensorStream(
        location=accel.location,
        rate=accel.rate,
        t=t,
        data=accel.samples / GRAVITY,
    )


@dataclass(frozen=True)
class AttackRow:
    user_id: str
    classifier: str
    quality: QualityLevel
    windows: int
    false_accepts: int

    @property
    def far(self) -> float:
        return self.false_accepts / self.windows if self.windows else 0.0


def attack_windows(
    master_traces: dict,
    quality: QualityLevel,
    locations,
    sensor_rate: float = 100.0,
    window_length: int = 250,
) -> list[dict]:
    """Degrade, synthesize, resample and window the traces per location."""
    streams = {}
    for loc in locations:
        trace = degrade(master_traces[loc], quality)
        streams[loc] = resample(accel_to_stream(synthesize_accel(trace)), sensor_rate)
    per_loc = {
        loc: segment(streams[loc], window_length, user_id="attack", activity="video", session_index=0)
        for loc in locations
    }
    count = min(len(ws) for ws in per_loc.values())
    return [{loc: per_loc[loc][i] for loc in locations} for i in range(count)]


def run_attack(
    master_traces: dict,
    model,
    threshold: float,
    quality: QualityLevel,
    user_id: str,
    mode: str = "fused",
) -> tuple[AttackRow, np.ndarray]:
    """One (victim, classifier, quality) cell of the attack grid."""
    locations = mode_locations(mode)
    groups = attack_windows(master_traces, quality, locations)
    if isinstance(model, SvmModel):
        classifier = "svm"
        scores = []
        for group in groups:
            per_loc = {loc: compute_window_features(group[loc]) for loc in locations}
            vector = fuse(per_loc) if len(locations) == 3 else per_loc[locations[0]]
            scores.append(svm_probability(model, vector))
        scores = np.array(scores)
    elif isinstance(model, LstmModel):
        classifier = "lstm"
        seqs = [window_channels(group, locations) for group in groups]
        scores = lstm_probabilities(model, seqs)
    else:
        raise TypeError(f"unsupported model {type(model).__name__}")

    accepts = int(sum(threshold_decision(float(s), threshold) for s in scores))
    row = AttackRow(
        user_id=user_id,
        classifier=classifier,
        quality=quality,
        windows=len(groups),
        false_accepts=accepts,
    )
    return row, scores


def write_attack_csv(rows, path) -> None:
    """`user,classifier,fps,resolution,windows,false_accepts,far` rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "classifier", "fps", "resolution", "windows", "false_accepts", "far"])
        for r in rows:
            w.writerow(
                [
                    r.user_id,
                    r.classifier,
                    r.quality.fps,
                    f"{r.quality.resolution[0]}x{r.quality.resolution[1]}",
                    r.windows,
                    r.false_accepts,
                    repr(r.far),
                ]
            )
