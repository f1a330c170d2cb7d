"""Deterministic synthetic cohorts for desk-scale evaluation.

Each user gets an articulation profile (base jaw frequency, harmonic mix,
per-location amplitudes and mounting orientation, burst/pause habits) from
which seeded sessions are rendered: 100 Hz acceleration streams for all
three sensor locations, plus matching 1080p/60 landmark traces for the
video-attack path. This is a test oracle, not a physiological model; the
parameters are tuned so that users are cleanly separable while sessions of
one user differ in noise, phases, and speech-burst layout.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .attack import DEFAULT_SCALE_M, GRAVITY, MASTER_FPS, MASTER_RESOLUTION, LandmarkTrace, save_landmark_trace
from .dataset import UserMeta, save_user_meta, session_dir, landmark_dir
from .signal import Activity, LOCATION_ORDER, RecordingSession, SensorLocation, SensorStream, save_stream

RATE_HZ = 100.0
BASE_FREQ_RANGE = (1.5, 4.5)
MIN_FREQ_GAP = 0.25
N_HARMONICS = 3
NOISE_SD_G = 0.008

# Relative articulation coupling per location/axis; the chin's vertical axis
# dominates, the cheek sensors are weaker side channels.
_COUPLING = {
    SensorLocation.BELOW_CHIN: np.array([0.35, 0.45, 1.00]),
    SensorLocation.UPPER_LEFT_CHEEK: np.array([0.30, 0.25, 0.22]),
    SensorLocation.LOWER_RIGHT_CHEEK: np.array([0.26, 0.30, 0.20]),
}
# Nominal strap orientation (gravity projection, g-units).
_ORIENTATION = {
    SensorLocation.BELOW_CHIN: np.array([0.03, 0.06, -0.99]),
    SensorLocation.UPPER_LEFT_CHEEK: np.array([-0.33, 0.09, -0.94]),
    SensorLocation.LOWER_RIGHT_CHEEK: np.array([0.33, -0.09, -0.94]),
}
_FACE_ANCHOR = {
    SensorLocation.BELOW_CHIN: (0.50, 0.74),
    SensorLocation.UPPER_LEFT_CHEEK: (0.41, 0.58),
    SensorLocation.LOWER_RIGHT_CHEEK: (0.59, 0.66),
}


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    seed: int
    base_freq: float
    harmonic_weights: tuple
    amplitudes: dict  # SensorLocation -> (3,) g-units
    orientation: dict  # SensorLocation -> (3,) g-units
    phases: dict  # SensorLocation -> (3 axes, n_harmonics); anatomy-stable
    amp_jitter: float
    jitter_freq: float
    pause_rate: float  # pauses per minute
    drift_amp: float
    drift_freq: float
    gait_freq: float
    language_tag: str
    attempt: int = 0


@dataclass(frozen=True)
class SessionSpec:
    duration: float = 900.0  # seconds
    activity: Activity = Activity.SEATED
    session_index: int = 1
    session_noise_seed: int = 0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")


def _rng(*parts) -> np.random.Generator:
    ints = []
    for p in parts:
        ints.append(zlib.crc32(p.encode("utf-8")) if isinstance(p, str) else int(p))
    return np.random.default_rng(ints)


def generate_profile(user_id: str, seed: int, attempt: int = 0) -> UserProfile:
    rng = _rng(seed, user_id, attempt)
    base_freq = float(rng.uniform(*BASE_FREQ_RANGE))
    # Keep overtones strong enough to act as a per-user waveform signature.
    w1 = rng.uniform(0.50, 0.70)
    w2 = rng.uniform(0.25, 0.75) * (1.0 - w1)
    weights = np.array([w1, w2, 1.0 - w1 - w2])
    amp0 = rng.uniform(0.12, 0.30)
    amplitudes = {
        loc: amp0 * _COUPLING[loc] * rng.uniform(0.85, 1.15, size=3) for loc in LOCATION_ORDER
    }
    orientation = {
        loc: _ORIENTATION[loc] + rng.normal(0.0, 0.02, size=3) for loc in LOCATION_ORDER
    }
    phases = {
        loc: rng.uniform(0.0, 2.0 * np.pi, size=(3, N_HARMONICS)) for loc in LOCATION_ORDER
    }
    return UserProfile(
        user_id=user_id,
        seed=seed,
        base_freq=base_freq,
        harmonic_weights=tuple(float(w) for w in weights),
        amplitudes=amplitudes,
        orientation=orientation,
        phases=phases,
        amp_jitter=float(rng.uniform(0.05, 0.15)),
        jitter_freq=float(rng.uniform(0.08, 0.25)),
        pause_rate=float(rng.uniform(3.0, 8.0)),
        drift_amp=float(rng.uniform(0.005, 0.02)),
        drift_freq=float(rng.uniform(0.03, 0.08)),
        gait_freq=float(rng.uniform(1.8, 2.2)),
        language_tag="native" if rng.random() < 0.55 else "non-native",
        attempt=attempt,
    )


def generate_cohort(user_ids, seed: int, min_gap: float = MIN_FREQ_GAP, max_attempts: int = 2000) -> list[UserProfile]:
    """Profiles with pairwise base-frequency gaps of at least ``min_gap`` Hz."""
    profiles: list[UserProfile] = []
    for user_id in user_ids:
        attempt = 0
        profile = generate_profile(user_id, seed, attempt)
        while any(abs(profile.base_freq - p.base_freq) < min_gap for p in profiles):
            attempt += 1
            if attempt > max_attempts:
                raise ValueError("could not satisfy the base-frequency gap; reduce cohort size or gap")
            profile = generate_profile(user_id, seed, attempt)
        profiles.append(profile)
    return profiles


def _burst_envelope(t: np.ndarray, rng: np.random.Generator, duration: float, pause_rate: float) -> np.ndarray:
    """Speech on/off envelope: unit gain with smooth dips at pauses."""
    env = np.ones_like(t)
    n_pauses = rng.poisson(duration * pause_rate / 60.0)
    edge = 0.15
    for _ in range(n_pauses):
        start = rng.uniform(0.0, duration)
        length = rng.uniform(0.3, 1.0)
        lo, hi = start, min(start + length, duration)
        ramp_in = np.clip((t - lo) / edge, 0.0, 1.0)
        ramp_out = np.clip((hi - t) / edge, 0.0, 1.0)
        dip = np.minimum(ramp_in, ramp_out)
        env *= 1.0 - 0.95 * dip
    return env


def _session_rng(profile: UserProfile, spec: SessionSpec, tag: int) -> np.random.Generator:
    return _rng(
        profile.seed,
        profile.user_id,
        profile.attempt,
        spec.session_index,
        spec.session_noise_seed,
        spec.activity.value,
        tag,
    )


def _articulation(profile: UserProfile, t: np.ndarray, phases: np.ndarray, integrate: bool = False) -> np.ndarray:
    """Harmonic articulation core; `integrate` returns displacement instead
    of acceleration (each harmonic divided by -(2 pi h f)^2)."""
    out = np.zeros_like(t)
    for h, w in enumerate(profile.harmonic_weights, start=1):
        omega = 2.0 * np.pi * h * profile.base_freq
        term = w * np.sin(omega * t + phases[h - 1])
        if integrate:
            term = -term / omega**2
        out += term
    return out


def _session_phases(profile: UserProfile, loc: SensorLocation, axis: int, shift: float, rng: np.random.Generator) -> np.ndarray:
    """Anatomy phases shifted by a session time origin, plus tiny wobble.

    The same physical motion drives all axes, so the inter-axis phase
    structure is a user trait; a session only moves the time origin (phase
    advance proportional to harmonic order) and adds small jitter.
    """
    harmonics = np.arange(1, N_HARMONICS + 1, dtype=float)
    wobble = rng.normal(0.0, 0.08, size=N_HARMONICS)
    return profile.phases[loc][axis] - 2.0 * np.pi * harmonics * profile.base_freq * shift + wobble


def _gait(activity: Activity, profile: UserProfile, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """(n, 3) whole-body component; stronger and slower on stairs."""
    if activity == Activity.SEATED:
        return np.zeros((t.shape[0], 3))
    if activity == Activity.WALK_FLAT:
        freq, amp = profile.gait_freq, 0.07
    else:
        freq, amp = profile.gait_freq * 0.62, 0.15
    phase = rng.uniform(0.0, 2.0 * np.pi)
    base = np.sin(2.0 * np.pi * freq * t + phase)
    second = 0.35 * np.sin(2.0 * np.pi * 2.0 * freq * t + phase * 1.7)
    vertical = amp * (base + second)
    lateral = 0.3 * amp * np.sin(2.0 * np.pi * freq * t + phase + 0.8)
    return np.stack([lateral, 0.8 * lateral, vertical], axis=1)


def generate_session(profile: UserProfile, spec: SessionSpec) -> RecordingSession:
    """100 Hz tri-axial streams for all three locations."""
    n = int(round(spec.duration * RATE_HZ))
    t = np.arange(n, dtype=np.float64) / RATE_HZ
    env_rng = _session_rng(profile, spec, 1)
    burst = _burst_envelope(t, env_rng, spec.duration, profile.pause_rate)
    jitter_phase = env_rng.uniform(0.0, 2.0 * np.pi)
    jitter = 1.0 + profile.amp_jitter * np.sin(2.0 * np.pi * profile.jitter_freq * t + jitter_phase)
    gait = _gait(spec.activity, profile, t, _session_rng(profile, spec, 2))

    shift = float(env_rng.uniform(0.0, 1.0 / profile.base_freq))
    streams = {}
    for loc in LOCATION_ORDER:
        loc_rng = _session_rng(profile, spec, 10 + list(LOCATION_ORDER).index(loc))
        data = np.empty((n, 3))
        for axis in range(3):
            phases = _session_phases(profile, loc, axis, shift, loc_rng)
            core = _articulation(profile, t, phases)
            drift_phase = loc_rng.uniform(0.0, 2.0 * np.pi)
            drift = profile.drift_amp * np.sin(2.0 * np.pi * profile.drift_freq * t + drift_phase)
            noise = loc_rng.normal(0.0, NOISE_SD_G, size=n)
            data[:, axis] = (
                profile.orientation[loc][axis]
                + profile.amplitudes[loc][axis] * core * burst * jitter
                + gait[:, axis]
                + drift
                + noise
            )
        streams[loc] = SensorStream(location=loc, rate=RATE_HZ, t=t, data=data)
    return RecordingSession(
        user_id=profile.user_id,
        activity=spec.activity,
        session_index=spec.session_index,
        streams=streams,
    )


def render_landmark_trace(
    profile: UserProfile,
    spec: SessionSpec,
    fps: int = MASTER_FPS,
    resolution: tuple = MASTER_RESOLUTION,
    scale: float = DEFAULT_SCALE_M,
) -> dict:
    """Master-quality landmark traces per location, as from public footage.

    The articulation signal is carried into position space in closed form
    (per-harmonic double integration, which is drift-free), so the second
    difference of a trace recovers the profile's articulation spectrum. The
    estimated depth channel gets extra tracking noise, as a monocular
    tracker would produce.
    """
    n = int(round(spec.duration * fps))
    t = np.arange(n, dtype=np.float64) / fps
    video_rng = _session_rng(profile, spec, 777)
    burst = _burst_envelope(t, video_rng, spec.duration, profile.pause_rate)
    jitter_phase = video_rng.uniform(0.0, 2.0 * np.pi)
    jitter = 1.0 + profile.amp_jitter * np.sin(2.0 * np.pi * profile.jitter_freq * t + jitter_phase)

    shift = float(video_rng.uniform(0.0, 1.0 / profile.base_freq))
    traces = {}
    for loc in LOCATION_ORDER:
        loc_rng = _session_rng(profile, spec, 800 + list(LOCATION_ORDER).index(loc))
        anchor = _FACE_ANCHOR[loc]
        points = np.empty((n, 3))
        for axis in range(3):
            phases = _session_phases(profile, loc, axis, shift, loc_rng)
            disp_m = (
                GRAVITY
                * profile.amplitudes[loc][axis]
                * _articulation(profile, t, phases, integrate=True)
                * burst
                * jitter
            )
            sway = 0.002 * np.sin(2.0 * np.pi * 0.05 * t + loc_rng.uniform(0, 2 * np.pi))
            points[:, axis] = disp_m / scale + sway
        points[:, 0] += anchor[0] + loc_rng.normal(0.0, 0.0003, size=n)
        points[:, 1] += anchor[1] + loc_rng.normal(0.0, 0.0003, size=n)
        points[:, 2] += loc_rng.normal(0.0, 0.0015, size=n)  # monocular depth estimate
        traces[loc] = LandmarkTrace(
            location=loc, fps=fps, resolution=resolution, scale=scale, points=points
        )
    return traces


def write_dataset(
    root,
    n_users: int = 10,
    seed: int = 0,
    activities=(Activity.SEATED,),
    duration: float = 120.0,
    sessions: int = 2,
    with_landmarks: bool = True,
) -> list[UserProfile]:
    """Materialize a cohort in the standard directory layout."""
    user_ids = [f"user{idx:02d}" for idx in range(n_users)]
    profiles = generate_cohort(user_ids, seed)
    for profile in profiles:
        save_user_meta(root, UserMeta(user_id=profile.user_id, language_tag=profile.language_tag))
        for activity in activities:
            for session_index in range(1, sessions + 1):
                spec = SessionSpec(duration=duration, activity=activity, session_index=session_index)
                session = generate_session(profile, spec)
                base = session_dir(root, profile.user_id, activity, session_index)
                for loc, stream in session.streams.items():
                    save_stream(stream, base / f"{loc.value}.csv")
            if with_landmarks and activity == Activity.SEATED:
                spec = SessionSpec(duration=duration, activity=activity, session_index=1)
                traces = render_landmark_trace(profile, spec)
                for loc, trace in traces.items():
                    save_landmark_trace(trace, landmark_dir(root, profile.user_id, activity) / f"{loc.value}.csv")
    return profiles
