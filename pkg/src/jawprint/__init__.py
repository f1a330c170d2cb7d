"""Speaker verification from inertial mouth-motion signals."""

__version__ = "0.1.0"

from .signal import (
    Activity,
    LOCATION_ORDER,
    RecordingSession,
    SensorLocation,
    SensorStream,
    Window,
    WindowOrigin,
    load_stream,
    resample,
    segment,
    window_means,
)

__all__ = [
    "Activity",
    "LOCATION_ORDER",
    "RecordingSession",
    "SensorLocation",
    "SensorStream",
    "Window",
    "WindowOrigin",
    "__version__",
    "load_stream",
    "resample",
    "segment",
    "window_means",
]
