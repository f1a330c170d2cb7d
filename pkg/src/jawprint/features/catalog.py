"""The closed 54-name feature catalog.

Each name is computed once per axis, giving 54 x 3 = 162 features per sensor
window and 486 after three-location fusion. The catalog is frozen: column
order everywhere is name-major in the order below, axis X -> Y -> Z within a
name, location order chin -> upper_left_cheek -> lower_right_cheek across
sensors. Exact formulas live in docs/FEATURES.md and are mirrored verbatim by
the test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..signal import LOCATION_ORDER, SensorLocation

STATISTICAL = "statistical"
TEMPORAL = "temporal"
SPECTRAL = "spectral"

# (name, domain) in frozen catalog order.
CATALOG: tuple[tuple[str, str], ...] = (
    ("mean", STATISTICAL),
    ("median", STATISTICAL),
    ("maximum", STATISTICAL),
    ("minimum_value", STATISTICAL),
    ("standard_deviation", STATISTICAL),
    ("variance", STATISTICAL),
    ("root_mean_square", STATISTICAL),
    ("skewness", STATISTICAL),
    ("kurtosis", STATISTICAL),
    ("interquartile_range", STATISTICAL),
    ("mean_absolute_deviation", STATISTICAL),
    ("median_absolute_deviation", STATISTICAL),
    ("peak_to_peak_distance", STATISTICAL),
    ("mean_squared_error", STATISTICAL),
    ("histogram_mode", STATISTICAL),
    ("histogram_entropy", STATISTICAL),
    ("ecdf_slope", STATISTICAL),
    ("mean_absolute_difference", TEMPORAL),
    ("sum_of_absolute_differences", TEMPORAL),
    ("mean_first_differences", TEMPORAL),
    ("median_first_differences", TEMPORAL),
    ("signal_distance", TEMPORAL),
    ("absolute_energy", TEMPORAL),
    ("average_power", TEMPORAL),
    ("total_energy", TEMPORAL),
    ("area_under_curve", TEMPORAL),
    ("temporal_centroid", TEMPORAL),
    ("zero_crossing_count", TEMPORAL),
    ("positive_turning_count", TEMPORAL),
    ("negative_turning_count", TEMPORAL),
    ("neighbourhood_peak_count", TEMPORAL),
    ("lag1_autocorrelation", TEMPORAL),
    ("linear_trend_slope", TEMPORAL),
    ("petrosian_fractal_dimension", TEMPORAL),
    ("higuchi_fractal_dimension", TEMPORAL),
    ("detrended_fluctuation_analysis", TEMPORAL),
    ("lempel_ziv_complexity", TEMPORAL),
    ("spectral_centroid", SPECTRAL),
    ("spectral_spread", SPECTRAL),
    ("spectral_skewness", SPECTRAL),
    ("spectral_kurtosis", SPECTRAL),
    ("spectral_slope", SPECTRAL),
    ("spectral_decrease", SPECTRAL),
    ("spectral_entropy", SPECTRAL),
    ("spectral_rolloff", SPECTRAL),
    ("spectral_variation", SPECTRAL),
    ("spectral_positive_turning", SPECTRAL),
    ("median_frequency", SPECTRAL),
    ("maximum_frequency", SPECTRAL),
    ("fundamental_frequency", SPECTRAL),
    ("max_power_spectrum", SPECTRAL),
    ("power_bandwidth", SPECTRAL),
    ("human_range_energy", SPECTRAL),
    ("wavelet_entropy", SPECTRAL),
)

FEATURE_NAMES: tuple[str, ...] = tuple(name for name, _ in CATALOG)
DOMAIN_OF: dict[str, str] = dict(CATALOG)
AXES = ("X", "Y", "Z")

assert len(FEATURE_NAMES) == 54
assert len(set(FEATURE_NAMES)) == 54


@dataclass(frozen=True)
class FeatureDescriptor:
    """Identifies one column of a feature matrix."""

    name: str
    axis: str  # X | Y | Z
    location: SensorLocation

    @property
    def domain_tag(self) -> str:
        return DOMAIN_OF[self.name]

    def column(self) -> str:
        return f"{self.name}__{self.axis}__{self.location.value}"

    @classmethod
    def from_column(cls, column: str) -> "FeatureDescriptor":
        name, axis, loc = column.split("__")
        return cls(name=name, axis=axis, location=SensorLocation.from_token(loc))


def axis_descriptors(location: SensorLocation) -> list[FeatureDescriptor]:
    """All 162 descriptors of one location, in frozen column order."""
    return [
        FeatureDescriptor(name=name, axis=axis, location=location)
        for name in FEATURE_NAMES
        for axis in AXES
    ]


def fused_descriptors() -> list[FeatureDescriptor]:
    """All 486 descriptors of the three-location fusion."""
    out: list[FeatureDescriptor] = []
    for loc in LOCATION_ORDER:
        out.extend(axis_descriptors(loc))
    return out
