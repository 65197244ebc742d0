"""Vehicle models, measurement geometry and dead-reckoning reconstruction.

The surge and heading channels are 3-state models (path length or heading,
its rate, and the previous step's value) whose output is the per-step
increment, scaled. Their matrices are literal constants evaluated at the
sample period; :func:`surge_zoh_model` / :func:`heading_zoh_model` give the
re-derived ZOH counterparts for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError, OutOfProjectionError
from .linsys import SecondOrderParams, StateSpaceModel, augment_with_delay, zoh_discretize

DEFAULT_SAMPLE_PERIOD = 0.546
EARTH_RADIUS_M = 6371008.8

SURGE_OUTPUT_SCALE = 1.4162
HEADING_OUTPUT_SCALE = 0.200474

# Identified physical coefficients (mass kg / drag N s m^-1; inertia kg m^2 / drag N m s rad^-1).
SURGE_PARAMS = SecondOrderParams(inertia=0.469, drag=0.311)
YAW_PARAMS = SecondOrderParams(inertia=4.896, drag=9.087)

# Unit-inertia parameterizations matching the exponents of the discrete models.
SURGE_MODEL_PARAMS = SecondOrderParams(inertia=1.0, drag=0.66397)
HEADING_MODEL_PARAMS = SecondOrderParams(inertia=1.0, drag=1.82249)


def _increment_output(scale: float) -> np.ndarray:
    return scale * np.array([1.0, 0.0, -1.0])


def surge_model(T: float = DEFAULT_SAMPLE_PERIOD) -> StateSpaceModel:
    """Literal path-length model; output is the scaled step increment."""
    if not T > 0:
        raise InvalidArgumentError(f"sample period must be positive, got {T!r}")
    e = math.exp(-0.66397 * T)
    A = [
        [1.0, 1.50625 * (1 - e), 0.0],
        [0.0, e, 0.0],
        [1.0, 0.0, 0.0],
    ]
    B = [1.50625 * T + 2.26879 * e, 1.50625 * (1 - e), 0.0]
    return StateSpaceModel(A, B, _increment_output(SURGE_OUTPUT_SCALE), T)


def heading_model(T: float = DEFAULT_SAMPLE_PERIOD) -> StateSpaceModel:
    """Literal heading model; output is the scaled heading increment."""
    if not T > 0:
        raise InvalidArgumentError(f"sample period must be positive, got {T!r}")
    e = math.exp(-1.82249 * T)
    A = [
        [1.0, 0.5487 * (1 - e), 0.0],
        [0.0, e, 0.0],
        [1.0, 0.0, 0.0],
    ]
    B = [0.5487 + 0.301072 * e, 0.5487 * (1 - e), 0.0]
    return StateSpaceModel(A, B, _increment_output(HEADING_OUTPUT_SCALE), T)


def surge_zoh_model(T: float = DEFAULT_SAMPLE_PERIOD) -> StateSpaceModel:
    aug = augment_with_delay(zoh_discretize(SURGE_MODEL_PARAMS, T))
    return aug.with_output(_increment_output(SURGE_OUTPUT_SCALE))


def heading_zoh_model(T: float = DEFAULT_SAMPLE_PERIOD) -> StateSpaceModel:
    aug = augment_with_delay(zoh_discretize(HEADING_MODEL_PARAMS, T))
    return aug.with_output(_increment_output(HEADING_OUTPUT_SCALE))


def wrap_degrees(angle: float) -> float:
    """Wrap to (-180, 180]."""
    w = math.fmod(angle, 360.0)
    if w > 180.0:
        w -= 360.0
    elif w <= -180.0:
        w += 360.0
    return w


def wrap_angle(angle: float) -> float:
    """Wrap radians to (-pi, pi]."""
    w = math.fmod(angle, 2 * math.pi)
    if w > math.pi:
        w -= 2 * math.pi
    elif w <= -math.pi:
        w += 2 * math.pi
    return w


@dataclass(frozen=True)
class SensorRecord:
    """GPS fix plus compass heading (degrees clockwise from true north)."""

    timestamp: float
    latitude: float
    longitude: float
    heading: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.timestamp, self.latitude, self.longitude, self.heading)):
            raise InvalidArgumentError("sensor record fields must be finite")
        if abs(self.latitude) > 90.0:
            raise InvalidArgumentError(f"latitude {self.latitude} out of range")
        object.__setattr__(self, "longitude", wrap_degrees(self.longitude))
        object.__setattr__(self, "heading", self.heading % 360.0)


@dataclass(frozen=True)
class IncrementalMeasurement:
    delta_s: float
    delta_theta: float
    body_dx: float
    body_dy: float


@dataclass(frozen=True)
class TrajectoryPoint:
    x_north: float
    y_east: float
    step: int = 0


def to_local_enu(record: SensorRecord, origin: SensorRecord):
    """Equirectangular projection about ``origin``; returns ``(east, north)`` in meters."""
    dlat = record.latitude - origin.latitude
    if abs(dlat) >= 1.0:
        raise OutOfProjectionError(f"latitude offset {dlat:.6f} deg exceeds the 1 deg validity bound")
    dlon = wrap_degrees(record.longitude - origin.longitude)
    north = EARTH_RADIUS_M * math.radians(dlat)
    east = EARTH_RADIUS_M * math.cos(math.radians(origin.latitude)) * math.radians(dlon)
    return east, north


def from_local_enu(east: float, north: float, origin: SensorRecord):
    """Inverse of :func:`to_local_enu`; returns ``(latitude, longitude)``."""
    lat = origin.latitude + math.degrees(north / EARTH_RADIUS_M)
    if abs(lat - origin.latitude) >= 1.0:
        raise OutOfProjectionError("north offset exceeds the 1 deg validity bound")
    lon = origin.longitude + math.degrees(east / (EARTH_RADIUS_M * math.cos(math.radians(origin.latitude))))
    return lat, wrap_degrees(lon)


def heading_increment(prev_deg: float, curr_deg: float) -> float:
    """Smallest signed compass change ``curr - prev`` in radians, in (-pi, pi]."""
    return math.radians(wrap_degrees(curr_deg - prev_deg))


def chord_measurement(prev: SensorRecord, curr: SensorRecord, origin: SensorRecord) -> IncrementalMeasurement:
    """Chord length and heading change between consecutive fixes.

    The displacement is expressed in the body frame of ``curr`` (x forward,
    y to starboard).
    """
    e0, n0 = to_local_enu(prev, origin)
    e1, n1 = to_local_enu(curr, origin)
    de, dn = e1 - e0, n1 - n0
    psi = math.radians(curr.heading)
    s, c = math.sin(psi), math.cos(psi)
    body_dx = de * s + dn * c
    body_dy = de * c - dn * s
    return IncrementalMeasurement(
        delta_s=math.hypot(body_dx, body_dy),
        delta_theta=heading_increment(prev.heading, curr.heading),
        body_dx=body_dx,
        body_dy=body_dy,
    )


def measurements_from_records(records: Sequence[SensorRecord], origin: SensorRecord = None):
    """Per-step ``(delta_s, delta_theta)`` arrays, one entry per consecutive pair."""
    origin = records[0] if origin is None else origin
    out = [chord_measurement(a, b, origin) for a, b in zip(records[:-1], records[1:])]
    return np.array([m.delta_s for m in out]), np.array([m.delta_theta for m in out])


def compass_to_math(heading_rad: float) -> float:
    """Compass bearing (clockwise from north) to the angle measured from east toward north."""
    return math.pi / 2 - heading_rad


def reconstruct_trajectory(
    increments: Iterable,
    start: TrajectoryPoint = TrajectoryPoint(0.0, 0.0, 0),
    initial_heading: float = 0.0,
    mode: str = "cumulative",
) -> list:
    """Dead-reckon a planar path from ``(delta_s, delta_theta)`` pairs.

    ``literal`` advances ``X += dS sin(dth/2)``, ``Y += dS cos(dth/2)``.
    ``cumulative`` uses ``theta_k + dth/2`` in place of ``dth/2``, where
    ``theta_k`` starts at ``initial_heading`` and accumulates ``dth``.
    Angles are measured from the east (Y) axis toward north (X); convert
    compass data with :func:`compass_to_math` and negate compass increments.
    """
    if mode not in ("literal", "cumulative"):
        raise InvalidArgumentError(f"unknown reconstruction mode {mode!r}")
    x, y = start.x_north, start.y_east
    theta = initial_heading
    path = [TrajectoryPoint(x, y, start.step)]
    for j, (ds, dth) in enumerate(increments, start=1):
        angle = dth / 2 if mode == "literal" else theta + dth / 2
        x += ds * math.sin(angle)
        y += ds * math.cos(angle)
        theta += dth
        path.append(TrajectoryPoint(x, y, start.step + j))
    return path
