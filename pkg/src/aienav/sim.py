"""Synthetic ground truth for the surge/yaw vehicle.

The truth model is the decoupled pair

    m v' + d v = s_u u(t)        (surge speed)
    I w' + c w = s_r r(t)        (yaw rate)

with unicycle kinematics ``psi' = w``, ``north' = v cos psi``,
``east' = v sin psi`` (``psi`` clockwise from north), integrated by RK4 at
``T / substeps``. GPS and compass readings are sampled every ``T`` with
independent Gaussian noise drawn from a seeded generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DegenerateRunError, InvalidArgumentError
from .linsys import SecondOrderParams
from .vehicle import SURGE_PARAMS, YAW_PARAMS, SensorRecord, from_local_enu

PROFILE_KINDS = ("step", "ramp", "sinusoid", "piecewise")


@dataclass(frozen=True)
class InputProfile:
    """Hidden input signal ``u(t)`` for ``t >= 0``.

    ``step``: ``offset`` before ``onset``, ``offset + amplitude`` after.
    ``ramp``: ``offset + slope * (t - onset)`` after ``onset``, saturating
    at ``offset + amplitude`` when ``amplitude`` is non-zero.
    ``sinusoid``: ``offset + amplitude * sin(2 pi t / period + phase)``.
    ``piecewise``: ``levels[i]`` on ``[times[i], times[i+1])``; ``offset`` before ``times[0]``.
    """

    kind: str = "step"
    amplitude: float = 0.0
    offset: float = 0.0
    onset: float = 0.0
    slope: float = 0.0
    period: float = 1.0
    phase: float = 0.0
    times: tuple = ()
    levels: tuple = ()

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise InvalidArgumentError(f"unknown input profile kind {self.kind!r}")
        if self.kind == "sinusoid" and not self.period > 0:
            raise InvalidArgumentError("sinusoid period must be positive")
        if self.kind == "piecewise":
            if len(self.times) != len(self.levels) or not self.times:
                raise InvalidArgumentError("piecewise profile needs matching non-empty times and levels")
            if any(b <= a for a, b in zip(self.times, self.times[1:])):
                raise InvalidArgumentError("piecewise switch times must be strictly increasing")
            object.__setattr__(self, "times", tuple(float(t) for t in self.times))
            object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))

    @classmethod
    def constant(cls, value: float) -> "InputProfile":
        return cls("step", amplitude=value)

    def __call__(self, t: float) -> float:
        if self.kind == "step":
            return self.offset + (self.amplitude if t >= self.onset else 0.0)
        if self.kind == "ramp":
            if t < self.onset:
                return self.offset
            delta = self.slope * (t - self.onset)
            if self.amplitude:
                delta = math.copysign(min(abs(delta), abs(self.amplitude)), self.amplitude)
            return self.offset + delta
        if self.kind == "sinusoid":
            return self.offset + self.amplitude * math.sin(2 * math.pi * t / self.period + self.phase)
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.offset if idx < 0 else self.levels[idx]


@dataclass(frozen=True)
class SensorNoise:
    gps_sigma: float = 1.5
    compass_sigma: float = 2.0

    def __post_init__(self):
        if self.gps_sigma < 0 or self.compass_sigma < 0:
            raise InvalidArgumentError("noise standard deviations must be non-negative")


TRUTH_COLUMNS = ("t", "x_north", "y_east", "heading", "speed", "yaw_rate", "path_length", "u_true", "r_true")


@dataclass(frozen=True)
class SimRun:
    """Output of :func:`simulate`.

    ``truth`` holds one row per sample with columns :data:`TRUTH_COLUMNS`
    (heading in radians, clockwise from north). ``fine`` is the full
    integration grid with columns ``t, north, east, heading, speed, yaw_rate, path_length``.
    """

    records: tuple
    truth: np.ndarray
    fine: np.ndarray
    seed: int
    noise: SensorNoise
    sample_period: float
    origin: SensorRecord
    gaps: tuple = ()

    @property
    def true_inputs(self):
        return self.truth[:, 7], self.truth[:, 8]


def _derivatives(state, u, r, surge: SecondOrderParams, yaw: SecondOrderParams):
    _, _, psi, v, w, _ = state
    return np.array(
        [
            v * math.cos(psi),
            v * math.sin(psi),
            w,
            (surge.input_scale * u - surge.drag * v) / surge.inertia,
            (yaw.input_scale * r - yaw.drag * w) / yaw.inertia,
            abs(v),
        ]
    )


def simulate(
    surge_profile: InputProfile,
    yaw_profile: InputProfile,
    horizon: float,
    T: float = 0.546,
    noise: Optional[SensorNoise] = None,
    seed: int = 0,
    *,
    surge_params: SecondOrderParams = SURGE_PARAMS,
    yaw_params: SecondOrderParams = YAW_PARAMS,
    origin_lat: float = 40.0,
    origin_lon: float = -75.0,
    initial_heading_deg: float = 0.0,
    substeps: int = 20,
) -> SimRun:
    if not (T > 0 and horizon > T):
        raise InvalidArgumentError("require horizon > T > 0")
    noise = SensorNoise() if noise is None else noise
    rng = np.random.default_rng(seed)
    n_samples = int(math.floor(horizon / T + 1e-9)) + 1
    h = T / substeps

    # north, east, heading, speed, yaw rate, path length
    state = np.array([0.0, 0.0, math.radians(initial_heading_deg), 0.0, 0.0, 0.0])
    fine = np.empty((substeps * (n_samples - 1) + 1, 7))
    truth = np.empty((n_samples, len(TRUTH_COLUMNS)))
    origin = SensorRecord(0.0, origin_lat, origin_lon, initial_heading_deg)

    def sample_row(t):
        return [t, *state, surge_profile(t), yaw_profile(t)]

    fine[0] = [0.0, *state]
    truth[0] = sample_row(0.0)
    row = 1
    for k in range(1, n_samples):
        t0 = (k - 1) * T
        for j in range(substeps):
            t = t0 + j * h
            tm, t1 = t + 0.5 * h, t + h
            u0, r0 = surge_profile(t), yaw_profile(t)
            um, rm = surge_profile(tm), yaw_profile(tm)
            u1, r1 = surge_profile(t1), yaw_profile(t1)
            k1 = _derivatives(state, u0, r0, surge_params, yaw_params)
            k2 = _derivatives(state + 0.5 * h * k1, um, rm, surge_params, yaw_params)
            k3 = _derivatives(state + 0.5 * h * k2, um, rm, surge_params, yaw_params)
            k4 = _derivatives(state + h * k3, u1, r1, surge_params, yaw_params)
            state = state + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            fine[row] = [t1, *state]
            row += 1
        truth[k] = sample_row(k * T)

    records = []
    for k in range(n_samples):
        t, north, east, psi = truth[k, :4]
        if noise.gps_sigma > 0:
            north += rng.normal(0.0, noise.gps_sigma)
            east += rng.normal(0.0, noise.gps_sigma)
        heading_deg = math.degrees(psi)
        if noise.compass_sigma > 0:
            heading_deg += rng.normal(0.0, noise.compass_sigma)
        lat, lon = from_local_enu(east, north, origin)
        records.append(SensorRecord(t, lat, lon, heading_deg))
    return SimRun(tuple(records), truth, fine, seed, noise, T, origin)


def degrade(run: SimRun, gps_dropout_prob: float, seed: int) -> SimRun:
    """Drop GPS fixes i.i.d.; dropped timestamps are kept in ``gaps``."""
    if not 0.0 <= gps_dropout_prob < 1.0:
        raise InvalidArgumentError("dropout probability must lie in [0, 1)")
    if gps_dropout_prob == 0.0:
        return run
    rng = np.random.default_rng(seed)
    keep = rng.random(len(run.records)) >= gps_dropout_prob
    if keep.sum() < 3:
        raise DegenerateRunError(f"only {int(keep.sum())} fixes survive dropout")
    records = tuple(r for r, kept in zip(run.records, keep) if kept)
    gaps = tuple(r.timestamp for r, kept in zip(run.records, keep) if not kept)
    return replace(run, records=records, gaps=run.gaps + gaps)


def truth_increments(run: SimRun):
    """Noiseless per-step chord lengths and heading increments (radians, compass sense)."""
    north, east, psi = run.truth[:, 1], run.truth[:, 2], run.truth[:, 3]
    ds = np.hypot(np.diff(north), np.diff(east))
    dth = np.diff(psi)
    dth = (dth + math.pi) % (2 * math.pi) - math.pi
    return ds, dth
