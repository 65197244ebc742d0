"""Least-squares identification of first-order speed responses.

A step of size ``u`` applied at ``t = 0`` to ``m v' + d v = s u`` gives

    v(t) = (s u / d) (1 - exp(-(d / m) t))

and the fit minimizes the squared error over ``(m, d)`` (optionally ``s``
with ``m`` held fixed) by Gauss-Newton in log-parameters with backtracking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateDataError, InvalidArgumentError
from .linsys import SecondOrderParams


@dataclass(frozen=True)
class StepResponseSeries:
    """Samples of the response measured from the step onset."""

    times: np.ndarray
    values: np.ndarray
    input_level: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if t.size != v.size:
            raise InvalidArgumentError("times and values differ in length")
        if t.size < 3:
            raise InvalidArgumentError("a step response needs at least 3 samples")
        if np.any(np.diff(t) <= 0):
            raise InvalidArgumentError("times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v)) and math.isfinite(self.input_level)):
            raise InvalidArgumentError("series contains non-finite values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_columns(cls, t, values, input_level) -> "StepResponseSeries":
        """Build from raw columns; the onset is the first non-zero ``input_level``.

        Samples before the onset are dropped and time is re-zeroed there.
        """
        t = np.asarray(t, dtype=float)
        values = np.asarray(values, dtype=float)
        levels = np.asarray(input_level, dtype=float)
        active = np.flatnonzero(levels != 0.0)
        if active.size == 0:
            raise DegenerateDataError("input_level never switches on")
        i0 = active[0]
        level = levels[i0]
        if np.any(levels[i0:] != level):
            raise InvalidArgumentError("input_level must stay constant after the onset")
        return cls(t[i0:] - t[i0], values[i0:], float(level))


@dataclass(frozen=True)
class FitResult:
    params: SecondOrderParams
    residual_rms: float
    iterations: int
    converged: bool


def step_response(params: SecondOrderParams, times, input_level: float = 1.0) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    return (params.input_scale * input_level / params.drag) * -np.expm1(-params.decay_rate * t)


def _model_and_jacobian(logp, free, fixed, t, u):
    """Response and Jacobian with respect to the log of the free parameters."""
    vals = dict(fixed)
    vals.update({name: math.exp(lp) for name, lp in zip(free, logp)})
    m, d, s = vals["inertia"], vals["drag"], vals["input_scale"]
    a = d / m
    E = np.exp(-a * t)
    one_minus = -np.expm1(-a * t)
    gain = s * u / d
    v = gain * one_minus
    cols = {
        # d(v)/d(log m), d(v)/d(log d), d(v)/d(log s)
        "inertia": -gain * E * a * t,
        "drag": -gain * one_minus + gain * E * a * t,
        "input_scale": v,
    }
    J = np.column_stack([cols[name] for name in free])
    return v, J


def _initial_guess(series: StepResponseSeries, fixed_inertia, input_scale):
    t, u = series.times, series.input_level
    w = series.values * math.copysign(1.0, u)
    v_inf = 1.05 * float(np.max(w))
    gap = v_inf - w
    mask = gap > 0.05 * v_inf
    a = None
    if mask.sum() >= 2 and np.ptp(t[mask]) > 0:
        slope = np.polyfit(t[mask], np.log(gap[mask]), 1)[0]
        if slope < 0:
            a = -slope
    if a is None:
        a = 3.0 / float(t[-1] - t[0])
    d = abs(u) * input_scale / v_inf
    m = d / a if fixed_inertia is None else fixed_inertia
    return m, d, a


def fit_step_response(
    series: StepResponseSeries,
    fixed_inertia: Optional[float] = None,
    *,
    fit_input_scale: bool = False,
    input_scale: float = 1.0,
    max_iter: int = 200,
    tol: float = 1e-13,
) -> FitResult:
    """Fit ``(inertia, drag)`` or, with ``fixed_inertia``, ``drag`` (and ``input_scale``)."""
    if fixed_inertia is not None and not fixed_inertia > 0:
        raise InvalidArgumentError("fixed_inertia must be positive")
    if fit_input_scale and fixed_inertia is None:
        raise InvalidArgumentError("input_scale is only identifiable with a fixed inertia")
    if series.input_level == 0.0:
        raise DegenerateDataError("zero input level")
    t, y, u = series.times, series.values, series.input_level
    w = y * math.copysign(1.0, u)
    scale = float(np.max(np.abs(y)))
    if scale == 0.0 or np.max(w) <= 0 or np.ptp(y) <= 1e-12 * scale:
        raise DegenerateDataError("response is flat or has the wrong sign")

    m0, d0, a0 = _initial_guess(series, fixed_inertia, input_scale)
    fixed = {"input_scale": input_scale}
    free = ["drag"]
    start = {"drag": d0}
    if fixed_inertia is None:
        free.insert(0, "inertia")
        start["inertia"] = m0
    else:
        fixed["inertia"] = fixed_inertia
    if fit_input_scale:
        # with the mass fixed, the decay rate pins drag and the gain pins the scale
        free.append("input_scale")
        start["drag"] = a0 * fixed_inertia
        start["input_scale"] = start["drag"] * 1.05 * float(np.max(w)) / abs(u)
        del fixed["input_scale"]

    logp = np.log([start[name] for name in free])
    v, J = _model_and_jacobian(logp, free, fixed, t, u)
    r = y - v
    sse = float(r @ r)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        lam = 1.0
        improved = False
        while lam > 1e-10:
            trial = logp + lam * step
            v_t, J_t = _model_and_jacobian(trial, free, fixed, t, u)
            r_t = y - v_t
            sse_t = float(r_t @ r_t)
            if np.isfinite(sse_t) and sse_t <= sse:
                improved = True
                break
            lam *= 0.5
        if not improved:
            converged = float(np.max(np.abs(step))) < 1e-8
            break
        delta = float(np.max(np.abs(lam * step)))
        logp, J, r = trial, J_t, r_t
        rel_drop = (sse - sse_t) / max(sse, 1e-300)
        sse = sse_t
        if delta < tol or (sse <= 1e-30 * scale**2) or (rel_drop < 1e-15 and delta < 1e-9):
            converged = True
            break

    vals = dict(fixed)
    vals.update({name: float(math.exp(lp)) for name, lp in zip(free, logp)})
    params = SecondOrderParams(vals["inertia"], vals["drag"], vals["input_scale"])
    return FitResult(params, math.sqrt(sse / t.size), it, converged)
