import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aienav.errors import DegenerateDataError, InvalidArgumentError
from aienav.linsys import SecondOrderParams
from aienav.sysid import StepResponseSeries, _model_and_jacobian, fit_step_response, step_response

SURGE = SecondOrderParams(0.469, 0.311)
YAW = SecondOrderParams(4.896, 9.087)


def _series(params, u=1.0, n=200, tau_span=5.0, sigma_frac=0.0, seed=0):
    t = np.linspace(0.0, tau_span * params.time_constant, n)
    v = step_response(params, t, u)
    if sigma_frac:
        steady = params.input_scale * u / params.drag
        v = v + np.random.default_rng(seed).normal(0.0, sigma_frac * abs(steady), n)
    return StepResponseSeries(t, v, u)


@pytest.mark.parametrize("params", [SURGE, YAW], ids=["surge", "yaw"])
def test_noiseless_round_trip(params):
    fit = fit_step_response(_series(params))
    assert fit.converged
    assert fit.params.inertia == pytest.approx(params.inertia, rel=1e-6)
    assert fit.params.drag == pytest.approx(params.drag, rel=1e-6)
    assert fit.residual_rms < 1e-9


def test_fixed_inertia_fits_drag():
    fit = fit_step_response(_series(SURGE, u=0.6), fixed_inertia=0.469)
    assert fit.params.inertia == 0.469
    assert fit.params.drag == pytest.approx(0.311, rel=1e-6)


def test_fixed_inertia_with_input_scale():
    truth = SecondOrderParams(2.0, 3.0, 1.7)
    fit = fit_step_response(_series(truth, u=-0.8), fixed_inertia=2.0, fit_input_scale=True)
    assert fit.params.drag == pytest.approx(3.0, rel=1e-6)
    assert fit.params.input_scale == pytest.approx(1.7, rel=1e-6)


def test_input_scale_requires_fixed_inertia():
    with pytest.raises(InvalidArgumentError):
        fit_step_response(_series(SURGE), fit_input_scale=True)


@pytest.mark.parametrize("params", [SURGE, YAW], ids=["surge", "yaw"])
def test_monte_carlo_five_percent_noise(params):
    hits = 0
    for seed in range(100):
        fit = fit_step_response(_series(params, sigma_frac=0.05, seed=seed))
        ok_m = abs(fit.params.inertia / params.inertia - 1) < 0.05
        ok_d = abs(fit.params.drag / params.drag - 1) < 0.05
        hits += ok_m and ok_d
    assert hits >= 95


@settings(max_examples=40, deadline=None)
@given(m=st.floats(0.1, 20.0), d=st.floats(0.1, 20.0), u=st.floats(0.1, 5.0))
def test_round_trip_property(m, d, u):
    p = SecondOrderParams(m, d)
    fit = fit_step_response(_series(p, u=u))
    assert fit.params.inertia == pytest.approx(m, rel=1e-6)
    assert fit.params.drag == pytest.approx(d, rel=1e-6)


def test_residual_is_shift_invariant():
    base = _series(SURGE, sigma_frac=0.05, seed=3)
    shifted = StepResponseSeries(base.times + 12.5, base.values, base.input_level)
    a = fit_step_response(base)
    b = fit_step_response(StepResponseSeries.from_columns(
        np.concatenate(([0.0], shifted.times)),
        np.concatenate(([0.0], shifted.values)),
        np.concatenate(([0.0], np.full(base.times.size, 1.0))),
    ))
    assert b.params.drag == pytest.approx(a.params.drag, rel=1e-9)
    assert b.params.inertia == pytest.approx(a.params.inertia, rel=1e-9)


def test_fit_never_worse_than_truth():
    s = _series(YAW, sigma_frac=0.05, seed=9)
    fit = fit_step_response(s)
    truth_rms = math.sqrt(np.mean((s.values - step_response(YAW, s.times)) ** 2))
    assert fit.residual_rms <= truth_rms + 1e-12


def test_jacobian_matches_finite_differences():
    t = np.linspace(0, 3, 50)
    free = ["inertia", "drag", "input_scale"]
    logp = np.log([0.8, 1.3, 2.1])
    _, J = _model_and_jacobian(logp, free, {}, t, 0.7)
    h = 1e-6
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        vp, _ = _model_and_jacobian(logp + e, free, {}, t, 0.7)
        vm, _ = _model_and_jacobian(logp - e, free, {}, t, 0.7)
        np.testing.assert_allclose(J[:, j], (vp - vm) / (2 * h), atol=1e-8)


def test_flat_series_is_degenerate():
    with pytest.raises(DegenerateDataError):
        fit_step_response(StepResponseSeries(np.arange(10.0), np.full(10, 2.0), 1.0))


def test_zero_input_never_switches_on():
    with pytest.raises(DegenerateDataError):
        StepResponseSeries.from_columns(np.arange(5.0), np.zeros(5), np.zeros(5))


def test_series_validation():
    with pytest.raises(InvalidArgumentError):
        StepResponseSeries([0.0, 1.0], [0.0, 1.0], 1.0)
    with pytest.raises(InvalidArgumentError):
        StepResponseSeries([0.0, 1.0, 1.0], [0.0, 1.0, 2.0], 1.0)


def test_from_columns_drops_pre_onset_samples():
    s = StepResponseSeries.from_columns([0, 1, 2, 3, 4], [0, 0, 0.1, 0.3, 0.4], [0, 0, 2, 2, 2])
    np.testing.assert_array_equal(s.times, [0.0, 1.0, 2.0])
    assert s.input_level == 2.0


def test_max_iter_exhaustion_reports_not_converged():
    fit = fit_step_response(_series(YAW, sigma_frac=0.05, seed=1), max_iter=1)
    assert fit.iterations == 1
    assert not fit.converged
