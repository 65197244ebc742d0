"""End-to-end runs: sensor log -> per-channel AIE and baseline -> report."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..errors import DivergenceError, IncompatibleReportError, ValidationError
from ..linsys import dc_gain
from ..rcie import run_aie, run_baseline
from ..sim import SimRun, degrade, simulate
from ..vehicle import (
    SensorRecord,
    TrajectoryPoint,
    compass_to_math,
    from_local_enu,
    heading_model,
    measurements_from_records,
    reconstruct_trajectory,
    surge_model,
    to_local_enu,
)
from .config import RunConfig
from .io import read_table, write_table

THETA_CONVERGENCE_TOL = 1e-3
REPORT_FILE = "report.csv"
SUMMARY_FILE = "summary.json"

BASE_COLUMNS = (
    "k", "t", "interpolated",
    "meas_ds", "meas_dtheta",
    "aie_ds", "kf_ds", "aie_dtheta", "kf_dtheta",
    "u_hat_surge", "u_hat_heading",
    "theta_step_surge", "theta_step_heading",
    "ref_ds", "ref_dtheta",
    "aie_x_north", "aie_y_east", "kf_x_north", "kf_y_east",
    "ref_x_north", "ref_y_east",
)
INT_COLUMNS = ("k", "interpolated")


@dataclass
class RunReport:
    """Per-step table plus summary document.

    ``ref_*`` columns hold the reference the RMSEs are computed against:
    noiseless truth when available, otherwise the measurements. Reference
    positions are relative to the first sample.
    """

    columns: tuple
    table: np.ndarray
    summary: dict

    def column(self, name: str) -> np.ndarray:
        return self.table[:, self.columns.index(name)]

    def __len__(self):
        return self.table.shape[0]

    def to_csv_rows(self):
        int_idx = {self.columns.index(c) for c in INT_COLUMNS if c in self.columns}
        for row in self.table:
            yield [int(v) if j in int_idx else float(v) for j, v in enumerate(row)]

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_table(out / REPORT_FILE, self.columns, self.to_csv_rows())
        (out / SUMMARY_FILE).write_text(dump_json(self.summary), encoding="utf-8", newline="")

    @classmethod
    def read(cls, path) -> "RunReport":
        """Load from a report directory or a ``report.csv`` path."""
        p = Path(path)
        csv_path = p / REPORT_FILE if p.is_dir() else p
        summary_path = csv_path.with_name(SUMMARY_FILE)
        try:
            header = csv_path.read_text(encoding="utf-8").split("\n", 1)[0]
        except OSError as exc:
            raise ValidationError(f"cannot read report {csv_path}: {exc}") from None
        columns = tuple(header.split(","))
        table = np.array(read_table(csv_path, columns))
        summary = {}
        if summary_path.exists():
            try:
                summary = json.loads(summary_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{summary_path}: {exc}", line=exc.lineno) from None
        return cls(columns, table, summary)


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _regular_grid(records: Sequence[SensorRecord], T: float):
    """Place records on the grid ``t0 + k T``; missing fixes are interpolated.

    Returns ``(records_on_grid, interpolated_mask)``.
    """
    t0 = records[0].timestamp
    idx = []
    for r in records:
        k = round((r.timestamp - t0) / T)
        if abs(r.timestamp - t0 - k * T) > 0.25 * T:
            raise ValidationError(f"timestamp {r.timestamp} is off the {T} s sampling grid")
        if idx and k == idx[-1]:
            raise ValidationError(f"two fixes fall on grid step {k}")
        idx.append(k)
    n = idx[-1] + 1
    if n == len(records):
        return list(records), np.zeros(n, dtype=bool)

    origin = records[0]
    enu = np.array([to_local_enu(r, origin) for r in records])
    psi = np.unwrap(np.radians([r.heading for r in records]))
    grid = np.arange(n)
    east = np.interp(grid, idx, enu[:, 0])
    north = np.interp(grid, idx, enu[:, 1])
    heading = np.degrees(np.interp(grid, idx, psi))
    present = dict(zip(idx, records))
    out = []
    for k in range(n):
        if k in present:
            out.append(present[k])
        else:
            lat, lon = from_local_enu(east[k], north[k], origin)
            out.append(SensorRecord(t0 + k * T, lat, lon, heading[k]))
    mask = np.ones(n, dtype=bool)
    mask[idx] = False
    return out, mask


def _truth_increments(truth: np.ndarray):
    """Chord lengths and heading increments from truth rows (heading in degrees)."""
    ds = np.hypot(np.diff(truth[:, 1]), np.diff(truth[:, 2]))
    dth = np.radians((np.diff(truth[:, 3]) + 180.0) % 360.0 - 180.0)
    return ds, dth


def _convergence_step(theta_step: np.ndarray, steps: np.ndarray):
    above = np.flatnonzero(theta_step >= THETA_CONVERGENCE_TOL)
    if above.size == 0:
        return int(steps[0])
    if above[-1] == theta_step.size - 1:
        return None
    return int(steps[above[-1] + 1])


def _rmse(a, b) -> float:
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


def reconstruct_xy(ds, dth, initial_heading_deg: float, mode: str) -> np.ndarray:
    """``(north, east)`` rows from compass-sense increments, starting at the origin."""
    if mode == "cumulative":
        incs = zip(ds, -np.asarray(dth))
        theta0 = compass_to_math(math.radians(initial_heading_deg))
    else:
        incs = zip(ds, dth)
        theta0 = 0.0
    pts = reconstruct_trajectory(incs, TrajectoryPoint(0.0, 0.0, 0), theta0, mode)
    return np.array([[p.x_north, p.y_east] for p in pts])


def run_estimate(config: RunConfig, records: Sequence[SensorRecord], truth: Optional[np.ndarray] = None) -> RunReport:
    """Estimate both channels from a sensor log.

    ``truth`` (rows in the truth CSV layout) switches the reference for
    RMSE and endpoint error from the measurements to ground truth.
    """
    if len(records) < 3:
        raise ValidationError(f"sensor log needs at least 3 fixes, got {len(records)}")
    T = config.sample_period
    grid, interpolated = _regular_grid(records, T)
    meas_ds, meas_dth = measurements_from_records(grid)
    n = meas_ds.size

    channels = {
        "surge": (surge_model(T), meas_ds),
        "heading": (heading_model(T), meas_dth),
    }
    results = {}
    for name, (model, y) in channels.items():
        ch = config.channels[name]
        noise = ch.noise_spec(model.state_dim)
        P0 = ch.initial_cov * np.eye(model.state_dim)
        try:
            trace = run_aie(
                model,
                noise,
                ch.hyperparameters,
                y,
                P0=P0,
                innovation_sign=config.innovation_sign,
                divergence_bound=config.divergence_bound,
            )
        except DivergenceError as exc:
            raise DivergenceError(f"{name} channel: {exc}", step=exc.step, channel=name) from None
        kf_out, _ = run_baseline(model, noise, y, config.baseline_input, P0=P0)
        results[name] = (trace, kf_out)

    enu = np.array([to_local_enu(r, grid[0]) for r in grid])
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        if truth.shape[0] != len(grid):
            raise ValidationError(f"truth has {truth.shape[0]} rows, sensor grid has {len(grid)}")
        ref_ds, ref_dth = _truth_increments(truth)
        ref_xy = truth[:, 1:3] - truth[0, 1:3]
        reference = "truth"
    else:
        ref_ds, ref_dth = meas_ds, meas_dth
        ref_xy = enu[:, ::-1] - enu[0, ::-1]
        reference = "measurement"

    surge_trace, surge_kf = results["surge"]
    head_trace, head_kf = results["heading"]
    psi0 = grid[0].heading
    mode = config.reconstruction_mode
    aie_xy = reconstruct_xy(surge_trace.output, head_trace.output, psi0, mode)
    kf_xy = reconstruct_xy(surge_kf, head_kf, psi0, mode)

    steps = np.arange(1, n + 1)
    times = np.array([r.timestamp for r in grid[1:]])
    table = np.column_stack(
        [
            steps, times, interpolated[1:].astype(float),
            meas_ds, meas_dth,
            surge_trace.output, surge_kf, head_trace.output, head_kf,
            surge_trace.u_hat, head_trace.u_hat,
            surge_trace.theta_step, head_trace.theta_step,
            ref_ds, ref_dth,
            aie_xy[1:, 0], aie_xy[1:, 1], kf_xy[1:, 0], kf_xy[1:, 1],
            ref_xy[1:, 0], ref_xy[1:, 1],
        ]
    )
    report = RunReport(BASE_COLUMNS, table, {})
    report.summary = summarize(report, config, reference, psi0)
    return report


def summarize(report: RunReport, config: RunConfig, reference: str, initial_heading_deg: float) -> dict:
    c = report.column
    steps = c("k")
    end_ref = np.array([c("ref_x_north")[-1], c("ref_y_east")[-1]])

    def endpoint(prefix):
        return float(np.hypot(*(np.array([c(prefix + "_x_north")[-1], c(prefix + "_y_east")[-1]]) - end_ref)))

    T = config.sample_period
    return {
        "config_hash": config.config_hash,
        "reference": reference,
        "reconstruction_mode": config.reconstruction_mode,
        "initial_heading_deg": float(initial_heading_deg),
        "steps": int(len(report)),
        "interpolated_steps": int(c("interpolated").sum()),
        "rmse_aie": {
            "surge": _rmse(c("aie_ds"), c("ref_ds")),
            "heading": _rmse(c("aie_dtheta"), c("ref_dtheta")),
        },
        "rmse_kf": {
            "surge": _rmse(c("kf_ds"), c("ref_ds")),
            "heading": _rmse(c("kf_dtheta"), c("ref_dtheta")),
        },
        "theta_convergence_step": {
            "surge": _convergence_step(c("theta_step_surge"), steps),
            "heading": _convergence_step(c("theta_step_heading"), steps),
        },
        "dc_gain_surge": dc_gain(surge_model(T)),
        "dc_gain_heading": dc_gain(heading_model(T)),
        "endpoint_error_m": {"aie": endpoint("aie"), "kf": endpoint("kf")},
    }


def run_simulation(config: RunConfig) -> SimRun:
    s = config.simulator
    run = simulate(
        s.surge_input,
        s.yaw_input,
        s.horizon,
        config.sample_period,
        s.noise,
        config.seed,
        origin_lat=s.origin_lat,
        origin_lon=s.origin_lon,
        initial_heading_deg=s.initial_heading_deg,
        substeps=s.substeps,
    )
    if s.gps_dropout_prob > 0:
        # independent stream derived from the same seed
        run = degrade(run, s.gps_dropout_prob, seed=config.seed + 1)
    return run


METRICS = (
    ("rmse_aie", "surge"),
    ("rmse_aie", "heading"),
    ("rmse_kf", "surge"),
    ("rmse_kf", "heading"),
    ("endpoint_error_m", "aie"),
    ("endpoint_error_m", "kf"),
)


def _ratio(a: float, b: float):
    if b == 0.0:
        return 1.0 if a == 0.0 else None
    return a / b


def run_compare(report_a: RunReport, report_b: RunReport):
    """Per-step deltas ``a - b`` and per-metric ratios ``a / b``.

    Returns ``(document, delta_columns, delta_table)``. A metric is won by
    the report with the smaller value.
    """
    if len(report_a) != len(report_b) or not np.array_equal(report_a.column("t"), report_b.column("t")):
        raise IncompatibleReportError(
            f"reports do not share a step grid ({len(report_a)} vs {len(report_b)} steps)"
        )
    shared = [c for c in report_a.columns if c in report_b.columns and c not in ("k", "t")]
    deltas = np.column_stack(
        [report_a.column("k"), report_a.column("t")]
        + [report_a.column(c) - report_b.column(c) for c in shared]
    )
    delta_cols = ("k", "t") + tuple(shared)

    ratios, winners = {}, {}
    for group, key in METRICS:
        name = f"{group}.{key}"
        a = report_a.summary[group][key]
        b = report_b.summary[group][key]
        ratios[name] = _ratio(a, b)
        winners[name] = "tie" if math.isclose(a, b, rel_tol=1e-12, abs_tol=0.0) else ("a" if a < b else "b")

    def aie_vs_kf(summary):
        return {ch: _ratio(summary["rmse_aie"][ch], summary["rmse_kf"][ch]) for ch in ("surge", "heading")}

    doc = {
        "steps": len(report_a),
        "max_abs_delta": {c: float(np.max(np.abs(deltas[:, j + 2]))) for j, c in enumerate(shared)},
        "ratios": ratios,
        "winners": winners,
        "aie_to_kf_rmse": {"a": aie_vs_kf(report_a.summary), "b": aie_vs_kf(report_b.summary)},
    }
    return doc, delta_cols, deltas
