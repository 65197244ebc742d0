"""Command-line entry point.

Exit codes: 0 success, 1 compare found report B better on some metric,
2 validation failure, 3 estimator divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import (
    DegenerateDataError,
    DegenerateInnovationError,
    DegenerateRunError,
    DivergenceError,
    IllConditionedUpdateError,
    IncompatibleReportError,
    InvalidArgumentError,
    OutOfProjectionError,
    ValidationError,
)
from ..sysid import fit_step_response
from .config import load_config
from .io import read_sensor_log, read_step_csv, read_truth_csv, write_sensor_log, write_table, write_truth_csv
from .run import RunReport, reconstruct_xy, dump_json, run_compare, run_estimate, run_simulation

log = logging.getLogger("aienav")

EXIT_OK = 0
EXIT_B_BETTER = 1
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3


def _output_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _config(args)
    run = run_simulation(cfg)
    out = _output_dir(args)
    write_sensor_log(out / "sensor_log.csv", run.records)
    write_truth_csv(out / "truth.csv", run)
    if run.gaps:
        write_table(out / "gaps.csv", ("t",), ((t,) for t in run.gaps))
    log.info("wrote %d fixes to %s", len(run.records), out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _config(args)
    records = read_sensor_log(args.input)
    truth = read_truth_csv(args.truth) if args.truth else None
    report = run_estimate(cfg, records, truth)
    report.write(_output_dir(args))
    s = report.summary
    log.info(
        "rmse aie/kf surge %.4g/%.4g heading %.4g/%.4g",
        s["rmse_aie"]["surge"], s["rmse_kf"]["surge"], s["rmse_aie"]["heading"], s["rmse_kf"]["heading"],
    )
    return EXIT_OK


def cmd_sysid(args) -> int:
    series = read_step_csv(args.input)
    fit = fit_step_response(series, args.fixed_inertia, fit_input_scale=args.fit_input_scale)
    doc = {
        "inertia": fit.params.inertia,
        "drag": fit.params.drag,
        "input_scale": fit.params.input_scale,
        "residual_rms": fit.residual_rms,
        "iterations": fit.iterations,
        "converged": fit.converged,
    }
    (_output_dir(args) / "fit.json").write_text(dump_json(doc), encoding="utf-8", newline="")
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    report = RunReport.read(args.input)
    mode = args.mode or report.summary.get("reconstruction_mode", "cumulative")
    psi0 = args.initial_heading_deg
    if psi0 is None:
        psi0 = report.summary.get("initial_heading_deg", 0.0)
    c = report.column
    k = np.concatenate(([0], c("k")))
    tracks = [
        reconstruct_xy(c(f"{src}_ds"), c(f"{src}_dtheta"), psi0, mode) for src in ("aie", "kf", "meas")
    ]
    rows = np.column_stack([k] + [xy for track in tracks for xy in track.T])
    header = ("k", "aie_x_north", "aie_y_east", "kf_x_north", "kf_y_east", "meas_x_north", "meas_y_east")
    write_table(
        _output_dir(args) / "trajectory.csv",
        header,
        ([int(r[0])] + list(r[1:]) for r in rows),
    )
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.input) != 2:
        raise ValidationError("compare needs exactly two --input report directories")
    a, b = (RunReport.read(p) for p in args.input)
    doc, cols, deltas = run_compare(a, b)
    out = _output_dir(args)
    (out / "comparison.json").write_text(dump_json(doc), encoding="utf-8", newline="")
    int_cols = {0}
    write_table(out / "deltas.csv", cols, ([int(v) if j in int_cols else v for j, v in enumerate(r)] for r in deltas))
    return EXIT_B_BETTER if "b" in doc["winners"].values() else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aienav", description="Adaptive input estimation for surge/heading channels")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_input=True, config=True):
        if config:
            sp.add_argument("--config", help="YAML run configuration (defaults if omitted)")
            sp.add_argument("--seed", type=int, help="override the config seed")
        if needs_input:
            sp.add_argument("--input", required=True)
        sp.add_argument("--output-dir", required=True)

    sp = sub.add_parser("simulate", help="generate a synthetic sensor log and truth file")
    common(sp, needs_input=False)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="run AIE and the fixed-input baseline on a sensor log")
    common(sp)
    sp.add_argument("--truth", help="truth CSV from `simulate`, used as the RMSE reference")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("sysid", help="fit a step-response CSV")
    common(sp, config=False)
    sp.add_argument("--fixed-inertia", type=float)
    sp.add_argument("--fit-input-scale", action="store_true")
    sp.set_defaults(func=cmd_sysid)

    sp = sub.add_parser("reconstruct", help="dead-reckon trajectories from a report")
    common(sp, config=False)
    sp.add_argument("--mode", choices=("cumulative", "literal"))
    sp.add_argument("--initial-heading-deg", type=float)
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("compare", help="compare two report directories")
    sp.add_argument("--input", action="append", default=[], help="report directory (give twice)")
    sp.add_argument("--output-dir", required=True)
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DivergenceError, IllConditionedUpdateError, DegenerateInnovationError) as exc:
        print(f"error: estimator diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (
        ValidationError,
        InvalidArgumentError,
        DegenerateDataError,
        DegenerateRunError,
        OutOfProjectionError,
        IncompatibleReportError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
