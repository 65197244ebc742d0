"""CSV formats.

All files are UTF-8 with LF line endings and ``.`` decimals. Floats are
written with ``repr`` so a parse/serialize cycle is byte-exact.

* sensor log: ``t,lat,lon,heading_deg``
* step response: ``t,value,input_level``
* truth: ``t,x_north,y_east,heading,speed,u_true,r_true`` (heading in degrees)
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from ..errors import InvalidArgumentError, ValidationError
from ..vehicle import SensorRecord

SENSOR_HEADER = ("t", "lat", "lon", "heading_deg")
STEP_HEADER = ("t", "value", "input_level")
TRUTH_HEADER = ("t", "x_north", "y_east", "heading", "speed", "u_true", "r_true")


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return repr(float(value))


def write_table(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def read_table(path, header):
    """Rows of floats; the header must match exactly. Errors carry 1-based line numbers."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ValidationError(f"{path} is empty", line=1)
    got = tuple(lines[0].rstrip("\r").split(","))
    if got != tuple(header):
        raise ValidationError(f"expected header {','.join(header)!r}, got {lines[0]!r}", line=1)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.rstrip("\r").split(",")
        if len(fields) != len(header):
            raise ValidationError(f"expected {len(header)} fields, got {len(fields)}", line=lineno)
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise ValidationError(f"non-numeric field in {line!r}", line=lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise ValidationError("non-finite value", line=lineno)
        rows.append(values)
    if not rows:
        raise ValidationError(f"{path} has no data rows", line=2)
    return rows


def read_sensor_log(path) -> list:
    rows = read_table(path, SENSOR_HEADER)
    records = []
    prev_t = -math.inf
    for lineno, (t, lat, lon, hdg) in enumerate(rows, start=2):
        if t <= prev_t:
            raise ValidationError("timestamps must be strictly increasing", line=lineno)
        prev_t = t
        try:
            records.append(SensorRecord(t, lat, lon, hdg))
        except InvalidArgumentError as exc:
            raise ValidationError(str(exc), line=lineno) from None
    return records


def write_sensor_log(path, records) -> None:
    write_table(path, SENSOR_HEADER, ((r.timestamp, r.latitude, r.longitude, r.heading) for r in records))


def read_step_csv(path):
    from ..sysid import StepResponseSeries

    rows = np.array(read_table(path, STEP_HEADER))
    try:
        return StepResponseSeries.from_columns(rows[:, 0], rows[:, 1], rows[:, 2])
    except InvalidArgumentError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_step_csv(path, t, values, input_level) -> None:
    write_table(path, STEP_HEADER, zip(t, values, input_level))


def write_truth_csv(path, run) -> None:
    tr = run.truth
    heading_deg = np.degrees(tr[:, 3]) % 360.0
    rows = zip(tr[:, 0], tr[:, 1], tr[:, 2], heading_deg, tr[:, 4], tr[:, 7], tr[:, 8])
    write_table(path, TRUTH_HEADER, rows)


def read_truth_csv(path) -> np.ndarray:
    return np.array(read_table(path, TRUTH_HEADER))
