"""Run configuration: defaults, YAML loading and schema validation."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import yaml

from ..errors import InvalidArgumentError, ValidationError
from ..linsys import NoiseSpec
from ..rcie import Hyperparameters
from ..sim import InputProfile, SensorNoise

CHANNELS = ("surge", "heading")

DEFAULT_CONFIG = {
    "sample_period": 0.546,
    "seed": 0,
    "baseline_input": 1.0,
    "reconstruction_mode": "cumulative",
    "innovation_sign": 1,
    "divergence_bound": 1.0e6,
    "channels": {
        "surge": {
            "hyperparameters": {"n_e": 4, "n_f": 8, "R_z": 1.0, "R_d": 50.0, "R_theta_scale": 10**-0.01, "theta0": None},
            "noise": {"process_var": 1.0e-4, "measurement_var": 1.0e-2, "initial_cov": 1.0},
        },
        "heading": {
            "hyperparameters": {"n_e": 3, "n_f": 4, "R_z": 1.0, "R_d": 0.1, "R_theta_scale": 1.0e-2, "theta0": None},
            "noise": {"process_var": 1.0e-4, "measurement_var": 1.0e-2, "initial_cov": 1.0},
        },
    },
    "simulator": {
        "horizon": 300.0,
        "gps_sigma": 1.5,
        "compass_sigma": 2.0,
        # about 2 m/s cruise and a 0.1 rad/s turn for the identified vehicle
        "surge_input": {"kind": "step", "amplitude": 0.622},
        "yaw_input": {"kind": "step", "amplitude": 0.9087},
        "origin_lat": 40.0,
        "origin_lon": -75.0,
        "initial_heading_deg": 0.0,
        "substeps": 20,
        "gps_dropout_prob": 0.0,
    },
}


def load_schema() -> dict:
    text = resources.files(__package__).joinpath("config_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class ChannelConfig:
    hyperparameters: Hyperparameters
    process_var: float
    measurement_var: float
    initial_cov: float

    def noise_spec(self, n: int) -> NoiseSpec:
        return NoiseSpec.isotropic(n, self.process_var, self.measurement_var)


@dataclass(frozen=True)
class SimulatorConfig:
    horizon: float
    noise: SensorNoise
    surge_input: InputProfile
    yaw_input: InputProfile
    origin_lat: float
    origin_lon: float
    initial_heading_deg: float
    substeps: int
    gps_dropout_prob: float


@dataclass(frozen=True)
class RunConfig:
    sample_period: float
    seed: int
    baseline_input: float
    reconstruction_mode: str
    innovation_sign: int
    divergence_bound: float
    channels: dict
    simulator: SimulatorConfig
    raw: dict

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_seed(self, seed: int) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        raw["seed"] = int(seed)
        return build_config(raw)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def build_config(data: Optional[dict] = None) -> RunConfig:
    """Validate ``data`` (merged over the defaults) and build a :class:`RunConfig`."""
    raw = _merge(DEFAULT_CONFIG, data or {})
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"config {where}: {exc.message}") from None

    try:
        channels = {}
        for name in CHANNELS:
            ch = raw["channels"][name]
            hp = Hyperparameters(**ch["hyperparameters"])
            channels[name] = ChannelConfig(hp, **ch["noise"])
        s = raw["simulator"]
        simulator = SimulatorConfig(
            horizon=s["horizon"],
            noise=SensorNoise(s["gps_sigma"], s["compass_sigma"]),
            surge_input=InputProfile(**s["surge_input"]),
            yaw_input=InputProfile(**s["yaw_input"]),
            origin_lat=s.get("origin_lat", 40.0),
            origin_lon=s.get("origin_lon", -75.0),
            initial_heading_deg=s.get("initial_heading_deg", 0.0),
            substeps=s.get("substeps", 20),
            gps_dropout_prob=s.get("gps_dropout_prob", 0.0),
        )
    except InvalidArgumentError as exc:
        raise ValidationError(f"config: {exc}") from None
    if simulator.horizon <= raw["sample_period"]:
        raise ValidationError("config simulator/horizon: must exceed sample_period")

    return RunConfig(
        sample_period=raw["sample_period"],
        seed=raw["seed"],
        baseline_input=raw["baseline_input"],
        reconstruction_mode=raw["reconstruction_mode"],
        innovation_sign=raw["innovation_sign"],
        divergence_bound=raw["divergence_bound"],
        channels=channels,
        simulator=simulator,
        raw=raw,
    )


def load_config(path=None) -> RunConfig:
    """Load a YAML (or JSON) config file; ``None`` gives the defaults."""
    if path is None:
        return build_config()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        line = getattr(getattr(exc, "problem_mark", None), "line", None)
        raise ValidationError(f"config is not valid YAML: {exc}", None if line is None else line + 1) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValidationError("config must be a mapping")
    return build_config(data)
