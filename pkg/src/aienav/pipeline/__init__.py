from .config import DEFAULT_CONFIG, RunConfig, build_config, load_config
from .run import RunReport, run_compare, run_estimate, run_simulation

__all__ = [
    "DEFAULT_CONFIG",
    "RunConfig",
    "RunReport",
    "build_config",
    "load_config",
    "run_compare",
    "run_estimate",
    "run_simulation",
]
