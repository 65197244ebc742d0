"""Joint input and state estimation for surge/heading vehicle channels."""

from .linsys import (
    KalmanState,
    NoiseSpec,
    SecondOrderParams,
    StateSpaceModel,
    augment_with_delay,
    dc_gain,
    kalman_predict,
    kalman_update,
    zoh_discretize,
)
from .rcie import (
    HEADING_HYPERPARAMETERS,
    SURGE_HYPERPARAMETERS,
    AieChannel,
    Hyperparameters,
    RcieState,
    aie_step,
    run_aie,
    run_baseline,
)

__version__ = "0.1.0"

__all__ = [
    "KalmanState",
    "NoiseSpec",
    "SecondOrderParams",
    "StateSpaceModel",
    "augment_with_delay",
    "dc_gain",
    "kalman_predict",
    "kalman_update",
    "zoh_discretize",
    "HEADING_HYPERPARAMETERS",
    "SURGE_HYPERPARAMETERS",
    "AieChannel",
    "Hyperparameters",
    "RcieState",
    "aie_step",
    "run_aie",
    "run_baseline",
]
