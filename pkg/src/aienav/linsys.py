"""Discrete-time SISO state-space machinery.

Exact zero-order-hold discretization of ``inertia * q'' + drag * q' = input_scale * u``,
one-step-delay augmentation, DC gain evaluation, and a linear Kalman filter
with a Joseph-form covariance update.

Vectors are stored 1-D: ``B`` and ``C`` both have shape ``(n,)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateInnovationError, InvalidArgumentError, NonConvergentGainError

__all__ = [
    "SecondOrderParams",
    "StateSpaceModel",
    "NoiseSpec",
    "KalmanState",
    "zoh_discretize",
    "augment_with_delay",
    "dc_gain",
    "transfer_at",
    "simulate",
    "initial_kalman_state",
    "kalman_predict",
    "kalman_update",
]


@dataclass(frozen=True)
class SecondOrderParams:
    """Coefficients of ``inertia * q'' + drag * q' = input_scale * u``."""

    inertia: float
    drag: float
    input_scale: float = 1.0

    def __post_init__(self):
        for name in ("inertia", "drag", "input_scale"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"{name} must be finite and positive, got {value!r}")

    @property
    def decay_rate(self) -> float:
        return self.drag / self.inertia

    @property
    def gain(self) -> float:
        return self.input_scale / self.inertia

    @property
    def time_constant(self) -> float:
        return self.inertia / self.drag


@dataclass(frozen=True)
class StateSpaceModel:
    """``x[k+1] = A x[k] + B u[k]``, ``y[k] = C x[k]``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    sample_period: float

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        B = np.array(self.B, dtype=float).reshape(-1)
        C = np.array(self.C, dtype=float).reshape(-1)
        n = A.shape[0]
        if A.shape != (n, n) or B.shape != (n,) or C.shape != (n,):
            raise InvalidArgumentError(
                f"inconsistent dimensions A{A.shape} B{B.shape} C{C.shape}"
            )
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B)) and np.all(np.isfinite(C))):
            raise InvalidArgumentError("model matrices must be finite")
        if not (math.isfinite(self.sample_period) and self.sample_period > 0):
            raise InvalidArgumentError(f"sample_period must be positive, got {self.sample_period!r}")
        for arr in (A, B, C):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    def with_output(self, C) -> "StateSpaceModel":
        return replace(self, C=C)


@dataclass(frozen=True)
class NoiseSpec:
    """Process covariance ``Q`` and scalar measurement variance."""

    process_cov: np.ndarray
    measurement_var: float

    def __post_init__(self):
        Q = np.array(self.process_cov, dtype=float, ndmin=2)
        if Q.shape[0] != Q.shape[1]:
            raise InvalidArgumentError(f"process_cov must be square, got {Q.shape}")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise InvalidArgumentError("process_cov must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -1e-12:
            raise InvalidArgumentError("process_cov must be positive semidefinite")
        if not (math.isfinite(self.measurement_var) and self.measurement_var > 0):
            raise InvalidArgumentError("measurement_var must be positive")
        Q.setflags(write=False)
        object.__setattr__(self, "process_cov", Q)

    @classmethod
    def isotropic(cls, n: int, process_var: float = 1e-4, measurement_var: float = 1e-2) -> "NoiseSpec":
        return cls(process_var * np.eye(n), measurement_var)


@dataclass(frozen=True)
class KalmanState:
    """Filter state after the most recent predict or update.

    ``innovation`` is ``y - C x_prior`` from the last update and ``K`` the
    gain applied there.
    """

    x_hat: np.ndarray
    P: np.ndarray
    K: np.ndarray = field(default=None)
    innovation: float = 0.0
    step: int = 0

    def __post_init__(self):
        x = np.array(self.x_hat, dtype=float).reshape(-1)
        P = np.array(self.P, dtype=float, ndmin=2)
        K = np.zeros_like(x) if self.K is None else np.array(self.K, dtype=float).reshape(-1)
        object.__setattr__(self, "x_hat", x)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "K", K)


def initial_kalman_state(n: int, x0=None, P0=None) -> KalmanState:
    """Filter initialised at ``x0`` (default zero) with covariance ``P0`` (default identity)."""
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    P = np.eye(n) if P0 is None else np.asarray(P0, dtype=float)
    return KalmanState(x, P)


def zoh_discretize(params: SecondOrderParams, T: float) -> StateSpaceModel:
    """Exact ZOH discretization into a (position, velocity) model with ``C = [1, 0]``."""
    if not (math.isfinite(T) and T > 0):
        raise InvalidArgumentError(f"sample period must be positive, got {T!r}")
    a = params.decay_rate
    g = params.gain
    decay = math.exp(-a * T)
    one_minus = -math.expm1(-a * T)
    A = np.array([[1.0, one_minus / a], [0.0, decay]])
    B = np.array([(g / a) * (T - one_minus / a), (g / a) * one_minus])
    return StateSpaceModel(A, B, np.array([1.0, 0.0]), T)


def augment_with_delay(model: StateSpaceModel) -> StateSpaceModel:
    """Append a state holding the previous step's first state.

    The new output row is ``[C, 0]``; callers normally replace it.
    """
    n = model.state_dim
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = model.A
    A[n, 0] = 1.0
    B = np.append(model.B, 0.0)
    C = np.append(model.C, 0.0)
    return StateSpaceModel(A, B, C, model.sample_period)


def transfer_at(model: StateSpaceModel, z: complex) -> complex:
    """Evaluate ``C (zI - A)^-1 B`` at a single point."""
    M = z * np.eye(model.state_dim) - model.A
    return model.C @ np.linalg.solve(M, model.B)


def dc_gain(
    model: StateSpaceModel,
    method: str = "step",
    *,
    rtol: float = 1e-9,
    window: int = 100,
    max_steps: int = 1_000_000,
) -> float:
    """Steady-state output per unit constant input.

    ``method="step"`` runs the unit-step response until the output changes by
    less than ``rtol`` (relative) for ``window`` consecutive steps.
    ``method="z"`` evaluates the transfer function at ``z = 1 + 1e-8``.
    """
    if method == "z":
        return float(np.real(transfer_at(model, 1.0 + 1e-8)))
    if method != "step":
        raise InvalidArgumentError(f"unknown dc_gain method {method!r}")

    A, B, C = model.A, model.B, model.C
    x = np.zeros(model.state_dim)
    y_prev = 0.0
    quiet = 0
    for _ in range(max_steps):
        x = A @ x + B
        y = float(C @ x)
        if not math.isfinite(y):
            break
        if abs(y - y_prev) <= rtol * max(abs(y), 1e-300):
            quiet += 1
            if quiet >= window:
                return y
        else:
            quiet = 0
        y_prev = y
    raise NonConvergentGainError(f"step response did not settle within {max_steps} steps")


def simulate(model: StateSpaceModel, inputs, x0=None):
    """Propagate the model; returns ``(states, outputs)`` with ``states[k] = x[k]``.

    ``states`` has ``len(inputs) + 1`` rows.
    """
    u = np.asarray(inputs, dtype=float).reshape(-1)
    x = np.zeros(model.state_dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    states = np.empty((u.size + 1, model.state_dim))
    states[0] = x
    for k, uk in enumerate(u):
        x = model.A @ x + model.B * uk
        states[k + 1] = x
    return states, states @ model.C


def kalman_predict(state: KalmanState, model: StateSpaceModel, noise: NoiseSpec, u: float) -> KalmanState:
    x = model.A @ state.x_hat + model.B * u
    P = model.A @ state.P @ model.A.T + noise.process_cov
    return replace(state, x_hat=x, P=0.5 * (P + P.T))


def kalman_update(state: KalmanState, model: StateSpaceModel, noise: NoiseSpec, y: float) -> KalmanState:
    """Measurement update on a predicted state; advances ``step`` by one."""
    C = model.C
    P = state.P
    innovation = float(y - C @ state.x_hat)
    PCt = P @ C
    S = float(C @ PCt) + noise.measurement_var
    if not (S > 0 and math.isfinite(S)):
        raise DegenerateInnovationError(f"innovation covariance is {S!r}")
    K = PCt / S
    x = state.x_hat + K * innovation
    IKC = np.eye(model.state_dim) - np.outer(K, C)
    P_new = IKC @ P @ IKC.T + noise.measurement_var * np.outer(K, K)
    return KalmanState(x, 0.5 * (P_new + P_new.T), K, innovation, state.step + 1)
