"""Retrospective-cost adaptive input estimation.

An input-estimation subsystem ``u_hat[k] = Phi[k] @ theta`` is driven by the
Kalman residuals ``z[k] = C x_prior[k] - y[k]``; ``theta`` is re-fitted every
step by a regularized RLS recursion that minimizes the retrospective cost
accumulated over all past steps.

Sign conventions follow the retrospective-cost literature: the residual is
*predicted minus measured* and the data-assimilation gain is ``K_da = -K``
where ``K`` is the ordinary Kalman gain stored in :class:`KalmanState`.
With these, the closed-loop filter matrix is ``A (I + K_da C)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DivergenceError, IllConditionedUpdateError, InvalidArgumentError
from .linsys import KalmanState, NoiseSpec, StateSpaceModel, initial_kalman_state, kalman_predict, kalman_update

__all__ = [
    "Hyperparameters",
    "RcieState",
    "RlsWorkset",
    "SURGE_HYPERPARAMETERS",
    "HEADING_HYPERPARAMETERS",
    "build_regressor",
    "filter_coefficients",
    "filtered_signals",
    "assemble_workset",
    "rls_update",
    "estimate_input",
    "aie_step",
    "AieChannel",
    "AieTrace",
    "run_aie",
    "run_baseline",
]

GAMMA_COND_LIMIT = 1e14


@dataclass(frozen=True)
class Hyperparameters:
    """Tuning of one estimation channel.

    ``R_theta = R_theta_scale * I`` and the initial RLS covariance is its inverse.
    """

    n_e: int
    n_f: int
    R_z: float
    R_d: float
    R_theta_scale: float
    theta0: Optional[tuple] = None

    def __post_init__(self):
        if int(self.n_e) != self.n_e or self.n_e < 1:
            raise InvalidArgumentError(f"n_e must be an integer >= 1, got {self.n_e!r}")
        if int(self.n_f) != self.n_f or self.n_f < 1:
            raise InvalidArgumentError(f"n_f must be an integer >= 1, got {self.n_f!r}")
        for name in ("R_z", "R_d", "R_theta_scale"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"{name} must be positive, got {value!r}")
        if self.theta0 is not None:
            theta0 = tuple(float(v) for v in self.theta0)
            if len(theta0) != self.l_theta:
                raise InvalidArgumentError(
                    f"theta0 has length {len(theta0)}, expected 2*n_e+1 = {self.l_theta}"
                )
            object.__setattr__(self, "theta0", theta0)

    @property
    def l_theta(self) -> int:
        return 2 * self.n_e + 1

    def initial_theta(self) -> np.ndarray:
        if self.theta0 is None:
            return np.zeros(self.l_theta)
        return np.array(self.theta0)


SURGE_HYPERPARAMETERS = Hyperparameters(n_e=4, n_f=8, R_z=1.0, R_d=50.0, R_theta_scale=10**-0.01)
HEADING_HYPERPARAMETERS = Hyperparameters(n_e=3, n_f=4, R_z=1.0, R_d=0.1, R_theta_scale=10**-2)


@dataclass(frozen=True)
class RlsWorkset:
    """Stacked regression data for one RLS step.

    Row 0 is the retrospective residual (filtered regressor), row 1 the
    input-magnitude penalty (unfiltered regressor).
    """

    phi_tilde: np.ndarray
    z_tilde: np.ndarray
    R_tilde: np.ndarray
    gamma: Optional[np.ndarray] = None


@dataclass(frozen=True)
class RcieState:
    """Estimator memory at step ``k``.

    All histories are newest-first: ``u_hat_history[0]`` is ``u_hat[k-1]``,
    ``gains[0]`` is the data-assimilation gain of step ``k-1``. Entries
    before step 0 are absent and read as zero.
    """

    theta: np.ndarray
    P_rls: np.ndarray
    n_e: int
    n_f: int
    u_hat_history: tuple = ()
    z_history: tuple = ()
    phi_history: tuple = ()
    gains: tuple = ()
    H_cache: tuple = ()
    step: int = 0
    theta_step: float = 0.0
    last_workset: Optional[RlsWorkset] = field(default=None, repr=False)

    @classmethod
    def initial(cls, hp: Hyperparameters) -> "RcieState":
        return cls(
            theta=hp.initial_theta(),
            P_rls=np.eye(hp.l_theta) / hp.R_theta_scale,
            n_e=hp.n_e,
            n_f=hp.n_f,
        )

    @property
    def u_hat_bound(self) -> int:
        return max(self.n_e, self.n_f)


def _padded(history: Sequence[float], count: int) -> np.ndarray:
    out = np.zeros(count)
    m = min(count, len(history))
    out[:m] = history[:m]
    return out


def build_regressor(state: RcieState, z_k: float) -> np.ndarray:
    """``[u_hat[k-1..k-n_e], z[k], z[k-1..k-n_e]]`` with zero pre-history."""
    n_e = state.n_e
    return np.concatenate(
        (_padded(state.u_hat_history, n_e), [z_k], _padded(state.z_history, n_e))
    )


def filter_coefficients(
    model: StateSpaceModel,
    gains: Sequence[np.ndarray],
    k: int,
    n_f: int,
    sign: float = 1.0,
) -> list:
    """Markov-like weights ``H_1..H_n_f`` at step ``k``.

    ``H_1 = C B`` and ``H_i = C Abar[k-1] ... Abar[k-i+1] B`` with
    ``Abar[j] = A (I + sign * gains[j] C)``; ``H_i = 0`` for ``i > k``.
    ``gains`` is newest first, so ``gains[0]`` belongs to step ``k-1``.
    """
    A, B, C = model.A, model.B, model.C
    H = [0.0] * n_f
    row = C.copy()
    for i in range(1, min(n_f, k) + 1):
        if i >= 2:
            K = gains[i - 2]
            # row <- row @ A (I + s K C), kept as a row-vector product
            rA = row @ A
            row = rA + sign * (rA @ K) * C
        H[i - 1] = float(row @ B)
    return H


def filtered_signals(state: RcieState, H: Sequence[float]):
    """``(Phi_f, u_f) = sum_i H_i * (Phi[k-i], u_hat[k-i])``."""
    phi_f = np.zeros(state.theta.size)
    u_f = 0.0
    for i, h in enumerate(H):
        if h == 0.0 or i >= len(state.phi_history):
            continue
        phi_f += h * state.phi_history[i]
        if i < len(state.u_hat_history):
            u_f += h * state.u_hat_history[i]
    return phi_f, u_f


def assemble_workset(phi_f, phi, z_k: float, u_f: float, hp: Hyperparameters) -> RlsWorkset:
    return RlsWorkset(
        phi_tilde=np.vstack((phi_f, phi)),
        z_tilde=np.array([z_k - u_f, 0.0]),
        R_tilde=np.diag([hp.R_z, hp.R_d]),
    )


def rls_update(state: RcieState, workset: RlsWorkset) -> RcieState:
    """One step of the regularized retrospective-cost RLS recursion."""
    Pk = state.P_rls
    Phi = workset.phi_tilde
    gamma_inv = np.diag(1.0 / np.diag(workset.R_tilde)) + Phi @ Pk @ Phi.T
    cond = np.linalg.cond(gamma_inv)
    if not np.isfinite(cond) or cond > GAMMA_COND_LIMIT:
        raise IllConditionedUpdateError(f"step {state.step}: condition number {cond:.3g}")
    gamma = np.linalg.inv(gamma_inv)
    gamma = 0.5 * (gamma + gamma.T)
    PPhiT = Pk @ Phi.T
    theta = state.theta - PPhiT @ gamma @ (workset.z_tilde + Phi @ state.theta)
    P = Pk - PPhiT @ gamma @ PPhiT.T
    P = 0.5 * (P + P.T)
    return replace(
        state,
        theta=theta,
        P_rls=P,
        theta_step=float(np.linalg.norm(theta - state.theta)),
        last_workset=replace(workset, gamma=gamma),
    )


def estimate_input(theta, phi) -> float:
    return float(np.dot(phi, theta))


def aie_step(
    rcie: RcieState,
    kalman: KalmanState,
    model: StateSpaceModel,
    noise: NoiseSpec,
    y_k: float,
    hp: Hyperparameters,
    *,
    innovation_sign: float = 1.0,
    divergence_bound: float = 1e6,
):
    """Advance one channel by one measurement.

    Order: predict with ``u_hat[k-1]``, residual, regressor, filter weights,
    RLS (giving ``theta[k+1]``), ``u_hat[k] = Phi[k] @ theta[k+1]``, Kalman
    update, then shift histories.

    Returns ``(rcie, kalman, u_hat_k)``.
    """
    k = rcie.step
    u_prev = rcie.u_hat_history[0] if rcie.u_hat_history else 0.0
    prior = kalman_predict(kalman, model, noise, u_prev)
    z_k = float(model.C @ prior.x_hat - y_k)

    phi = build_regressor(rcie, z_k)
    H = filter_coefficients(model, rcie.gains, k, rcie.n_f, sign=innovation_sign)
    rcie = replace(rcie, H_cache=tuple(H))
    phi_f, u_f = filtered_signals(rcie, H)
    rcie = rls_update(rcie, assemble_workset(phi_f, phi, z_k, u_f, hp))

    u_hat = estimate_input(rcie.theta, phi)
    if not (math.isfinite(u_hat) and abs(u_hat) <= divergence_bound):
        raise DivergenceError(
            f"input estimate {u_hat!r} exceeds bound {divergence_bound:g} at step {k}", step=k
        )

    post = kalman_update(prior, model, noise, y_k)
    n_u = rcie.u_hat_bound
    rcie = replace(
        rcie,
        u_hat_history=((u_hat,) + rcie.u_hat_history)[:n_u],
        z_history=((z_k,) + rcie.z_history)[: rcie.n_e],
        phi_history=((phi,) + rcie.phi_history)[: rcie.n_f],
        gains=((-post.K,) + rcie.gains)[: max(rcie.n_f - 1, 0)],
        step=k + 1,
    )
    return rcie, post, u_hat


class AieChannel:
    """Stateful convenience wrapper around :func:`aie_step`."""

    def __init__(
        self,
        model: StateSpaceModel,
        noise: NoiseSpec,
        hp: Hyperparameters,
        *,
        x0=None,
        P0=None,
        innovation_sign: float = 1.0,
        divergence_bound: float = 1e6,
    ):
        self.model = model
        self.noise = noise
        self.hp = hp
        self.innovation_sign = innovation_sign
        self.divergence_bound = divergence_bound
        self.rcie = RcieState.initial(hp)
        self.kalman = initial_kalman_state(model.state_dim, x0, P0)

    def step(self, y: float) -> float:
        self.rcie, self.kalman, u_hat = aie_step(
            self.rcie,
            self.kalman,
            self.model,
            self.noise,
            y,
            self.hp,
            innovation_sign=self.innovation_sign,
            divergence_bound=self.divergence_bound,
        )
        return u_hat

    @property
    def output_estimate(self) -> float:
        return float(self.model.C @ self.kalman.x_hat)


@dataclass
class AieTrace:
    u_hat: np.ndarray
    output: np.ndarray
    states: np.ndarray
    theta: np.ndarray
    theta_step: np.ndarray
    residual: np.ndarray
    gain: np.ndarray
    worksets: list


def run_aie(model, noise, hp, measurements, *, record_worksets=False, **kwargs) -> AieTrace:
    """Run AIE over a whole measurement sequence."""
    ch = AieChannel(model, noise, hp, **kwargs)
    n = len(measurements)
    u_hat = np.empty(n)
    output = np.empty(n)
    states = np.empty((n, model.state_dim))
    theta = np.empty((n, hp.l_theta))
    theta_step = np.empty(n)
    residual = np.empty(n)
    gain = np.empty((n, model.state_dim))
    worksets = []
    for k, y in enumerate(measurements):
        u_hat[k] = ch.step(float(y))
        output[k] = ch.output_estimate
        states[k] = ch.kalman.x_hat
        theta[k] = ch.rcie.theta
        theta_step[k] = ch.rcie.theta_step
        residual[k] = ch.rcie.z_history[0]
        gain[k] = ch.kalman.K
        if record_worksets:
            worksets.append(ch.rcie.last_workset)
    return AieTrace(u_hat, output, states, theta, theta_step, residual, gain, worksets)


def run_baseline(model, noise, measurements, u_nominal: float = 1.0, *, x0=None, P0=None):
    """Kalman filter fed a fixed nominal input; returns ``(outputs, states)``."""
    state = initial_kalman_state(model.state_dim, x0, P0)
    n = len(measurements)
    output = np.empty(n)
    states = np.empty((n, model.state_dim))
    for k, y in enumerate(measurements):
        state = kalman_update(kalman_predict(state, model, noise, u_nominal), model, noise, float(y))
        output[k] = model.C @ state.x_hat
        states[k] = state.x_hat
    return output, states
