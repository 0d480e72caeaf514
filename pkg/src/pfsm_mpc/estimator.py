"""Kalman filtering of the linear mirror state from noisy angle measurements.

The canonical-form states are not measurable, so the controller runs a
standard linear Kalman filter with scaled-identity process and measurement
covariances.  The covariance update uses the Joseph form and is symmetrized
every step, keeping P positive semidefinite over long runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lti import StateSpaceModel

__all__ = ["KalmanConfig", "KalmanState", "initial_kalman_state", "kalman_step", "KalmanFilter"]


@dataclass(frozen=True)
class KalmanConfig:
    """Scaled-identity noise covariances: Q = q_scale*I, R = r_scale*I."""

    q_scale: float = 200.0
    r_scale: float = 4.0e3

    def __post_init__(self):
        if not (self.q_scale > 0 and self.r_scale > 0):
            raise ValueError("covariance scales must be positive")


@dataclass(frozen=True)
class KalmanState:
    """Posterior estimate and its error covariance."""

    x_hat: np.ndarray
    P: np.ndarray


def initial_kalman_state(model: StateSpaceModel, cfg: KalmanConfig) -> KalmanState:
    """Neutral prior: zero state, covariance q_scale * I."""
    n = model.n_states
    return KalmanState(x_hat=np.zeros(n), P=cfg.q_scale * np.eye(n))


def kalman_step(
    ks: KalmanState,
    model: StateSpaceModel,
    cfg: KalmanConfig,
    u: np.ndarray,
    theta_meas: np.ndarray,
    u_meas: np.ndarray | None = None,
) -> KalmanState:
    """One predict/update cycle.

    ``u`` is the input that drove the transition into the current sample and
    also feeds the measurement feedthrough unless ``u_meas`` is given.  In a
    loop whose command is computed one period ahead those two inputs differ,
    and passing the measurement-instant input separately keeps the innovation
    exact for models with D != 0.
    """
    if model.dt <= 0:
        raise ValueError("kalman_step expects a discrete model")
    u = np.asarray(u, dtype=float)
    z = np.asarray(theta_meas, dtype=float)
    um = u if u_meas is None else np.asarray(u_meas, dtype=float)
    A, B, C, D = model.A, model.B, model.C, model.D
    n = model.n_states

    x_pred = A @ ks.x_hat + B @ u
    P_pred = A @ ks.P @ A.T + cfg.q_scale * np.eye(n)

    S = C @ P_pred @ C.T + cfg.r_scale * np.eye(model.n_outputs)
    K = np.linalg.solve(S.T, (P_pred @ C.T).T).T
    innov = z - (C @ x_pred + D @ um)
    x_new = x_pred + K @ innov
    IKC = np.eye(n) - K @ C
    P_new = IKC @ P_pred @ IKC.T + cfg.r_scale * (K @ K.T)
    P_new = 0.5 * (P_new + P_new.T)
    return KalmanState(x_hat=x_new, P=P_new)


class KalmanFilter:
    """Stateful wrapper owning one filter's state across a control loop."""

    def __init__(self, model: StateSpaceModel, cfg: KalmanConfig):
        self.model = model
        self.cfg = cfg
        self.state = initial_kalman_state(model, cfg)

    def step(self, u, theta_meas, u_meas=None) -> np.ndarray:
        self.state = kalman_step(self.state, self.model, self.cfg, u, theta_meas, u_meas)
        return self.state.x_hat

    def reset(self):
        self.state = initial_kalman_state(self.model, self.cfg)
