"""Receding-horizon tracking controller with an error-integral state.

The discrete plant model is augmented with the accumulated tracking error so
that the quadratic cost penalizes predicted output error, predicted error
integral, and input increments over the horizon.  Input and output range
constraints turn the minimization into a dense QP, solved through its dual:
the dual Hessian G = W M^-1 W^T is fixed, the multipliers obey mu >= 0 only,
and cyclic coordinate descent with a non-negativity clamp converges fast when
warm-started from the previous period's solution.

All horizon-stacked matrices are built once per (model, config) pair and
reused; only the linear terms m, b, g change from step to step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lti import StateSpaceModel

__all__ = [
    "MpcConfig",
    "AugmentedModel",
    "PredictionMatrices",
    "QpSolution",
    "build_augmented",
    "build_prediction",
    "build_qp",
    "solve_dual_cd",
    "solve_qp_instance",
    "kkt_residuals",
    "primal_from_dual",
    "dual_objective",
    "MpcController",
]

OUTPUT_UNBOUNDED = 1.0e12  # stand-in bound when output constraints are toggled off


@dataclass(frozen=True)
class MpcConfig:
    """Controller knobs.

    ``ki`` may be a scalar (times identity) or a full square gain matrix for
    the error-integral state.  ``cd_sweeps = 1`` reproduces the single
    descent pass per control period used on resource-limited hardware;
    larger values let the solver iterate to ``cd_tol``.
    """

    horizon: int = 4
    rho: float = 1.0e-8
    ki: object = 1.0
    theta_min: object = -2.0
    theta_max: object = 2.0
    v_min: object = -50.0
    v_max: object = 50.0
    cd_sweeps: int = 50
    cd_tol: float = 1.0e-8
    output_constraints: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.cd_sweeps < 1:
            raise ValueError("cd_sweeps must be >= 1")
        if not self.cd_tol > 0:
            raise ValueError("cd_tol must be positive")

    def ki_matrix(self, ny: int) -> np.ndarray:
        k = np.asarray(self.ki, dtype=float)
        if k.ndim == 0:
            return float(k) * np.eye(ny)
        if k.shape != (ny, ny):
            raise ValueError(f"ki must be scalar or {ny}x{ny}")
        return k

    def bound(self, name: str, size: int) -> np.ndarray:
        v = np.asarray(getattr(self, name), dtype=float)
        out = np.full(size, float(v)) if v.ndim == 0 else v.astype(float)
        if out.shape != (size,):
            raise ValueError(f"{name} must be scalar or length-{size}")
        return out


@dataclass(frozen=True)
class AugmentedModel:
    """One-step dynamics of s = [x; h]:
    s(k+1) = F s(k) + R1 v(k) + R2 v(k+1) + Q theta_d(k+1)."""

    F: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    Q: np.ndarray
    n: int
    ny: int


def build_augmented(model: StateSpaceModel, ki) -> AugmentedModel:
    """Append the error-integral state h(k+1) = h(k) + Ki (theta_d - theta)(k+1)
    to the plant state and return the combined transition blocks."""
    if model.dt <= 0:
        raise ValueError("build_augmented expects a discrete model")
    A, B, C, D = model.A, model.B, model.C, model.D
    n, ny = model.n_states, model.n_outputs
    Ki = np.asarray(ki, dtype=float)
    if Ki.ndim == 0:
        Ki = float(Ki) * np.eye(ny)
    if Ki.shape != (ny, ny):
        raise ValueError("integral gain must be square with one row per output")
    F = np.block([[A, np.zeros((n, ny))], [-Ki @ C @ A, np.eye(ny)]])
    R1 = np.vstack([B, -Ki @ C @ B])
    R2 = np.vstack([np.zeros((n, model.n_inputs)), -Ki @ D])
    Q = np.vstack([np.zeros((n, ny)), Ki])
    return AugmentedModel(F=F, R1=R1, R2=R2, Q=Q, n=n, ny=ny)


@dataclass(frozen=True)
class PredictionMatrices:
    """Horizon-stacked, time-invariant matrices plus cached solver products."""

    gamma: np.ndarray
    upsilon: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    c_tilde: np.ndarray
    d_tilde: np.ndarray
    i_tilde: np.ndarray
    p: np.ndarray
    k: np.ndarray
    w: np.ndarray
    m: np.ndarray
    m_inv: np.ndarray
    m_inv_first_rows: np.ndarray
    g: np.ndarray
    # cached per-step products
    e: np.ndarray          # c_tilde @ phi + d_tilde
    it_phi: np.ndarray     # i_tilde @ phi
    rho_ptk: np.ndarray    # rho * p.T @ k
    w_m_inv: np.ndarray    # w @ m_inv
    g_diag: np.ndarray
    freeze_threshold: float
    horizon: int
    n: int
    ny: int
    nu: int
    theta_min: np.ndarray
    theta_max: np.ndarray
    v_min: np.ndarray
    v_max: np.ndarray
    rho: float


def build_prediction(
    aug: AugmentedModel, model: StateSpaceModel, cfg: MpcConfig
) -> PredictionMatrices:
    """Stack the one-step augmented dynamics over the horizon and factor the QP.

    Raises if the quadratic-term matrix M is not positive definite (a sign of
    a non-positive rho or an inconsistent model).
    """
    N = cfg.horizon
    n, ny, nu = aug.n, aug.ny, model.n_inputs
    na = n + ny
    F, R1, R2, Q = aug.F, aug.R1, aug.R2, aug.Q

    powers = [np.eye(na)]
    for _ in range(N):
        powers.append(powers[-1] @ F)

    gamma = np.vstack([powers[i + 1] for i in range(N)])
    upsilon = np.vstack([powers[i] @ R1 for i in range(N)])
    phi = np.zeros((N * na, N * nu))
    psi = np.zeros((N * na, N * ny))
    for i in range(N):
        rows = slice(i * na, (i + 1) * na)
        for j in range(i + 1):
            blk = R2 if i == j else powers[i - j] @ R2 + powers[i - j - 1] @ R1
            phi[rows, j * nu : (j + 1) * nu] = blk
            psi[rows, j * ny : (j + 1) * ny] = Q if i == j else powers[i - j] @ Q
    c_tilde = np.zeros((N * ny, N * na))
    i_tilde = np.zeros((N * ny, N * na))
    for i in range(N):
        c_tilde[i * ny : (i + 1) * ny, i * na : i * na + n] = model.C
        i_tilde[i * ny : (i + 1) * ny, i * na + n : i * na + na] = np.eye(ny)
    d_tilde = np.kron(np.eye(N), model.D)
    p = np.kron(np.eye(N), np.eye(nu)) - np.kron(np.eye(N, k=-1), np.eye(nu))
    k = np.zeros((N * nu, nu))
    k[:nu, :] = np.eye(nu)

    e = c_tilde @ phi + d_tilde
    it_phi = i_tilde @ phi
    m = e.T @ e + it_phi.T @ it_phi + cfg.rho * (p.T @ p)
    m = 0.5 * (m + m.T)
    eigs = np.linalg.eigvalsh(m)
    if eigs[0] <= 0.0:
        raise ValueError(f"QP matrix M is not positive definite (min eig {eigs[0]:.3e})")
    m_inv = np.linalg.inv(m)
    m_inv = 0.5 * (m_inv + m_inv.T)
    w = np.vstack([e, -e, np.eye(N * nu), -np.eye(N * nu)])
    w_m_inv = w @ m_inv
    g = w_m_inv @ w.T
    g = 0.5 * (g + g.T)
    g_diag = np.diag(g).copy()

    theta_lim = OUTPUT_UNBOUNDED
    theta_min = cfg.bound("theta_min", ny) if cfg.output_constraints else np.full(ny, -theta_lim)
    theta_max = cfg.bound("theta_max", ny) if cfg.output_constraints else np.full(ny, theta_lim)
    v_min = cfg.bound("v_min", nu)
    v_max = cfg.bound("v_max", nu)
    if np.any(theta_min >= theta_max) or np.any(v_min >= v_max):
        raise ValueError("lower bounds must be strictly below upper bounds")

    return PredictionMatrices(
        gamma=gamma,
        upsilon=upsilon,
        phi=phi,
        psi=psi,
        c_tilde=c_tilde,
        d_tilde=d_tilde,
        i_tilde=i_tilde,
        p=p,
        k=k,
        w=w,
        m=m,
        m_inv=m_inv,
        m_inv_first_rows=m_inv[:nu, :].copy(),
        g=g,
        e=e,
        it_phi=it_phi,
        rho_ptk=cfg.rho * (p.T @ k),
        w_m_inv=w_m_inv,
        g_diag=g_diag,
        freeze_threshold=1e-14 * float(np.trace(g)) / g.shape[0],
        horizon=N,
        n=n,
        ny=ny,
        nu=nu,
        theta_min=theta_min,
        theta_max=theta_max,
        v_min=v_min,
        v_max=v_max,
        rho=cfg.rho,
    )


def build_qp(
    pred: PredictionMatrices,
    s_k: np.ndarray,
    v_k: np.ndarray,
    theta_d_window: np.ndarray,
    cfg: MpcConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Assemble the per-step linear terms of the QP and its dual.

    ``theta_d_window`` holds the next ``horizon`` reference rows.  Returns
    (m, b, g): primal linear term, constraint offsets, dual linear term.
    The constant cost offsets are never formed.
    """
    N, ny = pred.horizon, pred.ny
    ref = np.asarray(theta_d_window, dtype=float).reshape(-1)
    if ref.size != N * ny:
        raise ValueError(f"reference window must supply {N} rows of {ny}")
    s_k = np.asarray(s_k, dtype=float)
    v_k = np.asarray(v_k, dtype=float)
    eta = pred.gamma @ s_k + pred.upsilon @ v_k + pred.psi @ ref
    c_eta = pred.c_tilde @ eta
    beta = c_eta - ref
    m_vec = pred.e.T @ beta + pred.it_phi.T @ (pred.i_tilde @ eta) - pred.rho_ptk @ v_k
    ones = np.ones(N)
    b = np.concatenate(
        [
            np.kron(ones, pred.theta_max) - c_eta,
            -np.kron(ones, pred.theta_min) + c_eta,
            np.kron(ones, pred.v_max),
            -np.kron(ones, pred.v_min),
        ]
    )
    g_vec = pred.w_m_inv @ m_vec + b
    return m_vec, b, g_vec


@dataclass
class QpSolution:
    """Dual solution and the extracted next input sample."""

    mu_star: np.ndarray
    v_next: np.ndarray
    sweeps_used: int
    converged: bool
    degenerate: bool = False


def _cd_sweeps(G, diag, thresh, g_vec, mu, max_sweeps, tol):
    """Shared cyclic-descent loop; mutates ``mu`` and returns
    (sweeps_used, converged, degenerate)."""
    r = G @ mu + g_vec
    converged = False
    degenerate = False
    sweeps_used = 0
    for sweep in range(max_sweeps):
        sweeps_used = sweep + 1
        if sweep and sweep % 64 == 0:
            r = G @ mu + g_vec  # shed accumulated float drift
        max_delta = 0.0
        for i in range(mu.size):
            if diag[i] <= thresh:
                if r[i] < 0.0 and mu[i] == 0.0:
                    degenerate = True
                continue
            new = mu[i] - r[i] / diag[i]
            if new < 0.0:
                new = 0.0
            delta = new - mu[i]
            if delta != 0.0:
                mu[i] = new
                r += G[i] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta < tol:
            converged = True
            break
    return sweeps_used, converged, degenerate


def solve_dual_cd(
    pred: PredictionMatrices,
    m_vec: np.ndarray,
    b: np.ndarray,
    g_vec: np.ndarray,
    mu_warm: np.ndarray,
    cfg: MpcConfig,
) -> QpSolution:
    """Cyclic coordinate descent on the dual QP min 1/2 mu'G mu + g'mu, mu >= 0.

    Each coordinate moves to its clamped exact minimizer; the residual
    G mu + g is maintained incrementally so a full sweep costs one pass over
    the active set.  Sweeps stop when the largest coordinate change falls
    below ``cd_tol`` or after ``cd_sweeps`` sweeps.  Coordinates whose
    diagonal is numerically zero are frozen (and flagged if their constraint
    wants to activate).
    """
    G = pred.g
    mu = np.array(mu_warm, dtype=float, copy=True)
    if mu.shape != (G.shape[0],):
        raise ValueError("warm start has wrong length")
    if np.any(mu < 0):
        raise ValueError("warm start must be non-negative")
    sweeps_used, converged, degenerate = _cd_sweeps(
        G, pred.g_diag, pred.freeze_threshold, g_vec, mu, cfg.cd_sweeps, cfg.cd_tol
    )
    v_next = -(pred.m_inv_first_rows @ (m_vec + pred.w.T @ mu))
    return QpSolution(
        mu_star=mu,
        v_next=v_next,
        sweeps_used=sweeps_used,
        converged=converged,
        degenerate=degenerate,
    )


def solve_qp_instance(
    M: np.ndarray,
    m_vec: np.ndarray,
    W: np.ndarray,
    b: np.ndarray,
    max_sweeps: int = 5000,
    tol: float = 1.0e-12,
) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Solve a raw (M, m, W, b) instance through the dual descent.

    Returns (mu, primal V, sweeps used, converged).  Used by the ``solve-qp``
    debugging command and the solver test batteries.
    """
    M = np.asarray(M, dtype=float)
    m_vec = np.asarray(m_vec, dtype=float)
    W = np.asarray(W, dtype=float)
    b = np.asarray(b, dtype=float)
    eigs = np.linalg.eigvalsh(0.5 * (M + M.T))
    if eigs[0] <= 0.0:
        raise ValueError(f"M must be positive definite (min eig {eigs[0]:.3e})")
    m_inv = np.linalg.inv(M)
    m_inv = 0.5 * (m_inv + m_inv.T)
    G = W @ m_inv @ W.T
    G = 0.5 * (G + G.T)
    diag = np.diag(G).copy()
    g_vec = W @ m_inv @ m_vec + b
    mu = np.zeros(W.shape[0])
    thresh = 1e-14 * float(np.trace(G)) / G.shape[0]
    sweeps_used, converged, _ = _cd_sweeps(G, diag, thresh, g_vec, mu, max_sweeps, tol)
    v = -(m_inv @ (m_vec + W.T @ mu))
    return mu, v, sweeps_used, converged


def kkt_residuals(
    M: np.ndarray, m_vec: np.ndarray, W: np.ndarray, b: np.ndarray, mu: np.ndarray
) -> dict:
    """Optimality residuals of a dual point for min 1/2 V'MV + m'V s.t. WV <= b.

    ``primal`` is the largest constraint violation, ``dual`` the largest
    negative multiplier, ``comp_slack`` the largest |mu_i * slack_i| scaled
    by 1 + |b_i|, and ``stationarity`` the gradient residual at the recovered
    primal point.
    """
    v = -np.linalg.solve(M, m_vec + W.T @ mu)
    slack = W @ v - b
    return {
        "primal": float(max(0.0, slack.max(initial=0.0))),
        "dual": float(max(0.0, -(mu.min(initial=0.0)))),
        "comp_slack": float(np.max(np.abs(mu * slack) / (1.0 + np.abs(b)))) if len(b) else 0.0,
        "stationarity": float(np.max(np.abs(M @ v + m_vec + W.T @ mu))),
    }


def primal_from_dual(pred: PredictionMatrices, m_vec: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Full primal input sequence implied by a dual point: -M^-1 (m + W' mu)."""
    return -(pred.m_inv @ (m_vec + pred.w.T @ mu))


def dual_objective(g_mat: np.ndarray, g_vec: np.ndarray, mu: np.ndarray) -> float:
    """Dual objective in minimization form, constant term dropped."""
    return float(0.5 * mu @ g_mat @ mu + g_vec @ mu)


class MpcController:
    """Owns the per-loop state of the receding-horizon controller.

    The controller integrates the measured tracking error itself, carries the
    previous input sample and the previous dual solution (warm start), and
    emits the recentered hysteresis-voltage command for the next period.
    """

    def __init__(self, model: StateSpaceModel, cfg: MpcConfig, bias: float = 50.0):
        if model.n_inputs != model.n_outputs:
            raise ValueError("controller expects square input/output dimensions")
        self.model = model
        self.cfg = cfg
        self.bias = bias
        self.ki = cfg.ki_matrix(model.n_outputs)
        self.aug = build_augmented(model, self.ki)
        self.pred = build_prediction(self.aug, model, cfg)
        self.reset()

    def reset(self):
        ny, nu, N = self.model.n_outputs, self.model.n_inputs, self.cfg.horizon
        self.h_int = np.zeros(ny)
        self.v_prev = np.zeros(nu)
        self.mu = np.zeros(2 * N * (ny + nu))
        self.last_solution: QpSolution | None = None

    def step(
        self,
        x_hat: np.ndarray,
        theta_meas: np.ndarray,
        theta_d_now: np.ndarray,
        theta_d_window: np.ndarray,
    ) -> np.ndarray:
        """Advance one control period; returns the hysteresis voltage command
        v_h1(k+1) (recentred by the supply bias).

        ``theta_d_now`` is the reference at the measurement instant (feeds the
        error integral); ``theta_d_window`` previews the next horizon rows.
        """
        theta_meas = np.asarray(theta_meas, dtype=float)
        self.h_int = self.h_int + self.ki @ (np.asarray(theta_d_now, dtype=float) - theta_meas)
        s = np.concatenate([np.asarray(x_hat, dtype=float), self.h_int])
        m_vec, b, g_vec = build_qp(self.pred, s, self.v_prev, theta_d_window, self.cfg)
        sol = solve_dual_cd(self.pred, m_vec, b, g_vec, self.mu, self.cfg)
        self.mu = sol.mu_star
        self.v_prev = sol.v_next
        self.last_solution = sol
        return sol.v_next + self.bias
