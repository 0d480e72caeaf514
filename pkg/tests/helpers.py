"""Shared oracles and instance generators for the solver test batteries."""

import numpy as np

from pfsm_mpc.lti import StateSpaceModel
from pfsm_mpc.mpc import MpcConfig, build_augmented, build_prediction, build_qp

DT = 5e-4


def random_model(rng, n_states=None, ny=2, spectral_radius=0.9):
    """Random stable discrete model with ny inputs and outputs."""
    n = int(n_states if n_states is not None else rng.integers(2, 17))
    A = rng.uniform(-1.0, 1.0, (n, n))
    A *= spectral_radius / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12)
    B = rng.uniform(-1.0, 1.0, (n, ny))
    C = rng.uniform(-1.0, 1.0, (ny, n))
    D = rng.uniform(-0.2, 0.2, (ny, ny))
    return StateSpaceModel(A, B, C, D, dt=DT)


def random_qp_instance(rng, horizon=None, n_states=None):
    """One dual-solver instance built through the real prediction pipeline.

    The constraint offsets are rebuilt around a known in-bounds input
    sequence (b = W v_feas + nonnegative margins), which keeps every
    instance primal-feasible -- an infeasible primal makes the dual
    unbounded -- while tight margins leave a fair share of constraints
    active at the optimum.
    """
    model = random_model(rng, n_states=n_states)
    N = int(horizon if horizon is not None else rng.choice([1, 2, 4]))
    cfg = MpcConfig(
        horizon=N,
        rho=float(10.0 ** rng.uniform(-4, -1)),
        ki=float(rng.uniform(0.0, 2.0)),
        cd_sweeps=60000,
        cd_tol=1e-12,
    )
    aug = build_augmented(model, cfg.ki_matrix(model.n_outputs))
    pred = build_prediction(aug, model, cfg)
    s = rng.uniform(-1.0, 1.0, aug.n + aug.ny)
    v = rng.uniform(-1.0, 1.0, model.n_inputs)
    ref = rng.uniform(-1.0, 1.0, (N, model.n_outputs))
    m_vec, _, _ = build_qp(pred, s, v, ref, cfg)
    v_feas = rng.uniform(-1.0, 1.0, 2 * N)
    margins = rng.uniform(0.2, 2.0, pred.w.shape[0])
    tight = rng.random(pred.w.shape[0]) < 0.3
    margins[tight] = rng.uniform(0.01, 0.08, int(np.sum(tight)))
    b = pred.w @ v_feas + margins
    g_vec = pred.w_m_inv @ m_vec + b
    return pred, cfg, m_vec, b, g_vec


def projected_gradient_dual(G, g, tol=1e-10, max_iter=2_000_000):
    """Independent dual solver: accelerated projected gradient (1/L step,
    momentum with adaptive restart).

    Runs until the projected-gradient stationarity residual falls below
    ``tol`` (scaled by the linear term) and returns (mu, iterations).
    """
    L = float(np.linalg.eigvalsh(G)[-1])
    if L <= 0.0:
        return np.zeros(len(g)), 0
    t = 1.0 / L
    scale = max(1.0, float(np.max(np.abs(g))))
    mu = np.zeros(len(g))
    y = mu.copy()
    theta = 1.0
    for it in range(1, max_iter + 1):
        grad_y = G @ y + g
        nxt = np.maximum(y - t * grad_y, 0.0)
        if it % 8 == 0 or it == 1:
            # stationarity measured at the new iterate
            resid = np.max(np.abs(nxt - np.maximum(nxt - t * (G @ nxt + g), 0.0))) / t
            if resid <= tol * scale:
                return nxt, it
        theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        beta = (theta - 1.0) / theta_next
        step = nxt - mu
        if step @ grad_y > 0.0:  # momentum fights descent: restart
            theta_next = 1.0
            y = nxt.copy()
        else:
            y = nxt + beta * step
        mu = nxt
        theta = theta_next
    raise AssertionError("projected gradient did not reach stationarity")


def dual_value(G, g, mu):
    return float(0.5 * mu @ G @ mu + g @ mu)
