"""Compiled batched RK4 integration kernels.

These mirror model.rk4_step exactly (same stage ordering, same clamping)
but run many lanes with per-lane parameters or inputs, which is what the
sigma-point propagation, the predictive controller and the batch fitting
loops need to stay fast on a single core.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .model import KineticParams, PlantConstants


@njit(cache=True, inline="always")
def _rhs(b, s, x, D, delta, mu_max, Ks, c, Y, alpha, x_crit, D_f, s_in, s_H, rec):
    mu = mu_max * s / (Ks + s) * (1.0 - x / x_crit)
    mub = mu * b
    d_rec = rec * D * (s_in - s_H) / (s - s_H)
    db = mub - D * b
    ds = -mub / Y + D * (s_in - s)
    dx = c * mub - (D - d_rec) * x - delta * D_f * alpha * x
    return db, ds, dx


@njit(cache=True)
def step_lanes(states, thetas, D, delta, alpha, x_crit, D_f, s_in, s_H, sing_guard, h, n_sub, rec=1.0):
    """Advance M lanes by n_sub RK4 substeps of size h (in place).

    states: (M, 3), thetas: (M, 4), D/delta: (M,).
    Returns (min_pre_clamp (M,), clamp_count (M,), fault (M,)) where fault
    is 1 for a singularity-guard hit or non-finite step.
    """
    M = states.shape[0]
    min_pre = np.full(M, np.inf)
    clamps = np.zeros(M, np.int64)
    fault = np.zeros(M, np.uint8)
    for m in range(M):
        b = states[m, 0]
        s = states[m, 1]
        x = states[m, 2]
        mu_max = thetas[m, 0]
        Ks = thetas[m, 1]
        c = thetas[m, 2]
        Y = thetas[m, 3]
        Dm = D[m]
        dl = delta[m]
        for _ in range(n_sub):
            if s >= s_H - sing_guard:
                fault[m] = 1
                break
            k1b, k1s, k1x = _rhs(b, s, x, Dm, dl, mu_max, Ks, c, Y, alpha, x_crit, D_f, s_in, s_H, rec)
            k2b, k2s, k2x = _rhs(b + 0.5 * h * k1b, s + 0.5 * h * k1s, x + 0.5 * h * k1x,
                                 Dm, dl, mu_max, Ks, c, Y, alpha, x_crit, D_f, s_in, s_H, rec)
            k3b, k3s, k3x = _rhs(b + 0.5 * h * k2b, s + 0.5 * h * k2s, x + 0.5 * h * k2x,
                                 Dm, dl, mu_max, Ks, c, Y, alpha, x_crit, D_f, s_in, s_H, rec)
            k4b, k4s, k4x = _rhs(b + h * k3b, s + h * k3s, x + h * k3x,
                                 Dm, dl, mu_max, Ks, c, Y, alpha, x_crit, D_f, s_in, s_H, rec)
            b = b + h / 6.0 * (k1b + 2.0 * (k2b + k3b) + k4b)
            s = s + h / 6.0 * (k1s + 2.0 * (k2s + k3s) + k4s)
            x = x + h / 6.0 * (k1x + 2.0 * (k2x + k3x) + k4x)
            if not (np.isfinite(b) and np.isfinite(s) and np.isfinite(x)):
                fault[m] = 1
                break
            low = min(b, min(s, x))
            if low < min_pre[m]:
                min_pre[m] = low
            if low < 0.0:
                clamps[m] += 1
                b = max(b, 0.0)
                s = max(s, 0.0)
                x = max(x, 0.0)
        states[m, 0] = b
        states[m, 1] = s
        states[m, 2] = x
    return min_pre, clamps, fault


@njit(cache=True)
def horizon_gains(state0, theta, D_seq, delta_seq, lam, alpha, x_crit, D_f, s_in, s_H,
                  sing_guard, Ts, h, n_sub, rec=1.0):
    """Predicted horizon gain for M candidate input sequences.

    state0: (3,), theta: (4,), D_seq/delta_seq: (M, N).  The stage profit
    (D b - lam delta D_f) * Ts is accumulated on the state at the start of
    each step.  A lane becomes infeasible when any component drops below
    -1e-9 before clamping, or on a singularity/non-finite fault.
    Returns (gains (M,), feasible (M,), finals (M, 3)).
    """
    M, N = D_seq.shape
    gains = np.zeros(M)
    feas = np.ones(M, np.uint8)
    finals = np.empty((M, 3))
    mu_max, Ks, c, Y = theta[0], theta[1], theta[2], theta[3]
    for m in range(M):
        b = state0[0]
        s = state0[1]
        x = state0[2]
        g = 0.0
        ok = True
        for i in range(N):
            Dm = D_seq[m, i]
            dl = delta_seq[m, i]
            g += (Dm * b - lam * dl * D_f) * Ts
            for _ in range(n_sub):
                if s >= s_H - sing_guard:
                    ok = False
                    break
                k1b, k1s, k1x = _rhs(b, s, x, Dm, dl, mu_max, Ks, c, Y, alpha, x_crit, D_f, s_in, s_H, rec)
                k2b, k2s, k2x = _rhs(b + 0.5 * h * k1b, s + 0.5 * h * k1s, x + 0.5 * h * k1x,
                                     Dm, dl, mu_max, Ks, c, Y, alpha, x_crit, D_f, s_in, s_H, rec)
                k3b, k3s, k3x = _rhs(b + 0.5 * h * k2b, s + 0.5 * h * k2s, x + 0.5 * h * k2x,
                                     Dm, dl, mu_max, Ks, c, Y, alpha, x_crit, D_f, s_in, s_H, rec)
                k4b, k4s, k4x = _rhs(b + h * k3b, s + h * k3s, x + h * k3x,
                                     Dm, dl, mu_max, Ks, c, Y, alpha, x_crit, D_f, s_in, s_H, rec)
                b = b + h / 6.0 * (k1b + 2.0 * (k2b + k3b) + k4b)
                s = s + h / 6.0 * (k1s + 2.0 * (k2s + k3s) + k4s)
                x = x + h / 6.0 * (k1x + 2.0 * (k2x + k3x) + k4x)
                if not (np.isfinite(b) and np.isfinite(s) and np.isfinite(x)):
                    ok = False
                    break
                if b < -1e-9 or s < -1e-9 or x < -1e-9:
                    ok = False
                b = max(b, 0.0)
                s = max(s, 0.0)
                x = max(x, 0.0)
            if not ok:
                break
        gains[m] = g
        feas[m] = 1 if ok else 0
        finals[m, 0] = b
        finals[m, 1] = s
        finals[m, 2] = x
    return gains, feas, finals


@njit(cache=True)
def sampled_trajectories(xi0, thetas, D_sub, delta_sub, sample_idx, alpha, x_crit, D_f,
                         s_in, s_H, sing_guard, h, rec=1.0):
    """Simulate M parameter lanes under a shared per-substep input profile.

    xi0: (3,), thetas: (M, 4), D_sub/delta_sub: (n_total,) zero-order-hold
    input per substep, sample_idx: sorted substep indices (0 = initial
    state) at which states are recorded.
    Returns (samples (M, len(sample_idx), 3), fault (M,)).
    """
    M = thetas.shape[0]
    n_total = D_sub.shape[0]
    n_s = sample_idx.shape[0]
    out = np.empty((M, n_s, 3))
    fault = np.zeros(M, np.uint8)
    for m in range(M):
        b = xi0[0]
        s = xi0[1]
        x = xi0[2]
        mu_max, Ks, c, Y = thetas[m, 0], thetas[m, 1], thetas[m, 2], thetas[m, 3]
        j = 0
        while j < n_s and sample_idx[j] == 0:
            out[m, j, 0] = b
            out[m, j, 1] = s
            out[m, j, 2] = x
            j += 1
        for i in range(n_total):
            Dm = D_sub[i]
            dl = delta_sub[i]
            if s >= s_H - sing_guard:
                fault[m] = 1
                break
            k1b, k1s, k1x = _rhs(b, s, x, Dm, dl, mu_max, Ks, c, Y, alpha, x_crit, D_f, s_in, s_H, rec)
            k2b, k2s, k2x = _rhs(b + 0.5 * h * k1b, s + 0.5 * h * k1s, x + 0.5 * h * k1x,
                                 Dm, dl, mu_max, Ks, c, Y, alpha, x_crit, D_f, s_in, s_H, rec)
            k3b, k3s, k3x = _rhs(b + 0.5 * h * k2b, s + 0.5 * h * k2s, x + 0.5 * h * k2x,
                                 Dm, dl, mu_max, Ks, c, Y, alpha, x_crit, D_f, s_in, s_H, rec)
            k4b, k4s, k4x = _rhs(b + h * k3b, s + h * k3s, x + h * k3x,
                                 Dm, dl, mu_max, Ks, c, Y, alpha, x_crit, D_f, s_in, s_H, rec)
            b = max(b + h / 6.0 * (k1b + 2.0 * (k2b + k3b) + k4b), 0.0)
            s = max(s + h / 6.0 * (k1s + 2.0 * (k2s + k3s) + k4s), 0.0)
            x = max(x + h / 6.0 * (k1x + 2.0 * (k2x + k3x) + k4x), 0.0)
            if not (np.isfinite(b) and np.isfinite(s) and np.isfinite(x)):
                fault[m] = 1
                break
            while j < n_s and sample_idx[j] == i + 1:
                out[m, j, 0] = b
                out[m, j, 1] = s
                out[m, j, 2] = x
                j += 1
        if fault[m]:
            while j < n_s:
                out[m, j, 0] = np.nan
                out[m, j, 1] = np.nan
                out[m, j, 2] = np.nan
                j += 1
        j = 0
    return out, fault


def plant_args(k: PlantConstants, sing_guard: float = 1.0):
    """Constants tuple shared by every kernel call."""
    return (k.alpha, k.x_crit, k.D_f, k.s_in, k.s_H, sing_guard)


def theta_matrix(thetas) -> np.ndarray:
    """Stack KineticParams (or raw rows) into an (M, 4) float array."""
    rows = []
    for t in thetas:
        rows.append(t.as_array() if isinstance(t, KineticParams) else np.asarray(t, float))
    return np.ascontiguousarray(np.vstack(rows))
