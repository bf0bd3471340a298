"""Joint state and parameter estimation on the augmented 7-state system.

The augmented state z = [b, s, x, mu_max, Ks, c, Y] evolves with frozen
parameter dynamics (theta_dot = 0) plus a small random walk in the
filter's process noise.  Biomass and substrate are measured every
sampling instant; DNA only every `dna_period` hours, so the measurement
map alternates between a 2x7 and a 3x7 selector.  The unscented transform
handles the nonlinear propagation; the measurement map is linear, so the
update is the standard Kalman form on the predicted moments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EstimatorFault, ValidationError
from .model import DEFAULT_H, ControlInput, KineticParams, PlantConstants, steady_state_biomass

N_AUG = 7
#: lower bound applied to posterior mean components
MEAN_FLOOR = 1e-6
#: eigenvalue floor keeping covariances positive definite
EIG_FLOOR = 1e-12


@dataclass(frozen=True)
class UtConfig:
    """Unscented transform spread parameters."""

    alpha_ut: float = 0.1
    beta_ut: float = 2.0
    kappa_ut: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.alpha_ut <= 1.0):
            raise ValidationError(f"alpha_ut={self.alpha_ut} outside (0, 1]")

    def lam(self, n: int) -> float:
        lam = self.alpha_ut**2 * (n + self.kappa_ut) - n
        if n + lam <= 0:
            raise ValidationError(f"UT scaling n+lambda={n + lam} must be positive")
        return lam


@dataclass(frozen=True)
class MeasurementSchedule:
    """Sampling period and the sparser DNA measurement interval [h]."""

    Ts: float = 0.75
    dna_period: float = 6.0

    def __post_init__(self):
        if self.Ts <= 0:
            raise ValidationError(f"Ts={self.Ts} must be positive")
        ratio = self.dna_period / self.Ts
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValidationError(
                f"dna_period={self.dna_period} must be a positive integer multiple of Ts={self.Ts}"
            )

    @property
    def dna_every(self) -> int:
        return int(round(self.dna_period / self.Ts))

    def is_full(self, k_index: int) -> bool:
        """True when the DNA channel is measured at sampling index k_index."""
        return k_index % self.dna_every == 0


@dataclass(frozen=True)
class NoiseConfig:
    """Filter noise model plus the matching simulated measurement noise.

    meas_sigma holds the per-channel standard deviations used both to
    synthesize measurements and to build R, so filter and simulator stay
    consistent.
    """

    Q_xi: np.ndarray
    Q_theta: np.ndarray
    meas_sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Q_xi", np.asarray(self.Q_xi, float))
        object.__setattr__(self, "Q_theta", np.asarray(self.Q_theta, float))
        object.__setattr__(self, "meas_sigma", np.asarray(self.meas_sigma, float))
        if self.Q_xi.shape != (3, 3) or self.Q_theta.shape != (4, 4):
            raise ValidationError("Q_xi must be 3x3 and Q_theta 4x4")
        if self.meas_sigma.shape != (3,) or np.any(self.meas_sigma <= 0):
            raise ValidationError("meas_sigma must be 3 positive standard deviations")
        for q in (self.Q_xi, self.Q_theta):
            if np.any(np.abs(q - q.T) > 1e-12) or np.any(np.linalg.eigvalsh(q) < -1e-15):
                raise ValidationError("process noise matrices must be symmetric PSD")

    @property
    def R_full(self) -> np.ndarray:
        return np.diag(self.meas_sigma**2)

    @property
    def R_partial(self) -> np.ndarray:
        return np.diag(self.meas_sigma[:2] ** 2)

    @property
    def Q_aug(self) -> np.ndarray:
        q = np.zeros((N_AUG, N_AUG))
        q[:3, :3] = self.Q_xi
        q[3:, 3:] = self.Q_theta
        return q


def default_noise_config(
    theta_nom: KineticParams,
    k: PlantConstants,
    rel_sigma=(0.005, 0.02, 0.05),
    q_xi_diag=(1e-6, 1e-6, 1e-8),
    q_theta_diag=(1e-8, 1e-10, 1e-10, 1e-8),
    ref_D: float = 0.2,
) -> NoiseConfig:
    """Noise defaults anchored at the reference steady state (D=ref_D, filter on).

    Measurement noise is additive Gaussian with per-channel sigma equal to
    rel_sigma times the steady-state magnitude of that channel, and R is
    built from the same sigmas.  The biomass fraction is the binding one:
    the yield estimate can only be pinned as well as the biomass readings
    allow, and the post-transient biomass estimation error is the yield
    error times roughly s_in.
    """
    b_ss = steady_state_biomass(ref_D, theta_nom, k)
    s_ss = ref_D * theta_nom.Ks / (theta_nom.mu_max - ref_D)
    d_rec = ref_D * (k.s_in - k.s_H) / (s_ss - k.s_H)
    x_ss = theta_nom.c * ref_D * b_ss / (ref_D - d_rec + k.D_f * k.alpha)
    refs = np.array([b_ss, s_ss, x_ss])
    sigma = np.asarray(rel_sigma) * refs
    return NoiseConfig(np.diag(q_xi_diag), np.diag(q_theta_diag), sigma)


@dataclass(frozen=True)
class Belief:
    """Gaussian belief over an augmented state: mean and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, float)
        cov = np.array(self.cov, float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise ValidationError(f"covariance shape {cov.shape} does not match mean dim {n}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValidationError("belief contains non-finite values")
        if np.max(np.abs(cov - cov.T)) > 1e-10:
            raise ValidationError("covariance is not symmetric within 1e-10")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def _conditioned(cov: np.ndarray) -> np.ndarray:
    """Symmetrize and floor eigenvalues so the covariance stays SPD."""
    cov = 0.5 * (cov + cov.T)
    w, v = np.linalg.eigh(cov)
    if w[0] < EIG_FLOOR:
        w = np.maximum(w, EIG_FLOOR)
        cov = (v * w) @ v.T
        cov = 0.5 * (cov + cov.T)
    return cov


def init_belief(
    xi0,
    theta_nom: KineticParams,
    state_sigma=(0.5, 0.5, 0.05),
    theta_rel_sigma: float = 0.15,
) -> Belief:
    """Initial belief: known plant state and nominal parameters, with
    one-sigma spreads of state_sigma and theta_rel_sigma * nominal."""
    xi0 = np.asarray(xi0, float)
    th = theta_nom.as_array()
    mean = np.concatenate([xi0, th])
    theta_var = np.maximum((theta_rel_sigma * th) ** 2, EIG_FLOOR)
    diag = np.concatenate([np.asarray(state_sigma) ** 2, theta_var])
    return Belief(mean, np.diag(diag))


def sigma_points(belief: Belief, ut: UtConfig):
    """Symmetric sigma-point set (2n+1 points) with mean/cov weights.

    Returns (points (2n+1, n), w_mean (2n+1,), w_cov (2n+1,)).
    """
    n = belief.dim
    lam = ut.lam(n)
    cov = _conditioned(belief.cov)
    try:
        L = np.linalg.cholesky((n + lam) * cov)
    except np.linalg.LinAlgError as exc:
        raise EstimatorFault(f"sigma-point factorization failed: {exc}") from exc
    pts = np.empty((2 * n + 1, n))
    pts[0] = belief.mean
    pts[1 : n + 1] = belief.mean + L.T
    pts[n + 1 :] = belief.mean - L.T
    w_mean = np.full(2 * n + 1, 1.0 / (2.0 * (n + lam)))
    w_cov = w_mean.copy()
    w_mean[0] = lam / (n + lam)
    w_cov[0] = lam / (n + lam) + (1.0 - ut.alpha_ut**2 + ut.beta_ut)
    return pts, w_mean, w_cov


def predict(
    belief: Belief,
    u: ControlInput,
    noise: NoiseConfig,
    ut: UtConfig,
    k: PlantConstants,
    Ts: float,
    h: float = DEFAULT_H,
) -> Belief:
    """Propagate the belief over one sampling interval.

    Each sigma point integrates the plant dynamics with its own parameter
    block held constant; the process noise enters as Q * Ts.
    """
    if belief.dim != N_AUG:
        raise ValidationError(f"predict expects a {N_AUG}-dim belief, got {belief.dim}")
    pts, w_mean, w_cov = sigma_points(belief, ut)
    states = np.ascontiguousarray(pts[:, :3])
    thetas = np.ascontiguousarray(pts[:, 3:])
    m = pts.shape[0]
    n_sub = int(round(Ts / h))
    D = np.full(m, u.D)
    delta = np.full(m, float(u.delta))
    _, _, fault = kernels.step_lanes(states, thetas, D, delta, *kernels.plant_args(k), h, n_sub)
    if fault.any():
        raise EstimatorFault("sigma-point propagation hit a singularity or non-finite state")
    prop = np.hstack([states, thetas])
    mean = w_mean @ prop
    dev = prop - mean
    cov = (dev.T * w_cov) @ dev + noise.Q_aug * Ts
    return Belief(mean, _conditioned(cov))


def _measurement_matrix(which: str) -> np.ndarray:
    if which == "full":
        h = np.zeros((3, N_AUG))
        h[0, 0] = h[1, 1] = h[2, 2] = 1.0
    elif which == "partial":
        h = np.zeros((2, N_AUG))
        h[0, 0] = h[1, 1] = 1.0
    else:
        raise ValidationError(f"unknown measurement kind {which!r}")
    return h


def update(belief: Belief, y, which: str, noise: NoiseConfig, ut: UtConfig | None = None) -> Belief:
    """Measurement update for the linear selector map.

    The sigma-point update collapses to the exact Kalman form here because
    the measurement is a linear function of the state, so that form is used
    directly.  Joseph stabilization keeps the posterior covariance PSD and
    never above the prior.  Posterior mean components are floored at
    MEAN_FLOOR.
    """
    if belief.dim != N_AUG:
        raise ValidationError(f"update expects a {N_AUG}-dim belief, got {belief.dim}")
    y = np.asarray(y, float)
    H = _measurement_matrix(which)
    R = noise.R_full if which == "full" else noise.R_partial
    if y.shape != (H.shape[0],):
        raise ValidationError(f"measurement shape {y.shape} does not match kind {which!r}")
    P = belief.cov
    S = H @ P @ H.T + R
    try:
        K = np.linalg.solve(S, H @ P).T
    except np.linalg.LinAlgError as exc:
        raise EstimatorFault(f"innovation covariance not invertible: {exc}") from exc
    mean = belief.mean + K @ (y - H @ belief.mean)
    ikh = np.eye(N_AUG) - K @ H
    cov = ikh @ P @ ikh.T + K @ R @ K.T
    mean = np.maximum(mean, MEAN_FLOOR)
    return Belief(mean, _conditioned(cov))


def innovation_stats(belief: Belief, y, which: str, noise: NoiseConfig):
    """Innovation vector and its covariance for the predicted belief
    (normalized-innovation-squared diagnostics)."""
    H = _measurement_matrix(which)
    R = noise.R_full if which == "full" else noise.R_partial
    innov = np.asarray(y, float) - H @ belief.mean
    S = H @ belief.cov @ H.T + R
    return innov, S


def estimate_step(
    belief: Belief,
    u: ControlInput,
    y,
    k_index: int,
    schedule: MeasurementSchedule,
    noise: NoiseConfig,
    ut: UtConfig,
    k: PlantConstants,
    h: float = DEFAULT_H,
) -> Belief:
    """One predict/update cycle at sampling index k_index."""
    which = "full" if schedule.is_full(k_index) else "partial"
    pred = predict(belief, u, noise, ut, k, schedule.Ts, h)
    return update(pred, y, which, noise, ut)


def rmse(series_true, series_est, from_index: int = 0) -> float:
    """Root mean square deviation between two equal-length series, taken
    over indices >= from_index."""
    a = np.asarray(series_true, float)
    b = np.asarray(series_est, float)
    if a.shape != b.shape:
        raise ValidationError(f"series shapes differ: {a.shape} vs {b.shape}")
    if not (0 <= from_index < a.shape[0]):
        raise ValidationError(f"from_index={from_index} leaves an empty window")
    d = a[from_index:] - b[from_index:]
    return float(np.sqrt(np.mean(d * d)))
