"""Offline kinetic parameter estimation from batch-style trajectory data.

Fits theta = [mu_max, Ks, c, Y] by damped Gauss-Newton on channel-scaled
residuals between simulated and measured concentrations.  Data come from
the classical chemostat reduction of the plant: recycle shut (D_rec = 0)
and filter off (delta = 0), with an arbitrary piecewise-constant dilution
profile D(t).  Positivity is enforced by optimizing in log-parameter
space.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError
from .model import DEFAULT_H, DEFAULT_PLANT, KineticParams, PlantConstants

#: normal quantile used for the reported confidence half-widths (95%)
CI_QUANTILE = 1.959963984540054


@dataclass(frozen=True)
class DProfile:
    """Zero-order-hold dilution profile from (time, D) breakpoints."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, float)
        v = np.asarray(self.values, float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or t.shape != v.shape or t.shape[0] < 1:
            raise ValidationError("profile needs matching 1-D times and values")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValidationError("profile times must start at 0 and increase strictly")
        if np.any(v < 0):
            raise ValidationError("dilution rates must be nonnegative")

    def at(self, t) -> np.ndarray:
        idx = np.searchsorted(self.times, np.asarray(t, float), side="right") - 1
        return self.values[np.maximum(idx, 0)]

    @staticmethod
    def load_csv(path) -> "DProfile":
        times, values = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            if header != ["t", "D"]:
                raise ValidationError(f"unexpected profile header: {header}")
            for row in reader:
                times.append(float(row[0]))
                values.append(float(row[1]))
        return DProfile(np.array(times), np.array(values))

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "D"])
            for t, v in zip(self.times, self.values):
                writer.writerow([repr(float(t)), repr(float(v))])


@dataclass(frozen=True)
class Dataset:
    """Measured trajectory with per-channel availability.

    b/s/x hold NaN where a channel was not measured.  The recorded regime
    defaults to the chemostat reduction (recycle shut, filter off).
    """

    times: np.ndarray
    b: np.ndarray
    s: np.ndarray
    x: np.ndarray
    xi0: np.ndarray
    recirculation: bool = False
    delta: int = 0

    def __post_init__(self):
        t = np.asarray(self.times, float)
        object.__setattr__(self, "times", t)
        for name in ("b", "s", "x"):
            v = np.asarray(getattr(self, name), float)
            object.__setattr__(self, name, v)
            if v.shape != t.shape:
                raise ValidationError(f"channel {name} length does not match times")
        object.__setattr__(self, "xi0", np.asarray(self.xi0, float))
        if t.ndim != 1 or t.shape[0] < 4:
            raise ValidationError("dataset needs at least 4 observation rows")
        if np.any(np.diff(t) <= 0) or t[0] < 0:
            raise ValidationError("times must be nonnegative and strictly increasing")
        if self.xi0.shape != (3,) or np.any(self.xi0 < 0):
            raise ValidationError("xi0 must be a nonnegative 3-vector")
        if not np.any(np.isfinite(np.concatenate([self.b, self.s, self.x]))):
            raise ValidationError("dataset contains no measurements")

    @property
    def masks(self):
        return np.isfinite(self.b), np.isfinite(self.s), np.isfinite(self.x)

    @staticmethod
    def load_csv(path, xi0=None, **kw) -> "Dataset":
        """Read columns t, b, s, x; empty cells mean 'not measured'.

        xi0 defaults to the first row's measurements (which must then be
        complete).
        """
        cols = {"t": [], "b": [], "s": [], "x": []}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            if header != ["t", "b", "s", "x"]:
                raise ValidationError(f"unexpected dataset header: {header}")
            for row in reader:
                for name, cell in zip(header, row):
                    cols[name].append(float(cell) if cell.strip() != "" else math.nan)
        times = np.array(cols["t"])
        b, s, x = np.array(cols["b"]), np.array(cols["s"]), np.array(cols["x"])
        if xi0 is None:
            first = np.array([b[0], s[0], x[0]])
            if not np.all(np.isfinite(first)):
                raise ValidationError("xi0 not given and first row is incomplete")
            xi0 = first
        return Dataset(times, b, s, x, xi0, **kw)

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "b", "s", "x"])
            for i in range(self.times.shape[0]):
                row = [repr(float(self.times[i]))]
                for v in (self.b[i], self.s[i], self.x[i]):
                    row.append(repr(float(v)) if np.isfinite(v) else "")
                writer.writerow(row)


@dataclass(frozen=True)
class FitResult:
    """Outcome of a least-squares fit."""

    theta_hat: KineticParams
    residual_norm: float
    ci_halfwidth_pct: np.ndarray
    converged: bool
    at_bounds: bool
    iterations: int


def simulate_at(
    thetas,
    times,
    xi0,
    profile: DProfile,
    k: PlantConstants = DEFAULT_PLANT,
    h: float = DEFAULT_H,
    recirculation: bool = False,
    delta: int = 0,
):
    """States of M parameter rows sampled at the given times.

    Sample times snap to the integration grid (they should be multiples of
    h; off-grid times move by at most h/2).  Returns (M, T, 3).
    """
    thetas = np.ascontiguousarray(np.atleast_2d(np.asarray(thetas, float)))
    times = np.asarray(times, float)
    n_total = int(round(times[-1] / h))
    sub_t = np.arange(n_total) * h
    D_sub = np.ascontiguousarray(profile.at(sub_t))
    delta_sub = np.full(n_total, float(delta))
    sample_idx = np.minimum(np.rint(times / h).astype(np.int64), n_total)
    out, fault = kernels.sampled_trajectories(
        np.asarray(xi0, float), thetas, D_sub, delta_sub,
        np.ascontiguousarray(sample_idx), *kernels.plant_args(k), h,
        1.0 if recirculation else 0.0,
    )
    if fault.any():
        raise ValidationError("trajectory simulation faulted (state left the model domain)")
    return out


def residuals(
    theta,
    data: Dataset,
    profile: DProfile,
    k: PlantConstants = DEFAULT_PLANT,
    h: float = DEFAULT_H,
) -> np.ndarray:
    """Stacked channel-scaled residuals (predicted - measured) / scale.

    The scale of each channel is its largest absolute measurement, so
    channels with different units weigh comparably.
    """
    th = np.asarray(getattr(theta, "as_array", lambda: theta)(), float)
    sim = simulate_at(th, data.times, data.xi0, profile, k, h, data.recirculation, data.delta)
    return _stack_residuals(sim[0], data)


def _stack_residuals(sim, data: Dataset) -> np.ndarray:
    parts = []
    for ch, series in enumerate((data.b, data.s, data.x)):
        mask = np.isfinite(series)
        if not mask.any():
            continue
        scale = np.max(np.abs(series[mask]))
        scale = scale if scale > 0 else 1.0
        parts.append((sim[mask, ch] - series[mask]) / scale)
    return np.concatenate(parts)


def fit(
    data: Dataset,
    profile: DProfile,
    theta_init: KineticParams,
    bounds=None,
    k: PlantConstants = DEFAULT_PLANT,
    h: float = DEFAULT_H,
    max_iter: int = 200,
    fd_step: float = 1e-6,
) -> FitResult:
    """Damped Gauss-Newton fit of the four kinetic parameters.

    Optimizes in log-parameter space (positivity built in) with
    Levenberg-style damping that only ever accepts descent steps, so the
    accepted cost sequence is non-increasing.  bounds is an optional
    (lo, hi) pair of 4-vectors; iterates are projected onto the box and a
    solution pressed against it is flagged via at_bounds.  Confidence
    half-widths come from the linearized covariance at the solution,
    scaled by the residual variance, and are reported as +-% of each
    estimate.
    """
    th0 = theta_init.as_array()
    if bounds is None:
        lo = np.full(4, 1e-12)
        hi = np.full(4, 1e12)
    else:
        lo = np.asarray(bounds[0], float)
        hi = np.asarray(bounds[1], float)
        if np.any(lo <= 0) or np.any(hi <= lo):
            raise ValidationError("bounds must satisfy 0 < lo < hi")
        if np.any(th0 < lo) or np.any(th0 > hi):
            raise ValidationError("theta_init must lie within bounds")
    zlo, zhi = np.log(lo), np.log(hi)

    def res_of(z_rows):
        thetas = np.exp(np.clip(np.atleast_2d(z_rows), zlo, zhi))
        sim = simulate_at(thetas, data.times, data.xi0, profile, k, h,
                          data.recirculation, data.delta)
        return np.stack([_stack_residuals(sim[m], data) for m in range(sim.shape[0])])

    def jacobian(z):
        eye = np.eye(4)
        pert = np.vstack([z + fd_step * eye, z - fd_step * eye])
        R = res_of(pert)
        return (R[:4] - R[4:]).T / (2 * fd_step)

    z = np.log(th0)
    r = res_of(z)[0]
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        J = jacobian(z)
        g = J.T @ r
        if np.linalg.norm(g, np.inf) < 1e-14 * max(1.0, cost):
            converged = True
            break
        JtJ = J.T @ J
        accepted = False
        for _ in range(25):
            try:
                step = np.linalg.solve(JtJ + lam * np.diag(np.diag(JtJ) + 1e-30), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            z_new = np.clip(z + step, zlo, zhi)
            r_new = res_of(z_new)[0]
            cost_new = float(r_new @ r_new)
            if cost_new <= cost + 1e-16:
                moved = float(np.linalg.norm(z_new - z, np.inf))
                z, r, cost = z_new, r_new, cost_new
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                if moved < 1e-11:
                    converged = True
                break
            lam *= 10
        if not accepted:
            converged = True  # no descent direction left at damping limit
            break
        if converged:
            break

    theta_hat = np.exp(np.clip(z, zlo, zhi))
    at_bounds = bool(np.any(np.abs(z - zlo) < 1e-9) or np.any(np.abs(z - zhi) < 1e-9))
    m = r.shape[0]
    sigma2 = cost / max(m - 4, 1)
    J = jacobian(z)
    try:
        cov_z = sigma2 * np.linalg.inv(J.T @ J)
        half_log = CI_QUANTILE * np.sqrt(np.maximum(np.diag(cov_z), 0.0))
    except np.linalg.LinAlgError:
        half_log = np.full(4, np.inf)
    # a half-width in log space is a relative half-width in parameter space
    ci_pct = (np.exp(half_log) - 1.0) * 100.0
    return FitResult(
        theta_hat=KineticParams.from_array(theta_hat),
        residual_norm=math.sqrt(cost),
        ci_halfwidth_pct=ci_pct,
        converged=converged,
        at_bounds=at_bounds,
        iterations=iterations,
    )


DEFAULT_PROFILE = DProfile(np.array([0.0, 5.0, 14.0]), np.array([0.0, 0.3, 0.38]))


def generate_dataset(
    theta_true: KineticParams,
    profile: DProfile = DEFAULT_PROFILE,
    xi0=(0.2, 18.0, 0.01),
    t_end: float = 24.0,
    sample_dt: float = 0.5,
    noise_fracs=(0.0, 0.0, 0.0),
    seed: int = 0,
    k: PlantConstants = DEFAULT_PLANT,
    h: float = DEFAULT_H,
) -> Dataset:
    """Synthesize a fully-measured dataset from the reduced model: a batch
    growth phase followed by a chemostat phase under `profile`, sampled
    every sample_dt hours, with optional multiplicative Gaussian noise."""
    times = np.round(np.arange(0.0, t_end + 1e-9, sample_dt) / h) * h
    xi0 = np.asarray(xi0, float)
    sim = simulate_at(theta_true.as_array(), times, xi0, profile, k, h)[0]
    rng = np.random.default_rng(seed)
    noisy = sim * (1.0 + rng.standard_normal(sim.shape) * np.asarray(noise_fracs))
    return Dataset(times, noisy[:, 0], noisy[:, 1], noisy[:, 2], xi0)
