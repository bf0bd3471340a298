"""Process model of a recirculating chemostat with switchable DNA filtration.

States are biomass b [g/L], substrate s [g/L] and extracellular DNA x
[ng/uL].  Growth follows Monod kinetics in s with a linear inhibition
factor in x that reaches zero at x_crit.  The reactor recycles part of
its outflow; a concentrated make-up stream (concentration s_H) keeps the
effective inlet concentration at s_in, which fixes the recirculation rate
as a function of D and s.  An in-loop filtration unit, when switched on,
removes DNA at rate D_f * alpha * x.

    db/dt = mu(s,x) b - D b
    ds/dt = -mu(s,x) b / Y + D (s_in - s)
    dx/dt = c mu(s,x) b - (D - D_rec) x - delta D_f alpha x
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NonFiniteStateError, SingularityError, ValidationError

#: default fixed integration step [h]; see rk4_step
DEFAULT_H = 0.01

#: guard distance from the recirculation pole at s = s_H [g/L]
EPS_SING = 1.0


@dataclass(frozen=True)
class KineticParams:
    """Uncertain kinetic parameters.

    mu_max: maximum specific growth rate [1/h]
    Ks: Monod half-saturation constant [g/L]
    c: DNA production per unit biomass growth [ng/uL per g/L]
    Y: biomass yield on substrate [-]
    """

    mu_max: float
    Ks: float
    c: float
    Y: float

    def __post_init__(self):
        if not all(v > 0 for v in (self.mu_max, self.Ks, self.c, self.Y)):
            raise ValidationError(f"kinetic parameters must be strictly positive: {self}")
        if self.mu_max >= 10.0:
            raise ValidationError(f"mu_max={self.mu_max} fails sanity bound (< 10 1/h)")
        if self.Ks >= 20.0:
            raise ValidationError(f"Ks={self.Ks} fails sanity bound (< inlet concentration)")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu_max, self.Ks, self.c, self.Y])

    @staticmethod
    def from_array(v) -> "KineticParams":
        return KineticParams(float(v[0]), float(v[1]), float(v[2]), float(v[3]))


@dataclass(frozen=True)
class PlantConstants:
    """Known plant constants.

    alpha: filtration efficiency (0, 1]
    D_max: maximum dilution rate [1/h]
    x_crit: DNA concentration at which growth stops [ng/uL]
    D_f: filtration flow rate [1/h]
    s_in: effective inlet substrate concentration [g/L]
    s_H: make-up stream concentration [g/L]
    lam: filtration cost over biomass price (cost-to-price ratio) [-]
    """

    alpha: float = 0.72
    D_max: float = 0.6
    x_crit: float = 0.48
    D_f: float = 0.4
    s_in: float = 20.0
    s_H: float = 200.0
    lam: float = 2.4

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValidationError(f"alpha={self.alpha} outside (0, 1]")
        if not (self.s_H > self.s_in > 0.0):
            raise ValidationError(f"need s_H > s_in > 0, got s_H={self.s_H}, s_in={self.s_in}")
        if self.x_crit <= 0.0 or self.D_max <= 0.0:
            raise ValidationError("x_crit and D_max must be positive")
        if self.D_f < 0.0 or self.lam < 0.0:
            raise ValidationError("D_f and lam must be nonnegative")


@dataclass(frozen=True)
class ProcessState:
    """Reactor state: biomass b [g/L], substrate s [g/L], DNA x [ng/uL]."""

    b: float
    s: float
    x: float

    def __post_init__(self):
        if self.b < 0 or self.s < 0 or self.x < 0:
            raise ValidationError(f"state components must be nonnegative: {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.b, self.s, self.x])

    @staticmethod
    def from_array(v) -> "ProcessState":
        return ProcessState(float(v[0]), float(v[1]), float(v[2]))


@dataclass(frozen=True)
class ControlInput:
    """Applied input: total dilution rate D [1/h] and filter flag delta."""

    D: float
    delta: int

    def __post_init__(self):
        if self.D < 0:
            raise ValidationError(f"D={self.D} must be nonnegative")
        if self.delta not in (0, 1):
            raise ValidationError(f"delta={self.delta} must be 0 or 1")


#: fitted kinetic parameter values used as the nominal operating point
NOMINAL_KINETICS = KineticParams(mu_max=0.466, Ks=0.02285, c=0.01404, Y=0.2779)

#: default plant constants
DEFAULT_PLANT = PlantConstants()


def growth_rate(s: float, x: float, theta: KineticParams, k: PlantConstants) -> float:
    """Specific growth rate mu(s, x) [1/h].

    Monod in substrate with linear DNA inhibition; intentionally not
    clamped, so the value is negative for x > x_crit.
    """
    return theta.mu_max * s / (theta.Ks + s) * (1.0 - x / k.x_crit)


def recirculation_rate(D: float, s: float, k: PlantConstants, eps_sing: float = EPS_SING) -> float:
    """Recirculated fraction of the dilution rate [1/h].

    D_rec = D (s_in - s_H) / (s - s_H); the balance has a pole at s = s_H,
    guarded at distance eps_sing.
    """
    if s >= k.s_H - eps_sing:
        raise SingularityError(
            f"substrate s={s} within {eps_sing} g/L of the make-up concentration s_H={k.s_H}"
        )
    return D * (k.s_in - k.s_H) / (s - k.s_H)


def derivatives(
    xi: ProcessState,
    u: ControlInput,
    theta: KineticParams,
    k: PlantConstants,
    recirculation: bool = True,
) -> np.ndarray:
    """Time derivative of [b, s, x] under constant input.

    With recirculation=False the recycle stream is shut (D_rec = 0), the
    classical chemostat reduction used for batch-style identification.
    """
    d = _rhs(xi.b, xi.s, xi.x, u.D, float(u.delta), theta, k, recirculation)
    return np.array(d)


def _rhs(b, s, x, D, delta, theta: KineticParams, k: PlantConstants, recirculation=True):
    """Scalar/array RHS shared by the public wrappers; no domain checks."""
    mu = theta.mu_max * s / (theta.Ks + s) * (1.0 - x / k.x_crit)
    mub = mu * b
    if recirculation:
        d_rec = D * (k.s_in - k.s_H) / (s - k.s_H)
    else:
        d_rec = 0.0
    db = mub - D * b
    ds = -mub / theta.Y + D * (k.s_in - s)
    dx = theta.c * mub - (D - d_rec) * x - delta * k.D_f * k.alpha * x
    return db, ds, dx


class StepResult(NamedTuple):
    state: ProcessState
    clamped: bool
    min_pre_clamp: float


def rk4_step(
    xi: ProcessState,
    u: ControlInput,
    theta: KineticParams,
    k: PlantConstants,
    h: float = DEFAULT_H,
    recirculation: bool = True,
) -> StepResult:
    """One classical RK4 step of size h [h] under zero-order hold on u.

    Components that come out negative are clamped to zero; the smallest
    pre-clamp value is reported so callers can distinguish numerical
    underflow from genuine constraint violation.  The default step was
    chosen for stability of the fast substrate mode near low-s steady
    states (|lambda| can exceed 200/h there, so steps above ~0.02 h make
    the classical RK4 recursion diverge).
    """
    if h <= 0:
        raise ValidationError(f"step size h={h} must be positive")
    b, s, x = xi.b, xi.s, xi.x
    if s >= k.s_H - EPS_SING:
        raise SingularityError(f"substrate s={s} too close to s_H={k.s_H}")
    D, delta = u.D, float(u.delta)
    k1 = _rhs(b, s, x, D, delta, theta, k, recirculation)
    k2 = _rhs(b + 0.5 * h * k1[0], s + 0.5 * h * k1[1], x + 0.5 * h * k1[2], D, delta, theta, k, recirculation)
    k3 = _rhs(b + 0.5 * h * k2[0], s + 0.5 * h * k2[1], x + 0.5 * h * k2[2], D, delta, theta, k, recirculation)
    k4 = _rhs(b + h * k3[0], s + h * k3[1], x + h * k3[2], D, delta, theta, k, recirculation)
    b1 = b + h / 6.0 * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0])
    s1 = s + h / 6.0 * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1])
    x1 = x + h / 6.0 * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2])
    if not (math.isfinite(b1) and math.isfinite(s1) and math.isfinite(x1)):
        raise NonFiniteStateError(f"RK4 step from {xi} with u={u} produced non-finite state")
    low = min(b1, s1, x1)
    clamped = low < 0.0
    state = ProcessState(max(b1, 0.0), max(s1, 0.0), max(x1, 0.0))
    return StepResult(state, clamped, low)


def integrate(
    xi: ProcessState,
    u: ControlInput,
    theta: KineticParams,
    k: PlantConstants,
    duration: float,
    h: float = DEFAULT_H,
    recirculation: bool = True,
) -> StepResult:
    """Advance the state over `duration` [h] with fixed substeps of size h.

    duration must be an integer multiple of h (within rounding).
    """
    n = int(round(duration / h))
    if n < 1 or abs(n * h - duration) > 1e-9 * max(1.0, duration):
        raise ValidationError(f"duration={duration} is not a positive multiple of h={h}")
    state = xi
    clamped = False
    low = math.inf
    for _ in range(n):
        state, c, m = rk4_step(state, u, theta, k, h, recirculation)
        clamped = clamped or c
        low = min(low, m)
    return StepResult(state, clamped, low)


def stage_profit(xi: ProcessState, u: ControlInput, k: PlantConstants) -> float:
    """Instantaneous profit rate normalized by biomass price [1/h].

    Harvest revenue D*b minus filtration cost lam*delta*D_f.
    """
    return u.D * xi.b - k.lam * u.delta * k.D_f


def steady_state_biomass(
    D: float, theta: KineticParams, k: PlantConstants, x_fixed: float = 0.0
) -> float:
    """Steady-state biomass at dilution D with DNA held at x_fixed.

    Solves mu(s*, x_fixed) = D in closed form and returns Y (s_in - s*);
    returns 0.0 (washout) when growth cannot match the dilution rate.
    """
    if not (0.0 <= D <= k.D_max):
        raise ValidationError(f"D={D} outside [0, D_max={k.D_max}]")
    if not (0.0 <= x_fixed < k.x_crit):
        raise ValidationError(f"x_fixed={x_fixed} outside [0, x_crit={k.x_crit})")
    mu_eff = theta.mu_max * (1.0 - x_fixed / k.x_crit)
    if D >= mu_eff * k.s_in / (theta.Ks + k.s_in):
        return 0.0
    s_star = D * theta.Ks / (mu_eff - D)
    if s_star >= k.s_in:
        return 0.0
    return theta.Y * (k.s_in - s_star)
