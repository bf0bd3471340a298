"""Feedback policies: receding-horizon optimizer and hysteresis + lookup.

The receding-horizon controller maximizes the predicted horizon profit
over a candidate set built from (a) every on/off filter pattern with a
bounded number of switches and (b) piecewise-constant dilution profiles,
optimized per pattern by a grid scan plus golden-section refinement on
each block.  Only the first input of the best sequence is applied.

The lookup policy picks the dilution rate from a precomputed table of
steady-state optima (nearest parameter neighbour) and switches the filter
through a hysteresis band on the DNA estimate.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import kernels
from .errors import ValidationError
from .model import (
    DEFAULT_H,
    DEFAULT_PLANT,
    NOMINAL_KINETICS,
    ControlInput,
    KineticParams,
    PlantConstants,
    steady_state_biomass,
)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MpcConfig:
    """Receding-horizon solver settings.

    N: horizon length in sampling steps
    Ts: sampling period [h]
    d_blocks: number of piecewise-constant dilution blocks over the horizon
    max_switches: maximum filter on/off sign changes per candidate pattern
    d_grid_refinements: coordinate-descent sweeps over the blocks
    h: integration substep for predictions [h]
    d_grid: when set, dilution values are restricted to this finite set
    pattern_keep: refine only this many best-seeded patterns (None = all)
    golden_iters: golden-section iterations per block line search
    """

    N: int = 10
    Ts: float = 0.75
    d_blocks: int = 3
    max_switches: int = 2
    d_grid_refinements: int = 3
    h: float = DEFAULT_H
    d_grid: tuple | None = None
    pattern_keep: int | None = 16
    golden_iters: int = 12

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError(f"N={self.N} must be >= 1")
        if not (1 <= self.d_blocks <= self.N):
            raise ValidationError(f"d_blocks={self.d_blocks} outside [1, N={self.N}]")
        if not (0 <= self.max_switches <= self.N - 1):
            raise ValidationError(f"max_switches={self.max_switches} outside [0, N-1]")
        if self.Ts <= 0 or self.h <= 0:
            raise ValidationError("Ts and h must be positive")
        if self.d_grid is not None and len(self.d_grid) == 0:
            raise ValidationError("d_grid must be nonempty when given")


@dataclass(frozen=True)
class MpcResult:
    """First input plus solve diagnostics."""

    u: ControlInput
    D_sequence: np.ndarray
    delta_sequence: np.ndarray
    D_blocks: np.ndarray
    predicted_gain: float
    fallback: bool
    n_evaluated: int


def delta_patterns(N: int, max_switches: int) -> np.ndarray:
    """All binary sequences of length N with at most max_switches sign
    changes, in lexicographic order."""
    pats = []
    for start in (0, 1):
        for k in range(0, max_switches + 1):
            for cuts in combinations(range(1, N), k):
                seq = np.empty(N, np.float64)
                val = float(start)
                prev = 0
                for cut in (*cuts, N):
                    seq[prev:cut] = val
                    val = 1.0 - val
                    prev = cut
                pats.append(seq)
    pats = np.unique(np.array(pats), axis=0)
    return pats


def block_sizes(N: int, d_blocks: int) -> list[int]:
    """Contiguous block lengths, as even as possible, longer blocks first."""
    base, extra = divmod(N, d_blocks)
    return [base + (1 if i < extra else 0) for i in range(d_blocks)]


def _expand_blocks(D_blocks: np.ndarray, sizes) -> np.ndarray:
    """(M, d_blocks) block values -> (M, N) per-step dilution sequences."""
    return np.repeat(D_blocks, sizes, axis=1)


def predict_horizon_gain(xi, theta, D_seq, delta_seq, cfg: MpcConfig, k: PlantConstants):
    """Predicted profit of one input sequence from state xi under theta.

    Returns (gain, feasible); infeasible means a predicted component fell
    below -1e-9 before clamping (or integration faulted).
    """
    xi = np.asarray(getattr(xi, "as_array", lambda: xi)(), float)
    th = np.asarray(getattr(theta, "as_array", lambda: theta)(), float)
    D_seq = np.asarray(D_seq, float).reshape(1, -1)
    delta_seq = np.asarray(delta_seq, float).reshape(1, -1)
    n_sub = int(round(cfg.Ts / cfg.h))
    gains, feas, _ = kernels.horizon_gains(
        xi, th, np.ascontiguousarray(D_seq), np.ascontiguousarray(delta_seq),
        k.lam, *kernels.plant_args(k), cfg.Ts, cfg.h, n_sub,
    )
    return float(gains[0]), bool(feas[0])


class _BestTracker:
    """Deterministic argmax over evaluated candidates.

    Ties on the predicted gain are broken by the lexicographically
    smallest (pattern, D_blocks) encoding, so the solve is a pure function
    of its inputs regardless of evaluation order.
    """

    def __init__(self):
        self.gain = -np.inf
        self.key = None
        self.pattern = None
        self.D_blocks = None
        self.n_evaluated = 0

    def offer(self, gains, feas, patterns, D_blocks):
        self.n_evaluated += gains.shape[0]
        ok = feas.astype(bool)
        if not ok.any():
            return
        gmax = gains[ok].max()
        if gmax < self.gain:
            return
        idxs = np.nonzero(ok & (gains == gmax))[0]
        for i in idxs:
            key = (tuple(patterns[i]), tuple(D_blocks[i]))
            if gmax > self.gain or key < self.key:
                self.gain = gmax
                self.key = key
                self.pattern = patterns[i].copy()
                self.D_blocks = D_blocks[i].copy()


def mpc_solve(
    belief_mean,
    cfg: MpcConfig,
    k: PlantConstants,
    prev: MpcResult | None = None,
) -> MpcResult:
    """Receding-horizon solve from the current augmented estimate.

    belief_mean: 7-vector [b, s, x, mu_max, Ks, c, Y]; the parameter block
    is frozen over the horizon.  prev warm-starts the dilution profile.
    Deterministic: identical inputs give identical outputs.
    """
    z = np.asarray(belief_mean, float)
    if z.shape != (7,) or np.any(~np.isfinite(z)):
        raise ValidationError(f"belief mean must be a finite 7-vector, got {z}")
    if np.any(z[3:] <= 0):
        raise ValidationError("belief parameter block must be positive")
    xi = np.maximum(z[:3], 0.0)
    theta = z[3:]
    k_max = k.D_max
    sizes = block_sizes(cfg.N, cfg.d_blocks)
    patterns = delta_patterns(cfg.N, cfg.max_switches)
    P = patterns.shape[0]
    n_sub = int(round(cfg.Ts / cfg.h))
    args = (k.lam, *kernels.plant_args(k), cfg.Ts, cfg.h, n_sub)

    if cfg.d_grid is not None:
        grid = np.array(sorted(cfg.d_grid), float)
        if np.any(grid < 0) or np.any(grid > k_max):
            raise ValidationError("d_grid values must lie within [0, D_max]")
    else:
        grid = np.linspace(0.0, k_max, 7)

    best = _BestTracker()

    def evaluate(pats, D_blocks):
        D_seq = np.ascontiguousarray(_expand_blocks(D_blocks, sizes))
        gains, feas, _ = kernels.horizon_gains(xi, theta, D_seq, np.ascontiguousarray(pats), *args)
        best.offer(gains, feas, pats, D_blocks)
        return np.where(feas.astype(bool), gains, -np.inf)

    # seed: constant profiles on the base grid, plus the shifted previous plan
    seed_gain = np.full(P, -np.inf)
    seed_D = np.zeros((P, cfg.d_blocks))
    for g in grid:
        blocks = np.full((P, cfg.d_blocks), g)
        gains = evaluate(patterns, blocks)
        better = gains > seed_gain
        seed_gain[better] = gains[better]
        seed_D[better] = g
    if prev is not None and not prev.fallback:
        blocks = np.broadcast_to(prev.D_blocks, (P, cfg.d_blocks)).copy()
        gains = evaluate(patterns, blocks)
        better = gains > seed_gain
        seed_gain[better] = gains[better]
        seed_D[better] = prev.D_blocks

    keep = np.arange(P)
    if cfg.pattern_keep is not None and cfg.pattern_keep < P:
        order = np.argsort(-seed_gain, kind="stable")[: cfg.pattern_keep]
        forced = [0, P - 1]  # all-off and all-on patterns stay in play
        keep = np.unique(np.concatenate([order, forced]))
    pats = patterns[keep]
    cur_D = seed_D[keep].copy()
    cur_gain = seed_gain[keep].copy()
    Pk = pats.shape[0]

    if cfg.d_grid is not None:
        # exhaustive enumeration over the finite grid (joint when small,
        # coordinate scans otherwise)
        n_combo = len(grid) ** cfg.d_blocks
        if n_combo * P <= 20000:
            mesh = np.stack(np.meshgrid(*([grid] * cfg.d_blocks), indexing="ij"), -1).reshape(-1, cfg.d_blocks)
            for combo in mesh:
                evaluate(patterns, np.broadcast_to(combo, (P, cfg.d_blocks)).copy())
        else:
            for _ in range(cfg.d_grid_refinements):
                for j in range(cfg.d_blocks):
                    for g in grid:
                        trial = cur_D.copy()
                        trial[:, j] = g
                        gains = evaluate(pats, trial)
                        better = gains > cur_gain
                        cur_gain[better] = gains[better]
                        cur_D[better, j] = g
    else:
        cell = grid[1] - grid[0]
        for _ in range(cfg.d_grid_refinements):
            for j in range(cfg.d_blocks):
                scan_best = cur_gain.copy()
                scan_D = cur_D[:, j].copy()
                for g in grid:
                    trial = cur_D.copy()
                    trial[:, j] = g
                    gains = evaluate(pats, trial)
                    better = gains > scan_best
                    scan_best[better] = gains[better]
                    scan_D[better] = g
                # golden-section refinement inside the bracketing cells
                a = np.clip(scan_D - cell, 0.0, k_max)
                b = np.clip(scan_D + cell, 0.0, k_max)
                x1 = b - _GOLDEN * (b - a)
                x2 = a + _GOLDEN * (b - a)
                trial = cur_D.copy()
                trial[:, j] = x1
                f1 = evaluate(pats, trial)
                trial = cur_D.copy()
                trial[:, j] = x2
                f2 = evaluate(pats, trial)
                for val, f in ((x1, f1), (x2, f2)):
                    better = f > scan_best
                    scan_best[better] = f[better]
                    scan_D[better] = val[better]
                for _ in range(cfg.golden_iters):
                    shrink_left = f1 >= f2  # keep [a, x2]
                    b = np.where(shrink_left, x2, b)
                    a = np.where(shrink_left, a, x1)
                    x1_new = b - _GOLDEN * (b - a)
                    x2_new = a + _GOLDEN * (b - a)
                    probe = np.where(shrink_left, x1_new, x2_new)
                    trial = cur_D.copy()
                    trial[:, j] = probe
                    fp = evaluate(pats, trial)
                    f2 = np.where(shrink_left, f1, fp)
                    f1 = np.where(shrink_left, fp, f1)
                    x1, x2 = x1_new, x2_new
                    better = fp > scan_best
                    scan_best[better] = fp[better]
                    scan_D[better] = probe[better]
                cur_gain = scan_best
                cur_D[:, j] = scan_D

    if best.key is None:
        # every candidate was infeasible: harvest nothing, keep the filter on
        return MpcResult(
            u=ControlInput(0.0, 1),
            D_sequence=np.zeros(cfg.N),
            delta_sequence=np.ones(cfg.N),
            D_blocks=np.zeros(cfg.d_blocks),
            predicted_gain=-np.inf,
            fallback=True,
            n_evaluated=best.n_evaluated,
        )
    D_seq = _expand_blocks(best.D_blocks[None, :], sizes)[0]
    return MpcResult(
        u=ControlInput(float(D_seq[0]), int(best.pattern[0])),
        D_sequence=D_seq,
        delta_sequence=best.pattern.copy(),
        D_blocks=best.D_blocks.copy(),
        predicted_gain=float(best.gain),
        fallback=False,
        n_evaluated=best.n_evaluated,
    )


@dataclass(frozen=True)
class HysteresisConfig:
    """Filter switching thresholds on the DNA estimate [ng/uL]."""

    x_on: float = 0.4 * DEFAULT_PLANT.x_crit
    x_off: float = 0.3 * DEFAULT_PLANT.x_crit

    def __post_init__(self):
        if not (0.0 < self.x_off < self.x_on):
            raise ValidationError(f"need 0 < x_off < x_on, got x_off={self.x_off}, x_on={self.x_on}")


def hysteresis_delta(x_hat: float, delta_prev: int, cfg: HysteresisConfig) -> int:
    """Bang-bang filter command with a hold band against chattering."""
    if x_hat < 0:
        raise ValidationError(f"x_hat={x_hat} must be nonnegative")
    if x_hat >= cfg.x_on:
        return 1
    if x_hat <= cfg.x_off:
        return 0
    return 1 if delta_prev else 0


def optimal_steady_dilution(theta: KineticParams, k: PlantConstants, x_fixed: float = 0.0) -> float:
    """Dilution rate maximizing steady-state harvest D * b_ss at a fixed
    DNA level, by golden-section search below the washout boundary."""
    mu_eff = theta.mu_max * (1.0 - x_fixed / k.x_crit)
    if mu_eff <= 0:
        return 0.0
    d_wash = mu_eff * k.s_in / (theta.Ks + k.s_in)
    hi = min(k.D_max, d_wash * (1.0 - 1e-12))
    if hi <= 0:
        return 0.0

    def productivity(D):
        return D * steady_state_biomass(D, theta, k, x_fixed)

    a, b = 0.0, hi
    best_d, best_p = hi, productivity(hi)
    if productivity(0.0) > best_p:
        best_d, best_p = 0.0, 0.0
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = productivity(x1), productivity(x2)
    while b - a > 1e-8:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = productivity(x1)
            if f1 > best_p:
                best_d, best_p = x1, f1
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = productivity(x2)
            if f2 > best_p:
                best_d, best_p = x2, f2
    return best_d


@dataclass(frozen=True)
class PolicyTable:
    """Offline map from parameter samples to steady-state optimal dilution."""

    thetas: np.ndarray
    d_star: np.ndarray
    theta_nom: np.ndarray

    def __post_init__(self):
        thetas = np.asarray(self.thetas, float)
        d_star = np.asarray(self.d_star, float)
        nom = np.asarray(self.theta_nom, float)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "d_star", d_star)
        object.__setattr__(self, "theta_nom", nom)
        if thetas.ndim != 2 or thetas.shape[1] != 4 or thetas.shape[0] == 0:
            raise ValidationError("policy table needs a nonempty (n, 4) parameter array")
        if d_star.shape != (thetas.shape[0],):
            raise ValidationError("d_star length does not match parameter rows")
        if np.any(d_star < 0):
            raise ValidationError("table dilution rates must be nonnegative")

    def __len__(self):
        return self.thetas.shape[0]

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["mu_max", "Ks", "c", "Y", "D_star"])
            for row, d in zip(self.thetas, self.d_star):
                writer.writerow([repr(float(v)) for v in row] + [repr(float(d))])

    @staticmethod
    def load_csv(path, theta_nom=None) -> "PolicyTable":
        thetas, dstar = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["mu_max", "Ks", "c", "Y", "D_star"]:
                raise ValidationError(f"unexpected policy table header: {header}")
            for row in reader:
                vals = [float(v) for v in row]
                thetas.append(vals[:4])
                dstar.append(vals[4])
        nom = NOMINAL_KINETICS.as_array() if theta_nom is None else np.asarray(theta_nom, float)
        return PolicyTable(np.array(thetas), np.array(dstar), nom)


def build_table(
    n: int,
    seed: int,
    k: PlantConstants = DEFAULT_PLANT,
    theta_nom: KineticParams = NOMINAL_KINETICS,
    frac: float = 0.15,
    x_fixed: float | None = None,
) -> PolicyTable:
    """Sample n parameter sets uniformly within +-frac of nominal and store
    each one's steady-state optimal dilution at the worst-case DNA level
    (the hysteresis switch-on threshold by default)."""
    if n < 1:
        raise ValidationError(f"table size n={n} must be >= 1")
    if x_fixed is None:
        x_fixed = 0.4 * k.x_crit
    rng = np.random.default_rng(seed)
    nom = theta_nom.as_array()
    thetas = nom * rng.uniform(1.0 - frac, 1.0 + frac, (n, 4))
    d_star = np.empty(n)
    for i in range(n):
        d_star[i] = optimal_steady_dilution(KineticParams.from_array(thetas[i]), k, x_fixed)
    return PolicyTable(thetas, d_star, nom)


def lookup_select(theta_hat, table: PolicyTable) -> float:
    """Dilution of the nearest table entry in nominal-normalized Euclidean
    distance; ties resolve to the lowest index."""
    th = np.asarray(getattr(theta_hat, "as_array", lambda: theta_hat)(), float)
    d = np.linalg.norm((th - table.thetas) / table.theta_nom, axis=1)
    return float(table.d_star[int(np.argmin(d))])


def lookup_step(belief_mean, delta_prev: int, table: PolicyTable, hys: HysteresisConfig) -> ControlInput:
    """Compose the table dilution choice with the hysteresis filter command."""
    z = np.asarray(belief_mean, float)
    D = lookup_select(z[3:], table)
    delta = hysteresis_delta(float(z[2]), delta_prev, hys)
    return ControlInput(D, delta)
