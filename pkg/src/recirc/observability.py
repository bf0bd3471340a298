"""Numerical rank analysis of the augmented system's output sensitivities.

Builds the 10x7 matrix whose rows are the gradients of the measured
outputs (biomass and substrate) and of their iterated time derivatives
along the augmented drift (orders 0..4), then checks its rank across
sampled operating points.

The rows are computed exactly (to machine precision) with truncated
Taylor-series arithmetic in time whose coefficients carry dual numbers:
the value part recovers the iterated time derivatives of the flow, the
tangent part their gradients with respect to the initial augmented state.
This is forward-mode differentiation of the recursion x_{k+1} = f(x)_k/(k+1)
and avoids both symbolic algebra and ill-conditioned nested finite
differences.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ComputationFault, ValidationError
from .model import DEFAULT_PLANT, NOMINAL_KINETICS, ControlInput, KineticParams, PlantConstants

#: Lie-derivative orders stacked into the matrix (0..ORDER_MAX for both outputs)
ORDER_MAX = 4

#: singular-value ratio below which a direction counts as lost.  Applied to
#: the row-normalized matrix; exact dependencies (duplicated rows, b = 0)
#: land at ~1e-16 while the thinnest genuinely full-rank operating points
#: observed stay above ~1e-11, so 1e-13 splits the two regimes.
DEFAULT_TOL_RATIO = 1e-13

_NDUAL = 8  # value + 7 tangents


def _smul(a, b):
    K = min(len(a), len(b))
    out = []
    for k in range(K):
        acc = np.zeros_like(a[0])
        for i in range(k + 1):
            u, v = a[i], b[k - i]
            acc[0] += u[0] * v[0]
            acc[1:] += u[0] * v[1:] + v[0] * u[1:]
        out.append(acc)
    return out


def _sdiv(a, b):
    K = min(len(a), len(b))
    out = []
    for k in range(K):
        num = a[k].copy()
        for i in range(k):
            u, v = out[i], b[k - i]
            num[0] -= u[0] * v[0]
            num[1:] -= u[0] * v[1:] + v[0] * u[1:]
        c = np.empty_like(num)
        c[0] = num[0] / b[0][0]
        c[1:] = (num[1:] - c[0] * b[0][1:]) / b[0][0]
        out.append(c)
    return out


def _sadd(a, b):
    return [a[k] + b[k] for k in range(min(len(a), len(b)))]


def _ssub(a, b):
    return [a[k] - b[k] for k in range(min(len(a), len(b)))]


def _sconst(vals, K, M):
    out = [np.zeros((_NDUAL, M)) for _ in range(K)]
    out[0][0] = vals
    return out


def _sscale(a, c):
    return [u * c for u in a]


def _drift_series(z, D, delta, k: PlantConstants):
    """Series of the three nontrivial drift components on truncated input z."""
    b, s, x, m, Ks, c, Y = z
    K = len(b)
    M = b[0].shape[1]
    one = _sconst(1.0, K, M)
    monod = _sdiv(s, _sadd(Ks, s))
    inhib = _ssub(one, _sscale(x, 1.0 / k.x_crit))
    mu = _smul(_smul(m, monod), inhib)
    mub = _smul(mu, b)
    f1 = _ssub(mub, _sscale(b, D))
    f2 = _ssub(_sscale(_ssub(_sconst(k.s_in, K, M), s), D), _sdiv(mub, Y))
    d_rec = _sdiv(_sconst(D * (k.s_in - k.s_H), K, M), _ssub(s, _sconst(k.s_H, K, M)))
    wash = _ssub(_sconst(D, K, M), d_rec)
    f3 = _ssub(_ssub(_smul(c, mub), _smul(wash, x)), _sscale(x, delta * k.D_f * k.alpha))
    return [f1, f2, f3]


def _lie_rows_batch(zpts, D, delta, k: PlantConstants, order_max: int = ORDER_MAX):
    """Gradient rows for a batch of points.

    zpts: (M, 7), D/delta: (M,).  Returns (M, 2*(order_max+1), 7), rows
    ordered [h1 order 0, h2 order 0, h1 order 1, ...].
    """
    zpts = np.asarray(zpts, float)
    M = zpts.shape[0]
    D = np.broadcast_to(np.asarray(D, float), (M,))
    delta = np.broadcast_to(np.asarray(delta, float), (M,))
    z = []
    for j in range(7):
        c0 = np.zeros((_NDUAL, M))
        c0[0] = zpts[:, j]
        c0[1 + j] = 1.0
        z.append([c0])
    for deg in range(order_max):
        f = _drift_series(z, D, delta, k)
        for j in range(3):
            z[j].append(f[j][deg] / (deg + 1))
        for j in range(3, 7):
            z[j].append(np.zeros((_NDUAL, M)))
    rows = np.empty((M, 2 * (order_max + 1), 7))
    fact = 1.0
    r = 0
    for deg in range(order_max + 1):
        if deg > 0:
            fact *= deg
        for i in (0, 1):
            rows[:, r, :] = (fact * z[i][deg][1:]).T
            r += 1
    if not np.all(np.isfinite(rows)):
        raise ComputationFault("non-finite observability rows (state too close to s_H?)")
    return rows


@dataclass(frozen=True)
class OperatingPoint:
    """Augmented state plus the held input at which rows are evaluated."""

    z: np.ndarray
    u: ControlInput

    def __post_init__(self):
        z = np.asarray(self.z, float)
        object.__setattr__(self, "z", z)
        if z.shape != (7,):
            raise ValidationError(f"operating point must be 7-dimensional, got {z.shape}")
        b, s, x = z[:3]
        if b <= 0 or s <= 0:
            raise ValidationError("operating point requires b > 0 and s > 0")
        if x < 0:
            raise ValidationError("operating point requires x >= 0")
        if np.any(z[3:] <= 0):
            raise ValidationError("operating point parameters must be positive")


def lie_rows(p: OperatingPoint, k: PlantConstants, order_max: int = ORDER_MAX) -> np.ndarray:
    """The stacked gradient rows at a single operating point (10x7 for
    order_max=4)."""
    return _lie_rows_batch(p.z[None, :], [p.u.D], [float(p.u.delta)], k, order_max)[0]


def analytic_partials(p: OperatingPoint, k: PlantConstants):
    """Closed-form values of three landmark matrix entries.

    Returns (d(b_dot)/dx, d(s_dot)/dY, d(b_ddot)/dc); used as an
    independent oracle for lie_rows.
    """
    b, s, x, mu_max, Ks, _, Y = p.z
    xc = k.x_crit
    d1 = -mu_max * s / ((Ks + s) * xc) * b
    d2 = mu_max * s * (xc - x) / (Y**2 * xc * (Ks + s)) * b
    d3 = -(mu_max**2) * s**2 * (xc - x) / (xc**2 * (Ks + s) ** 2) * b**2
    return d1, d2, d3


def rank_of_matrix(mat: np.ndarray, tol_ratio: float = DEFAULT_TOL_RATIO):
    """Numerical rank of a stacked-sensitivity matrix.

    Rows are normalized to unit length first (pure row scaling, rank
    preserving): raw rows grow by several orders of magnitude per
    derivative order, which would otherwise swamp the singular-value
    ratios.  Returns (rank, singular_values_of_normalized_matrix).
    """
    mat = np.asarray(mat, float)
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    normed = mat / np.where(norms > 0, norms, 1.0)
    sv = np.linalg.svd(normed, compute_uv=False)
    if sv[0] == 0:
        return 0, sv
    rank = int(np.sum(sv / sv[0] > tol_ratio))
    return rank, sv


def rank_at(p: OperatingPoint, k: PlantConstants, tol_ratio: float = DEFAULT_TOL_RATIO):
    """Rank and singular values of the sensitivity matrix at one point."""
    return rank_of_matrix(lie_rows(p, k), tol_ratio)


@dataclass(frozen=True)
class SampleRanges:
    """Uniform sampling box for the rank campaign."""

    b: tuple = (0.1, 8.0)
    s: tuple = (1e-3, DEFAULT_PLANT.s_in)
    x: tuple = (0.0, 0.9 * DEFAULT_PLANT.x_crit)
    theta_frac: float = 0.15
    D: tuple = (0.05, DEFAULT_PLANT.D_max)
    theta_nom: KineticParams = NOMINAL_KINETICS

    def __post_init__(self):
        for name in ("b", "s", "x", "D"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValidationError(f"range {name}=({lo}, {hi}) is inverted")


@dataclass
class RankReport:
    """Outcome of a rank campaign."""

    points_tested: int
    full_rank_count: int
    min_sigma_ratio: float
    deficient_points: list = field(default_factory=list)
    ranks: np.ndarray = None
    sigma_ratios: np.ndarray = None
    seed: int = 0

    def __post_init__(self):
        if self.full_rank_count > self.points_tested:
            raise ValidationError("full_rank_count exceeds points_tested")


def rank_campaign(
    n_points: int,
    ranges: SampleRanges | None = None,
    seed: int = 0,
    k: PlantConstants = DEFAULT_PLANT,
    tol_ratio: float = DEFAULT_TOL_RATIO,
    chunk: int = 20000,
) -> RankReport:
    """Sample operating points uniformly and count full-rank verdicts.

    Deterministic for a given seed.  delta is sampled from {0, 1}; D and
    delta are held constant in the drift at each point.
    """
    if n_points < 1:
        raise ValidationError(f"n_points={n_points} must be >= 1")
    ranges = ranges or SampleRanges()
    rng = np.random.default_rng(seed)
    th_nom = ranges.theta_nom.as_array()
    ranks = np.empty(n_points, np.int64)
    ratios = np.empty(n_points)
    for start in range(0, n_points, chunk):
        m = min(chunk, n_points - start)
        b = rng.uniform(*ranges.b, m)
        s = rng.uniform(*ranges.s, m)
        x = rng.uniform(*ranges.x, m)
        th = th_nom * rng.uniform(1.0 - ranges.theta_frac, 1.0 + ranges.theta_frac, (m, 4))
        D = rng.uniform(*ranges.D, m)
        delta = rng.integers(0, 2, m).astype(float)
        z = np.column_stack([b, s, x, th])
        rows = _lie_rows_batch(z, D, delta, k)
        norms = np.linalg.norm(rows, axis=2, keepdims=True)
        rows = rows / np.where(norms > 0, norms, 1.0)
        sv = np.linalg.svd(rows, compute_uv=False)
        lead = np.where(sv[:, 0] > 0, sv[:, 0], 1.0)
        ratios[start : start + m] = sv[:, 6] / lead
        ranks[start : start + m] = np.sum(sv / lead[:, None] > tol_ratio, axis=1)
    deficient = np.nonzero(ranks < 7)[0].tolist()
    return RankReport(
        points_tested=n_points,
        full_rank_count=int(np.sum(ranks == 7)),
        min_sigma_ratio=float(ratios.min()),
        deficient_points=deficient,
        ranks=ranks,
        sigma_ratios=ratios,
        seed=seed,
    )


def write_report_csv(report: RankReport, path) -> None:
    """Per-point rank table with a trailing summary line."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["point_index", "rank", "sigma_ratio"])
        for i in range(report.points_tested):
            writer.writerow([i, int(report.ranks[i]), repr(float(report.sigma_ratios[i]))])
        fh.write(
            f"# summary: points={report.points_tested} full_rank={report.full_rank_count} "
            f"min_sigma_ratio={report.min_sigma_ratio!r} seed={report.seed}\n"
        )
