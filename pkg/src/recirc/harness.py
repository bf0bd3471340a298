"""Closed-loop simulation runner, Monte Carlo campaigns and file emission.

A scenario couples the true plant (integrated with the true parameters),
the augmented-state filter fed by synthetic noisy measurements, and one of
three controllers (receding-horizon, lookup + hysteresis, or constant
input).  Campaigns repeat scenarios over sampled true parameters with one
PRNG stream per scenario, split so that competing controllers consume
identical measurement noise.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .control import (
    HysteresisConfig,
    MpcConfig,
    MpcResult,
    PolicyTable,
    build_table,
    lookup_step,
    mpc_solve,
)
from .errors import EstimatorFault, ValidationError
from .estimation import (
    Belief,
    MeasurementSchedule,
    NoiseConfig,
    UtConfig,
    default_noise_config,
    init_belief,
    innovation_stats,
    predict,
    update,
)
from .model import (
    DEFAULT_H,
    DEFAULT_PLANT,
    NOMINAL_KINETICS,
    ControlInput,
    KineticParams,
    PlantConstants,
)

RECORD_COLUMNS = [
    "t", "b_true", "s_true", "x_true", "b_hat", "s_hat", "x_hat",
    "mu_max_hat", "Ks_hat", "c_hat", "Y_hat", "D", "delta",
    "stage_profit", "cum_gain",
]


@dataclass(frozen=True)
class ScenarioConfig:
    """One closed-loop experiment; seed is mandatory for reproducibility."""

    seed: int
    theta_true: KineticParams = NOMINAL_KINETICS
    theta_nominal: KineticParams = NOMINAL_KINETICS
    plant: PlantConstants = DEFAULT_PLANT
    xi0: tuple = (0.4, 20.0, 0.0)
    controller: str = "mpc"
    t_f: float = 30.0
    schedule: MeasurementSchedule = MeasurementSchedule()
    noise: NoiseConfig | None = None
    ut: UtConfig = UtConfig()
    mpc: MpcConfig = MpcConfig()
    hysteresis: HysteresisConfig = HysteresisConfig()
    table: PolicyTable | None = None
    constant_input: ControlInput = ControlInput(0.2, 1)
    h: float = DEFAULT_H

    def __post_init__(self):
        if self.controller not in ("mpc", "lookup", "constant"):
            raise ValidationError(f"unknown controller {self.controller!r}")
        steps = self.t_f / self.schedule.Ts
        if self.t_f <= 0 or abs(steps - round(steps)) > 1e-9:
            raise ValidationError(
                f"t_f={self.t_f} must be a positive integer multiple of Ts={self.schedule.Ts}"
            )
        if len(self.xi0) != 3 or any(v < 0 for v in self.xi0):
            raise ValidationError(f"xi0={self.xi0} must be three nonnegative values")
        if self.constant_input.D > self.plant.D_max:
            raise ValidationError("constant input exceeds D_max")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_f / self.schedule.Ts))

    def resolved_noise(self) -> NoiseConfig:
        return self.noise if self.noise is not None else default_noise_config(
            self.theta_nominal, self.plant
        )


@dataclass
class RunRecord:
    """Per-step history of one closed-loop run (length n_steps + 1).

    u holds the applied input per step; the final row repeats the last
    applied input.  cum_gain[k] is the profit accumulated over steps
    0..k-1, so the final entry is the run's cumulative gain.
    """

    t: np.ndarray
    xi_true: np.ndarray
    z_hat: np.ndarray
    u: np.ndarray
    stage_profit: np.ndarray
    cum_gain: np.ndarray
    clamp_events: np.ndarray
    nis: np.ndarray
    nis_dof: np.ndarray
    fault: str = ""
    noise_checksum: str = ""
    seed: int = 0

    @property
    def failed(self) -> bool:
        return self.fault != ""


@dataclass(frozen=True)
class Metrics:
    """Scalar performance summary of one run."""

    final_gain: float
    final_biomass: float
    max_toxin: float
    mean_dilution: float
    activation_fraction: float

    def as_array(self) -> np.ndarray:
        return np.array([
            self.final_gain, self.final_biomass, self.max_toxin,
            self.mean_dilution, self.activation_fraction,
        ])


METRIC_NAMES = ["final_gain", "final_biomass", "max_toxin", "mean_dilution", "activation_fraction"]


class _MpcController:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg.mpc
        self.plant = cfg.plant
        self.prev: MpcResult | None = None

    def __call__(self, belief: Belief) -> ControlInput:
        result = mpc_solve(belief.mean, self.cfg, self.plant, prev=self.prev)
        self.prev = result
        return result.u


class _LookupController:
    def __init__(self, cfg: ScenarioConfig):
        if cfg.table is None:
            raise ValidationError("lookup controller needs a policy table")
        self.table = cfg.table
        self.hys = cfg.hysteresis
        self.delta_prev = 0

    def __call__(self, belief: Belief) -> ControlInput:
        u = lookup_step(belief.mean, self.delta_prev, self.table, self.hys)
        self.delta_prev = u.delta
        return u


class _ConstantController:
    def __init__(self, cfg: ScenarioConfig):
        self.u = cfg.constant_input

    def __call__(self, belief: Belief) -> ControlInput:
        return self.u


def _make_controller(cfg: ScenarioConfig):
    return {
        "mpc": _MpcController,
        "lookup": _LookupController,
        "constant": _ConstantController,
    }[cfg.controller](cfg)


def run_closed_loop(cfg: ScenarioConfig, theta_prior_frac: float = 0.15) -> RunRecord:
    """Simulate one scenario: control from the belief, step the true plant,
    measure with synthetic noise, update the filter.  Deterministic given
    cfg.seed.  theta_prior_frac sets the filter's initial one-sigma
    parameter spread (as a fraction of nominal), normally matching the
    spread the true parameters were drawn from."""
    K = cfg.n_steps
    Ts = cfg.schedule.Ts
    noise = cfg.resolved_noise()
    plant = cfg.plant
    theta_row = cfg.theta_true.as_array().reshape(1, 4)
    n_sub = int(round(Ts / cfg.h))
    if abs(n_sub * cfg.h - Ts) > 1e-9:
        raise ValidationError(f"Ts={Ts} must be an integer multiple of h={cfg.h}")

    noise_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    checksum = hashlib.sha256()

    t = np.arange(K + 1) * Ts
    xi = np.full((K + 1, 3), np.nan)
    z_hat = np.full((K + 1, 7), np.nan)
    u_hist = np.full((K + 1, 2), np.nan)
    profit = np.full(K + 1, np.nan)
    cum = np.full(K + 1, np.nan)
    clamps = np.zeros(K + 1, np.int64)
    nis = np.full(K, np.nan)
    nis_dof = np.zeros(K, np.int64)

    xi[0] = cfg.xi0
    belief = init_belief(cfg.xi0, cfg.theta_nominal, theta_rel_sigma=theta_prior_frac)
    z_hat[0] = belief.mean
    cum[0] = 0.0
    controller = _make_controller(cfg)
    fault = ""
    last_u = None

    for k in range(K):
        u = controller(belief)
        last_u = u
        u_hist[k] = (u.D, float(u.delta))
        profit[k] = u.D * xi[k, 0] - plant.lam * u.delta * plant.D_f
        cum[k + 1] = cum[k] + profit[k] * Ts

        states = xi[k].reshape(1, 3).copy()
        _, n_clamp, fa = kernels.step_lanes(
            states, theta_row, np.array([u.D]), np.array([float(u.delta)]),
            *kernels.plant_args(plant), cfg.h, n_sub,
        )
        if fa[0]:
            fault = f"plant integration fault at step {k}"
            break
        xi[k + 1] = states[0]
        clamps[k + 1] = n_clamp[0]

        draw = noise_rng.standard_normal(3)
        checksum.update(draw.tobytes())
        y_full = xi[k + 1] + noise.meas_sigma * draw
        which = "full" if cfg.schedule.is_full(k + 1) else "partial"
        y = y_full if which == "full" else y_full[:2]
        try:
            pred = predict(belief, u, noise, cfg.ut, plant, Ts, cfg.h)
            innov, S = innovation_stats(pred, y, which, noise)
            nis[k] = float(innov @ np.linalg.solve(S, innov))
            nis_dof[k] = innov.shape[0]
            belief = update(pred, y, which, noise, cfg.ut)
        except EstimatorFault as exc:
            fault = f"estimator fault at step {k}: {exc}"
            break
        z_hat[k + 1] = belief.mean

    if not fault and last_u is not None:
        u_hist[K] = u_hist[K - 1]
        profit[K] = last_u.D * xi[K, 0] - plant.lam * last_u.delta * plant.D_f

    return RunRecord(
        t=t, xi_true=xi, z_hat=z_hat, u=u_hist, stage_profit=profit, cum_gain=cum,
        clamp_events=clamps, nis=nis, nis_dof=nis_dof, fault=fault,
        noise_checksum=checksum.hexdigest(), seed=cfg.seed,
    )


def metrics(record: RunRecord) -> Metrics:
    """Scalar summary of a completed run."""
    if record.failed:
        raise ValidationError(f"metrics of a failed run ({record.fault})")
    applied = record.u[:-1]
    return Metrics(
        final_gain=float(record.cum_gain[-1]),
        final_biomass=float(record.xi_true[-1, 0]),
        max_toxin=float(record.xi_true[:, 2].max()),
        mean_dilution=float(applied[:, 0].mean()),
        activation_fraction=float(applied[:, 1].mean()),
    )


def settle_index(series: np.ndarray, Ts: float, window_h: float = 2.0,
                 rel_tol: float = 1e-3, floor: float = 1e-6) -> int:
    """First index where every column's spread over the trailing window is
    below rel_tol relative to its current magnitude; -1 if never."""
    series = np.atleast_2d(np.asarray(series, float).T).T
    w = max(int(math.ceil(window_h / Ts)), 1)
    for k in range(w, series.shape[0]):
        win = series[k - w : k + 1]
        spread = win.max(axis=0) - win.min(axis=0)
        scale = np.maximum(np.abs(series[k]), floor)
        if np.all(spread <= rel_tol * scale):
            return k
    return -1


@dataclass
class UkfCampaignResult:
    """Estimation accuracy over repeated runs at constant input."""

    n_runs: int
    perturb_frac: float
    seed: int
    theta_true: np.ndarray
    state_rmse: np.ndarray
    param_rmse: np.ndarray
    plant_settle_h: np.ndarray
    observer_settle_h: np.ndarray
    nis_within_band: float
    failures: list = field(default_factory=list)

    @property
    def state_rmse_max(self) -> np.ndarray:
        return self.state_rmse.max(axis=1)

    @property
    def param_rmse_max(self) -> np.ndarray:
        return self.param_rmse.max(axis=1)


def _derive_seed(*entropy) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


#: 95% central chi-square bands for 2 and 3 degrees of freedom
_CHI2_BAND = {2: (0.0506356, 7.377759), 3: (0.2157953, 9.348404)}


def run_mc_ukf(
    n_runs: int = 40,
    perturb_frac: float = 0.15,
    seed: int = 0,
    t_f: float = 60.0,
    base: ScenarioConfig | None = None,
) -> UkfCampaignResult:
    """Estimation campaign: constant D=0.2 with the filter unit on, true
    parameters drawn uniformly within +-perturb_frac of nominal, RMSE taken
    after both the plant and the parameter estimates settle."""
    if n_runs < 1:
        raise ValidationError("n_runs must be >= 1")
    base = base or ScenarioConfig(seed=seed, controller="constant", t_f=t_f)
    theta_rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    nom = base.theta_nominal.as_array()
    state_rmse = np.full((n_runs, 3), np.nan)
    param_rmse = np.full((n_runs, 4), np.nan)
    settle_p = np.full(n_runs, np.nan)
    settle_o = np.full(n_runs, np.nan)
    thetas = np.empty((n_runs, 4))
    failures = []
    nis_in = 0
    nis_total = 0
    for i in range(n_runs):
        thetas[i] = nom * theta_rng.uniform(1 - perturb_frac, 1 + perturb_frac, 4)
        cfg = replace(
            base,
            controller="constant",
            constant_input=ControlInput(0.2, 1),
            theta_true=KineticParams.from_array(thetas[i]),
            t_f=t_f,
            seed=_derive_seed(seed, 2, i),
        )
        rec = run_closed_loop(cfg, theta_prior_frac=perturb_frac)
        if rec.failed:
            failures.append((i, rec.fault))
            continue
        Ts = cfg.schedule.Ts
        kp = settle_index(rec.xi_true, Ts)
        ko = settle_index(rec.z_hat[:, 3:], Ts)
        settle_p[i] = kp * Ts if kp >= 0 else np.nan
        settle_o[i] = ko * Ts if ko >= 0 else np.nan
        if kp < 0 or ko < 0:
            failures.append((i, "no steady state detected"))
            continue
        start = max(kp, ko)
        for q in range(3):
            d = rec.xi_true[start:, q] - rec.z_hat[start:, q]
            state_rmse[i, q] = math.sqrt(float(np.mean(d * d)))
        for q in range(4):
            d = thetas[i, q] - rec.z_hat[start:, 3 + q]
            param_rmse[i, q] = math.sqrt(float(np.mean(d * d)))
        for k in range(rec.nis.shape[0]):
            lo, hi = _CHI2_BAND[int(rec.nis_dof[k])]
            nis_total += 1
            if lo <= rec.nis[k] <= hi:
                nis_in += 1
    return UkfCampaignResult(
        n_runs=n_runs,
        perturb_frac=perturb_frac,
        seed=seed,
        theta_true=thetas,
        state_rmse=state_rmse,
        param_rmse=param_rmse,
        plant_settle_h=settle_p,
        observer_settle_h=settle_o,
        nis_within_band=(nis_in / nis_total) if nis_total else math.nan,
        failures=failures,
    )


@dataclass
class CampaignSummary:
    """Mean/std of run metrics over a robustness campaign (one controller)."""

    controller: str
    n_scenarios: int
    per_scenario: np.ndarray  # (n, 5) in METRIC_NAMES order
    mean: np.ndarray
    std: np.ndarray

    @staticmethod
    def from_rows(controller: str, rows: np.ndarray) -> "CampaignSummary":
        return CampaignSummary(
            controller=controller,
            n_scenarios=rows.shape[0],
            per_scenario=rows,
            mean=rows.mean(axis=0),
            std=rows.std(axis=0, ddof=1) if rows.shape[0] > 1 else np.zeros(rows.shape[1]),
        )


@dataclass
class RobustnessResult:
    """Paired comparison of the two feedback strategies."""

    mpc: CampaignSummary
    lookup: CampaignSummary
    theta_true: np.ndarray
    seeds: list
    paired_ok: bool
    failures: list = field(default_factory=list)


def run_mc_robustness(
    n_scenarios: int = 20,
    perturb_frac: float = 0.15,
    t_f: float = 30.0,
    seed: int = 0,
    base: ScenarioConfig | None = None,
    table: PolicyTable | None = None,
    table_size: int = 1000,
) -> RobustnessResult:
    """Paired campaign: both controllers face the same true parameters and
    the same measurement-noise realization in every scenario."""
    if n_scenarios < 1:
        raise ValidationError("n_scenarios must be >= 1")
    base = base or ScenarioConfig(seed=seed, t_f=t_f)
    if table is None:
        table = build_table(table_size, seed=_derive_seed(seed, 3), k=base.plant,
                            theta_nom=base.theta_nominal, frac=perturb_frac,
                            x_fixed=base.hysteresis.x_on)
    theta_rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    nom = base.theta_nominal.as_array()
    rows = {"mpc": [], "lookup": []}
    thetas = []
    seeds = []
    failures = []
    paired_ok = True
    for i in range(n_scenarios):
        th = nom * theta_rng.uniform(1 - perturb_frac, 1 + perturb_frac, 4)
        run_seed = _derive_seed(seed, 2, i)
        recs = {}
        for name in ("mpc", "lookup"):
            cfg = replace(
                base, controller=name, theta_true=KineticParams.from_array(th),
                t_f=t_f, seed=run_seed, table=table,
            )
            recs[name] = run_closed_loop(cfg)
        if any(r.failed for r in recs.values()):
            failures.append((i, {n: r.fault for n, r in recs.items() if r.failed}))
            continue
        if recs["mpc"].noise_checksum != recs["lookup"].noise_checksum:
            paired_ok = False
        thetas.append(th)
        seeds.append(run_seed)
        for name in ("mpc", "lookup"):
            rows[name].append(metrics(recs[name]).as_array())
    if not rows["mpc"]:
        raise ValidationError("all robustness scenarios failed")
    return RobustnessResult(
        mpc=CampaignSummary.from_rows("mpc", np.array(rows["mpc"])),
        lookup=CampaignSummary.from_rows("lookup", np.array(rows["lookup"])),
        theta_true=np.array(thetas),
        seeds=seeds,
        paired_ok=paired_ok,
        failures=failures,
    )


# ---------------------------------------------------------------- emission


def _fmt(v) -> str:
    return repr(float(v))


def record_to_csv(record: RunRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for k in range(record.t.shape[0]):
            row = [
                record.t[k], *record.xi_true[k], *record.z_hat[k],
                record.u[k, 0], record.u[k, 1],
                record.stage_profit[k], record.cum_gain[k],
            ]
            writer.writerow([_fmt(v) for v in row])


def read_record(path) -> RunRecord:
    """Rebuild the CSV-representable part of a run record."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != RECORD_COLUMNS:
            raise ValidationError(f"unexpected record header in {path}")
        rows = np.array([[float(v) for v in row] for row in reader])
    K = rows.shape[0] - 1
    return RunRecord(
        t=rows[:, 0], xi_true=rows[:, 1:4], z_hat=rows[:, 4:11], u=rows[:, 11:13],
        stage_profit=rows[:, 13], cum_gain=rows[:, 14],
        clamp_events=np.zeros(K + 1, np.int64), nis=np.full(K, np.nan),
        nis_dof=np.zeros(K, np.int64),
    )


def campaign_to_csv(result: RobustnessResult, path_scenarios, path_summary) -> None:
    with open(path_scenarios, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "controller", *METRIC_NAMES,
                         "mu_max_true", "Ks_true", "c_true", "Y_true", "seed"])
        for i in range(result.theta_true.shape[0]):
            for name, summ in (("mpc", result.mpc), ("lookup", result.lookup)):
                writer.writerow([
                    i, name, *[_fmt(v) for v in summ.per_scenario[i]],
                    *[_fmt(v) for v in result.theta_true[i]], result.seeds[i],
                ])
    with open(path_summary, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "mpc_mean", "mpc_std", "lookup_mean", "lookup_std"])
        for j, name in enumerate(METRIC_NAMES):
            writer.writerow([
                name, _fmt(result.mpc.mean[j]), _fmt(result.mpc.std[j]),
                _fmt(result.lookup.mean[j]), _fmt(result.lookup.std[j]),
            ])


def ukf_campaign_to_csv(result: UkfCampaignResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "run", "mu_max_true", "Ks_true", "c_true", "Y_true",
            "rmse_b", "rmse_s", "rmse_x",
            "rmse_mu_max", "rmse_Ks", "rmse_c", "rmse_Y",
            "plant_settle_h", "observer_settle_h",
        ])
        for i in range(result.n_runs):
            writer.writerow([
                i, *[_fmt(v) for v in result.theta_true[i]],
                *[_fmt(v) for v in result.state_rmse[i]],
                *[_fmt(v) for v in result.param_rmse[i]],
                _fmt(result.plant_settle_h[i]), _fmt(result.observer_settle_h[i]),
            ])
        fh.write(f"# nis_within_band={result.nis_within_band!r} failures={len(result.failures)}\n")


def _polyline(xs, ys, x0, y0, w, h, xmin, xmax, ymin, ymax, color) -> str:
    span_x = (xmax - xmin) or 1.0
    span_y = (ymax - ymin) or 1.0
    pts = []
    for x, y in zip(xs, ys):
        if not (math.isfinite(x) and math.isfinite(y)):
            continue
        px = x0 + (x - xmin) / span_x * w
        py = y0 + h - (y - ymin) / span_y * h
        pts.append(f"{px:.2f},{py:.2f}")
    return (f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
            f'points="{" ".join(pts)}"/>')


def _panel(title, t, series, x0, y0, w, h) -> list[str]:
    parts = [
        f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#999"/>',
        f'<text x="{x0 + 4}" y="{y0 + 14}" font-size="12" font-family="sans-serif">{title}</text>',
    ]
    finite = [y[np.isfinite(y)] for _, y, _ in series if np.isfinite(y).any()]
    ymin = min((v.min() for v in finite), default=0.0)
    ymax = max((v.max() for v in finite), default=1.0)
    for _, ys, color in series:
        parts.append(_polyline(t, ys, x0, y0, w, h, t[0], t[-1], ymin, ymax, color))
    labels = ", ".join(name for name, _, _ in series)
    parts.append(
        f'<text x="{x0 + 4}" y="{y0 + h - 6}" font-size="10" fill="#555" '
        f'font-family="sans-serif">{labels} | y: [{ymin:.4g}, {ymax:.4g}]</text>'
    )
    return parts


def record_svg(record: RunRecord) -> str:
    """Stacked line plots: each state with its estimate, the inputs, and
    the cumulative gain (one polyline per series)."""
    t = record.t
    width, ph, gap, margin = 720, 120, 14, 10
    panels = [
        ("biomass [g/L]", [("b_true", record.xi_true[:, 0], "#1f77b4"),
                           ("b_hat", record.z_hat[:, 0], "#ff7f0e")]),
        ("substrate [g/L]", [("s_true", record.xi_true[:, 1], "#1f77b4"),
                             ("s_hat", record.z_hat[:, 1], "#ff7f0e")]),
        ("DNA [ng/uL]", [("x_true", record.xi_true[:, 2], "#1f77b4"),
                         ("x_hat", record.z_hat[:, 2], "#ff7f0e")]),
        ("inputs", [("D", record.u[:, 0], "#2ca02c"),
                    ("delta", record.u[:, 1], "#d62728")]),
        ("cumulative gain", [("cum_gain", record.cum_gain, "#9467bd")]),
    ]
    height = margin * 2 + len(panels) * ph + (len(panels) - 1) * gap
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    y = margin
    for title, series in panels:
        parts.extend(_panel(title, t, series, margin, y, width - 2 * margin, ph))
        y += ph + gap
    parts.append("</svg>")
    return "\n".join(parts)


def robustness_svg(result: RobustnessResult) -> str:
    """Per-scenario final gains of the two strategies."""
    n = result.mpc.per_scenario.shape[0]
    idx = np.arange(n, dtype=float)
    width, ph, margin = 720, 220, 10
    height = 2 * margin + ph
    series = [
        ("mpc_gain", result.mpc.per_scenario[:, 0], "#1f77b4"),
        ("lookup_gain", result.lookup.per_scenario[:, 0], "#ff7f0e"),
    ]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    parts.extend(_panel("final cumulative gain by scenario", idx, series,
                        margin, margin, width - 2 * margin, ph))
    parts.append("</svg>")
    return "\n".join(parts)


def emit(obj, fmt: str, path) -> None:
    """Write a run record or campaign result as CSV or SVG.

    Campaign CSVs take `path` as a prefix: `<path>_scenarios.csv` and
    `<path>_summary.csv` for robustness results.
    """
    if fmt not in ("csv", "svg"):
        raise ValidationError(f"unknown format {fmt!r}")
    if isinstance(obj, RunRecord):
        if obj.t.shape[0] < 2:
            raise ValidationError("record too short to emit")
        if fmt == "csv":
            record_to_csv(obj, path)
        else:
            with open(path, "w") as fh:
                fh.write(record_svg(obj))
    elif isinstance(obj, RobustnessResult):
        if fmt == "csv":
            base = str(path)
            campaign_to_csv(obj, base + "_scenarios.csv", base + "_summary.csv")
        else:
            with open(path, "w") as fh:
                fh.write(robustness_svg(obj))
    elif isinstance(obj, UkfCampaignResult):
        if fmt != "csv":
            raise ValidationError("estimation campaigns emit CSV only")
        ukf_campaign_to_csv(obj, path)
    else:
        raise ValidationError(f"cannot emit object of type {type(obj).__name__}")
