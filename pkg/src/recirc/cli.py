"""Command-line front end.

Subcommands: simulate, mc-ukf, mc-robustness, build-table, observability,
fit.  Each takes --config (an INI-style key = value file, sections
documented below), --seed (overrides the config seed) and --out (output
directory).  Exit codes: 0 success, 2 invalid configuration or input,
3 run fault.

Config sections (all optional; values shown are the defaults):

    [scenario]            controller = mpc | lookup | constant
                          t_f = 30.0, seed = <required>, h = 0.01
                          b0 = 0.4, s0 = 20.0, x0 = 0.0
    [plant]               alpha = 0.72, d_max = 0.6, x_crit = 0.48,
                          d_f = 0.4, s_in = 20.0, s_h = 200.0, lam = 2.4
    [kinetics_true]       mu_max = 0.466, ks = 0.02285, c = 0.01404, y = 0.2779
    [kinetics_nominal]    same keys as kinetics_true
    [schedule]            ts = 0.75, dna_period = 6.0
    [noise]               rel_b = 0.005, rel_s = 0.02, rel_x = 0.05
                          q_xi = 1e-6, 1e-6, 1e-8
                          q_theta = 1e-8, 1e-10, 1e-10, 1e-8
    [ut]                  alpha = 0.1, beta = 2.0, kappa = 0.0
    [mpc]                 n = 10, d_blocks = 3, max_switches = 2,
                          d_grid_refinements = 3, pattern_keep = 16,
                          golden_iters = 12
    [hysteresis]          x_on = 0.192, x_off = 0.144
    [lookup]              table_size = 1000, table_seed = 1234,
                          table_path = <load instead of building>
    [constant]            d = 0.2, delta = 1
    [campaign]            n_runs = 40, n_scenarios = 20,
                          perturb_frac = 0.15, t_f = <scenario t_f>
    [observability]       n_points = 10000, tol_ratio = 1e-13
    [fit]                 data = <csv>, d_profile = <csv>; when omitted a
                          synthetic dataset is generated with
                          noise_b/s/x = 0.02/0.02/0.05 and written to out;
                          init_frac = 0.1, bound_lo_frac = 0.5,
                          bound_hi_frac = 2.0
"""
from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np

from dataclasses import replace

from . import control, harness, identification, observability
from .errors import RecircError, ValidationError
from .estimation import MeasurementSchedule, UtConfig, default_noise_config
from .model import (
    DEFAULT_H,
    NOMINAL_KINETICS,
    ControlInput,
    KineticParams,
    PlantConstants,
)


def _load_config(path):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is not None:
        if not Path(path).exists():
            raise ValidationError(f"config file not found: {path}")
        cp.read(path)
    return cp


def _get(cp, section, key, cast, default):
    if cp.has_option(section, key):
        raw = cp.get(section, key)
        try:
            return cast(raw)
        except ValueError as exc:
            raise ValidationError(f"[{section}] {key} = {raw!r}: {exc}") from exc
    return default


def _floats(raw):
    return tuple(float(v) for v in raw.replace(",", " ").split())


def _kinetics(cp, section, fallback: KineticParams) -> KineticParams:
    return KineticParams(
        mu_max=_get(cp, section, "mu_max", float, fallback.mu_max),
        Ks=_get(cp, section, "ks", float, fallback.Ks),
        c=_get(cp, section, "c", float, fallback.c),
        Y=_get(cp, section, "y", float, fallback.Y),
    )


def _plant(cp) -> PlantConstants:
    d = PlantConstants()
    return PlantConstants(
        alpha=_get(cp, "plant", "alpha", float, d.alpha),
        D_max=_get(cp, "plant", "d_max", float, d.D_max),
        x_crit=_get(cp, "plant", "x_crit", float, d.x_crit),
        D_f=_get(cp, "plant", "d_f", float, d.D_f),
        s_in=_get(cp, "plant", "s_in", float, d.s_in),
        s_H=_get(cp, "plant", "s_h", float, d.s_H),
        lam=_get(cp, "plant", "lam", float, d.lam),
    )


def _seed(cp, args) -> int:
    if args.seed is not None:
        return args.seed
    if cp.has_option("scenario", "seed"):
        return cp.getint("scenario", "seed")
    raise ValidationError("a seed is required (remember --seed or [scenario] seed)")


def _scenario(cp, args, controller=None) -> harness.ScenarioConfig:
    plant = _plant(cp)
    theta_nom = _kinetics(cp, "kinetics_nominal", NOMINAL_KINETICS)
    theta_true = _kinetics(cp, "kinetics_true", theta_nom)
    sched = MeasurementSchedule(
        Ts=_get(cp, "schedule", "ts", float, 0.75),
        dna_period=_get(cp, "schedule", "dna_period", float, 6.0),
    )
    noise = default_noise_config(
        theta_nom, plant,
        rel_sigma=(
            _get(cp, "noise", "rel_b", float, 0.005),
            _get(cp, "noise", "rel_s", float, 0.02),
            _get(cp, "noise", "rel_x", float, 0.05),
        ),
        q_xi_diag=_get(cp, "noise", "q_xi", _floats, (1e-6, 1e-6, 1e-8)),
        q_theta_diag=_get(cp, "noise", "q_theta", _floats, (1e-8, 1e-10, 1e-10, 1e-8)),
    )
    ut = UtConfig(
        alpha_ut=_get(cp, "ut", "alpha", float, 0.1),
        beta_ut=_get(cp, "ut", "beta", float, 2.0),
        kappa_ut=_get(cp, "ut", "kappa", float, 0.0),
    )
    mpc = control.MpcConfig(
        N=_get(cp, "mpc", "n", int, 10),
        Ts=sched.Ts,
        d_blocks=_get(cp, "mpc", "d_blocks", int, 3),
        max_switches=_get(cp, "mpc", "max_switches", int, 2),
        d_grid_refinements=_get(cp, "mpc", "d_grid_refinements", int, 3),
        h=_get(cp, "scenario", "h", float, DEFAULT_H),
        pattern_keep=_get(cp, "mpc", "pattern_keep", int, 16),
        golden_iters=_get(cp, "mpc", "golden_iters", int, 12),
    )
    hys = control.HysteresisConfig(
        x_on=_get(cp, "hysteresis", "x_on", float, 0.4 * plant.x_crit),
        x_off=_get(cp, "hysteresis", "x_off", float, 0.3 * plant.x_crit),
    )
    ctrl = controller or _get(cp, "scenario", "controller", str, "mpc")
    table = None
    if ctrl == "lookup":
        table_path = _get(cp, "lookup", "table_path", str, None)
        if table_path:
            table = control.PolicyTable.load_csv(table_path, theta_nom.as_array())
        else:
            table = control.build_table(
                _get(cp, "lookup", "table_size", int, 1000),
                seed=_get(cp, "lookup", "table_seed", int, 1234),
                k=plant, theta_nom=theta_nom,
                frac=_get(cp, "campaign", "perturb_frac", float, 0.15),
                x_fixed=hys.x_on,
            )
    return harness.ScenarioConfig(
        seed=_seed(cp, args),
        theta_true=theta_true,
        theta_nominal=theta_nom,
        plant=plant,
        xi0=(
            _get(cp, "scenario", "b0", float, 0.4),
            _get(cp, "scenario", "s0", float, 20.0),
            _get(cp, "scenario", "x0", float, 0.0),
        ),
        controller=ctrl,
        t_f=_get(cp, "scenario", "t_f", float, 30.0),
        schedule=sched,
        noise=noise,
        ut=ut,
        mpc=mpc,
        hysteresis=hys,
        table=table,
        constant_input=ControlInput(
            _get(cp, "constant", "d", float, 0.2),
            _get(cp, "constant", "delta", int, 1),
        ),
        h=_get(cp, "scenario", "h", float, DEFAULT_H),
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(cp, args) -> int:
    cfg = _scenario(cp, args)
    rec = harness.run_closed_loop(cfg)
    out = _out_dir(args)
    harness.emit(rec, "csv", out / "run.csv")
    harness.emit(rec, "svg", out / "run.svg")
    if rec.failed:
        print(f"run failed: {rec.fault}", file=sys.stderr)
        return 3
    m = harness.metrics(rec)
    print(f"controller={cfg.controller} seed={cfg.seed} t_f={cfg.t_f}")
    for name, v in zip(harness.METRIC_NAMES, m.as_array()):
        print(f"  {name} = {v:.6g}")
    print(f"wrote {out / 'run.csv'} and {out / 'run.svg'}")
    return 0


def cmd_mc_ukf(cp, args) -> int:
    base = _scenario(cp, args, controller="constant")
    t_f = _get(cp, "campaign", "t_f", float, 60.0)
    res = harness.run_mc_ukf(
        n_runs=_get(cp, "campaign", "n_runs", int, 40),
        perturb_frac=_get(cp, "campaign", "perturb_frac", float, 0.15),
        seed=_seed(cp, args),
        t_f=t_f,
        base=replace(base, t_f=t_f),
    )
    out = _out_dir(args)
    harness.emit(res, "csv", out / "ukf_campaign.csv")
    pm, sm = res.param_rmse_max, res.state_rmse_max
    print(f"runs={res.n_runs} failures={len(res.failures)}")
    print(f"parameter RMSE: median {np.nanmedian(pm):.3g}, fraction < 1e-2: {np.mean(pm < 1e-2):.3f}")
    print(f"state RMSE:     median {np.nanmedian(sm):.3g}, fraction < 1e-2: {np.mean(sm < 1e-2):.3f}")
    print(f"innovation consistency (fraction in 95% band): {res.nis_within_band:.3f}")
    print(f"wrote {out / 'ukf_campaign.csv'}")
    return 0


def cmd_mc_robustness(cp, args) -> int:
    base = _scenario(cp, args, controller="mpc")
    res = harness.run_mc_robustness(
        n_scenarios=_get(cp, "campaign", "n_scenarios", int, 20),
        perturb_frac=_get(cp, "campaign", "perturb_frac", float, 0.15),
        t_f=_get(cp, "campaign", "t_f", float, base.t_f),
        seed=_seed(cp, args),
        base=base,
        table_size=_get(cp, "lookup", "table_size", int, 1000),
    )
    out = _out_dir(args)
    harness.emit(res, "csv", out / "robustness")
    harness.emit(res, "svg", out / "robustness.svg")
    print(f"scenarios={res.mpc.n_scenarios} failures={len(res.failures)} paired={res.paired_ok}")
    hdr = f"{'metric':>20s} {'mpc':>16s} {'lookup':>16s}"
    print(hdr)
    for j, name in enumerate(harness.METRIC_NAMES):
        print(f"{name:>20s} {res.mpc.mean[j]:8.3f}+-{res.mpc.std[j]:6.3f} "
              f"{res.lookup.mean[j]:8.3f}+-{res.lookup.std[j]:6.3f}")
    wins = int(np.sum(res.mpc.per_scenario[:, 0] > res.lookup.per_scenario[:, 0]))
    gm, gl = res.mpc.mean[0], res.lookup.mean[0]
    print(f"gain advantage: {wins}/{res.mpc.n_scenarios} scenarios;"
          f" relative to mpc {100 * (gm - gl) / gm:.1f}%, relative to lookup {100 * (gm - gl) / gl:.1f}%")
    print(f"wrote {out / 'robustness_scenarios.csv'}, {out / 'robustness_summary.csv'}, {out / 'robustness.svg'}")
    return 0


def cmd_build_table(cp, args) -> int:
    plant = _plant(cp)
    theta_nom = _kinetics(cp, "kinetics_nominal", NOMINAL_KINETICS)
    hys_on = _get(cp, "hysteresis", "x_on", float, 0.4 * plant.x_crit)
    table = control.build_table(
        _get(cp, "lookup", "table_size", int, 1000),
        seed=_seed(cp, args),
        k=plant,
        theta_nom=theta_nom,
        frac=_get(cp, "campaign", "perturb_frac", float, 0.15),
        x_fixed=hys_on,
    )
    out = _out_dir(args)
    path = out / "policy_table.csv"
    table.save_csv(path)
    print(f"wrote {path} ({len(table)} entries, D* in [{table.d_star.min():.4f}, {table.d_star.max():.4f}])")
    return 0


def cmd_observability(cp, args) -> int:
    plant = _plant(cp)
    rep = observability.rank_campaign(
        _get(cp, "observability", "n_points", int, 10000),
        seed=_seed(cp, args),
        k=plant,
        tol_ratio=_get(cp, "observability", "tol_ratio", float, observability.DEFAULT_TOL_RATIO),
    )
    out = _out_dir(args)
    path = out / "rank_report.csv"
    observability.write_report_csv(rep, path)
    print(f"points={rep.points_tested} full_rank={rep.full_rank_count} "
          f"min_sigma_ratio={rep.min_sigma_ratio:.3g} deficient={len(rep.deficient_points)}")
    print(f"wrote {path}")
    return 0


def cmd_fit(cp, args) -> int:
    plant = _plant(cp)
    theta_nom = _kinetics(cp, "kinetics_nominal", NOMINAL_KINETICS)
    out = _out_dir(args)
    data_path = _get(cp, "fit", "data", str, None)
    prof_path = _get(cp, "fit", "d_profile", str, None)
    rng = np.random.default_rng(_seed(cp, args))
    if data_path is None:
        profile = identification.DEFAULT_PROFILE
        data = identification.generate_dataset(
            theta_nom, profile,
            noise_fracs=(
                _get(cp, "fit", "noise_b", float, 0.02),
                _get(cp, "fit", "noise_s", float, 0.02),
                _get(cp, "fit", "noise_x", float, 0.05),
            ),
            seed=_seed(cp, args), k=plant,
        )
        data.save_csv(out / "synthetic_data.csv")
        profile.save_csv(out / "synthetic_profile.csv")
        print(f"no [fit] data given: wrote synthetic set to {out}")
    else:
        data = identification.Dataset.load_csv(data_path)
        if prof_path is None:
            raise ValidationError("[fit] d_profile is required when data is given")
        profile = identification.DProfile.load_csv(prof_path)
    init_frac = _get(cp, "fit", "init_frac", float, 0.1)
    init = KineticParams.from_array(theta_nom.as_array() * rng.uniform(1 - init_frac, 1 + init_frac, 4))
    nom = theta_nom.as_array()
    bounds = (nom * _get(cp, "fit", "bound_lo_frac", float, 0.5),
              nom * _get(cp, "fit", "bound_hi_frac", float, 2.0))
    res = identification.fit(data, profile, init, bounds=bounds, k=plant)
    with open(out / "fit_result.csv", "w", newline="") as fh:
        fh.write("parameter,estimate,ci_halfwidth_pct\n")
        for name, v, ci in zip(("mu_max", "Ks", "c", "Y"), res.theta_hat.as_array(), res.ci_halfwidth_pct):
            fh.write(f"{name},{v!r},{ci!r}\n")
        fh.write(f"# residual_norm={res.residual_norm!r} converged={res.converged} "
                 f"at_bounds={res.at_bounds} iterations={res.iterations}\n")
    print(f"theta_hat = {res.theta_hat}")
    print(f"ci +-% = {np.round(res.ci_halfwidth_pct, 3)}")
    print(f"converged={res.converged} at_bounds={res.at_bounds} iterations={res.iterations}")
    print(f"wrote {out / 'fit_result.csv'}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "mc-ukf": cmd_mc_ukf,
    "mc-robustness": cmd_mc_robustness,
    "build-table": cmd_build_table,
    "observability": cmd_observability,
    "fit": cmd_fit,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="recirc",
        description="Recirculating chemostat simulation, estimation and control toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
    args = parser.parse_args(argv)
    try:
        cp = _load_config(args.config)
        return COMMANDS[args.command](cp, args)
    except ValidationError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 2
    except RecircError as exc:
        print(f"run fault: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
