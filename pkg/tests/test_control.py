import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recirc.control import (
    HysteresisConfig,
    MpcConfig,
    PolicyTable,
    build_table,
    block_sizes,
    delta_patterns,
    hysteresis_delta,
    lookup_select,
    lookup_step,
    mpc_solve,
    optimal_steady_dilution,
    predict_horizon_gain,
)
from recirc.errors import ValidationError
from recirc.model import NOMINAL_KINETICS, KineticParams


def belief_vec(b, s, x, theta):
    return np.array([b, s, x, *theta.as_array()])


class TestPatterns:
    def test_counts(self):
        # 2 * sum_k C(N-1, k) sequences with <= max_switches changes
        assert delta_patterns(10, 0).shape == (2, 10)
        assert delta_patterns(10, 1).shape == (20, 10)
        assert delta_patterns(10, 2).shape == (92, 10)
        assert delta_patterns(2, 1).shape == (4, 2)

    def test_switch_budget_respected(self):
        pats = delta_patterns(10, 2)
        switches = np.abs(np.diff(pats, axis=1)).sum(axis=1)
        assert switches.max() <= 2

    def test_block_sizes(self):
        assert block_sizes(10, 3) == [4, 3, 3]
        assert block_sizes(2, 2) == [1, 1]
        assert block_sizes(7, 1) == [7]


class TestMpcSolve:
    def test_single_step_analytic_optimum(self, theta, plant):
        # one-step profit depends only on the current state: D = D_max, no
        # filtration
        cfg = MpcConfig(N=1, d_blocks=1, max_switches=0)
        res = mpc_solve(belief_vec(3.0, 5.0, 0.1, theta), cfg, plant)
        assert res.u.D == plant.D_max
        assert res.u.delta == 0
        assert res.predicted_gain == pytest.approx(plant.D_max * 3.0 * cfg.Ts, rel=1e-12)

    def test_free_filtration_runs_always_on(self, theta):
        from recirc.model import PlantConstants

        free = PlantConstants(lam=0.0)
        cfg = MpcConfig(N=4, d_blocks=2, max_switches=2)
        z = belief_vec(4.0, 3.0, 0.2, theta)
        res = mpc_solve(z, cfg, free)
        g_off, feas = predict_horizon_gain(z[:3], theta, res.D_sequence, np.zeros(4), cfg, free)
        assert feas
        # the last step's filter flag never affects the horizon objective,
        # so the tie-break may leave it off; all earlier steps must filter
        assert np.all(res.delta_sequence[:-1] == 1.0)
        assert res.predicted_gain >= g_off - 1e-12

    def test_matches_exhaustive_enumeration_on_grid(self, theta, plant, rng):
        # N=2 with a 7-point dilution grid: solver equals brute force
        grid = tuple(np.linspace(0.0, 0.6, 7))
        cfg = MpcConfig(N=2, d_blocks=2, max_switches=1, d_grid=grid)
        pats = delta_patterns(2, 1)
        for _ in range(50):
            z = np.array([
                rng.uniform(0.2, 6.0), rng.uniform(0.05, 18.0), rng.uniform(0.0, 0.4),
                *(NOMINAL_KINETICS.as_array() * rng.uniform(0.85, 1.15, 4)),
            ])
            res = mpc_solve(z, cfg, plant)
            best = -np.inf
            for pat in pats:
                for d0 in grid:
                    for d1 in grid:
                        g, ok = predict_horizon_gain(
                            np.maximum(z[:3], 0.0), z[3:], [d0, d1], pat, cfg, plant
                        )
                        if ok:
                            best = max(best, g)
            assert res.predicted_gain == pytest.approx(best, abs=1e-9)

    def test_dominates_evaluated_candidates(self, theta, plant, rng):
        cfg = MpcConfig()
        z = belief_vec(2.0, 10.0, 0.1, theta)
        res = mpc_solve(z, cfg, plant)
        # re-evaluating the returned plan reproduces the reported gain
        g, ok = predict_horizon_gain(z[:3], theta, res.D_sequence, res.delta_sequence, cfg, plant)
        assert ok
        assert g == pytest.approx(res.predicted_gain, rel=1e-12)

    def test_beats_constant_baseline(self, theta, plant, rng):
        # predicted gain of the solution >= the held [D=0.2, delta] baseline
        cfg = MpcConfig()
        for _ in range(100):
            z = np.array([
                rng.uniform(0.1, 6.5), rng.uniform(0.05, 19.0), rng.uniform(0.0, 0.45),
                *(NOMINAL_KINETICS.as_array() * rng.uniform(0.85, 1.15, 4)),
            ])
            res = mpc_solve(z, cfg, plant)
            for delta_prev in (0, 1):
                g, ok = predict_horizon_gain(
                    z[:3], z[3:], np.full(cfg.N, 0.2), np.full(cfg.N, float(delta_prev)),
                    cfg, plant,
                )
                if ok:
                    assert res.predicted_gain >= g - 1e-9

    def test_deterministic(self, theta, plant):
        cfg = MpcConfig()
        z = belief_vec(1.5, 8.0, 0.15, theta)
        a = mpc_solve(z, cfg, plant)
        b = mpc_solve(z, cfg, plant)
        assert a.u == b.u
        assert np.array_equal(a.D_sequence, b.D_sequence)
        assert a.predicted_gain == b.predicted_gain

    def test_warm_start_never_hurts(self, theta, plant):
        cfg = MpcConfig()
        z = belief_vec(5.2, 0.1, 0.18, theta)
        cold = mpc_solve(z, cfg, plant)
        warm = mpc_solve(z, cfg, plant, prev=cold)
        assert warm.predicted_gain >= cold.predicted_gain - 1e-12

    def test_rejects_bad_mean(self, plant):
        with pytest.raises(ValidationError):
            mpc_solve(np.array([1.0, 2.0, 0.1, 0.4, -0.02, 0.01, 0.28]), MpcConfig(), plant)

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            MpcConfig(N=0)
        with pytest.raises(ValidationError):
            MpcConfig(N=4, d_blocks=5)
        with pytest.raises(ValidationError):
            MpcConfig(N=4, max_switches=4)


class TestHysteresis:
    def test_above_threshold_switches_on(self):
        cfg = HysteresisConfig()
        assert hysteresis_delta(0.5, 0, cfg) == 1
        assert hysteresis_delta(0.5, 1, cfg) == 1

    def test_below_threshold_switches_off(self):
        cfg = HysteresisConfig()
        assert hysteresis_delta(0.10, 1, cfg) == 0

    def test_band_holds_previous(self):
        cfg = HysteresisConfig()
        assert hysteresis_delta(0.17, 1, cfg) == 1
        assert hysteresis_delta(0.17, 0, cfg) == 0

    def test_thresholds_default_fractions(self, plant):
        cfg = HysteresisConfig()
        assert cfg.x_on == pytest.approx(0.4 * plant.x_crit)
        assert cfg.x_off == pytest.approx(0.3 * plant.x_crit)

    def test_ordering_enforced(self):
        with pytest.raises(ValidationError):
            HysteresisConfig(x_on=0.1, x_off=0.2)

    @given(st.lists(st.floats(0.0, 0.48), min_size=2, max_size=60))
    @settings(max_examples=200, deadline=None)
    def test_no_chatter(self, xs):
        # delta switches only when crossing x_on upward or x_off downward
        cfg = HysteresisConfig()
        delta = 0
        for x in xs:
            new = hysteresis_delta(x, delta, cfg)
            if new != delta:
                if new == 1:
                    assert x >= cfg.x_on
                else:
                    assert x <= cfg.x_off
            delta = new


class TestSteadyDilution:
    def test_closed_form_at_switch_threshold(self, theta, plant):
        x_on = 0.4 * plant.x_crit
        d = optimal_steady_dilution(theta, plant, x_on)
        mu_eff = theta.mu_max * (1 - x_on / plant.x_crit)
        closed = mu_eff * (1 - np.sqrt(theta.Ks / (theta.Ks + plant.s_in)))
        assert d == pytest.approx(closed, abs=1e-6)
        assert d == pytest.approx(0.27015, abs=1e-4)

    def test_vanishing_half_saturation(self, plant):
        th = KineticParams(0.466, 1e-9, 0.014, 0.28)
        d = optimal_steady_dilution(th, plant, 0.0)
        assert d == pytest.approx(min(0.466, plant.D_max), abs=1e-4)

    def test_full_inhibition_gives_zero(self, theta, plant):
        d = optimal_steady_dilution(theta, plant, plant.x_crit * (1 - 1e-12))
        assert d == pytest.approx(0.0, abs=1e-6)


class TestPolicyTable:
    def test_single_entry_at_nominal(self, theta, plant):
        t = build_table(1, seed=0, frac=0.0)
        assert len(t) == 1
        assert t.d_star[0] == pytest.approx(0.27015, abs=1e-4)

    def test_entries_within_actuator_range(self, plant):
        t = build_table(200, seed=1)
        assert np.all(t.d_star >= 0.0)
        assert np.all(t.d_star <= plant.D_max)

    def test_seed_determinism(self):
        a = build_table(50, seed=5)
        b = build_table(50, seed=5)
        c = build_table(50, seed=6)
        assert np.array_equal(a.thetas, b.thetas)
        assert np.array_equal(a.d_star, b.d_star)
        assert not np.array_equal(a.thetas, c.thetas)

    def test_csv_round_trip_bit_exact(self, tmp_path):
        t = build_table(40, seed=9)
        path = tmp_path / "table.csv"
        t.save_csv(path)
        back = PolicyTable.load_csv(path)
        assert np.array_equal(t.thetas, back.thetas)
        assert np.array_equal(t.d_star, back.d_star)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            PolicyTable(np.empty((0, 4)), np.empty(0), np.ones(4))


class TestLookup:
    def test_exact_match_returns_entry(self):
        t = build_table(30, seed=2)
        j = 17
        assert lookup_select(t.thetas[j], t) == t.d_star[j]

    def test_tie_breaks_to_lowest_index(self):
        nom = NOMINAL_KINETICS.as_array()
        thetas = np.vstack([nom * 1.1, nom * 1.1])  # identical entries tie exactly
        table = PolicyTable(thetas, np.array([0.25, 0.30]), nom)
        assert lookup_select(nom, table) == 0.25

    def test_normalization_invariance(self, rng):
        # scaling one axis of query and entries by its nominal leaves the
        # chosen index unchanged
        nom = NOMINAL_KINETICS.as_array()
        thetas = nom * rng.uniform(0.85, 1.15, (50, 4))
        d_star = rng.uniform(0.2, 0.3, 50)
        t1 = PolicyTable(thetas, d_star, nom)
        query = nom * rng.uniform(0.9, 1.1, 4)
        scale = np.array([1.0, 1.0, 1.0, nom[3]])
        t2 = PolicyTable(thetas / scale, d_star, nom / scale)
        assert lookup_select(query, t1) == lookup_select(query / scale, t2)

    def test_lookup_step_composition(self, theta):
        t = build_table(1, seed=0, frac=0.0)
        cfg = HysteresisConfig()
        u = lookup_step(belief_vec(5.0, 0.02, 0.0, theta), 0, t, cfg)
        assert u.D == pytest.approx(0.27015, abs=1e-4)
        assert u.delta == 0
        u2 = lookup_step(belief_vec(5.0, 0.02, 0.3, theta), 0, t, cfg)
        assert u2.delta == 1
        assert u2.D == u.D
