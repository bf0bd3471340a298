import numpy as np
import pytest

from recirc.errors import ValidationError
from recirc.model import ControlInput
from recirc.observability import (
    OperatingPoint,
    SampleRanges,
    analytic_partials,
    lie_rows,
    rank_at,
    rank_campaign,
    rank_of_matrix,
)


def random_point(rng, theta):
    nom = theta.as_array()
    z = np.array([
        rng.uniform(0.3, 7.0),
        rng.uniform(0.05, 18.0),
        rng.uniform(0.0, 0.4),
        *(nom * rng.uniform(0.85, 1.15, 4)),
    ])
    u = ControlInput(float(rng.uniform(0.05, 0.6)), int(rng.integers(0, 2)))
    return OperatingPoint(z, u)


class TestLieRows:
    def test_first_row_is_biomass_selector(self, theta, plant, rng):
        p = random_point(rng, theta)
        rows = lie_rows(p, plant)
        assert np.allclose(rows[0], [1, 0, 0, 0, 0, 0, 0])
        assert np.allclose(rows[1], [0, 1, 0, 0, 0, 0, 0])

    def test_landmark_entry_biomass_rate_wrt_dna(self, theta, plant):
        # at s = Ks the Monod factor is 1/2: d(b_dot)/dx = -mu_max*0.5*b/x_crit
        z = np.array([5.0, theta.Ks, 0.0, *theta.as_array()])
        p = OperatingPoint(z, ControlInput(0.2, 0))
        rows = lie_rows(p, plant)
        expected = -theta.mu_max * 0.5 * 5.0 / plant.x_crit
        assert expected == pytest.approx(-2.4271, abs=2e-4)
        assert rows[2, 2] == pytest.approx(expected, rel=1e-3)

    def test_landmark_entry_substrate_rate_wrt_yield(self, theta, plant, rng):
        for _ in range(5):
            p = random_point(rng, theta)
            z = p.z.copy()
            z[2] = 0.0  # x = 0
            p0 = OperatingPoint(z, p.u)
            rows = lie_rows(p0, plant)
            b, s = z[0], z[1]
            mu_max, Ks, Y = z[3], z[4], z[6]
            expected = mu_max * s * b / (Y**2 * (Ks + s))
            assert rows[3, 6] == pytest.approx(expected, rel=1e-3)

    def test_rows_match_analytic_partials_at_random_points(self, theta, plant):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(1000):
            p = random_point(rng, theta)
            rows = lie_rows(p, plant)
            e17, e18, e19 = analytic_partials(p, plant)
            for got, ref in ((rows[2, 2], e17), (rows[3, 6], e18), (rows[4, 5], e19)):
                rel = abs(got - ref) / max(abs(ref), 1e-300)
                worst = max(worst, rel)
        assert worst < 1e-6

    def test_analytic_partials_vanish_with_biomass(self, theta, plant):
        # expressions all carry a factor b or b^2
        z = np.array([1e-300, 5.0, 0.1, *theta.as_array()])
        vals = analytic_partials(OperatingPoint(z, ControlInput(0.2, 0)), plant)
        assert all(abs(v) < 1e-250 for v in vals)

    def test_analytic_partials_vanish_at_critical_dna(self, theta, plant):
        z = np.array([3.0, 5.0, plant.x_crit, *theta.as_array()])
        _, e18, e19 = analytic_partials(OperatingPoint(z, ControlInput(0.2, 0)), plant)
        assert e18 == 0.0 and e19 == 0.0


class TestRank:
    def test_generic_point_full_rank(self, theta, plant):
        z = np.array([3.0, 2.0, 0.1, *theta.as_array()])
        rank, sv = rank_at(OperatingPoint(z, ControlInput(0.2, 1)), plant)
        assert rank == 7

    def test_vanishing_biomass_drops_rank(self, theta, plant):
        z = np.array([1e-12, 2.0, 0.1, *theta.as_array()])
        rank, _ = rank_at(OperatingPoint(z, ControlInput(0.2, 1)), plant)
        assert rank < 7

    def test_duplicated_row_detected(self, rng):
        # only six distinct rows, padded with exact duplicates
        base = rng.normal(size=(6, 7))
        m = np.vstack([base, base[0], base[1], 2.0 * base[2], -base[3]])
        rank, _ = rank_of_matrix(m)
        assert rank <= 6
        full = rng.normal(size=(10, 7))
        assert rank_of_matrix(full)[0] == 7

    def test_scale_invariance(self, theta, plant, rng):
        p = random_point(rng, theta)
        rows = lie_rows(p, plant)
        r1, _ = rank_of_matrix(rows)
        r2, _ = rank_of_matrix(rows * 1e6)
        r3, _ = rank_of_matrix(rows * 1e-6)
        assert r1 == r2 == r3

    def test_steady_operating_point_is_full_rank(self, theta, plant):
        # the closed-loop resting point must not be flagged deficient
        z = np.array([5.5532, 0.017180, 0.0506, *theta.as_array()])
        rank, sv = rank_at(OperatingPoint(z, ControlInput(0.2, 1)), plant)
        assert rank == 7


class TestCampaign:
    def test_rejects_empty(self, plant):
        with pytest.raises(ValidationError):
            rank_campaign(0, seed=1, k=plant)

    def test_small_campaign_full_rank(self, plant):
        rep = rank_campaign(500, seed=3, k=plant)
        assert rep.points_tested == 500
        assert rep.full_rank_count == 500
        assert rep.deficient_points == []
        assert rep.min_sigma_ratio > 1e-13

    def test_determinism(self, plant):
        a = rank_campaign(200, seed=9, k=plant)
        b = rank_campaign(200, seed=9, k=plant)
        assert a.full_rank_count == b.full_rank_count
        assert np.array_equal(a.sigma_ratios, b.sigma_ratios)
        c = rank_campaign(200, seed=10, k=plant)
        assert not np.array_equal(a.sigma_ratios, c.sigma_ratios)

    def test_collapsed_biomass_range_all_deficient(self, plant):
        ranges = SampleRanges(b=(1e-12, 1e-12))
        rep = rank_campaign(50, ranges=ranges, seed=4, k=plant)
        assert rep.full_rank_count == 0

    def test_report_csv(self, plant, tmp_path):
        from recirc.observability import write_report_csv

        rep = rank_campaign(50, seed=5, k=plant)
        path = tmp_path / "rank.csv"
        write_report_csv(rep, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "point_index,rank,sigma_ratio"
        assert len(lines) == 52  # header + 50 points + summary
        assert lines[-1].startswith("# summary:")


class TestOperatingPointValidation:
    def test_requires_positive_concentrations(self, theta):
        with pytest.raises(ValidationError):
            OperatingPoint(np.array([0.0, 1.0, 0.1, *theta.as_array()]), ControlInput(0.2, 0))
        with pytest.raises(ValidationError):
            OperatingPoint(np.array([1.0, 1.0, -0.1, *theta.as_array()]), ControlInput(0.2, 0))

    def test_requires_positive_parameters(self, theta):
        z = np.array([1.0, 1.0, 0.1, 0.466, 0.0, 0.014, 0.28])
        with pytest.raises(ValidationError):
            OperatingPoint(z, ControlInput(0.2, 0))
