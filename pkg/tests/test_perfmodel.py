import math

import numpy as np
import pytest

from lossyckpt import perfmodel as pm
from lossyckpt import simulate as sim
from lossyckpt.errors import ParameterError, SaturatedModelError

HOURLY = 1.0 / 3600.0


class TestYoungInterval:
    def test_worked_example(self):
        # sqrt(2 * 3600 * 120) = sqrt(864000)
        assert pm.young_interval(3600.0, 120.0) == pytest.approx(929.51600308978, abs=1e-6)

    def test_small_checkpoint_limit(self):
        assert pm.young_interval(3600.0, 1e-12) < 1e-3

    def test_scaling(self):
        base = pm.young_interval(3600.0, 120.0)
        assert pm.young_interval(7200.0, 240.0) == pytest.approx(2 * base, rel=1e-12)

    def test_rejects_non_positive(self):
        with pytest.raises(ParameterError):
            pm.young_interval(0.0, 120.0)
        with pytest.raises(ParameterError):
            pm.young_interval(3600.0, -1.0)

    def test_k_rounding(self):
        assert pm.young_k(3600.0, 120.0, 1.2) == 775
        assert pm.young_k(1.0, 1e-9, 100.0) == 1  # floors at one iteration


class TestOverheadRatio:
    def test_hourly_two_minute_checkpoint(self):
        # hourly failures with two-minute checkpoints: overhead around 40%
        ratio = pm.overhead_ratio_traditional(HOURLY, 120.0)
        assert ratio == pytest.approx(0.4114967999647183, rel=1e-12)
        assert 0.40 <= ratio <= 0.42

    def test_no_failures(self):
        assert pm.overhead_ratio_traditional(0.0, 120.0) == 0.0

    def test_saturation_raises(self):
        # sqrt(2*lam*t) + lam*t >= 1 at t = (2 - sqrt(3)) / lam
        with pytest.raises(SaturatedModelError):
            pm.overhead_ratio_traditional(HOURLY, 2000.0)

    def test_distinct_recovery_time(self):
        faster_rc = pm.overhead_ratio_traditional(HOURLY, 120.0, t_rc=10.0)
        assert faster_rc < pm.overhead_ratio_traditional(HOURLY, 120.0)


class TestLossyOverhead:
    def test_degenerate_equality(self):
        trad = pm.overhead_traditional(5875, 1.2, HOURLY, 120.0)
        lossy = pm.overhead_lossy(5875, 1.2, HOURLY, 120.0, n_prime=0.0)
        assert lossy == pytest.approx(trad, rel=1e-12)

    def test_boundary_of_the_decision_rule(self):
        # at n_prime = 500 with the reference parameters the two policies tie
        trad = pm.overhead_traditional(5875, 1.2, HOURLY, 120.0)
        lossy = pm.overhead_lossy(5875, 1.2, HOURLY, 25.0, n_prime=500.0)
        assert lossy == pytest.approx(trad, rel=0.005)

    def test_large_delay_loses(self):
        trad = pm.overhead_traditional(5875, 1.2, HOURLY, 120.0)
        assert pm.overhead_lossy(5875, 1.2, HOURLY, 25.0, n_prime=1000.0) > trad

    def test_expected_total_time(self):
        assert pm.expected_total_time_traditional(5875, 1.2, HOURLY, 120.0) == \
            pytest.approx(9951.052439751264, rel=1e-12)


class TestNPrimeBound:
    def test_worked_example(self):
        bound = pm.n_prime_bound(HOURLY, 1.2, 120.0, 25.0)
        assert bound == pytest.approx(500.20994531487617, rel=1e-9)
        assert math.floor(bound) == 500

    def test_equal_checkpoint_times(self):
        assert pm.n_prime_bound(HOURLY, 1.2, 120.0, 120.0) == 0.0

    def test_zero_failure_rate(self):
        assert pm.n_prime_bound(0.0, 1.2, 120.0, 25.0) == math.inf

    def test_algebraic_identity(self):
        lam, t_it = HOURLY, 1.2
        bound = pm.n_prime_bound(lam, t_it, 120.0, 25.0)
        lhs = bound * lam * t_it + pm.overhead_term(25.0, lam)
        assert lhs == pytest.approx(pm.overhead_term(120.0, lam), rel=1e-12)

    def test_worthwhile_predicate(self):
        assert pm.lossy_worthwhile(400, HOURLY, 1.2, 120.0, 25.0)
        assert not pm.lossy_worthwhile(600, HOURLY, 1.2, 120.0, 25.0)


class TestParams:
    def test_validation(self):
        with pytest.raises(ParameterError):
            pm.PerfModelParams(lam=-1.0, t_it=1.2, t_ckp_trad=120.0)

    def test_saturated_flag(self):
        assert pm.PerfModelParams(lam=HOURLY, t_it=1.2, t_ckp_trad=2000.0).saturated
        assert not pm.PerfModelParams(lam=HOURLY, t_it=1.2, t_ckp_trad=120.0).saturated

    def test_delegation(self):
        params = pm.PerfModelParams(lam=HOURLY, t_it=1.2, t_ckp_trad=120.0,
                                    t_ckp_lossy=25.0)
        assert params.overhead_ratio() == pm.overhead_ratio_traditional(HOURLY, 120.0)
        assert params.bound() == pm.n_prime_bound(HOURLY, 1.2, 120.0, 25.0)


class TestSweep:
    def test_zero_lambda_row_is_zero(self):
        rows = pm.sweep_overhead_surface([0.0], np.linspace(0.0, 140.0, 15))
        assert all(r[2] == 0.0 and not r[3] for r in rows)

    def test_anchor_cell(self):
        rows = pm.sweep_overhead_surface([HOURLY], [120.0])
        assert rows[0][2] == pytest.approx(0.4114967999647183, rel=1e-12)

    def test_monotone_on_default_axes(self):
        lams = np.linspace(0.0, 3.5 / 3600.0, 36)
        tcks = np.linspace(0.0, 140.0, 29)
        rows = pm.sweep_overhead_surface(lams, tcks)
        grid = np.array([r[2] for r in rows]).reshape(len(lams), len(tcks))
        assert not any(r[3] for r in rows)
        assert np.all(np.diff(grid, axis=0) >= 0)
        assert np.all(np.diff(grid, axis=1) >= 0)

    def test_saturated_cells_flagged_not_raised(self):
        rows = pm.sweep_overhead_surface([HOURLY], [120.0, 5000.0])
        assert not rows[0][3]
        assert rows[1][3] and math.isnan(rows[1][2])

    def test_empty_grid_rejected(self):
        with pytest.raises(ParameterError):
            pm.sweep_overhead_surface([], [1.0])


class TestModelAgainstSimulation:
    """Ensemble means versus the closed forms on the 12-point grid.

    The closed forms charge checkpoints and rollback proportionally to total
    time, which overstates the exact discrete process as the overhead load
    grows; total time agrees tightly everywhere, and overhead agrees within
    15% wherever the load stays below 0.4 (25% at the two deepest cells).
    """

    @pytest.mark.parametrize("lam", [1 / 7200, 1 / 3600, 1 / 1800])
    @pytest.mark.parametrize("t_ckp", [25.0, 60.0, 120.0, 140.0])
    def test_traditional_overhead_grid(self, lam, t_ckp):
        t_it, n = 1.2, 5875
        k = pm.young_k(1.0 / lam, t_ckp, t_it)
        config = sim.SimConfig(method="synthetic", problem=f"synthetic:{n}",
                               policy="traditional", ckpt_intvl=k, t_it=t_it,
                               t_ckpt=t_ckp, lam=lam, trials=500, seed=2024)
        report = sim.run_ensemble(config)
        model_total = pm.expected_total_time_traditional(n, t_it, lam, t_ckp)
        model_overhead = pm.overhead_traditional(n, t_it, lam, t_ckp)
        load = pm.overhead_term(t_ckp, lam)
        assert abs(report.mean_total_time - model_total) <= 0.15 * model_total
        tolerance = 0.15 if load < 0.4 else 0.25
        assert abs(report.mean_overhead - model_overhead) <= tolerance * model_overhead

    def test_lossy_overhead_at_reference_parameters(self):
        lam, t_it, n = HOURLY, 1.2, 5875
        k = pm.young_k(3600.0, 25.0, t_it)
        config = sim.SimConfig(method="synthetic", problem=f"synthetic:{n}",
                               policy="lossy", ckpt_intvl=k, t_it=t_it, t_ckpt=25.0,
                               lam=lam, trials=500, seed=7, forced_n_prime=250.0)
        report = sim.run_ensemble(config)
        model = pm.overhead_lossy(n, t_it, lam, 25.0, n_prime=250.0)
        assert abs(report.mean_overhead - model) <= 0.15 * model

    @pytest.mark.parametrize("mult,expect_lossy_wins", [(0.9, True), (1.1, False)])
    def test_crossover_brackets_the_bound(self, mult, expect_lossy_wins):
        lam, t_it, n = HOURLY, 1.2, 5875
        bound = pm.n_prime_bound(lam, t_it, 120.0, 25.0)
        base = dict(method="synthetic", problem=f"synthetic:{n}", t_it=t_it, lam=lam,
                    trials=1500, seed=5)
        trad = sim.run_ensemble(sim.SimConfig(policy="traditional", t_ckpt=120.0,
                                              ckpt_intvl=pm.young_k(3600.0, 120.0, t_it),
                                              **base))
        lossy = sim.run_ensemble(sim.SimConfig(policy="lossy", t_ckpt=25.0,
                                               ckpt_intvl=pm.young_k(3600.0, 25.0, t_it),
                                               forced_n_prime=mult * bound, **base))
        assert (lossy.mean_total_time < trad.mean_total_time) == expect_lossy_wins
