"""
Tests for the Monte-Carlo design evaluation
"""

import unittest
from unittest.mock import patch

import numpy as np
import pytest

from optidesign.design import DesignRegion
from optidesign.errors import ArgumentError, ConvergenceError, FixtureMissingError, SimulationAbortedError
from optidesign.estimation import fit_ls
from optidesign.models import NoiseModel
from optidesign.settings import Settings, SimulationSettings
from optidesign.simulation import (
    SimulationPlan,
    StartStrategy,
    StatSummary,
    compare_reports,
    run_simulation,
)
from optidesign.zoo import hougen_watson, michaelis_menten


class SimulationTestCase(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        entry = michaelis_menten()
        cls.model = entry.model
        cls.data = entry.fixture
        cls.fit = fit_ls(cls.model, cls.data, [205.0, 0.08])

    def plan(self, point=0.05116, **kwargs):
        kwargs.setdefault('n_sims', 20)
        return SimulationPlan(model=self.model, base_fit=self.fit, base_dataset=self.data,
                              new_point=[point], **kwargs)


class TestSimulationPlan(SimulationTestCase):
    """Test plan validation and metadata."""

    def test_default_noise(self):
        """Test sigma defaults to the base fit."""
        plan = self.plan()
        self.assertAlmostEqual(plan.noise_model.sigma, np.sqrt(self.fit.s2))
        self.assertEqual(plan.metadata()['sigma_source'], 'base-fit')
        np.testing.assert_array_equal(plan.start, self.fit.theta_hat)

    def test_explicit_noise(self):
        """Test an explicit sigma is reported as such."""
        plan = self.plan(noise=NoiseModel(5.0))
        self.assertEqual(plan.metadata()['sigma'], 5.0)
        self.assertEqual(plan.metadata()['sigma_source'], 'plan')

    def test_fixed_start(self):
        """Test fixed starts need k values."""
        plan = self.plan(start_strategy=StartStrategy.FIXED, start_theta=[200.0, 0.07])
        np.testing.assert_array_equal(plan.start, [200.0, 0.07])
        with self.assertRaises(ArgumentError):
            self.plan(start_strategy='fixed')

    def test_invalid_plans(self):
        """Test bad sims, dimensions and regions."""
        with self.assertRaises(ArgumentError):
            self.plan(n_sims=0)
        with self.assertRaises(ArgumentError):
            SimulationPlan(model=self.model, base_fit=self.fit, base_dataset=self.data, new_point=[0.1, 0.2])
        with self.assertRaises(ArgumentError):
            self.plan(point=2.0, region=DesignRegion((0.0,), (1.1,)))


class TestRunSimulation(SimulationTestCase):
    """Test simulated refits."""

    def test_noise_free_limit(self):
        """Test vanishing noise reproduces the base estimate every time."""
        report = run_simulation(self.plan(n_sims=5, noise=NoiseModel(1e-12)))
        self.assertEqual(report.n_failed, 0)
        for record in report.per_sim:
            np.testing.assert_allclose(record.theta_hat, self.fit.theta_hat, rtol=1e-6)
        self.assertLess(report.summaries['corr_12'].std_dev, 1e-6)

    def test_deterministic(self):
        """Test the same seed gives identical records."""
        first = run_simulation(self.plan(seed=7)).to_frame()
        second = run_simulation(self.plan(seed=7)).to_frame()
        self.assertTrue(first.equals(second))

    def test_seed_changes_draws(self):
        """Test different seeds give different records."""
        first = run_simulation(self.plan(seed=1)).to_frame()
        second = run_simulation(self.plan(seed=2)).to_frame()
        self.assertFalse(np.allclose(first['se_1'], second['se_1']))

    def test_threads_match_serial(self):
        """Test threaded refits give the serial records."""
        serial = run_simulation(self.plan(seed=3)).to_frame()
        threaded = run_simulation(self.plan(seed=3),
                                  Settings(simulation=SimulationSettings(workers=4))).to_frame()
        self.assertTrue(serial.equals(threaded))

    def test_summaries_and_frame(self):
        """Test summaries agree with the per-simulation records."""
        report = run_simulation(self.plan())
        frame = report.to_frame()
        self.assertEqual(list(frame.columns), ['sim', 'corr_12', 'se_1', 'se_2', 'logdet', 'converged'])
        self.assertEqual(frame['sim'].tolist(), list(range(1, 21)))
        summary = report.summaries['se_2']
        self.assertEqual(summary.count, 20 - report.n_failed)
        self.assertAlmostEqual(summary.median, float(np.median(frame['se_2'].dropna())))
        self.assertLessEqual(summary.q05, summary.q95)
        self.assertEqual(report.to_dict()['n_sims'], 20)

    def test_abort_on_failures(self):
        """Test too many failed refits abort the run."""
        failure = ConvergenceError("no progress", [1.0, 1.0], 1.0, 3)
        with patch('optidesign.simulation.fit_ls', side_effect=failure):
            with self.assertRaises(SimulationAbortedError) as ctx:
                run_simulation(self.plan(n_sims=10))
        self.assertEqual(ctx.exception.n_failed, 10)

    def test_tolerated_failures(self):
        """Test failures under the limit are recorded, not raised."""
        real_fit = fit_ls
        calls = {'n': 0}

        def flaky(*args, **kwargs):
            calls['n'] += 1
            if calls['n'] == 1:
                raise ConvergenceError("no progress", [1.0, 1.0], 1.0, 3)
            return real_fit(*args, **kwargs)

        with patch('optidesign.simulation.fit_ls', side_effect=flaky):
            report = run_simulation(self.plan(n_sims=10))
        self.assertEqual(report.n_failed, 1)
        self.assertEqual(len(report.converged_records()), 9)
        self.assertFalse(report.to_frame()['converged'][0])


class TestCompareReports(SimulationTestCase):
    """Test paired comparisons."""

    def test_self_comparison(self):
        """Test a report against itself ties everywhere."""
        report = run_simulation(self.plan())
        comparison = compare_reports(report, report)
        self.assertEqual(comparison.se_wins, {'se_1': 0.5, 'se_2': 0.5})
        self.assertEqual(comparison.correlation_wins, {'corr_12': 0.5})
        self.assertAlmostEqual(comparison.mean_d_efficiency, 100.0, places=10)
        self.assertEqual(comparison.n_pairs, 20)

    def test_mismatched_reports(self):
        """Test reports with different n_sims cannot be paired."""
        with self.assertRaises(ArgumentError):
            compare_reports(run_simulation(self.plan(n_sims=5)), run_simulation(self.plan(n_sims=6)))

    def test_summary_of_empty(self):
        """Test an empty summary is all NaN."""
        summary = StatSummary.from_values('x', [])
        self.assertEqual(summary.count, 0)
        self.assertIsNone(summary.to_dict()['mean'])


@pytest.mark.slow
class TestEnzymeStudy(SimulationTestCase):
    """Test the D_P point against the D point over 2000 simulations."""

    def test_dp_point_lowers_correlation(self):
        """Test the D_P point lowers the median correlation at little D cost."""
        dp_report = run_simulation(self.plan(0.05116, n_sims=2000, label='D_P'))
        d_report = run_simulation(self.plan(0.0747, n_sims=2000, label='D'))
        self.assertLess(dp_report.summaries['corr_12'].median, d_report.summaries['corr_12'].median)
        self.assertAlmostEqual(self.fit.correlation[0, 1], 0.77, delta=0.01)
        comparison = compare_reports(dp_report, d_report)
        self.assertGreaterEqual(comparison.mean_d_efficiency, 95.0)
        self.assertLessEqual(comparison.mean_d_efficiency, 101.0)


@pytest.mark.slow
class TestIsomerizationStudy(unittest.TestCase):
    """Test the D_P run against the D corner over 2000 simulations."""

    @classmethod
    def setUpClass(cls):
        try:
            cls.entry = hougen_watson()
        except FixtureMissingError as exc:
            raise unittest.SkipTest(str(exc))
        cls.fit = cls.entry.fit()

    def plan(self, point, label):
        return SimulationPlan(model=self.entry.model, base_fit=self.fit, base_dataset=self.entry.fixture,
                              new_point=point, n_sims=2000, region=self.entry.default_region, label=label)

    def test_dp_run_decorrelates_theta1(self):
        """Test the D_P run lowers every theta1 correlation in most draws.

        The D corner still gives the smaller theta1 standard error in almost
        every draw; the remaining standard errors split about evenly.
        """
        dp_report = run_simulation(self.plan([245.0, 300.0, 40.0], 'D_P'))
        d_report = run_simulation(self.plan([100.0, 350.0, 30.0], 'D'))
        comparison = compare_reports(dp_report, d_report)
        self.assertGreaterEqual(comparison.n_pairs, 1600)
        for name in ('corr_12', 'corr_13', 'corr_14'):
            self.assertGreater(comparison.correlation_wins[name], 0.8, name)
        self.assertGreater(comparison.correlation_wins['corr_23'], 0.6)
        self.assertLess(comparison.se_wins['se_1'], 0.25)
        for name in ('se_2', 'se_3', 'se_4'):
            self.assertGreater(comparison.se_wins[name], 0.4, name)


if __name__ == '__main__':
    unittest.main()
