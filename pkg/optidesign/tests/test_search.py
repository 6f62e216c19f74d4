"""
Tests for the grid and simplex design search
"""

import unittest
from unittest.mock import Mock

import numpy as np

from optidesign.design.criteria import CriterionKind, CriterionValue
from optidesign.design.region import DesignRegion
from optidesign.design.search import (
    candidate_search,
    grid_local_maxima,
    grid_search,
    interior_recheck,
    optimize_design,
    refine_starts,
    score,
    search_design,
)
from optidesign.errors import ArgumentError
from optidesign.settings import DesignSettings

UNIT = DesignRegion((0.0,), (1.0,))
SQUARE = DesignRegion((0.0, 0.0), (1.0, 1.0))


def bowl(design):
    x, y = design[0]
    return -((x - 0.3) ** 2) - (y - 0.6) ** 2


def bimodal(design):
    x = design[0, 0]
    return np.exp(-(x - 0.2) ** 2 / 0.001) + 2.0 * np.exp(-(x - 0.8) ** 2 / 0.001)


class TestRegion(unittest.TestCase):
    """Test region parsing and grids."""

    def test_parse(self):
        """Test lo:hi parsing."""
        region = DesignRegion.parse("100:400, 75:350,30:150")
        self.assertEqual(region.lower, (100.0, 75.0, 30.0))
        self.assertEqual(region.upper, (400.0, 350.0, 150.0))
        self.assertEqual(region.corners().shape, (8, 3))

    def test_invalid(self):
        """Test malformed and empty boxes."""
        with self.assertRaises(ArgumentError):
            DesignRegion.parse("1:0")
        with self.assertRaises(ArgumentError):
            DesignRegion.parse("0-1")
        with self.assertRaises(ArgumentError):
            DesignRegion((0.0, 0.0), (1.0,))

    def test_interior_axes(self):
        """Test cell centres stay off the boundary."""
        (axis,) = UNIT.interior_axes(4)
        np.testing.assert_allclose(axis, [0.125, 0.375, 0.625, 0.875])


class TestScore(unittest.TestCase):
    """Test objective scoring."""

    def test_values(self):
        """Test floats, criterion values and NaN."""
        self.assertEqual(score(1.5), 1.5)
        self.assertEqual(score(CriterionValue(2.0, CriterionKind.D, 2)), 2.0)
        self.assertEqual(score(float('nan')), float('-inf'))


class TestGridSearch(unittest.TestCase):
    """Test the exhaustive stage."""

    def test_constant_objective_ties(self):
        """Test ties resolve to the lexicographically first candidate."""
        best = grid_search(lambda d: 1.0, UNIT, 5)
        np.testing.assert_array_equal(best.points, [[0.0]])
        self.assertEqual(best.n_evaluated, 5)

    def test_constant_objective_pairs(self):
        """Test ties over two-point designs."""
        best = grid_search(lambda d: 1.0, UNIT, 5, n_support=2)
        np.testing.assert_array_equal(best.points, [[0.0], [0.25]])
        self.assertEqual(best.n_evaluated, 10)

    def test_concave_within_one_cell(self):
        """Test a concave objective is located to one grid spacing."""
        best = grid_search(lambda d: -(d[0, 0] - 0.37) ** 2, UNIT, 11)
        self.assertLessEqual(abs(best.points[0, 0] - 0.37), 0.1)
        self.assertAlmostEqual(best.points[0, 0], 0.4)

    def test_guard_before_evaluation(self):
        """Test an oversized grid raises before any evaluation."""
        objective = Mock(return_value=0.0)
        with self.assertRaises(ArgumentError) as ctx:
            grid_search(objective, SQUARE, 1001)
        objective.assert_not_called()
        self.assertIn('grid resolution', str(ctx.exception))

    def test_threads_match_serial(self):
        """Test threaded evaluation returns the serial result."""
        serial = grid_search(bowl, SQUARE, 21)
        threaded = grid_search(bowl, SQUARE, 21, workers=4)
        np.testing.assert_array_equal(serial.points, threaded.points)
        self.assertEqual(serial.value, threaded.value)

    def test_empty_candidates(self):
        """Test no candidates raises."""
        with self.assertRaises(ArgumentError):
            candidate_search(bowl, [])

    def test_singular_candidates_lose(self):
        """Test -inf never beats a finite score."""
        best = candidate_search(lambda d: float('-inf') if d[0, 0] < 0.5 else 0.0, [[0.1], [0.2], [0.9]])
        np.testing.assert_array_equal(best.points, [[0.9]])


class TestOptimizeDesign(unittest.TestCase):
    """Test simplex refinement."""

    def test_bowl(self):
        """Test an interior optimum is recovered."""
        result = optimize_design(bowl, [[0.5, 0.5]], SQUARE)
        np.testing.assert_allclose(result.points[0], [0.3, 0.6], atol=1e-4)
        self.assertTrue(result.converged)
        self.assertGreaterEqual(result.value, result.start_value)

    def test_boundary_optimum(self):
        """Test an optimum on the upper bound stays inside the region."""
        result = optimize_design(lambda d: d[0, 0], [[0.5]], UNIT)
        self.assertAlmostEqual(result.points[0, 0], 1.0, delta=1e-6)
        self.assertLessEqual(result.points[0, 0], 1.0)

    def test_start_outside(self):
        """Test starting outside the region raises."""
        with self.assertRaises(ArgumentError):
            optimize_design(bowl, [[1.5, 0.5]], SQUARE)

    def test_never_worse_than_start(self):
        """Test the start is kept when nothing better is found."""
        result = optimize_design(lambda d: 1.0 if d[0, 0] == 0.5 else 0.0, [[0.5]], UNIT)
        np.testing.assert_array_equal(result.points, [[0.5]])
        self.assertEqual(result.value, 1.0)

    def test_to_dict(self):
        """Test serialized keys."""
        data = optimize_design(bowl, [[0.5, 0.5]], SQUARE).to_dict()
        self.assertEqual(set(data), {'start_value', 'value', 'points', 'converged', 'iterations', 'evaluations'})


class TestLocalMaxima(unittest.TestCase):
    """Test grid peaks and refinement from several starts."""

    def test_peaks_best_first(self):
        """Test both modes are found, the higher first."""
        peaks = grid_local_maxima(bimodal, UNIT, 21)
        self.assertEqual(len(peaks), 2)
        self.assertAlmostEqual(peaks[0].points[0, 0], 0.8)
        self.assertAlmostEqual(peaks[1].points[0, 0], 0.2)
        self.assertGreater(peaks[0].value, peaks[1].value)
        self.assertEqual(peaks[0].n_evaluated, 21)

    def test_single_peak_in_two_dimensions(self):
        """Test a bowl has one peak next to its centre."""
        peaks = grid_local_maxima(bowl, SQUARE, 11)
        self.assertEqual(len(peaks), 1)
        np.testing.assert_allclose(peaks[0].points[0], [0.3, 0.6])

    def test_singular_nodes_are_not_peaks(self):
        """Test -inf nodes never count as maxima."""
        peaks = grid_local_maxima(lambda d: float('-inf'), UNIT, 5)
        self.assertEqual(peaks, [])

    def test_guard(self):
        """Test the evaluation limit is checked."""
        with self.assertRaises(ArgumentError):
            grid_local_maxima(bowl, SQUARE, 11, max_evaluations=100)

    def test_refine_skips_rejected(self):
        """Test the best accepted refinement wins."""
        result = refine_starts(bimodal, UNIT, [[[0.8]], [[0.2]]], lambda p: p[0, 0] < 0.5)
        self.assertAlmostEqual(result.points[0, 0], 0.2, delta=1e-4)
        self.assertAlmostEqual(result.value, 1.0, places=6)

    def test_refine_none_accepted(self):
        """Test None when every refinement is rejected."""
        self.assertIsNone(refine_starts(bimodal, UNIT, [[[0.8]]], lambda p: False))


class TestInteriorRecheck(unittest.TestCase):
    """Test the interior re-check."""

    def test_restart_from_better_cell(self):
        """Test a local optimum is abandoned for the global one."""
        local = optimize_design(bimodal, [[0.2]], UNIT)
        self.assertAlmostEqual(local.points[0, 0], 0.2, delta=1e-3)
        checked = interior_recheck(bimodal, UNIT, local, 20)
        self.assertTrue(checked.restarted)
        self.assertFalse(checked.confirmed)
        self.assertAlmostEqual(checked.points[0, 0], 0.8, delta=1e-4)
        self.assertAlmostEqual(checked.value, 2.0, places=6)

    def test_equal_values_confirm(self):
        """Test a tie with the grid confirms without restarting."""
        optimum = optimize_design(lambda d: 1.0, [[0.5]], UNIT)
        checked = interior_recheck(lambda d: 1.0, UNIT, optimum, 10)
        self.assertTrue(checked.confirmed)
        self.assertFalse(checked.restarted)
        np.testing.assert_array_equal(checked.points, optimum.points)


class TestSearchDesign(unittest.TestCase):
    """Test the full search pipeline."""

    def test_grid_then_simplex(self):
        """Test grid, simplex and re-check on a bowl."""
        trace = search_design(bowl, SQUARE, points_per_dim=11)
        np.testing.assert_allclose(trace.points[0], [0.3, 0.6], atol=1e-4)
        self.assertIsNotNone(trace.recheck)
        self.assertTrue(trace.recheck.confirmed)
        self.assertEqual(set(trace.to_dict()), {'points_per_dim', 'grid_best', 'optimizer', 'recheck'})

    def test_explicit_candidates(self):
        """Test candidate lists replace the grid stage."""
        trace = search_design(bimodal, UNIT, candidates=[[0.1], [0.75]], recheck=False)
        self.assertEqual(trace.grid.n_evaluated, 2)
        self.assertIsNone(trace.recheck)
        self.assertAlmostEqual(trace.points[0, 0], 0.8, delta=1e-4)

    def test_settings_grid_points(self):
        """Test the configured resolution is the default."""
        trace = search_design(bowl, SQUARE, settings=DesignSettings(grid_points=6), recheck=False)
        self.assertEqual(trace.points_per_dim, 6)
        self.assertEqual(trace.grid.n_evaluated, 36)


if __name__ == '__main__':
    unittest.main()
