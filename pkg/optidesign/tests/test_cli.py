"""
Tests for the command-line front end
"""

import json
import tempfile
import unittest
from pathlib import Path

import pandas as pd

from optidesign.cli import EXIT_OK, EXIT_USAGE, RunConfig, main, parse_grid, parse_points
from optidesign.zoo import FIXTURE_DIR

PUROMYCIN = str(FIXTURE_DIR / 'puromycin.csv')


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def path(self, name):
        return str(self.tmp / name)

    def read_json(self, name):
        return json.loads((self.tmp / name).read_text())


class TestParsing(unittest.TestCase):
    """Test argument helpers and validation."""

    def test_points(self):
        """Test ';' separated points."""
        self.assertEqual(parse_points("100,350,30;251,294,41.5"), [[100.0, 350.0, 30.0], [251.0, 294.0, 41.5]])

    def test_grid(self):
        """Test lo:hi:n grids."""
        self.assertEqual(parse_grid("0:1:3").tolist(), [0.0, 0.5, 1.0])
        with self.assertRaises(ValueError):
            parse_grid("1:0:3")

    def test_required_fields(self):
        """Test per-command required options."""
        with self.assertRaises(ValueError):
            RunConfig(command='efficiency', theta0=[1.0, 0.1])
        config = RunConfig(command='efficiency', theta0="212.68,0.1", d_design="0.0846;1.1", dp_design="0.056;1.1")
        self.assertEqual(config.d_design, [[0.0846], [1.1]])
        with self.assertRaises(ValueError):
            RunConfig(command='fit', data='x.csv', bogus=1)


class TestFitCommand(CliTestCase):
    """Test fit."""

    def test_fit(self):
        """Test estimates and the ellipse boundary file."""
        status = main(['fit', '--data', PUROMYCIN, '--out', self.path('fit.json'),
                       '--ellipse-level', '0.95', '--csv', self.path('ellipse.csv')])
        self.assertEqual(status, EXIT_OK)
        result = self.read_json('fit.json')
        self.assertAlmostEqual(result['estimates'][0], 212.68, delta=0.5)
        self.assertAlmostEqual(result['estimates'][1], 0.064, delta=0.001)
        self.assertEqual(result['model'], 'michaelis-menten')
        self.assertEqual(result['ellipse']['level'], 0.95)
        boundary = pd.read_csv(self.path('ellipse.csv'))
        self.assertEqual(list(boundary.columns), ['theta1', 'theta2'])
        self.assertEqual(len(boundary), 200)

    def test_missing_data(self):
        """Test a missing --data is a usage error and writes nothing."""
        status = main(['fit', '--out', self.path('fit.json')])
        self.assertEqual(status, EXIT_USAGE)
        self.assertFalse((self.tmp / 'fit.json').exists())

    def test_unknown_model(self):
        """Test an unknown model name is a usage error."""
        status = main(['fit', '--model', 'gompertz', '--data', PUROMYCIN, '--out', self.path('fit.json')])
        self.assertEqual(status, EXIT_USAGE)

    def test_missing_config(self):
        """Test an explicit configuration path must exist."""
        status = main(['--config', self.path('none.yaml'), 'fit', '--data', PUROMYCIN])
        self.assertEqual(status, EXIT_USAGE)

    def test_metrics_file(self):
        """Test counters are written on exit."""
        status = main(['--metrics-file', self.path('metrics.prom'), 'fit', '--data', PUROMYCIN,
                       '--out', self.path('fit.json')])
        self.assertEqual(status, EXIT_OK)
        self.assertIn('optidesign_fits_total', (self.tmp / 'metrics.prom').read_text())


class TestSensitivityCommand(CliTestCase):
    """Test sens."""

    def test_csv_layout(self):
        """Test header and metadata."""
        status = main(['sens', '--data', PUROMYCIN, '--out', self.path('sens.csv'),
                       '--meta', self.path('sens.json')])
        self.assertEqual(status, EXIT_OK)
        header = (self.tmp / 'sens.csv').read_text().splitlines()[0]
        self.assertEqual(header, 'row,v_1,v_2,p_1,p_2,q_1,q_2')
        self.assertEqual(self.read_json('sens.json')['residual_mode'], 'observed')


class TestDesignCommands(CliTestCase):
    """Test design-init, design-seq and efficiency."""

    def test_design_init(self):
        """Test the D starting design."""
        status = main(['design-init', '--theta0', '212.68,0.1', '--criterion', 'd',
                       '--region', '0:1.1', '--grid', '20', '--out', self.path('init.json')])
        self.assertEqual(status, EXIT_OK)
        result = self.read_json('init.json')
        low, high = sorted(point[0] for point in result['support_points'])
        self.assertAlmostEqual(low, 0.0846, delta=0.005)
        self.assertAlmostEqual(high, 1.1, delta=1e-6)
        self.assertEqual(result['kind'], 'initial')

    def test_design_seq_dp(self):
        """Test the D_P thirteenth run."""
        status = main(['design-seq', '--criterion', 'dp', '--data', PUROMYCIN, '--region', '0.001:1.1',
                       '--theta', '212.68,0.1', '--residual-mode', 'zero', '--out', self.path('seq.json')])
        self.assertEqual(status, EXIT_OK)
        result = self.read_json('seq.json')
        self.assertAlmostEqual(result['new_point'][0], 0.05116, delta=0.003)
        self.assertEqual(result['criterion_kind'], 'D_P')
        self.assertEqual(result['selection'], 'local')
        self.assertAlmostEqual(result['global_points'][0][0], 1.1, delta=1e-6)
        self.assertIn('estimates', result['fit'])

    def test_design_seq_allow_replicates(self):
        """Test the repeated 1.1 run comes back when repeats are allowed."""
        status = main(['design-seq', '--data', PUROMYCIN, '--region', '0.001:1.1', '--theta', '212.68,0.1',
                       '--allow-replicates', '--out', self.path('rep.json')])
        self.assertEqual(status, EXIT_OK)
        result = self.read_json('rep.json')
        self.assertAlmostEqual(result['new_point'][0], 1.1, delta=1e-6)
        self.assertEqual(result['selection'], 'global')

    def test_efficiency(self):
        """Test both interpretation modes are reported."""
        status = main(['efficiency', '--theta0', '212.68,0.1', '--d-design', '0.0846;1.1',
                       '--dp-design', '0.056;1.1', '--out', self.path('eff.json')])
        self.assertEqual(status, EXIT_OK)
        result = self.read_json('eff.json')
        self.assertEqual(result['default_mode'], 'literal')
        self.assertAlmostEqual(result['reports']['same-matrix']['d_eff'], 95.0, delta=2.0)
        self.assertGreaterEqual(result['reports']['literal']['d_eff'], 100.0)


class TestSimulateCommand(CliTestCase):
    """Test simulate."""

    def write_plan(self, name, point):
        (self.tmp / name).write_text(json.dumps({'new_point': [point], 'n_sims': 10, 'seed': 5}))
        return self.path(name)

    def test_simulate_with_comparison(self):
        """Test report JSON, per-simulation CSV and the paired comparison."""
        status = main(['simulate', '--plan', self.write_plan('dp.json', 0.05116),
                       '--compare', self.write_plan('d.json', 0.0747),
                       '--out', self.path('report.json'), '--csv', self.path('sims.csv')])
        self.assertEqual(status, EXIT_OK)
        report = self.read_json('report.json')
        self.assertEqual(report['n_sims'], 10)
        self.assertEqual(report['plan']['label'], 'dp')
        self.assertEqual(report['comparison']['b'], 'd')
        self.assertEqual(len(pd.read_csv(self.path('sims.csv'))), 10)

    def test_missing_plan(self):
        """Test a plan path that does not exist."""
        status = main(['simulate', '--plan', self.path('none.json'), '--out', self.path('report.json')])
        self.assertEqual(status, EXIT_USAGE)

    def test_plan_unknown_field(self):
        """Test plan files are validated."""
        (self.tmp / 'bad.json').write_text(json.dumps({'new_point': [0.1], 'colour': 'red'}))
        self.assertEqual(main(['simulate', '--plan', self.path('bad.json')]), EXIT_USAGE)


class TestContourCommand(CliTestCase):
    """Test contour."""

    def test_pairs_grid(self):
        """Test the unconditional grid and its metadata."""
        status = main(['contour', '--data', PUROMYCIN, '--grid1', '200:225:5', '--grid2', '0.05:0.08:4',
                       '--out', self.path('grid.csv'), '--meta', self.path('grid.json')])
        self.assertEqual(status, EXIT_OK)
        frame = pd.read_csv(self.path('grid.csv'))
        self.assertEqual(list(frame.columns), ['theta1', 'theta2', 'sse'])
        self.assertEqual(len(frame), 20)
        meta = self.read_json('grid.json')
        self.assertEqual(meta['mode'], 'unconditional-pairs')
        self.assertGreater(meta['contour_sse'], meta['sse'])

    def test_profile_trace(self):
        """Test a one-parameter profile trace."""
        status = main(['contour', '--data', PUROMYCIN, '--param', '2', '--grid1', '0.05:0.08:4',
                       '--out', self.path('trace.csv')])
        self.assertEqual(status, EXIT_OK)
        frame = pd.read_csv(self.path('trace.csv'))
        self.assertEqual(list(frame.columns), ['theta2', 'theta1', 'sse', 'converged'])
        self.assertEqual(len(frame), 4)

    def test_param_out_of_range(self):
        """Test --param beyond k."""
        status = main(['contour', '--data', PUROMYCIN, '--param', '3', '--grid1', '0.05:0.08:4',
                       '--out', self.path('trace.csv')])
        self.assertEqual(status, EXIT_USAGE)


if __name__ == '__main__':
    unittest.main()
