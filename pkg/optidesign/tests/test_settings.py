"""
Tests for configuration loading and logging setup
"""

import logging
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from optidesign.errors import ConfigurationError
from optidesign.log import configure_logging
from optidesign.settings import DEFAULT_CONFIG_PATH, Settings, expand_placeholders, load_settings

_ENV_KEYS = ('OPTIDESIGN_GRID_POINTS', 'OPTIDESIGN_WORKERS', 'OPTIDESIGN_SEED', 'OPTIDESIGN_FIXTURES',
             'OPTIDESIGN_LOG_LEVEL', 'OPTIDESIGN_LOG_FORMAT', 'OPTIDESIGN_METRICS_FILE')


def _clean_environment():
    return {key: value for key, value in os.environ.items() if key not in _ENV_KEYS}


class TestLoadSettings(unittest.TestCase):
    """Test the YAML configuration layer."""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, text):
        path = self.tmp / 'config.yaml'
        path.write_text(text)
        return path

    def test_packaged_defaults(self):
        """Test the packaged file matches the model defaults."""
        self.assertTrue(DEFAULT_CONFIG_PATH.exists())
        with patch.dict(os.environ, _clean_environment(), clear=True):
            settings = load_settings()
        self.assertEqual(settings.design.grid_points, 50)
        self.assertEqual(settings.estimation.ftol, 1e-12)
        self.assertEqual(settings.sensitivity.singular_condition, 1e12)
        self.assertEqual(settings.simulation.seed, 20240101)
        self.assertIsNone(settings.fixtures.directory)
        self.assertIsNone(settings.metrics.textfile)
        self.assertEqual(settings.logging.format, 'json')

    def test_environment_override(self):
        """Test placeholders pick up the environment."""
        env = dict(_clean_environment(), OPTIDESIGN_GRID_POINTS='11', OPTIDESIGN_WORKERS='4',
                   OPTIDESIGN_FIXTURES='/data/fixtures')
        with patch.dict(os.environ, env, clear=True):
            settings = load_settings()
        self.assertEqual(settings.design.grid_points, 11)
        self.assertEqual(settings.design.workers, 4)
        self.assertEqual(settings.simulation.workers, 4)
        self.assertEqual(settings.fixtures.directory, '/data/fixtures')

    def test_missing_explicit_path(self):
        """Test a named file must exist."""
        with self.assertRaises(ConfigurationError):
            load_settings(self.tmp / 'absent.yaml')

    def test_unknown_key(self):
        """Test unknown keys are rejected."""
        with self.assertRaises(ConfigurationError) as ctx:
            load_settings(self.write("design:\n  grid_pionts: 10\n"))
        self.assertIn('grid_pionts', str(ctx.exception))

    def test_invalid_value(self):
        """Test range validation."""
        with self.assertRaises(ConfigurationError):
            load_settings(self.write("design:\n  grid_points: 1\n"))

    def test_not_a_mapping(self):
        """Test the top level must be a mapping."""
        with self.assertRaises(ConfigurationError):
            load_settings(self.write("- a\n- b\n"))

    def test_partial_file(self):
        """Test omitted sections keep their defaults."""
        settings = load_settings(self.write("simulation:\n  n_sims: 50\n"))
        self.assertEqual(settings.simulation.n_sims, 50)
        self.assertEqual(settings.design, Settings().design)

    def test_no_file_uses_environment(self):
        """Test defaults plus environment when no file exists."""
        env = dict(_clean_environment(), OPTIDESIGN_LOG_LEVEL='DEBUG')
        with patch('optidesign.settings.DEFAULT_CONFIG_PATH', self.tmp / 'absent.yaml'):
            with patch.dict(os.environ, env, clear=True):
                settings = load_settings()
        self.assertEqual(settings.logging.level, 'DEBUG')
        self.assertEqual(settings.design.grid_points, 50)


class TestPlaceholders(unittest.TestCase):
    """Test ${VAR:-default} expansion."""

    def test_nested(self):
        """Test dicts, lists and typed re-parsing."""
        with patch.dict(os.environ, {'OPTIDESIGN_TEST_N': '7'}):
            tree = expand_placeholders({'a': ['${OPTIDESIGN_TEST_N:-1}', 'plain'], 'b': {'c': '${OPTIDESIGN_TEST_UNSET:-2.5}'}})
        self.assertEqual(tree, {'a': [7, 'plain'], 'b': {'c': 2.5}})

    def test_empty_default(self):
        """Test an empty default becomes null."""
        with patch.dict(os.environ, _clean_environment(), clear=True):
            self.assertIsNone(expand_placeholders('${OPTIDESIGN_FIXTURES:-}'))

    def test_non_strings_untouched(self):
        """Test numbers pass through."""
        self.assertEqual(expand_placeholders({'x': 3, 'y': None}), {'x': 3, 'y': None})


class TestLogging(unittest.TestCase):
    """Test logging setup."""

    def test_level_and_handler(self):
        """Test a single stderr handler at the requested level."""
        configure_logging('WARNING', 'console')
        root = logging.getLogger()
        self.assertEqual(root.level, logging.WARNING)
        self.assertEqual(len(root.handlers), 1)
        configure_logging()
        self.assertEqual(root.level, logging.INFO)


if __name__ == '__main__':
    unittest.main()
