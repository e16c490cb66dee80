"""Unit tests for parser.py file."""

import os
import tempfile
import unittest

from epi_denoise.errors import ConfigError
from epi_denoise.parser import ConfigParser, build_config, decode_value


class TestConfigParser(unittest.TestCase):
    """Unit tests for reading config files."""

    def setUp(self):
        """Create a scratch directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _write(self, name: str, text: str) -> str:
        path = os.path.join(self.tmp.name, name)
        with open(path, "w", encoding="utf-8") as config_file:
            config_file.write(text)
        return path

    def test_key_values(self):
        """Test comments, JSON values and bare strings."""
        path = self._write(
            "experiment.conf",
            "# small run\n"
            "graph_model = knn\n"
            'graph_params = {"k": 4}\n'
            "\n"
            "beta = [0.3, 0.5]\n"
            "gamma = 0.1\n"
            "fp_rescale = yes\n"
            "out = 'runs/denoise.csv'\n",
        )
        config = ConfigParser(path).config
        self.assertEqual(
            config,
            {
                "graph_model": "knn",
                "graph_params": {"k": 4},
                "beta": [0.3, 0.5],
                "gamma": 0.1,
                "fp_rescale": "yes",
                "out": "runs/denoise.csv",
            },
        )

    def test_json(self):
        """Test that a file starting with '{' is read as JSON."""
        path = self._write("experiment.json", '{"n": 200, "k0": [10, 20]}')
        self.assertEqual(ConfigParser(path).config, {"n": 200, "k0": [10, 20]})

    def test_invalid_json(self):
        """Test that broken JSON and non-objects raise ConfigError."""
        with self.assertRaises(ConfigError):
            ConfigParser(self._write("broken.json", '{"n": 200,'))

    def test_line_without_equals(self):
        """Test that a line without '=' raises ConfigError."""
        with self.assertRaises(ConfigError):
            ConfigParser(self._write("broken.conf", "n = 10\nbeta 0.5\n"))

    def test_missing_file(self):
        """Test that a missing config raises FileNotFoundError."""
        with self.assertRaises(FileNotFoundError):
            ConfigParser(os.path.join(self.tmp.name, "absent.conf"))

    def test_decode_value(self):
        """Test JSON decoding with a string fallback."""
        self.assertEqual(decode_value("true"), True)
        self.assertEqual(decode_value("[1, 2]"), [1, 2])
        self.assertEqual(decode_value('"quoted"'), "quoted")
        self.assertEqual(decode_value("plain text"), "plain text")


class TestBuildConfig(unittest.TestCase):
    """Unit tests for build_config."""

    def test_defaults(self):
        """Test the defaults of an empty config."""
        cfg = build_config("denoise")
        self.assertEqual(cfg.graph_model, "knn")
        self.assertEqual(cfg.graph_params, {"k": 5})
        self.assertEqual(cfg.n, 1000)
        self.assertEqual(cfg.beta, [0.5])
        self.assertEqual(cfg.k0, [30])
        self.assertEqual(cfg.lambda_policy.kind, "cv")
        self.assertEqual(cfg.format, "csv")

    def test_overrides_win_and_none_is_ignored(self):
        """Test that CLI values replace file values unless they are None."""
        cfg = build_config(
            "denoise",
            {"seed": 1, "replicates": 5},
            {"seed": 7, "replicates": None},
        )
        self.assertEqual(cfg.seed, 7)
        self.assertEqual(cfg.replicates, 5)
        self.assertEqual(cfg.lambda_policy.cv.seed, 7)

    def test_scalars_become_lists(self):
        """Test that a single beta or alpha is wrapped in a list."""
        cfg = build_config("false_positive", {"beta": 0.4, "alpha": 0.1, "k0": 12})
        self.assertEqual(cfg.beta, [0.4])
        self.assertEqual(cfg.alpha, [0.1])
        self.assertEqual(cfg.k0, [12])

    def test_bare_lambda_is_fixed(self):
        """Test that giving only 'lambda' selects the fixed policy."""
        policy = build_config("denoise", {"lambda": 0.02}).lambda_policy
        self.assertEqual(policy.kind, "fixed")
        self.assertEqual(policy.value, 0.02)

    def test_theory_policy(self):
        """Test the theory policy with delta and exact rho."""
        raw = {"lambda_policy": "theory", "delta": 0.1, "rho_mode": "exact"}
        policy = build_config("denoise", raw).lambda_policy
        self.assertEqual(policy.kind, "theory")
        self.assertEqual(policy.delta, 0.1)
        self.assertEqual(policy.rho_mode, "exact")

    def test_cv_settings(self):
        """Test the cross-validation keys."""
        raw = {"cv_grid": [0.001, 0.01], "cv_folds": 3, "holdout_fraction": 0.3}
        cv = build_config("denoise", raw).lambda_policy.cv
        self.assertEqual(cv.lambda_grid, (0.001, 0.01))
        self.assertEqual(cv.folds, 3)
        self.assertEqual(cv.holdout_fraction, 0.3)

    def test_graph_model_resets_params(self):
        """Test that choosing a model drops the default knn parameters."""
        cfg = build_config("denoise", {"graph_model": "star"})
        self.assertEqual(cfg.graph_params, {})
        cfg = build_config(
            "denoise", {"graph_model": "erdos_renyi", "graph_params": {"p": 0.01}}
        )
        self.assertEqual(cfg.graph_params, {"p": 0.01})

    def test_solver_settings(self):
        """Test that tol and max_iter reach the solver config."""
        cfg = build_config("denoise", {"tol": 1e-6, "max_iter": 200})
        self.assertEqual(cfg.solver.tol_primal, 1e-6)
        self.assertEqual(cfg.solver.tol_dual, 1e-6)
        self.assertEqual(cfg.solver.max_iter, 200)

    def test_booleans(self):
        """Test yes/no strings and real booleans."""
        cfg = build_config("params", {"noiseless": "yes", "shared_lambda": True})
        self.assertTrue(cfg.noiseless)
        self.assertTrue(cfg.shared_lambda)
        with self.assertRaises(ConfigError):
            build_config("params", {"noiseless": "maybe"})

    def test_invalid_values(self):
        """Test that every invalid value surfaces as ConfigError."""
        invalid = [
            {"unknown_key": 1},
            {"gamma": 1.0},
            {"alpha": [0.1, 1.0]},
            {"missing_fraction": 1.0},
            {"pi": [0.0]},
            {"window": 1},
            {"horizon": -1},
            {"replicates": 0},
            {"seed": -1},
            {"format": "xml"},
            {"workers": 0},
            {"graph_model": "torus"},
            {"graph_params": [1, 2]},
            {"n": 1},
            {"lambda_policy": "magic"},
            {"lambda_policy": "fixed"},
            {"lambda": -0.1},
            {"rho_mode": "approximate"},
            {"delta": 0.0},
            {"cv_grid": [0.1, 0.01]},
            {"max_iter": 0},
            {"beta": "fast"},
        ]
        for raw in invalid:
            with self.subTest(raw=raw):
                with self.assertRaises(ConfigError):
                    build_config("denoise", raw)

    def test_unknown_scenario(self):
        """Test that the scenario name is checked."""
        with self.assertRaises(ConfigError):
            build_config("simulate")


if __name__ == "__main__":
    unittest.main()
