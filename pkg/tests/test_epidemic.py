"""Unit tests for epidemic.py file."""

import csv
import os
import tempfile
import unittest

import numpy as np
from scipy.stats import chisquare

from epi_denoise.bounds import l1_risk_bound
from epi_denoise.epidemic import (
    check_params,
    evolution_operator,
    expected_infections,
    forecast,
    forecast_error_bound,
    lipschitz_constant,
    patient_zero_state,
    sample_mask,
    sample_observations,
    simulate,
    sir_step,
    sis_step,
    validate_params,
    write_observations_csv,
    write_trajectory_csv,
)
from epi_denoise.errors import AssumptionViolation
from epi_denoise.graph import contact_weights, generate_graph
from epi_denoise.model_objects import EpidemicParams, EpidemicState, ObservationSet
from _graphs_for_tests import path_graph


def _row_sums(params):
    return np.asarray(params.omega.sum(axis=1)).reshape(-1)


def _random_valid_params(graph, rng):
    """Per-node rates that satisfy gamma < 1 and beta * row sum < 1."""
    omega = graph.weight_matrix
    row_sums = np.asarray(omega.sum(axis=1)).reshape(-1)
    beta = rng.uniform(0.0, 0.999, size=graph.n) / np.maximum(row_sums, 1e-12)
    gamma = rng.uniform(0.0, 0.999, size=graph.n)
    return EpidemicParams(beta, gamma, omega)


class TestParams(unittest.TestCase):
    """Unit tests for validate_params and check_params."""

    def test_valid(self):
        """Test that contact weights with beta = 0.5 are well posed."""
        graph = contact_weights(generate_graph("knn", 40, seed=0, k=4))
        params = EpidemicParams.from_graph(graph, 0.5, 0.1)
        self.assertTrue(validate_params(params).ok)
        self.assertTrue(check_params(params).ok)

    def test_violations_sorted_worst_first(self):
        """Test that violations list node, quantity and value, largest first."""
        beta, gamma = [0.2, 0.6, 0.2], [0.1, 1.5, 1.0]
        params = EpidemicParams.from_graph(path_graph(3), beta, gamma)
        report = validate_params(params)
        self.assertFalse(report.ok)
        self.assertEqual(
            report.violations,
            [(1, "gamma", 1.5), (1, "beta*row_sum", 1.2), (2, "gamma", 1.0)],
        )

    def test_check_raises_or_warns(self):
        """Test that check_params raises unless unchecked, then logs a warning."""
        params = EpidemicParams.from_graph(path_graph(3), 0.9, 0.1)
        with self.assertRaises(AssumptionViolation):
            check_params(params)
        with self.assertLogs("epi_denoise.epidemic", level="WARNING"):
            report = check_params(params, unchecked=True)
        self.assertFalse(report.ok)

    def test_scalar_rates_broadcast(self):
        """Test that scalar beta and gamma are broadcast to every node."""
        params = EpidemicParams.from_graph(path_graph(4), 0.3, 0.2)
        self.assertEqual(params.beta.tolist(), [0.3] * 4)
        self.assertEqual(params.n, 4)


class TestDynamics(unittest.TestCase):
    """Unit tests for the SIS and SIR updates."""

    def test_sis_step_two_nodes(self):
        """Test one SIS step from (1, 0) on a single unit edge."""
        params = EpidemicParams.from_graph(path_graph(2), 0.5, 0.1)
        state = sis_step(EpidemicState([1.0, 0.0]), params)
        np.testing.assert_allclose(state.p, [0.9, 0.5])

    def test_state_stays_in_unit_interval(self):
        """Test 1000 valid parameter sets x 100 steps keep every state in [0, 1]."""
        rng = np.random.default_rng(0)
        graphs = [
            contact_weights(generate_graph("knn", 30, seed=seed, k=3))
            for seed in range(10)
        ]
        for trial in range(1000):
            graph = graphs[trial % len(graphs)]
            params = _random_valid_params(graph, rng)
            start = EpidemicState(rng.uniform(size=graph.n))
            for state in simulate(start, params, 100):
                self.assertGreaterEqual(state.p.min(), 0.0)
                self.assertLessEqual(state.p.max(), 1.0)

    def test_invalid_params_are_not_hidden(self):
        """Test that leaving [0, 1] raises, and clips with a warning only on request."""
        params = EpidemicParams.from_graph(path_graph(2), 0.0, 1.5)
        start = EpidemicState([1.0, 0.0])
        with self.assertRaises(AssumptionViolation):
            sis_step(start, params)
        with self.assertRaises(AssumptionViolation):
            simulate(start, params, 3, model="sir")
        with self.assertLogs("epi_denoise.epidemic", level="WARNING"):
            trajectory = simulate(start, params, 3, clip=True)
        np.testing.assert_array_equal(trajectory[1].p, [0.0, 0.0])

    def test_operator_matches_step(self):
        """Test that O(p) p equals the SIS step."""
        graph = contact_weights(generate_graph("knn", 50, seed=1, k=4))
        params = EpidemicParams.from_graph(graph, 0.5, 0.1)
        p = np.random.default_rng(1).uniform(size=50)
        np.testing.assert_allclose(
            evolution_operator(p, params) @ p, sis_step(EpidemicState(p), params).p
        )

    def test_sir_conserves_mass(self):
        """Test that p + r <= 1 and recovered mass never decreases."""
        graph = contact_weights(generate_graph("knn", 60, seed=2, k=4))
        params = EpidemicParams.from_graph(graph, 0.6, 0.2)
        trajectory = simulate(patient_zero_state(60, index=0), params, 30, model="sir")
        self.assertEqual(len(trajectory), 31)
        for before, after in zip(trajectory, trajectory[1:]):
            self.assertTrue(np.all(after.p + after.r <= 1.0 + 1e-12))
            self.assertTrue(np.all(after.r >= before.r - 1e-12))

    def test_sir_step_recovery(self):
        """Test r' = r + gamma p on an isolated infection."""
        params = EpidemicParams.from_graph(path_graph(2), 0.0, 0.25)
        state = sir_step(EpidemicState([1.0, 0.0]), params)
        np.testing.assert_allclose(state.p, [0.75, 0.0])
        np.testing.assert_allclose(state.r, [0.25, 0.0])

    def test_simulate_zero_steps(self):
        """Test that zero steps return only the initial state."""
        params = EpidemicParams.from_graph(path_graph(3), 0.3, 0.1)
        start = patient_zero_state(3, index=1)
        trajectory = simulate(start, params, 0)
        self.assertEqual(len(trajectory), 1)
        self.assertIs(trajectory[0], start)

    def test_simulate_rejects_unknown_model(self):
        """Test that only sis and sir are accepted."""
        params = EpidemicParams.from_graph(path_graph(3), 0.3, 0.1)
        with self.assertRaises(ValueError):
            simulate(patient_zero_state(3, index=0), params, 2, model="seir")

    def test_epidemic_spreads_on_connected_graph(self):
        """Test that the expected infections rise from one patient zero."""
        graph = contact_weights(generate_graph("knn", 100, seed=3, k=5))
        params = EpidemicParams.from_graph(graph, 0.5, 0.1)
        trajectory = simulate(patient_zero_state(100, index=5), params, 30)
        self.assertGreater(expected_infections(trajectory[-1].p), 1.0)


class TestPatientZero(unittest.TestCase):
    """Unit tests for patient_zero_state."""

    def test_given_index(self):
        """Test the indicator vector of a given node."""
        self.assertEqual(patient_zero_state(4, index=2).p.tolist(), [0, 0, 1, 0])

    def test_errors(self):
        """Test out-of-range index and missing seed."""
        with self.assertRaises(IndexError):
            patient_zero_state(4, index=4)
        with self.assertRaises(ValueError):
            patient_zero_state(4)

    def test_uniform_draw(self):
        """Test that seeded draws are uniform over the nodes (chi-square)."""
        n = 10
        counts = np.zeros(n)
        for seed in range(2000):
            counts += patient_zero_state(n, seed=seed).p
        self.assertEqual(counts.sum(), 2000)
        self.assertGreater(chisquare(counts).pvalue, 1e-3)

    def test_seed_reproducible(self):
        """Test that the same seed picks the same node."""
        first = patient_zero_state(50, seed=7).p
        second = patient_zero_state(50, seed=7).p
        np.testing.assert_array_equal(first, second)


class TestForecast(unittest.TestCase):
    """Unit tests for forecasting and its error bound."""

    def setUp(self):
        """Create a weighted graph and valid parameters."""
        self.graph = contact_weights(generate_graph("knn", 60, seed=4, k=4))
        self.params = EpidemicParams.from_graph(self.graph, 0.5, 0.1)

    def test_horizon_zero(self):
        """Test that horizon 0 returns the estimate itself."""
        p = np.random.default_rng(2).uniform(size=60)
        np.testing.assert_array_equal(forecast(p, self.params, 0), p)

    def test_matches_simulation(self):
        """Test that forecasting equals simulating from the same state."""
        p = np.random.default_rng(3).uniform(size=60)
        trajectory = simulate(EpidemicState(p), self.params, 3)
        np.testing.assert_allclose(forecast(p, self.params, 3), trajectory[-1].p)

    def test_lipschitz_constant_holds(self):
        """Test ||f(p) - f(q)||_1 <= L ||p - q||_1 for 1000 valid parameter sets."""
        rng = np.random.default_rng(4)
        constant = lipschitz_constant(self.params)
        row_sums = _row_sums(self.params)
        self.assertAlmostEqual(constant, 1.0 - 0.1 + 0.5 * row_sums.max())
        for _ in range(1000):
            params = _random_valid_params(self.graph, rng)
            constant = lipschitz_constant(params)
            p, q = rng.uniform(size=60), rng.uniform(size=60)
            gap = np.abs(forecast(p, params, 1) - forecast(q, params, 1))
            self.assertLessEqual(gap.sum(), constant * np.abs(p - q).sum() + 1e-10)

    def test_error_bound_scales_with_steps(self):
        """Test that the bound is the l1 risk bound times L^steps."""
        args = dict(
            rho=1.0, kappa_t=0.5, t_size=4, s=10, tv_off_support=1.0, tv_support_size=5
        )
        base = l1_risk_bound(
            n=60,
            rho=1.0,
            kappa_t=0.5,
            t_size=4,
            support_size=10,
            tv_off_support=1.0,
            tv_support_size=5,
            delta=0.05,
        )
        args.update(params=self.params, n=60, delta=0.05)
        at_zero = forecast_error_bound(**args, steps=0)
        at_two = forecast_error_bound(**args, steps=2)
        self.assertAlmostEqual(at_zero, base)
        self.assertAlmostEqual(at_two, base * lipschitz_constant(self.params) ** 2)
        with self.assertRaises(ValueError):
            forecast(np.zeros(60), self.params, -1)


class TestSampling(unittest.TestCase):
    """Unit tests for observation and mask sampling."""

    def test_deterministic_states(self):
        """Test that p in {0, 1} and alpha = 0 are observed exactly."""
        p = np.array([0.0, 1.0, 1.0, 0.0])
        np.testing.assert_array_equal(sample_observations(p, 0.0, seed=3), p)

    def test_frequencies(self):
        """Test the positive rate (1 - alpha) p + alpha on many nodes."""
        y = sample_observations(np.full(20000, 0.3), 0.0, seed=1)
        self.assertAlmostEqual(y.mean(), 0.3, delta=0.015)
        y = sample_observations(np.zeros(20000), 0.2, seed=2)
        self.assertAlmostEqual(y.mean(), 0.2, delta=0.015)

    def test_reproducible(self):
        """Test that a seed fixes the draw."""
        p = np.full(100, 0.5)
        np.testing.assert_array_equal(
            sample_observations(p, 0.1, seed=5), sample_observations(p, 0.1, seed=5)
        )

    def test_mask(self):
        """Test full observation and the observed fraction of a Bernoulli mask."""
        np.testing.assert_array_equal(sample_mask(np.ones(5), seed=0), np.ones(5))
        mask = sample_mask(np.full(20000, 0.6), seed=1)
        self.assertAlmostEqual(mask.mean(), 0.6, delta=0.015)
        with self.assertRaises(ValueError):
            sample_mask([0.0, 1.0], seed=0)

    def test_invalid_alpha(self):
        """Test that alpha must lie in [0, 1)."""
        with self.assertRaises(ValueError):
            sample_observations([0.5], 1.0, seed=0)


class TestCsvOutput(unittest.TestCase):
    """Unit tests for trajectory and observation CSV files."""

    def setUp(self):
        """Create a scratch directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_trajectory(self):
        """Test the header and one row per step, with r columns for SIR."""
        params = EpidemicParams.from_graph(path_graph(3), 0.3, 0.1)
        trajectory = simulate(patient_zero_state(3, index=0), params, 2, model="sir")
        path = os.path.join(self.tmp.name, "trajectory.csv")
        write_trajectory_csv(trajectory, path)
        with open(path, newline="", encoding="utf-8") as csv_file:
            rows = list(csv.reader(csv_file))
        self.assertEqual(rows[0], ["step", "p_0", "p_1", "p_2", "r_0", "r_1", "r_2"])
        self.assertEqual(len(rows), 4)
        self.assertEqual(float(rows[2][1]), trajectory[1].p[0])

    def test_observations(self):
        """Test one row per node with integer y and mask."""
        observations = ObservationSet(y=[1, 0, 1], mask=[1, 1, 0])
        path = os.path.join(self.tmp.name, "observations.csv")
        write_observations_csv(observations, path)
        with open(path, newline="", encoding="utf-8") as csv_file:
            rows = list(csv.reader(csv_file))
        expected = [
            ["node", "y", "mask"],
            ["0", "1", "1"],
            ["1", "0", "1"],
            ["2", "1", "0"],
        ]
        self.assertEqual(rows, expected)


if __name__ == "__main__":
    unittest.main()
