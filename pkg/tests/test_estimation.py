"""Unit tests for estimation.py file."""

import unittest

import numpy as np

from epi_denoise.epidemic import patient_zero_state, sample_observations, simulate
from epi_denoise.estimation import (
    build_phi,
    compare_window_estimates,
    denoise_window,
    estimate_params,
    estimate_params_from_observations,
    reproductive_number,
)
from epi_denoise.graph import contact_weights, generate_graph
from epi_denoise.model_objects import (
    EpidemicParams,
    LambdaPolicy,
    ObservationSet,
    PhiSystem,
    SolverConfig,
)
from _graphs_for_tests import path_graph


class TestBuildPhi(unittest.TestCase):
    """Unit tests for build_phi."""

    def test_two_node_rows(self):
        """Test the rows [(1 - p_i)(omega p)_i, -p_i] and targets p' - p."""
        omega = path_graph(2).weight_matrix
        system = build_phi([[0.5, 0.0], [0.45, 0.25]], omega)
        np.testing.assert_allclose(system.phi, [[0.0, -0.5], [0.5, -0.0]])
        np.testing.assert_allclose(system.delta_p, [-0.05, 0.25])
        self.assertEqual(system.times_used, (0,))

    def test_shape(self):
        """Test n * (T - 1) rows for T states, given as EpidemicState objects."""
        graph = contact_weights(generate_graph("knn", 20, seed=0, k=3))
        params = EpidemicParams.from_graph(graph, 0.5, 0.1)
        trajectory = simulate(patient_zero_state(20, index=0), params, 4)
        system = build_phi(trajectory, graph.weight_matrix)
        self.assertEqual(system.phi.shape, (80, 2))
        self.assertEqual(system.delta_p.shape, (80,))
        self.assertEqual(system.times_used, (0, 1, 2, 3))

    def test_invalid(self):
        """Test that one state or a wrong length is rejected."""
        omega = path_graph(2).weight_matrix
        with self.assertRaises(ValueError):
            build_phi([[0.5, 0.0]], omega)
        with self.assertRaises(ValueError):
            build_phi([[0.5, 0.0], [0.5, 0.0, 0.0]], omega)


class TestEstimateParams(unittest.TestCase):
    """Unit tests for the least-squares rate estimate."""

    def test_recovers_rates_from_true_states(self):
        """Test exact recovery of beta = 0.5 and gamma = 0.1 without noise."""
        graph = contact_weights(generate_graph("knn", 100, seed=1, k=5))
        params = EpidemicParams.from_graph(graph, 0.5, 0.1)
        trajectory = simulate(patient_zero_state(100, index=3), params, 10)
        estimate = estimate_params(build_phi(trajectory, graph.weight_matrix))
        self.assertAlmostEqual(estimate.beta_hat, 0.5, places=8)
        self.assertAlmostEqual(estimate.gamma_hat, 0.1, places=8)
        self.assertAlmostEqual(estimate.r0_hat, 5.0, places=6)
        self.assertEqual(estimate.rank_flag, "full")
        self.assertLess(estimate.residual_norm, 1e-10)

    def test_all_zero_states_are_degenerate(self):
        """Test that an epidemic-free window gives no reproductive number."""
        omega = path_graph(3).weight_matrix
        estimate = estimate_params(build_phi([np.zeros(3)] * 4, omega))
        self.assertEqual(estimate.rank_flag, "degenerate")
        self.assertIsNone(estimate.r0_hat)

    def test_fully_infected_states_are_degenerate(self):
        """Test that p = 1 everywhere leaves only the gamma column."""
        omega = path_graph(3).weight_matrix
        estimate = estimate_params(build_phi([np.ones(3)] * 3, omega))
        self.assertEqual(estimate.rank_flag, "degenerate")
        self.assertIsNone(estimate.r0_hat)

    def test_empty_system(self):
        """Test that a system without rows is rejected."""
        system = PhiSystem(phi=np.zeros((0, 2)), delta_p=np.zeros(0), times_used=())
        with self.assertRaises(ValueError):
            estimate_params(system)

    def test_reproductive_number(self):
        """Test beta / gamma and the gamma > 0 requirement."""
        self.assertAlmostEqual(reproductive_number(0.5, 0.1), 5.0)
        with self.assertRaises(ValueError):
            reproductive_number(0.5, 0.0)


class TestFromObservations(unittest.TestCase):
    """Unit tests for estimating rates from test results."""

    def setUp(self):
        """Simulate an epidemic and draw one snapshot per step."""
        self.graph = contact_weights(generate_graph("knn", 80, seed=2, k=4))
        params = EpidemicParams.from_graph(self.graph, 0.5, 0.1)
        trajectory = simulate(patient_zero_state(80, index=0), params, 12)
        self.observations = [
            ObservationSet(
                y=sample_observations(state.p, 0.0, seed=step), mask=np.ones(80)
            )
            for step, state in enumerate(trajectory[-5:])
        ]

    def test_lambda_zero_matches_naive(self):
        """Test that lambda = 0 makes the denoised estimate equal the naive one."""
        policy = LambdaPolicy(kind="fixed", value=0.0)
        tv, naive = estimate_params_from_observations(
            self.observations, self.graph, self.graph.weight_matrix, policy
        )
        self.assertAlmostEqual(tv.beta_hat, naive.beta_hat, places=12)
        self.assertAlmostEqual(tv.gamma_hat, naive.gamma_hat, places=12)

    def test_denoised_estimate(self):
        """Test that a positive lambda returns finite rates for both methods."""
        policy = LambdaPolicy(kind="fixed", value=0.005)
        tv, naive = estimate_params_from_observations(
            self.observations, self.graph, self.graph.weight_matrix, policy
        )
        for estimate in (tv, naive):
            self.assertTrue(np.isfinite(estimate.beta_hat))
            self.assertTrue(np.isfinite(estimate.gamma_hat))
            self.assertIn(estimate.rank_flag, ("full", "degenerate"))

    def test_masked_snapshots(self):
        """Test that snapshots with unobserved nodes use the masked solver."""
        mask = np.ones(80)
        mask[::4] = 0.0
        masked = [ObservationSet(y=obs.y, mask=mask) for obs in self.observations]
        states, nonconverged = denoise_window(masked, self.graph, 0.01)
        self.assertEqual(len(states), 5)
        self.assertEqual(nonconverged, 0)
        for state in states:
            self.assertTrue(np.all((state >= 0) & (state <= 1)))

    def test_window_with_fixed_lambda(self):
        """Test that an explicit lambda matches the fixed policy and counts failures."""
        policy = LambdaPolicy(kind="fixed", value=0.005)
        omega = self.graph.weight_matrix
        expected, _ = estimate_params_from_observations(
            self.observations, self.graph, omega, policy
        )
        tv, naive, nonconverged = compare_window_estimates(
            self.observations, self.graph, omega, 0.005
        )
        self.assertEqual(tv, expected)
        self.assertEqual(nonconverged, 0)
        self.assertTrue(np.isfinite(naive.beta_hat))
        with self.assertLogs("epi_denoise.estimation", level="WARNING") as logs:
            _, _, nonconverged = compare_window_estimates(
                self.observations, self.graph, omega, 0.005, SolverConfig(max_iter=1)
            )
        self.assertEqual(nonconverged, 5)
        self.assertIn("5 of 5 window solves", logs.output[0])

    def test_needs_two_snapshots(self):
        """Test that a single snapshot is rejected."""
        policy = LambdaPolicy(kind="fixed", value=0.01)
        with self.assertRaises(ValueError):
            estimate_params_from_observations(
                self.observations[:1], self.graph, self.graph.weight_matrix, policy
            )


if __name__ == "__main__":
    unittest.main()
