#!/usr/bin/env python3

"""
Tests for the RGF, ZO-GD and ZO-SGD comparison algorithms
"""

import os
import sys
import unittest

import numpy as np

# Add the parent directory to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from baselines import (KIND_RGF, KIND_ZO_GD, KIND_ZO_SGD, BaselineConfig, metropolis_weights,  # noqa: E402
                       rgf_step, run_rgf, run_zo_gd, run_zo_sgd, zo_gd_step, zo_sgd_step)
from graph import from_edges, random_geometric  # noqa: E402
from metrics import records_to_frame, value_at_budget  # noqa: E402
from problems import SparseQuadraticProblem, make_sigmoid_log, make_sparse_quadratic  # noqa: E402
from szo import StochasticOracle  # noqa: E402
from toy_problems import LinearProblem, zero_problem  # noqa: E402
import zone_s  # noqa: E402
from zone_m import ParameterError  # noqa: E402


def convex_quadratic(n_agents=3, dim_m=3, seed=0):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n_agents, dim_m, dim_m))
    gammas = raw @ np.transpose(raw, (0, 2, 1)) / dim_m + 0.5 * np.eye(dim_m)
    return SparseQuadraticProblem(gammas, rng.standard_normal((n_agents, dim_m)), ell=100.0)


class TestMetropolisWeights(unittest.TestCase):

    def test_single_edge(self):
        np.testing.assert_allclose(metropolis_weights(from_edges(2, 1, [(1, 2)])), [[0.5, 0.5], [0.5, 0.5]])

    def test_random_geometric_graph(self):
        topo = random_geometric(12, 1, 0.5, seed=2)
        weights = metropolis_weights(topo)
        np.testing.assert_array_equal(weights, weights.T)
        np.testing.assert_allclose(weights.sum(axis=1), 1.0, atol=1e-14)
        self.assertTrue(np.all(weights >= 0))
        edges = set(topo.edges)
        for i in range(12):
            for j in range(i + 1, 12):
                self.assertEqual(weights[i, j] > 0, (i, j) in edges)

    def test_second_eigenvalue_inside_unit_disc(self):
        for n_agents, radius in ((10, 0.5), (20, 0.5), (20, 0.6)):
            weights = metropolis_weights(random_geometric(n_agents, 1, radius, seed=1))
            moduli = np.sort(np.abs(np.linalg.eigvalsh(weights)))
            self.assertAlmostEqual(moduli[-1], 1.0, places=12)
            self.assertLess(moduli[-2], 1.0 - 1e-9)


class TestBaselineConfig(unittest.TestCase):

    def test_default_step_lengths(self):
        problem = make_sparse_quadratic(3, 2, ell=1.0, seed=0)
        gd = BaselineConfig(KIND_ZO_GD, horizon=10, mu=0.1)
        sgd = BaselineConfig(KIND_ZO_SGD, horizon=10, mu=0.1)
        self.assertAlmostEqual(gd.step_length(problem, 5), 1.0 / (4 * problem.l_sum * 6))
        self.assertAlmostEqual(sgd.step_length(problem, 5), 1.0 / (2 * problem.l_sum * 6))
        rgf = BaselineConfig(KIND_RGF, horizon=10, mu=0.1, stepsize=0.5)
        self.assertAlmostEqual(rgf.step_length(problem, 4), 0.25)
        self.assertAlmostEqual(BaselineConfig(KIND_RGF, horizon=10, mu=0.1).step_length(problem, 9), 1 / 3)

    def test_validation(self):
        with self.assertRaises(ParameterError):
            BaselineConfig('zo_adam', horizon=10, mu=0.1)
        with self.assertRaises(ParameterError):
            BaselineConfig(KIND_ZO_GD, horizon=10, mu=0.1, stepsize=0.0)
        self.assertEqual(BaselineConfig(KIND_ZO_SGD, horizon=10, mu=0.1, batch=50).batch, 1)


class TestRgf(unittest.TestCase):

    def setUp(self):
        self.topo = random_geometric(6, 2, 0.7, seed=1)
        self.weights = metropolis_weights(self.topo)
        self.cfg = BaselineConfig(KIND_RGF, horizon=5, mu=0.1, batch=2)

    def test_consensus_of_zero_problem_is_kept(self):
        problem = zero_problem(6, 2)
        oracle = StochasticOracle(self.cfg.oracle_spec(problem, 12), seed=0)
        z = np.tile(np.array([1.5, -0.4]), (6, 1))
        for r in range(1, 4):
            np.testing.assert_allclose(rgf_step(z, problem, self.weights, r, self.cfg, oracle), z, atol=1e-14)

    def test_rounds_are_one_based(self):
        problem = zero_problem(6, 2)
        oracle = StochasticOracle(self.cfg.oracle_spec(problem, 12), seed=0)
        with self.assertRaises(ValueError):
            rgf_step(np.zeros((6, 2)), problem, self.weights, 0, self.cfg, oracle)

    def test_oracle_calls(self):
        problem = make_sigmoid_log(6, seed=0)
        topo = random_geometric(6, 1, 0.7, seed=1)
        cfg = BaselineConfig(KIND_RGF, horizon=12, mu=0.1, batch=3, stride=4)
        result = run_rgf(problem, topo, cfg)
        self.assertEqual(result.trace[-1].oracle_calls, 12 * 6 * 2 * 3)
        self.assertEqual([r.iteration for r in result.trace], [0, 4, 8, 12])
        self.assertTrue(all(r.opt_gap is not None and r.psi is None for r in result.trace))


class TestCentralized(unittest.TestCase):

    def test_zo_gd_linear_mean(self):
        slopes = np.array([[1.0, -2.0], [0.5, 0.5], [-1.0, 3.0]])
        problem = LinearProblem(slopes)
        batch = 10 ** 4
        cfg = BaselineConfig(KIND_ZO_GD, horizon=1, mu=0.2, batch=batch, stepsize=0.1)
        oracle = StochasticOracle(cfg.oracle_spec(problem, 2), seed=4)
        x = np.array([0.3, -0.7])
        g = (x - zo_gd_step(x, problem, cfg, oracle, 1)) / 0.1
        variance = sum(c @ c + c ** 2 for c in slopes) / batch
        self.assertTrue(np.all(np.abs(g - slopes.sum(axis=0)) <= 5 * np.sqrt(variance)))
        self.assertEqual(oracle.calls, 3 * 2 * batch)

    def test_zo_sgd_unbiased(self):
        slopes = np.array([[1.0, 0.0], [0.0, 2.0], [-1.0, 1.0]])
        problem = LinearProblem(slopes)
        cfg = BaselineConfig(KIND_ZO_SGD, horizon=1, mu=0.2, stepsize=1.0)
        oracle = StochasticOracle(cfg.oracle_spec(problem, 2), seed=6)
        x = np.zeros(2)
        rounds = 2 * 10 ** 4
        samples = np.stack([x - zo_sgd_step(x, problem, cfg, oracle, r) for r in range(1, rounds + 1)])
        stderr = samples.std(axis=0) / np.sqrt(rounds)
        self.assertTrue(np.all(np.abs(samples.mean(axis=0) - slopes.sum(axis=0)) <= 5 * stderr))
        self.assertEqual(oracle.calls, 2 * rounds)

    def test_single_agent_sgd_matches_gd(self):
        problem = make_sigmoid_log(1, seed=3)
        gd = run_zo_gd(problem, BaselineConfig(KIND_ZO_GD, horizon=20, mu=0.1, batch=1, stepsize=0.05, seed=2))
        sgd = run_zo_sgd(problem, BaselineConfig(KIND_ZO_GD, horizon=20, mu=0.1, stepsize=0.05, seed=2))
        np.testing.assert_array_equal(gd.output, sgd.output)

    def test_iterates_feasible(self):
        problem = make_sparse_quadratic(4, 3, ell=0.5, seed=1)
        for runner in (run_zo_gd, run_zo_sgd):
            result = runner(problem, BaselineConfig(KIND_ZO_GD, horizon=40, mu=0.05, batch=4, stepsize=0.5))
            self.assertLessEqual(np.abs(result.output).sum(), 0.5 + 1e-12)

    def test_zo_gd_decreases_on_convex_quadratic(self):
        problem = convex_quadratic()
        cfg = BaselineConfig(KIND_ZO_GD, horizon=150, mu=1e-4, batch=200, stepsize=0.005, stride=30)
        psi = [r.psi for r in run_zo_gd(problem, cfg).trace]
        self.assertEqual(len(psi), 6)
        for before, after in zip(psi, psi[1:]):
            self.assertLess(after, before)

    def test_oracle_calls(self):
        problem = make_sparse_quadratic(5, 2, ell=1.0, seed=0)
        gd = run_zo_gd(problem, BaselineConfig(KIND_ZO_GD, horizon=10, mu=0.1, batch=3))
        sgd = run_zo_sgd(problem, BaselineConfig(KIND_ZO_SGD, horizon=10, mu=0.1))
        self.assertEqual(gd.trace[-1].oracle_calls, 10 * 5 * 2 * 3)
        self.assertEqual(sgd.trace[-1].oracle_calls, 2 * 10)
        self.assertTrue(all(r.psi is not None and r.opt_gap is None for r in gd.trace))

    def test_baseline_read_at_star_budget(self):
        problem = make_sparse_quadratic(3, 4, ell=1.0, seed=2)
        ours = zone_s.run(problem, zone_s.SnetConfig(horizon=6, batch=4, mu=0.1, smoothness=problem.smoothness,
                                                     stride=1))
        budget = ours.trace[-1].oracle_calls
        self.assertEqual(budget, 2 * 4 * 3 + 2 * 4 * 6)
        gd = run_zo_gd(problem, BaselineConfig(KIND_ZO_GD, horizon=6, mu=0.1, batch=4, stride=1))
        frame = records_to_frame(gd.trace)
        # 2JN calls per round: the budget lands exactly on round 3
        self.assertAlmostEqual(value_at_budget(frame, 'psi', budget), gd.trace[3].psi, places=12)
        self.assertEqual(gd.trace[3].oracle_calls, budget)


if __name__ == '__main__':
    unittest.main()
