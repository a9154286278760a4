#!/usr/bin/env python3

"""
Tests for the stochastic zeroth-order oracle and Gaussian-smoothing estimators
"""

import os
import sys
import unittest

import numpy as np

# Add the parent directory to the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from problems import make_sigmoid_log  # noqa: E402
from szo import (COUPLING_SHARED, DomainError, OracleSpec, StochasticOracle, SzoError,  # noqa: E402
                 UnsupportedKind, estimate, evaluate, smoothed_reference, smoothing_bias_bound,
                 sigma_tilde_sq, variance_bound)


def half_square(z):
    return 0.5 * np.sum(z * z, axis=-1)


class TestEvaluate(unittest.TestCase):

    def test_noiseless_value(self):
        value = evaluate(lambda z: np.sum(z * z, axis=-1), np.array([1.0, 2.0]), np.random.default_rng(0))
        self.assertEqual(value, 5.0)

    def test_noise_statistics(self):
        draws = 10 ** 6
        values = evaluate(lambda z: np.zeros(z.shape[:-1]), np.zeros((draws, 2)),
                          np.random.default_rng(1), noise_std=0.01)
        self.assertLess(abs(values.mean()), 4 * 0.01 / np.sqrt(draws))
        self.assertAlmostEqual(values.std(), 0.01, delta=1e-4)

    def test_same_stream_same_value(self):
        first = evaluate(half_square, np.ones(3), np.random.default_rng(7), noise_std=0.1)
        second = evaluate(half_square, np.ones(3), np.random.default_rng(7), noise_std=0.1)
        self.assertEqual(first, second)

    def test_domain_error(self):
        with np.errstate(invalid='ignore', divide='ignore'):
            with self.assertRaises(DomainError):
                evaluate(lambda z: np.log(z[..., 0]), np.array([-1.0]), np.random.default_rng(0))


class TestEstimate(unittest.TestCase):

    def test_single_sample_at_origin(self):
        mu = 0.3
        spec = OracleSpec(smoothing=mu, batch=1, dim=2)
        sample = estimate(half_square, np.zeros(2), spec, np.random.default_rng(5))
        phi = np.random.default_rng(5).standard_normal((1, 2))[0]
        np.testing.assert_allclose(sample.value, 0.5 * mu * (phi @ phi) * phi, rtol=1e-12)
        self.assertEqual(sample.evals, 2)

    def test_evals_count(self):
        spec = OracleSpec(smoothing=0.1, batch=17, dim=3)
        self.assertEqual(estimate(half_square, np.zeros(3), spec, np.random.default_rng(0)).evals, 34)

    def test_linear_mean(self):
        c = np.array([1.0, 2.0])
        batch = 10 ** 5
        spec = OracleSpec(smoothing=0.5, batch=batch, dim=2)
        value = estimate(lambda z: z @ c, np.array([0.3, -0.2]), spec, np.random.default_rng(2)).value
        # per-coordinate variance of (c'phi) phi_k is ||c||^2 + c_k^2
        stderr = np.sqrt((c @ c + c ** 2) / batch)
        self.assertTrue(np.all(np.abs(value - c) <= 5 * stderr))

    def test_quadratic_mean(self):
        batch = 10 ** 5
        spec = OracleSpec(smoothing=0.1, batch=batch, dim=2)
        value = estimate(half_square, np.array([1.0, 0.0]), spec, np.random.default_rng(3)).value
        np.testing.assert_allclose(value, [1.0, 0.0], atol=0.05)

    def test_unbiased_against_smoothed_reference(self):
        mu, batch, reps = 0.1, 10, 10 ** 4
        z = np.array([1.0, 0.0])
        spec = OracleSpec(smoothing=mu, batch=batch, grad_bound=1.0, smoothness=1.0, dim=2)
        rng = np.random.default_rng(4)
        samples = np.stack([estimate(half_square, z, spec, rng).value for _ in range(reps)])
        _, grad = smoothed_reference('quadratic', {'P': np.eye(2)}, z, mu)
        deviation = np.abs(samples.mean(axis=0) - grad)
        self.assertTrue(np.all(deviation <= 4 * np.sqrt(variance_bound(spec) / reps)))

    def test_empirical_variance_below_bound(self):
        mu, reps = 0.1, 10 ** 4
        z = np.array([1.0, 0.0])
        for batch in (1, 10, 100):
            # K = sup ||grad psi|| at the sampled point z
            spec = OracleSpec(smoothing=mu, batch=batch, grad_bound=1.0, smoothness=1.0, dim=2)
            rng = np.random.default_rng(batch)
            errors = [np.sum((estimate(half_square, z, spec, rng).value - z) ** 2) for _ in range(reps)]
            self.assertLessEqual(np.mean(errors), variance_bound(spec), msg=f"J={batch}")

    def test_smoothing_bias_on_sigmoid_log(self):
        problem = make_sigmoid_log(1, seed=0)
        mu, batch = 0.1, 2 * 10 ** 5
        z = np.array([0.5])
        spec = OracleSpec(smoothing=mu, batch=batch, dim=1)
        value = estimate(problem.local(0), z, spec, np.random.default_rng(6)).value
        slack = 5 * 3 * problem.grad_bounds[0] / np.sqrt(batch)
        bound = smoothing_bias_bound(problem.smoothness[0], mu, 1) + slack
        self.assertLessEqual(np.linalg.norm(value - problem.local_grad(0, z)), bound)

    def test_shared_coupling_cancels_noise(self):
        z = np.array([0.4, -1.2, 2.0])
        clean = OracleSpec(smoothing=0.05, batch=8, dim=3)
        shared = OracleSpec(noise_std=0.01, smoothing=0.05, batch=8, noise_coupling=COUPLING_SHARED, dim=3)
        a = estimate(half_square, z, clean, np.random.default_rng(9)).value
        b = estimate(half_square, z, shared, np.random.default_rng(9)).value
        np.testing.assert_array_equal(a, b)

    def test_independent_coupling_adds_noise(self):
        z = np.array([0.4, -1.2, 2.0])
        clean = OracleSpec(smoothing=0.05, batch=8, dim=3)
        noisy = OracleSpec(noise_std=0.01, smoothing=0.05, batch=8, dim=3)
        a = estimate(half_square, z, clean, np.random.default_rng(9)).value
        b = estimate(half_square, z, noisy, np.random.default_rng(9)).value
        self.assertFalse(np.array_equal(a, b))

    def test_spec_validation(self):
        with self.assertRaises(SzoError):
            OracleSpec(smoothing=0.0)
        with self.assertRaises(SzoError):
            OracleSpec(batch=0)
        with self.assertRaises(SzoError):
            OracleSpec(noise_std=-1.0)
        with self.assertRaises(SzoError):
            OracleSpec(noise_coupling='sometimes')


class TestBounds(unittest.TestCase):

    def test_variance_bound_substitution(self):
        spec = OracleSpec(noise_std=0.01, smoothing=0.1, batch=1, grad_bound=1.0, smoothness=1.0, dim=2)
        self.assertAlmostEqual(variance_bound(spec), 4.0804, places=12)

    def test_variance_bound_scales_with_batch(self):
        spec = OracleSpec(noise_std=0.01, smoothing=0.1, batch=10, grad_bound=1.0, smoothness=1.0, dim=2)
        self.assertAlmostEqual(variance_bound(spec), sigma_tilde_sq(spec) / 10, places=15)

    def test_degenerate_bound(self):
        spec = OracleSpec(noise_std=0.0, smoothing=1e-300, batch=1, grad_bound=0.0, smoothness=1.0, dim=4)
        self.assertAlmostEqual(variance_bound(spec), 0.0, places=15)

    def test_smoothing_bias_bound(self):
        self.assertAlmostEqual(smoothing_bias_bound(2.0, 0.1, 1), 0.5 * 0.1 * 2.0 * 8.0)


class TestSmoothedReference(unittest.TestCase):

    def test_linear_unchanged(self):
        value, grad = smoothed_reference('linear', {'c': [1.0, 1.0]}, np.zeros(2), 0.5)
        self.assertEqual(value, 0.0)
        np.testing.assert_array_equal(grad, [1.0, 1.0])

    def test_quadratic_shift(self):
        value, grad = smoothed_reference('quadratic', {'P': np.eye(2)}, np.ones(2), 1.0)
        self.assertAlmostEqual(value, 2.0)
        np.testing.assert_array_equal(grad, [1.0, 1.0])

    def test_vanishing_smoothing(self):
        p = np.array([[2.0, 0.5], [0.5, 1.0]])
        z = np.array([0.3, -0.7])
        value, grad = smoothed_reference('quadratic', {'P': p}, z, 1e-9)
        self.assertAlmostEqual(value, 0.5 * z @ p @ z, places=12)
        np.testing.assert_allclose(grad, p @ z)

    def test_unsupported_kind(self):
        with self.assertRaises(UnsupportedKind):
            smoothed_reference('cubic', {}, np.zeros(1), 0.1)


class TestStochasticOracle(unittest.TestCase):

    def test_counts_calls(self):
        oracle = StochasticOracle(OracleSpec(smoothing=0.1, batch=4, dim=2), seed=1)
        oracle.estimate(half_square, np.zeros(2), agent=0, iteration=0)
        oracle.estimate(half_square, np.zeros(2), agent=1, iteration=0, batch=1)
        oracle.evaluate(half_square, np.zeros(2), agent=0, iteration=1)
        self.assertEqual(oracle.calls, 8 + 2 + 1)

    def test_streams_independent_of_call_order(self):
        spec = OracleSpec(smoothing=0.1, batch=3, noise_std=0.01, dim=2)
        z = np.array([0.5, 0.1])
        forward = StochasticOracle(spec, seed=11, trial=2)
        backward = StochasticOracle(spec, seed=11, trial=2)
        a0 = forward.estimate(half_square, z, agent=0, iteration=5)
        a1 = forward.estimate(half_square, z, agent=1, iteration=5)
        b1 = backward.estimate(half_square, z, agent=1, iteration=5)
        b0 = backward.estimate(half_square, z, agent=0, iteration=5)
        np.testing.assert_array_equal(a0, b0)
        np.testing.assert_array_equal(a1, b1)
        self.assertFalse(np.array_equal(a0, a1))

    def test_trials_use_distinct_streams(self):
        spec = OracleSpec(smoothing=0.1, batch=3, dim=2)
        a = StochasticOracle(spec, seed=11, trial=0).estimate(half_square, np.ones(2), agent=0, iteration=0)
        b = StochasticOracle(spec, seed=11, trial=1).estimate(half_square, np.ones(2), agent=0, iteration=0)
        self.assertFalse(np.array_equal(a, b))


if __name__ == '__main__':
    unittest.main()
