import unittest

import numpy as np
import scipy.integrate
import scipy.stats

from phasesis.config import Settings
from phasesis.errors import FitError
from phasesis.fitting import FitOptions, FitTarget, em_hyper_erlang, fit_phase_type, hyper_erlang_moments, \
    l1_distance, match_moments, shape_allocations
from phasesis.models import PhaseType

FAST = FitOptions(samples=20_000)


def l1_against(phase_type, density, mean, points=2000, span=10.0):
    grid = np.linspace(0.0, span * mean, points)
    return scipy.integrate.trapezoid(np.abs(phase_type.pdf(grid) - density(grid)), grid)


class TestFitTarget(unittest.TestCase):
    def test_lognormal(self):
        target = FitTarget.lognormal(2.0, 4.0)
        self.assertAlmostEqual(target.mean, 2.0, places=12)
        np.testing.assert_allclose(target.moments(2), [2.0, 8.0], rtol=1e-10)
        self.assertFalse(target.is_empirical)

    def test_stratified_draw(self):
        target = FitTarget.from_distribution(scipy.stats.expon())
        draw = target.draw(1000)
        self.assertEqual(draw.size, 1000)
        self.assertTrue(np.all(np.diff(draw) > 0))
        np.testing.assert_array_equal(draw, target.draw(1000))

    def test_random_draw_needs_rng(self):
        target = FitTarget.from_distribution(scipy.stats.expon())
        with self.assertRaises(ValueError):
            target.draw(10, stratified=False)
        self.assertEqual(target.draw(10, np.random.default_rng(0), stratified=False).size, 10)

    def test_from_grid(self):
        grid = np.linspace(0, 20, 4001)
        target = FitTarget.from_grid(grid, np.exp(-grid))
        self.assertAlmostEqual(target.mean, 1.0, delta=1e-3)
        self.assertAlmostEqual(float(target.density(1.0)), np.exp(-1.0), delta=1e-5)
        with self.assertRaises(ValueError):
            FitTarget.from_grid(grid, 2 * np.exp(-grid))
        with self.assertRaises(ValueError):
            FitTarget.from_grid(grid[::-1], np.exp(-grid))

    def test_from_samples(self):
        samples = np.random.default_rng(0).exponential(1.0, 5000)
        target = FitTarget.from_samples(samples)
        self.assertTrue(target.is_empirical)
        self.assertAlmostEqual(target.mean, samples.mean())
        np.testing.assert_array_equal(target.draw(10), samples)
        self.assertEqual(float(target.density(-1.0)), 0.0)
        with self.assertRaises(ValueError):
            FitTarget.from_samples(samples[:999])
        with self.assertRaises(ValueError):
            FitTarget.from_samples(np.concatenate((samples, [-1.0])))


class TestStructure(unittest.TestCase):
    def test_shape_allocations(self):
        allocations = shape_allocations(3, 4)
        self.assertEqual(set(allocations), {(1,), (2,), (3,), (1, 1), (2, 1), (1, 1, 1)})
        self.assertTrue(all(sum(s) <= 10 and len(s) <= 2 for s in shape_allocations(10, 2)))
        self.assertEqual(allocations[0], (1,))

    def test_match_moments_erlang(self):
        target = hyper_erlang_moments(np.array([1.0]), [3], np.array([3.0]), 3)
        weights, rates, error = match_moments((3,), target)
        self.assertAlmostEqual(rates[0], 3.0, delta=1e-6)
        self.assertLess(error, 1e-8)

    def test_em_recovers_mixture(self):
        rng = np.random.default_rng(5)
        x = np.concatenate((rng.gamma(2, 1 / 4.0, 30_000), rng.gamma(1, 1 / 0.5, 10_000)))
        weights, rates, ll, iterations, converged = em_hyper_erlang(
            x, [2, 1], [0.5, 0.5], [1.0, 1.0], max_iter=500, tol=1e-9)
        self.assertTrue(converged)
        np.testing.assert_allclose(weights, [0.75, 0.25], atol=0.02)
        np.testing.assert_allclose(rates, [4.0, 0.5], rtol=0.05)


class TestFit(unittest.TestCase):
    def test_exponential(self):
        result = fit_phase_type(FitTarget.from_distribution(scipy.stats.expon()), 1)
        self.assertEqual(result.phase_type.order, 1)
        self.assertAlmostEqual(result.phase_type.exit[0], 1.0, delta=1e-3)
        self.assertLess(result.l1_error, 1e-2)

    def test_erlang_samples(self):
        samples = np.random.default_rng(3).gamma(3, 1 / 3.0, 50_000)
        result = fit_phase_type(FitTarget.from_samples(samples), 3)
        self.assertLessEqual(result.phase_type.order, 3)
        density = scipy.stats.gamma(3, scale=1 / 3.0).pdf
        self.assertLessEqual(l1_against(result.phase_type, density, 1.0), 0.02)

    def test_lognormal_targets(self):
        for mean in (0.5, 1.0, 1.5):
            for factor in (1, 2, 4):
                with self.subTest(mean=mean, factor=factor):
                    target = FitTarget.lognormal(mean, factor * mean ** 2)
                    result = fit_phase_type(target, 10, options=FAST)
                    self.assertLessEqual(result.phase_type.order, 10)
                    self.assertLessEqual(result.l1_error, 0.08)
                    self.assertAlmostEqual(result.phase_type.cdf(50 * mean), 1.0, delta=1e-4)
                    self.assertEqual(result.phase_type.meta["fit"]["order"], 10)

    def test_scale_equivariance(self):
        unit = fit_phase_type(FitTarget.lognormal(1.0, 2.0), 6, options=FAST)
        scaled = unit.phase_type.scaled(1 / 1.5)
        self.assertAlmostEqual(scaled.mean, unit.phase_type.mean * 1.5, places=10)
        direct = l1_distance(scaled, FitTarget.lognormal(1.5, 2.0 * 1.5 ** 2))
        self.assertAlmostEqual(direct, unit.l1_error, delta=1e-3)

    def test_deterministic(self):
        target = FitTarget.lognormal(1.0, 1.0)
        first = fit_phase_type(target, 4, options=FAST)
        second = fit_phase_type(target, 4, options=FAST)
        self.assertEqual(first.phase_type.to_json(), second.phase_type.to_json())

    def test_random_draws_use_seed(self):
        target = FitTarget.lognormal(1.0, 1.0)
        options = FitOptions(samples=5000, stratified=False)
        first = fit_phase_type(target, 3, rng=np.random.default_rng(9), options=options)
        second = fit_phase_type(target, 3, rng=np.random.default_rng(9), options=options)
        self.assertEqual(first.phase_type, second.phase_type)

    def test_invalid_order(self):
        with self.assertRaises(ValueError):
            fit_phase_type(FitTarget.lognormal(1.0, 1.0), 0)

    def test_fit_error_carries_iterate(self):
        error = FitError("diverged", "last")
        self.assertEqual(error.result, "last")

    def test_settings_grid(self):
        ph = PhaseType.exponential(1.0)
        target = FitTarget.from_distribution(scipy.stats.expon())
        coarse = l1_distance(ph, target, Settings(fit_grid_points=50))
        self.assertLess(coarse, 1e-6)
