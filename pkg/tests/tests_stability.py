import itertools
import unittest

import numpy as np
import scipy.sparse
from hypothesis import given, settings as hsettings, strategies as st

from phasesis import kernel, stability
from phasesis.config import Settings
from phasesis.errors import SizeError
from phasesis.models import GenesisModel, Network, PhaseType, StabilityReport, Verdict
from tests import load_resource

PATH2 = Network.load(load_resource("path2.edges"))
TRIANGLE = Network.load(load_resource("triangle.edges"))
PATH3 = Network.generate("path", 3)


def random_law(rng, order):
    if order == 1:
        return PhaseType.exponential(rng.uniform(0.2, 3.0))
    sub = rng.uniform(0.0, 2.0, (order, order))
    np.fill_diagonal(sub, 0.0)
    np.fill_diagonal(sub, -(sub.sum(axis=1) + rng.uniform(0.1, 3.0, order)))
    initial = rng.random(order) + 0.05
    return PhaseType(initial / initial.sum(), sub)


def classical_sis_generator(network, beta, delta):
    """Generator of the Markovian SIS chain, states indexed with node 0 as the most significant bit."""
    n = network.n
    size = 2 ** n
    q = np.zeros((size, size))
    for s in range(size):
        infected = [(s >> (n - 1 - i)) & 1 for i in range(n)]
        for i in range(n):
            bit = 1 << (n - 1 - i)
            if infected[i]:
                q[s, s - bit] += delta
            else:
                pressure = sum(infected[j] for j in network.neighbors[i])
                if pressure:
                    q[s, s + bit] += beta * pressure
    np.fill_diagonal(q, -q.sum(axis=1))
    return q


class TestBoundMatrix(unittest.TestCase):
    def test_exponential_reduction(self):
        model = GenesisModel.exponential(TRIANGLE, 0.7, 1.1)
        np.testing.assert_allclose(stability.build_bound_matrix(model), 0.7 * TRIANGLE.adjacency - 1.1 * np.eye(3))

    def test_closed_form(self):
        rng = np.random.default_rng(2024)
        for k in range(50):
            n = int(rng.integers(2, 31))
            network = Network.generate("erdos_renyi", n, prob=float(rng.uniform(0.05, 0.5)), seed=k)
            beta, delta = rng.uniform(0.1, 3.0, 2)
            model = GenesisModel.exponential(network, beta, delta)
            expected = delta - beta * network.spectral_radius()
            self.assertAlmostEqual(stability.decay_rate_bound(model), expected, delta=1e-8)

    def test_path2_example(self):
        model = GenesisModel.exponential(PATH2, 0.5, 1.5)
        self.assertAlmostEqual(stability.decay_rate_bound(model), 1.0, places=12)

    def test_erlang_example(self):
        model = GenesisModel(PATH2, PhaseType.erlang(2, 2.0), PhaseType.erlang(2, 3.0))
        self.assertAlmostEqual(stability.decay_rate_bound(model), 1.0, places=9)

    def test_structure(self):
        rng = np.random.default_rng(1)
        model = GenesisModel(PATH3, random_law(rng, 2), random_law(rng, 3))
        dense = stability.build_bound_matrix(model)
        self.assertEqual(dense.shape, (3 * 2 * 3, 3 * 2 * 3))
        self.assertEqual(stability.bound_dimension(model), 18)
        self.assertTrue(kernel.is_metzler(dense))
        sparse = stability.build_bound_matrix(model, sparse=True)
        self.assertTrue(scipy.sparse.issparse(sparse))
        np.testing.assert_allclose(sparse.toarray(), dense, atol=1e-14)

    def test_cap(self):
        model = GenesisModel(PATH2, PhaseType.erlang(2, 1.0), PhaseType.erlang(2, 1.0))
        with self.assertRaises(SizeError) as cm:
            stability.build_bound_matrix(model, Settings(bound_cap=7))
        self.assertEqual(cm.exception.value, 8)
        self.assertEqual(cm.exception.cap, 7)

    def test_power_path(self):
        network = Network.generate("complete", 30)
        model = GenesisModel(network, PhaseType.erlang(2, 2.0), PhaseType.exponential(1.0))
        dense = stability.decay_rate_bound(model)
        iterative = stability.decay_rate_bound(model, Settings(dense_eig_max=20))
        self.assertAlmostEqual(dense, iterative, delta=1e-7)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(8)
        network = Network.generate("erdos_renyi", 8, prob=0.4, seed=3)
        model = GenesisModel(network, random_law(rng, 2), random_law(rng, 2))
        permuted = GenesisModel(network.permuted(rng.permutation(8)), model.transmission, model.recovery)
        self.assertAlmostEqual(stability.decay_rate_bound(model), stability.decay_rate_bound(permuted), delta=1e-9)

    @hsettings(max_examples=20, deadline=None)
    @given(st.floats(0.2, 5.0), st.integers(0, 1000))
    def test_time_scaling(self, factor, seed):
        """Speeding time up by a factor multiplies the certified rate by it."""
        rng = np.random.default_rng(seed)
        model = GenesisModel(PATH3, random_law(rng, 2), random_law(rng, 2))
        self.assertAlmostEqual(stability.decay_rate_bound(model.scaled(factor)),
                               factor * stability.decay_rate_bound(model),
                               delta=1e-8 * max(1.0, factor))


class TestExactChain(unittest.TestCase):
    def test_state_count(self):
        model = GenesisModel.exponential(PATH2, 0.5, 1.5)
        self.assertEqual(stability.enumerate_exact_states(model).count, 4)
        model = GenesisModel(PATH2, PhaseType.erlang(2, 1.0), PhaseType.erlang(2, 1.0))
        self.assertEqual(len(stability.enumerate_exact_states(model)), 25)
        model = GenesisModel(PATH3, PhaseType.erlang(2, 1.0), PhaseType.exponential(1.0))
        self.assertEqual(len(stability.enumerate_exact_states(model)), 3 * 5 * 3)

    def test_encoding(self):
        model = GenesisModel(PATH3, PhaseType.erlang(2, 1.0), PhaseType.erlang(3, 1.0))
        space = stability.enumerate_exact_states(model)
        for index in (0, 1, space.count // 2, space.count - 1):
            self.assertEqual(space.encode(space.decode(index)), index)
        self.assertEqual(space.describe(0), (None, None, None))
        state = (None, (2, (1, 0)), (0, (1,)))
        codes = tuple(space.local_code(i, s) for i, s in enumerate(state))
        self.assertEqual(space.describe(space.encode(codes)), state)
        with self.assertRaises(IndexError):
            space.decode(space.count)

    def test_enumeration_cap(self):
        model = GenesisModel(TRIANGLE, PhaseType.erlang(2, 1.0), PhaseType.erlang(2, 1.0))
        with self.assertRaises(SizeError) as cm:
            stability.enumerate_exact_states(model, Settings(enumeration_cap=100))
        self.assertEqual(cm.exception.value, 729)

    def test_classical_generator(self):
        for network in (PATH2, TRIANGLE):
            with self.subTest(network=network):
                model = GenesisModel.exponential(network, 0.8, 1.3)
                generator = stability.build_exact_generator(model).toarray()
                expected = classical_sis_generator(network, 0.8, 1.3)
                np.testing.assert_allclose(generator, expected, atol=1e-12)
                r = np.max(np.linalg.eigvals(expected[1:, 1:]).real)
                self.assertAlmostEqual(stability.exact_decay_rate(model), -r, delta=1e-9)

    def test_generator_structure(self):
        rng = np.random.default_rng(12)
        model = GenesisModel(PATH3, random_law(rng, 2), random_law(rng, 2))
        generator = stability.build_exact_generator(model)
        np.testing.assert_allclose(np.asarray(generator.sum(axis=1)).ravel(), 0.0, atol=1e-12)
        self.assertEqual(np.count_nonzero(generator[0].toarray()), 0)
        self.assertTrue(kernel.is_metzler(generator))

    def test_bound_dominates_exact(self):
        rng = np.random.default_rng(77)
        cases = 0
        for network, p, q in itertools.product((PATH2, PATH3, TRIANGLE), (1, 2), (1, 2)):
            for _ in range(17):
                model = GenesisModel(network, random_law(rng, p), random_law(rng, q))
                eta = -stability.decay_rate_bound(model)
                r = -stability.exact_decay_rate(model)
                self.assertGreaterEqual(eta, r - 1e-8)
                cases += 1
        self.assertGreaterEqual(cases, 200)

    def test_recovery_speed_monotone(self):
        for network, transmission in itertools.product((PATH2, PATH3, TRIANGLE),
                                                       (PhaseType.exponential(1.0), PhaseType.erlang(2, 2.0))):
            rates = [stability.exact_decay_rate(GenesisModel(network, transmission, PhaseType.exponential(delta)))
                     for delta in (1.0, 2.0, 4.0)]
            self.assertLess(rates[0], rates[1], (network, transmission))
            self.assertLess(rates[1], rates[2], (network, transmission))

    def test_exact_permutation_invariance(self):
        rng = np.random.default_rng(19)
        network = Network.generate("erdos_renyi", 4, prob=0.6, seed=5)
        model = GenesisModel(network, PhaseType.exponential(1.5), PhaseType.hyperexponential([0.3, 0.7], [0.8, 3.0]))
        self.assertLessEqual(len(stability.enumerate_exact_states(model)), 2000)
        expected = stability.exact_decay_rate(model)
        for _ in range(10):
            permuted = GenesisModel(network.permuted(rng.permutation(4)), model.transmission, model.recovery)
            self.assertAlmostEqual(stability.exact_decay_rate(permuted), expected, delta=1e-9)

    def test_reused_space(self):
        model = GenesisModel(PATH3, PhaseType.erlang(2, 2.0), PhaseType.exponential(1.0))
        space = stability.enumerate_exact_states(model)
        self.assertEqual(stability.exact_decay_rate(model, space=space), stability.exact_decay_rate(model))
        report = stability.analyze(model, space=space)
        self.assertEqual(report.exact_state_count, space.count)
        self.assertEqual(report.exact_rate, stability.exact_decay_rate(model))

    def test_eigensolve_cap(self):
        model = GenesisModel(PATH2, PhaseType.erlang(2, 1.0), PhaseType.erlang(2, 1.0))
        with self.assertRaises(SizeError):
            stability.exact_decay_rate(model, Settings(eigensolve_cap=10))

    def test_mean_extinction_time(self):
        delta = 2.0
        model = GenesisModel.exponential(PATH2, 1e-9, delta)
        self.assertAlmostEqual(stability.mean_extinction_time(model), 1.5 / delta, delta=1e-6)
        self.assertAlmostEqual(stability.mean_extinction_time(model.with_initial([0])), 1 / delta, delta=1e-6)

    def test_mean_extinction_time_erlang(self):
        # With transmission effectively off a single infection lasts one Erlang(3, 2) period.
        model = GenesisModel(PATH2, PhaseType.exponential(1e-9), PhaseType.erlang(3, 2.0), [1])
        self.assertAlmostEqual(stability.mean_extinction_time(model), 1.5, delta=1e-6)

    def test_initial_distribution(self):
        model = GenesisModel(PATH2, PhaseType.hyperexponential([0.25, 0.75], [1.0, 2.0]),
                             PhaseType.exponential(1.0), [0])
        space = stability.enumerate_exact_states(model)
        dist = stability.initial_distribution(model, space)
        self.assertAlmostEqual(dist.sum(), 1.0, places=14)
        self.assertEqual(np.count_nonzero(dist), 2)
        self.assertEqual(dist[0], 0.0)


class TestVerdicts(unittest.TestCase):
    def test_bound_certified(self):
        model = GenesisModel.exponential(PATH2, 0.5, 1.5)
        self.assertEqual(stability.certify_stability(model, 0.5), Verdict.BOUND_CERTIFIED)
        self.assertEqual(stability.certify_stability(model, 1.0), Verdict.BOUND_CERTIFIED)

    def test_exact(self):
        model = GenesisModel.exponential(Network.generate("complete", 3), 1.0, 1.0)
        self.assertLess(stability.decay_rate_bound(model), 0)
        self.assertEqual(stability.certify_stability(model, 1e-9), Verdict.EXACT_CERTIFIED)
        self.assertEqual(stability.certify_stability(model, 100.0), Verdict.EXACT_REFUTED)

    def test_undetermined(self):
        model = GenesisModel.exponential(Network.generate("complete", 3), 1.0, 1.0)
        verdict = stability.certify_stability(model, 1e-9, Settings(enumeration_cap=2))
        self.assertEqual(verdict, Verdict.UNDETERMINED)
        self.assertEqual(str(verdict), "undetermined")

    def test_invalid_rate(self):
        model = GenesisModel.exponential(PATH2, 0.5, 1.5)
        for lam in (0.0, -1.0):
            with self.assertRaises(ValueError):
                stability.certify_stability(model, lam)


class TestAnalyze(unittest.TestCase):
    def test_report(self):
        model = GenesisModel.exponential(PATH2, 0.5, 1.5)
        report = stability.analyze(model, [0.5, 1.2])
        self.assertEqual(report.bound_dim, 2)
        self.assertAlmostEqual(report.bound_rate, 1.0, places=12)
        self.assertEqual(report.exact_state_count, 4)
        self.assertGreaterEqual(report.exact_rate, report.bound_rate - 1e-9)
        self.assertEqual(report.verdicts[0.5], Verdict.BOUND_CERTIFIED)
        self.assertTrue(report.first_order)
        self.assertEqual(report.inputs["graph_hash"], PATH2.graph_hash())
        restored = StabilityReport.from_json(report.to_json())
        self.assertEqual(restored.verdicts, report.verdicts)
        self.assertEqual(restored.eta_a, report.eta_a)

    def test_without_exact(self):
        model = GenesisModel.exponential(PATH2, 0.5, 1.5)
        report = stability.analyze(model, exact=False)
        self.assertIsNone(report.exact_rate)
        self.assertIsNone(report.exact_abscissa)

    def test_exact_error_recorded(self):
        model = GenesisModel(TRIANGLE, PhaseType.erlang(2, 1.0), PhaseType.erlang(2, 1.0))
        report = stability.analyze(model, [0.1], Settings(eigensolve_cap=100))
        self.assertIsNone(report.exact_rate)
        self.assertEqual(report.exact_state_count, 729)
        self.assertIn("eigensolve cap", report.exact_error)
