import os
import sys
import tempfile
import unittest
from itertools import combinations

import numpy as np

# Add root project directory to path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, project_root)

from core.errors import InvalidArgumentError
from core.graph import build_lattice, from_edge_list, random_planar_graph
from core.rng import RngStream
from diagnostics.efficiency import gelman_rubin, mc_standard_error
from models.binomial_logit import (
    BinomialLogitModel,
    read_votes_csv,
    simulate_binomial,
    write_votes_csv,
)
from models.chain import dispersed_starts, run_chain, run_chains
from models.gaussian_image import GaussianImageModel, read_matrix_csv, simulate_image, write_matrix_csv


class TestGaussianImageModel(unittest.TestCase):
    """Full conditionals of the image model"""

    def setUp(self):
        truth, y = simulate_image(6, 0.5, RngStream(1))
        self.model = GaussianImageModel.on_lattice(y.reshape(6, 6), alpha=0.001)

    def test_rank_and_tau2_shape(self):
        self.assertEqual(self.model.rank, 35)
        shape, _ = self.model.tau2_conditional(np.zeros(36))
        self.assertAlmostEqual(shape, 0.001 + 35 / 2)

    def test_beta0_conditional(self):
        gamma = np.linspace(-1, 1, 36)
        mean, var = self.model.beta0_conditional(gamma, 2.0)
        self.assertAlmostEqual(mean, float(np.mean(self.model.y - gamma)))
        self.assertAlmostEqual(var, 2.0 / 36)

    def test_sigma2_conditional(self):
        shape, rate = self.model.sigma2_conditional(0.0, np.zeros(36))
        self.assertAlmostEqual(shape, 0.001 + 18)
        self.assertAlmostEqual(rate, 0.001 + float(self.model.y @ self.model.y) / 2)

    def test_field_conditional_precision(self):
        cond = self.model.field_conditional(0.3, 2.0, 0.5)
        d = self.model.graph.weighted_degrees
        np.testing.assert_allclose(cond.site_precisions(), 0.5 + d / 0.5)
        np.testing.assert_allclose(cond.b, (self.model.y - 0.3) / 2.0)

    def test_size_mismatch(self):
        with self.assertRaises(InvalidArgumentError):
            GaussianImageModel(y=np.zeros(5), graph=build_lattice(2, 2))
        with self.assertRaises(InvalidArgumentError):
            GaussianImageModel(y=np.zeros(4), graph=build_lattice(2, 2), alpha=0.0)


class TestSimulation(unittest.TestCase):
    """Synthetic data generators"""

    def test_noise_free_image_equals_truth(self):
        truth, y = simulate_image(50, 0.0, RngStream(0))
        self.assertEqual(truth.shape, (2500,))
        np.testing.assert_array_equal(truth, y)
        self.assertLessEqual(truth.max(), 5.0 / np.pi)
        self.assertGreater(truth.max(), 1.5)

    def test_noise_level(self):
        truth, y = simulate_image(50, 50.0, RngStream(0))
        self.assertAlmostEqual(float(np.std(y - truth)), 50.0, delta=2.5)

    def test_invalid_image_arguments(self):
        with self.assertRaises(InvalidArgumentError):
            simulate_image(1, 1.0, RngStream(0))
        with self.assertRaises(InvalidArgumentError):
            simulate_image(5, -1.0, RngStream(0))

    def test_binomial_counts(self):
        graph = random_planar_graph(60, seed=3)
        votes = simulate_binomial(graph, 0.5, 1.0, 0.9, 50.0, RngStream(2), missing_fraction=0.1)
        self.assertTrue(np.all(votes.m >= 1))
        self.assertTrue(np.all(votes.Y <= votes.m))
        self.assertEqual(int((~votes.observed).sum()), 6)
        self.assertAlmostEqual(float(votes.gamma.mean()), 0.0, places=10)


class TestBinomialLogitModel(unittest.TestCase):
    """Validation and conditionals of the binomial model"""

    def setUp(self):
        self.graph = from_edge_list(4, [(0, 1), (1, 2), (2, 3)])

    def test_successes_cannot_exceed_trials(self):
        with self.assertRaises(InvalidArgumentError):
            BinomialLogitModel(Y=[1, 5, 0, 0], m=[2, 4, 1, 1], graph=self.graph)

    def test_isolated_unobserved_site_rejected(self):
        graph = from_edge_list(3, [(0, 1)])
        with self.assertRaises(InvalidArgumentError):
            BinomialLogitModel(Y=[1, 1, 0], m=[2, 2, 0], graph=graph)

    def test_zero_trials_are_unobserved(self):
        model = BinomialLogitModel(Y=[1, 0, 2, 1], m=[2, 0, 4, 3], graph=self.graph)
        self.assertEqual(model.observed.tolist(), [True, False, True, True])
        self.assertEqual(model.kappa[1], 0.0)
        self.assertEqual(model.trials[1], 0.0)

    def test_field_conditional_without_data_uses_prior(self):
        model = BinomialLogitModel(Y=[1, 0, 2, 1], m=[2, 0, 4, 3], graph=self.graph, rho=0.9)
        psi = np.array([0.4, 0.0, 0.7, 0.5])
        cond = model.field_conditional(0.2, 2.0, psi)
        self.assertAlmostEqual(cond.site_precisions()[1], self.graph.weighted_degrees[1] / 2.0)
        np.testing.assert_allclose(cond.b, model.kappa - psi * 0.2)

    def test_shift_leaves_linear_predictor(self):
        model = BinomialLogitModel(Y=[1, 1, 2, 1], m=[2, 3, 4, 3], graph=self.graph, rho=0.9)
        mean, var = model.shift_conditional(0.0, np.zeros(4), 1.0)
        self.assertAlmostEqual(mean, 0.0)
        q1 = 0.1 * self.graph.weighted_degrees.sum()
        self.assertAlmostEqual(var, 1.0 / (1.0 / 1000.0 + q1))


class TestChains(unittest.TestCase):
    """Chain driver"""

    @classmethod
    def setUpClass(cls):
        truth, y = simulate_image(8, 1.0, RngStream(4))
        cls.truth = truth
        cls.model = GaussianImageModel.on_lattice(y.reshape(8, 8))

    def test_retained_iterations(self):
        out = run_chain(self.model, "single_site", iterations=20, burnin=10, thin=3, seed=1)
        np.testing.assert_array_equal(out.retained_iterations, [11, 14, 17, 20])
        frame = out.to_frame()
        self.assertEqual(list(frame.columns), ["iter", "beta0", "sigma2", "tau2", "seconds"])
        self.assertEqual(len(frame), 4)
        self.assertEqual(out.beta0.size, 20)

    def test_counters_per_kernel(self):
        block = run_chain(self.model, "block", iterations=15, burnin=5, seed=1)
        self.assertEqual(block.counters["symbolic_factorizations"], 1)
        self.assertEqual(block.counters["numeric_factorizations"], 15)
        self.assertEqual(block.counters["triangular_solves"], 45)
        for kind in ("chromatic", "single_site"):
            out = run_chain(self.model, kind, iterations=15, burnin=5, seed=1)
            self.assertEqual(out.counters["numeric_factorizations"], 0)
            self.assertEqual(out.counters["factor_bytes"], 0)
        self.assertEqual(run_chain(self.model, "chromatic", iterations=2, burnin=0, seed=1).coloring_k, 4)

    def test_reproducible_and_parallel_identical(self):
        a = run_chain(self.model, "chromatic", iterations=30, burnin=10, seed=9)
        b = run_chain(self.model, "chromatic", iterations=30, burnin=10, seed=9)
        c = run_chain(self.model, "chromatic_parallel", iterations=30, burnin=10, seed=9, workers=2)
        np.testing.assert_array_equal(a.beta0, b.beta0)
        np.testing.assert_array_equal(a.tau2, c.tau2)
        np.testing.assert_array_equal(a.field_mean, c.field_mean)

    def test_timing_split(self):
        out = run_chain(self.model, "chromatic", iterations=10, burnin=0, seed=1)
        self.assertTrue(np.all(out.field_seconds + out.hyper_seconds <= out.seconds + 1e-6))
        self.assertTrue(np.all(out.field_seconds > 0))

    def test_posterior_mean_denoises(self):
        out = run_chain(self.model, "chromatic", iterations=1500, burnin=500, seed=3)
        mse_post = np.mean((out.field_mean - self.truth) ** 2)
        mse_obs = np.mean((self.model.y - self.truth) ** 2)
        self.assertLess(mse_post, mse_obs)

    def test_schedule_validation(self):
        with self.assertRaises(InvalidArgumentError):
            run_chain(self.model, "chromatic", iterations=10, burnin=10)
        with self.assertRaises(InvalidArgumentError):
            run_chain(self.model, "chromatic", iterations=10, burnin=0, thin=0)
        with self.assertRaises(InvalidArgumentError):
            run_chain(self.model, "metropolis", iterations=10, burnin=0)

    def test_multiple_chains_use_distinct_streams(self):
        outs = run_chains(self.model, "chromatic", chains=3, iterations=20, burnin=5, seed=2)
        self.assertEqual([o.stream_id for o in outs], [0, 1, 2])
        self.assertFalse(np.array_equal(outs[0].beta0, outs[1].beta0))
        np.testing.assert_allclose(dispersed_starts(3), [0.1, 1.0, 10.0])

    def test_binomial_chain_has_no_sigma2(self):
        graph = random_planar_graph(40, seed=5)
        model = simulate_binomial(graph, 0.5, 1.0, 0.995, 100.0, RngStream(5)).model(graph, 0.995)
        out = run_chain(model, "chromatic", iterations=20, burnin=5, seed=5)
        self.assertTrue(np.all(np.isnan(out.sigma2)))
        self.assertTrue(np.all((out.field_mean > 0) & (out.field_mean < 1)))


def intercept_replication(seed, rho=0.995, iterations=3000, burnin=1000):
    """Absolute error of the posterior mean of beta0 and whether its 95% interval covers 0.5."""
    graph = random_planar_graph(100, seed=seed)
    votes = simulate_binomial(graph, 0.5, 1.0, rho, 200.0, RngStream(seed, 1 << 32))
    out = run_chain(votes.model(graph, rho), "chromatic", iterations=iterations, burnin=burnin, seed=seed)
    draws = out.retained("beta0")
    lo, hi = np.quantile(draws, [0.025, 0.975])
    return abs(float(draws.mean()) - 0.5), bool(lo <= 0.5 <= hi)


class TestBinomialRecovery(unittest.TestCase):
    """Intercept recovery on synthetic precincts"""

    def test_intercept_close_to_truth(self):
        error, covered = intercept_replication(11)
        self.assertLess(error, 0.15)
        self.assertTrue(covered)


@unittest.skipUnless(os.getenv("GMRF_RUN_BENCHMARKS") == "1", "set GMRF_RUN_BENCHMARKS=1 to run long calibration checks")
class TestBinomialCalibration(unittest.TestCase):
    """Twenty synthetic replications at rho = 0.995"""

    def test_error_and_coverage(self):
        results = [intercept_replication(seed) for seed in range(100, 120)]
        errors = np.array([e for e, _ in results])
        self.assertLess(errors.mean(), 0.15)
        self.assertGreaterEqual(sum(c for _, c in results), 17)


class TestImagePosterior(unittest.TestCase):
    """Posterior summaries of the image model across kernels"""

    @classmethod
    def setUpClass(cls):
        _, y = simulate_image(10, 1.0, RngStream(21, 1 << 32))
        cls.model = GaussianImageModel.on_lattice(y.reshape(10, 10))

    def test_kernels_agree(self):
        outs = {kind: run_chain(self.model, kind, iterations=20_000, burnin=5000, seed=21)
                for kind in ("single_site", "chromatic", "block")}
        for name in ("beta0", "sigma2", "tau2"):
            summary = {kind: (float(out.retained(name).mean()), mc_standard_error(out.retained(name)))
                       for kind, out in outs.items()}
            for a, b in combinations(summary, 2):
                (mean_a, se_a), (mean_b, se_b) = summary[a], summary[b]
                self.assertLess(abs(mean_a - mean_b), 3 * np.hypot(se_a, se_b), f"{name}: {a} vs {b}")

    def test_three_chains_converge(self):
        outs = run_chains(self.model, "chromatic", chains=3, iterations=4000, burnin=2000, seed=22)
        for name in ("beta0", "sigma2", "tau2"):
            self.assertLess(gelman_rubin([out.retained(name) for out in outs]), 1.1, name)

    def test_noise_variance_is_identified(self):
        _, y = simulate_image(50, 1.0, RngStream(23, 1 << 32))
        model = GaussianImageModel.on_lattice(y.reshape(50, 50))
        out = run_chain(model, "block", iterations=2000, burnin=700, seed=23)
        sigma2 = float(out.retained("sigma2").mean())
        self.assertGreater(sigma2, 0.9)
        self.assertLess(sigma2, 1.1)


class TestFiles(unittest.TestCase):
    """Image and votes CSV files"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_matrix_csv(self):
        values = np.arange(12.0).reshape(3, 4)
        path = write_matrix_csv(values, os.path.join(self.tmp.name, "m.csv"))
        np.testing.assert_array_equal(read_matrix_csv(path), values)

    def test_matrix_csv_reports_bad_line(self):
        path = os.path.join(self.tmp.name, "bad.csv")
        with open(path, "w") as f:
            f.write("1,2\n3,oops\n")
        with self.assertRaises(InvalidArgumentError) as ctx:
            read_matrix_csv(path)
        self.assertIn("bad.csv:2", str(ctx.exception))

    def test_votes_csv_marks_blanks_unobserved(self):
        graph = random_planar_graph(20, seed=1)
        votes = simulate_binomial(graph, 0.0, 1.0, 0.9, 30.0, RngStream(1), missing_fraction=0.25)
        path = write_votes_csv(votes, os.path.join(self.tmp.name, "votes.csv"))
        Y, m, observed = read_votes_csv(path, graph.n)
        np.testing.assert_array_equal(observed, votes.observed)
        np.testing.assert_array_equal(Y[observed], votes.Y[observed])
        np.testing.assert_array_equal(m[observed], votes.m[observed])

    def test_votes_csv_reports_bad_line(self):
        path = os.path.join(self.tmp.name, "votes.csv")
        with open(path, "w") as f:
            f.write("node,Y,m\n0,3,10\n1,x,4\n")
        with self.assertRaises(InvalidArgumentError) as ctx:
            read_votes_csv(path)
        self.assertIn("votes.csv:3", str(ctx.exception))


if __name__ == "__main__":
    unittest.main()
