import os
import sys
import unittest

import numpy as np
from scipy.stats import ks_2samp

# Add root project directory to path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, project_root)

from core.errors import InvalidArgumentError
from core.polyagamma import PgParams, draw_pg, draw_pg_vector, pg_mean, pg_variance
from core.rng import RngStream


class TestMoments(unittest.TestCase):
    """Closed-form moments"""

    def test_values_at_zero(self):
        self.assertAlmostEqual(float(pg_mean(1, 0.0)), 0.25)
        self.assertAlmostEqual(float(pg_variance(1, 0.0)), 1.0 / 24.0)
        self.assertAlmostEqual(float(pg_mean(4, 0.0)), 1.0)

    def test_mean_formula(self):
        z = 3.0
        self.assertAlmostEqual(float(pg_mean(2, z)), 2 / (2 * z) * np.tanh(z / 2))
        # symmetric in z
        self.assertAlmostEqual(float(pg_mean(2, -z)), float(pg_mean(2, z)))

    def test_variance_is_continuous_at_series_switch(self):
        below = float(pg_variance(1, 0.00999))
        above = float(pg_variance(1, 0.01001))
        self.assertAlmostEqual(below, above, places=7)


class TestSampler(unittest.TestCase):
    """Empirical moments of PG draws"""

    def test_means_within_standard_errors(self):
        n = 100_000
        s = RngStream(31337)
        for b in (1, 5, 20):
            for z in (0.0, 0.5, 3.0):
                x = draw_pg_vector(s, np.full(n, b), np.full(n, z))
                se = np.sqrt(float(pg_variance(b, z)) / n)
                # 4 SE over nine cells
                self.assertLess(abs(x.mean() - float(pg_mean(b, z))), 4 * se, f"b={b}, z={z}")
                self.assertTrue(np.all(x > 0))

    def test_variance_of_pg_one_zero(self):
        x = draw_pg_vector(RngStream(8), np.ones(200_000, dtype=int), 0.0)
        self.assertLess(abs(x.var() / (1.0 / 24.0) - 1.0), 0.05)

    def test_variance_grows_linearly_in_shape(self):
        n = 100_000
        for b in (5, 20):
            x = draw_pg_vector(RngStream(12, b), np.full(n, b), 0.0)
            squares = (x - x.mean()) ** 2
            se = squares.std() / np.sqrt(n)
            self.assertLess(abs(squares.mean() - b / 24.0), 3 * se, f"b={b}")

    def test_shape_two_is_sum_of_two_unit_shapes(self):
        n = 10_000
        pair = draw_pg_vector(RngStream(13, 0), np.full(n, 2), 0.0)
        ones = draw_pg_vector(RngStream(13, 1), np.ones(2 * n, dtype=int), 0.0)
        summed = ones[:n] + ones[n:]
        self.assertGreater(ks_2samp(pair, summed).pvalue, 0.01)

    def test_large_shape_uses_normal_approximation(self):
        n = 20_000
        x = draw_pg_vector(RngStream(9), np.full(n, 200), np.full(n, 1.0))
        se = np.sqrt(float(pg_variance(200, 1.0)) / n)
        self.assertLess(abs(x.mean() - float(pg_mean(200, 1.0))), 4 * se)
        self.assertTrue(np.all(x > 0))

    def test_zero_shape_gives_zero(self):
        x = draw_pg_vector(RngStream(1), np.array([0, 3, 0]), np.array([1.0, 1.0, 1.0]))
        self.assertEqual(x[0], 0.0)
        self.assertEqual(x[2], 0.0)
        self.assertGreater(x[1], 0.0)

    def test_reproducible(self):
        a = draw_pg_vector(RngStream(4, 1), np.arange(1, 6), 0.7)
        b = draw_pg_vector(RngStream(4, 1), np.arange(1, 6), 0.7)
        np.testing.assert_array_equal(a, b)

    def test_single_draw(self):
        self.assertGreater(draw_pg(RngStream(0), PgParams(b=2, z=1.5)), 0.0)


class TestValidation(unittest.TestCase):
    """Parameter checks"""

    def test_shape_must_be_positive_integer(self):
        with self.assertRaises(InvalidArgumentError):
            PgParams(b=0)
        with self.assertRaises(InvalidArgumentError):
            PgParams(b=1.5)

    def test_vector_rejects_negative_or_fractional_shapes(self):
        with self.assertRaises(InvalidArgumentError):
            draw_pg_vector(RngStream(0), np.array([-1]), 0.0)
        with self.assertRaises(InvalidArgumentError):
            draw_pg_vector(RngStream(0), np.array([1.5]), 0.0)


if __name__ == "__main__":
    unittest.main()
