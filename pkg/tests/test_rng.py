import os
import sys
import unittest

import numpy as np

# Add root project directory to path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, project_root)

from core.errors import InvalidArgumentError
from core.rng import RngStream, draw_exponential, draw_gamma, draw_inverse_gamma, draw_normal, draw_uniform


class TestStreams(unittest.TestCase):
    """Seeding and substreams"""

    def test_same_seed_and_stream_reproduce(self):
        a = draw_normal(RngStream(42, 3), size=5)
        b = draw_normal(RngStream(42, 3), size=5)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = draw_uniform(RngStream(42, 0), size=5)
        b = draw_uniform(RngStream(42, 1), size=5)
        c = draw_uniform(RngStream(43, 0), size=5)
        self.assertFalse(np.array_equal(a, b))
        self.assertFalse(np.array_equal(a, c))

    def test_spawn_keeps_seed(self):
        s = RngStream(7, 0)
        child = s.spawn(9)
        self.assertEqual(child.seed, 7)
        self.assertEqual(child.stream_id, 9)
        np.testing.assert_array_equal(draw_uniform(child, size=3), draw_uniform(RngStream(7, 9), size=3))


class TestSiteNormals(unittest.TestCase):
    """Counter-keyed per-site normals"""

    def test_independent_of_site_order(self):
        s = RngStream(5, 2)
        sites = np.arange(50)
        forward = s.site_normals(11, sites)
        shuffled = np.random.default_rng(0).permutation(50)
        np.testing.assert_array_equal(s.site_normals(11, shuffled), forward[shuffled])

    def test_does_not_consume_the_generator(self):
        s = RngStream(5, 2)
        s.site_normals(1, np.arange(10))
        np.testing.assert_array_equal(draw_uniform(s, size=3), draw_uniform(RngStream(5, 2), size=3))

    def test_keys_change_the_draws(self):
        s = RngStream(5, 2)
        base = s.site_normals(1, np.arange(10))
        self.assertFalse(np.array_equal(base, s.site_normals(2, np.arange(10))))
        self.assertFalse(np.array_equal(base, s.site_normals(1, np.arange(10), draw=1)))
        self.assertFalse(np.array_equal(base, RngStream(5, 3).site_normals(1, np.arange(10))))

    def test_standard_normal_moments(self):
        z = RngStream(123).site_normals(0, np.arange(200_000))
        self.assertLess(abs(z.mean()), 0.01)
        self.assertLess(abs(z.var() - 1.0), 0.015)
        self.assertTrue(np.all(np.isfinite(z)))

    def test_uncorrelated_across_iterations(self):
        s = RngStream(99)
        a = s.site_normals(1, np.arange(100_000))
        b = s.site_normals(2, np.arange(100_000))
        self.assertLess(abs(np.corrcoef(a, b)[0, 1]), 0.015)


class TestDraws(unittest.TestCase):
    """Distribution draws"""

    def test_inverse_gamma_mean(self):
        x = draw_inverse_gamma(RngStream(1), 5.0, 4.0, size=200_000)
        # mean rate/(shape-1) = 1, sd 1/sqrt(3)
        self.assertAlmostEqual(float(x.mean()), 1.0, delta=0.01)

    def test_gamma_small_shape_mean(self):
        x = draw_gamma(RngStream(2), 0.5, 2.0, size=200_000)
        self.assertAlmostEqual(float(x.mean()), 0.25, delta=0.005)

    def test_exponential_mean(self):
        x = draw_exponential(RngStream(3), 4.0, size=200_000)
        self.assertAlmostEqual(float(x.mean()), 0.25, delta=0.003)

    def test_invalid_parameters(self):
        s = RngStream(0)
        with self.assertRaises(InvalidArgumentError):
            draw_normal(s, 0.0, 0.0)
        with self.assertRaises(InvalidArgumentError):
            draw_inverse_gamma(s, -1.0, 1.0)
        with self.assertRaises(InvalidArgumentError):
            draw_gamma(s, 1.0, 0.0)
        with self.assertRaises(InvalidArgumentError):
            draw_exponential(s, -2.0)


if __name__ == "__main__":
    unittest.main()
