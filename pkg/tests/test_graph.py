import os
import sys
import tempfile
import unittest

import numpy as np

# Add root project directory to path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, project_root)

from core.errors import InvalidArgumentError
from core.graph import (
    Coloring,
    build_lattice,
    car_rho_bounds,
    color_order,
    from_edge_list,
    greedy_color,
    random_planar_graph,
    read_edge_list,
    validate_coloring,
    write_edge_list,
)


def random_graph(n, p, rng):
    upper = np.triu(rng.random((n, n)) < p, k=1)
    i, j = np.nonzero(upper)
    return from_edge_list(n, zip(i.tolist(), j.tolist()))


class TestGraphConstruction(unittest.TestCase):
    """Lattices and edge lists"""

    def test_king8_degree_bounds(self):
        g = build_lattice(5, 5, "king8")
        deg = g.degrees.reshape(5, 5)
        self.assertEqual(deg[2, 2], 8)
        self.assertEqual(deg[0, 2], 5)
        self.assertEqual(deg[0, 0], 3)
        self.assertEqual(deg[4, 4], 3)

    def test_rook4_degree_bounds(self):
        deg = build_lattice(4, 6, "rook4").degrees.reshape(4, 6)
        self.assertEqual(deg[1, 1], 4)
        self.assertEqual(deg[0, 3], 3)
        self.assertEqual(deg[3, 5], 2)

    def test_lattice_edge_count(self):
        # king8 on r x c: horizontal + vertical + two diagonals
        g = build_lattice(3, 4, "king8")
        self.assertEqual(g.n_edges, 3 * 3 + 2 * 4 + 2 * 2 * 3)
        self.assertEqual(g.shape_hint, (3, 4))

    def test_bad_lattice_arguments(self):
        with self.assertRaises(InvalidArgumentError):
            build_lattice(0, 3)
        with self.assertRaises(InvalidArgumentError):
            build_lattice(3, 3, "hex6")

    def test_edge_list_is_symmetric(self):
        g = from_edge_list(4, [(0, 1, 2.0), (2, 1), (3, 0, 0.5)])
        W = g.weight_matrix().toarray()
        np.testing.assert_array_equal(W, W.T)
        self.assertEqual(W[0, 1], 2.0)
        self.assertEqual(W[3, 0], 0.5)
        np.testing.assert_allclose(g.weighted_degrees, W.sum(axis=1))

    def test_duplicate_edges_collapse(self):
        g = from_edge_list(3, [(0, 1), (1, 0), (0, 1)])
        self.assertEqual(g.n_edges, 1)
        self.assertEqual(g.neighbors(0).tolist(), [1])

    def test_edge_list_errors(self):
        with self.assertRaises(InvalidArgumentError):
            from_edge_list(3, [(0, 3)])
        with self.assertRaises(InvalidArgumentError):
            from_edge_list(3, [(1, 1)])
        with self.assertRaises(InvalidArgumentError):
            from_edge_list(3, [(0, 1, -1.0)])

    def test_edges_and_components(self):
        g = from_edge_list(5, [(0, 1), (1, 2), (3, 4)])
        pairs, weights = g.edges()
        self.assertTrue(np.all(pairs[:, 0] < pairs[:, 1]))
        self.assertEqual(len(weights), 3)
        count, labels = g.connected_components()
        self.assertEqual(count, 2)
        self.assertEqual(labels[0], labels[2])
        self.assertNotEqual(labels[0], labels[3])

    def test_random_planar_graph(self):
        g = random_planar_graph(100, seed=7)
        self.assertEqual(g.n, 100)
        self.assertEqual(g.connected_components()[0], 1)
        self.assertLessEqual(g.n_edges, 3 * 100 - 6)
        again = random_planar_graph(100, seed=7)
        np.testing.assert_array_equal(g.indices, again.indices)

    def test_rho_bounds_of_bipartite_path(self):
        lo, hi = car_rho_bounds(from_edge_list(3, [(0, 1), (1, 2)]))
        self.assertAlmostEqual(lo, -1.0)
        self.assertAlmostEqual(hi, 1.0)


class TestColoring(unittest.TestCase):
    """Greedy colouring and its validation"""

    def test_path_needs_two_colors(self):
        g = from_edge_list(3, [(0, 1), (1, 2)])
        c = greedy_color(g)
        self.assertEqual(c.k, 2)
        self.assertEqual(c.assignment.tolist(), [1, 2, 1])

    def test_clique_needs_one_color_per_node(self):
        g = from_edge_list(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
        for order in ([0, 1, 2, 3], [3, 1, 0, 2]):
            self.assertEqual(greedy_color(g, order).k, 4)

    def test_king8_lattice_uses_four_colors_in_blocks(self):
        c = greedy_color(build_lattice(4, 4, "king8"))
        self.assertEqual(c.k, 4)
        expected = np.tile([[1, 2], [3, 4]], (2, 2))
        np.testing.assert_array_equal(c.assignment.reshape(4, 4), expected)

    def test_king8_lattices_of_any_size(self):
        for rows, cols in [(2, 2), (5, 7), (10, 10), (50, 50)]:
            g = build_lattice(rows, cols, "king8")
            c = greedy_color(g)
            self.assertEqual(c.k, 4, f"{rows}x{cols}")
            self.assertTrue(validate_coloring(g, c))

    def test_random_graphs_are_properly_colored(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            g = random_graph(200, 0.05, rng)
            c = greedy_color(g, rng.permutation(g.n))
            self.assertTrue(validate_coloring(g, c))
            self.assertLessEqual(c.k, g.max_degree + 1)

    def test_classes_partition_nodes(self):
        g = build_lattice(6, 5, "king8")
        c = greedy_color(g)
        members = np.sort(np.concatenate(c.classes))
        np.testing.assert_array_equal(members, np.arange(g.n))
        self.assertEqual(sum(c.class_sizes), g.n)

    def test_isolated_nodes_get_color_one(self):
        c = greedy_color(from_edge_list(4, [(0, 1)]))
        self.assertEqual(c.assignment[2], 1)
        self.assertEqual(c.assignment[3], 1)

    def test_order_must_be_permutation(self):
        g = from_edge_list(3, [(0, 1)])
        with self.assertRaises(InvalidArgumentError):
            greedy_color(g, [0, 0, 1])

    def test_validate_rejects_improper_coloring(self):
        g = from_edge_list(3, [(0, 1), (1, 2)])
        self.assertFalse(validate_coloring(g, Coloring.from_assignment([1, 1, 2])))
        self.assertTrue(validate_coloring(g, Coloring.from_assignment([2, 1, 2])))
        with self.assertRaises(InvalidArgumentError):
            validate_coloring(g, Coloring.from_assignment([1, 2]))

    def test_color_orders(self):
        star = from_edge_list(5, [(4, 0), (4, 1), (4, 2), (4, 3)])
        self.assertEqual(color_order(star, "degree-desc")[0], 4)
        np.testing.assert_array_equal(color_order(star, "natural"), np.arange(5))
        np.testing.assert_array_equal(color_order(star, "random:3"), color_order(star, "random:3"))
        with self.assertRaises(InvalidArgumentError):
            color_order(star, "largest-first")


class TestEdgeListFiles(unittest.TestCase):
    """Edge-list text format"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_written_graph_reads_back(self):
        g = random_planar_graph(30, seed=1)
        path = write_edge_list(g, os.path.join(self.tmp.name, "g.txt"))
        h = read_edge_list(path)
        np.testing.assert_array_equal(g.indptr, h.indptr)
        np.testing.assert_array_equal(g.indices, h.indices)

    def test_parse_error_names_the_line(self):
        path = os.path.join(self.tmp.name, "bad.txt")
        with open(path, "w") as f:
            f.write("# comment\n3\n0 1\n0 x\n")
        with self.assertRaises(InvalidArgumentError) as ctx:
            read_edge_list(path)
        self.assertIn("bad.txt:4", str(ctx.exception))

    def test_missing_file_is_an_os_error(self):
        with self.assertRaises(OSError):
            read_edge_list(os.path.join(self.tmp.name, "absent.txt"))


if __name__ == "__main__":
    unittest.main()
