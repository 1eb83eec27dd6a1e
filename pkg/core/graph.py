"""
Undirected Markov graphs, lattice/edge-list construction and greedy colouring.

A graph is stored as CSR adjacency (``indptr``/``indices``/``weights``) with
sorted, duplicate-free neighbour lists and no self loops. Colourings label
nodes 1..k and keep the colour classes as sorted index arrays.
"""
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.sparse.csgraph import connected_components as _cc
from scipy.spatial import Delaunay

from config.settings import DENSE_LIMIT
from utils.instrument import timed_operation
from .errors import InvalidArgumentError

logger = logging.getLogger(__name__)


class Neighborhood(str, Enum):
    ROOK4 = "rook4"
    KING8 = "king8"


# Forward half of each stencil; the other half follows from symmetry
_STENCILS = {
    Neighborhood.ROOK4: ((0, 1), (1, 0)),
    Neighborhood.KING8: ((0, 1), (1, 0), (1, 1), (1, -1)),
}


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class MarkovGraph:
    """Undirected neighbourhood structure with symmetric edge weights."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    shape_hint: Optional[Tuple[int, int]] = field(default=None)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def neighbor_weights(self, i: int) -> np.ndarray:
        return self.weights[self.indptr[i]:self.indptr[i + 1]]

    @property
    def adjacency(self) -> List[List[int]]:
        return [self.neighbors(i).tolist() for i in range(self.n)]

    @property
    def degrees(self) -> np.ndarray:
        """Neighbour counts |N(i)|."""
        return np.diff(self.indptr)

    @property
    def weighted_degrees(self) -> np.ndarray:
        """Diagonal of D: sum_j w_ij."""
        rows = np.repeat(np.arange(self.n), self.degrees)
        return np.bincount(rows, weights=self.weights, minlength=self.n)

    @property
    def n_edges(self) -> int:
        return int(self.indices.size // 2)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n else 0

    def edges(self) -> Tuple[np.ndarray, np.ndarray]:
        """Undirected edges as an (m, 2) array with i < j, plus their weights."""
        rows = np.repeat(np.arange(self.n), self.degrees)
        keep = rows < self.indices
        return np.column_stack([rows[keep], self.indices[keep]]), self.weights[keep]

    def weight_matrix(self) -> sparse.csr_matrix:
        return sparse.csr_matrix((self.weights.copy(), self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))

    def connected_components(self) -> Tuple[int, np.ndarray]:
        count, labels = _cc(self.weight_matrix(), directed=False)
        return int(count), labels


def _assemble(n: int, i: np.ndarray, j: np.ndarray, w: np.ndarray,
              shape_hint: Optional[Tuple[int, int]] = None) -> MarkovGraph:
    """Symmetrise, collapse duplicates and sort an edge set into CSR adjacency."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    a = np.minimum(i, j)
    b = np.maximum(i, j)
    keys, first = np.unique(a * n + b, return_index=True)
    if keys.size != a.size:
        dup_w = w[np.setdiff1d(np.arange(a.size), first)]
        if dup_w.size and not np.all(np.isin(dup_w, w[first])):
            logger.warning("Duplicate edges carry different weights; keeping the first occurrence")
    a, b, w = a[first], b[first], w[first]

    rows = np.concatenate([a, b])
    cols = np.concatenate([b, a])
    vals = np.concatenate([w, w])
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return MarkovGraph(
        n=int(n),
        indptr=_frozen(indptr),
        indices=_frozen(cols),
        weights=_frozen(vals),
        shape_hint=shape_hint,
    )


def build_lattice(rows: int, cols: int, neighborhood: Union[str, Neighborhood] = Neighborhood.KING8) -> MarkovGraph:
    """
    Regular rows x cols lattice with row-major node numbering.

    Boundary pixels keep truncated neighbourhoods; there is no wrap-around.
    """
    if rows < 1 or cols < 1:
        raise InvalidArgumentError(f"Lattice dimensions must be positive, got {rows}x{cols}")
    try:
        neighborhood = Neighborhood(neighborhood)
    except ValueError:
        raise InvalidArgumentError(f"Unknown neighborhood {neighborhood!r}; expected rook4 or king8")

    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    r = r.ravel()
    c = c.ravel()
    src, dst = [], []
    for dr, dc in _STENCILS[neighborhood]:
        rr, cc = r + dr, c + dc
        ok = (rr >= 0) & (rr < rows) & (cc >= 0) & (cc < cols)
        src.append(r[ok] * cols + c[ok])
        dst.append(rr[ok] * cols + cc[ok])
    i = np.concatenate(src)
    j = np.concatenate(dst)
    return _assemble(rows * cols, i, j, np.ones(i.size), shape_hint=(rows, cols))


def from_edge_list(n: int, edges: Iterable[Sequence[float]]) -> MarkovGraph:
    """Build a graph from (i, j) or (i, j, w) tuples; duplicates collapse, symmetry is enforced."""
    if n < 0:
        raise InvalidArgumentError(f"Node count must be non-negative, got {n}")
    triples = [tuple(e) for e in edges]
    i = np.array([t[0] for t in triples], dtype=np.int64)
    j = np.array([t[1] for t in triples], dtype=np.int64)
    w = np.array([t[2] if len(t) > 2 else 1.0 for t in triples], dtype=np.float64)
    if i.size:
        bad = (i < 0) | (i >= n) | (j < 0) | (j >= n)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise InvalidArgumentError(f"Edge ({i[k]}, {j[k]}) out of range for n={n}")
        loops = i == j
        if loops.any():
            k = int(np.flatnonzero(loops)[0])
            raise InvalidArgumentError(f"Self-loop at node {i[k]} is not allowed")
        if np.any(w <= 0):
            raise InvalidArgumentError("Edge weights must be positive")
    return _assemble(n, i, j, w)


def random_planar_graph(n: int, seed: int) -> MarkovGraph:
    """Precinct-style irregular adjacency: Delaunay triangulation of uniform points in the unit square."""
    if n < 3:
        raise InvalidArgumentError(f"Need at least 3 nodes for a triangulation, got {n}")
    points = np.random.default_rng(seed).random((n, 2))
    tri = Delaunay(points).simplices
    i = np.concatenate([tri[:, 0], tri[:, 1], tri[:, 2]])
    j = np.concatenate([tri[:, 1], tri[:, 2], tri[:, 0]])
    return _assemble(n, i, j, np.ones(i.size))


# --- Colouring ---

@dataclass(frozen=True, eq=False)
class Coloring:
    """Node -> colour map (colours 1..k) with its colour classes A_1..A_k."""

    assignment: np.ndarray
    k: int
    classes: Tuple[np.ndarray, ...]

    @classmethod
    def from_assignment(cls, assignment: Sequence[int]) -> "Coloring":
        assignment = np.asarray(assignment, dtype=np.int64)
        k = int(assignment.max()) if assignment.size else 0
        order = np.argsort(assignment, kind="stable")
        bounds = np.searchsorted(assignment[order], np.arange(1, k + 2))
        classes = tuple(_frozen(order[bounds[c]:bounds[c + 1]].copy()) for c in range(k))
        return cls(assignment=_frozen(assignment.copy()), k=k, classes=classes)

    @property
    def class_sizes(self) -> List[int]:
        return [int(c.size) for c in self.classes]


def color_order(graph: MarkovGraph, order: str = "natural") -> np.ndarray:
    """
    Visiting order for greedy colouring: ``natural``, ``random:<seed>`` or ``degree-desc``.
    """
    order = (order or "natural").strip()
    if order == "natural":
        return np.arange(graph.n)
    if order == "degree-desc":
        # ties broken by node index
        return np.lexsort((np.arange(graph.n), -graph.degrees))
    if order.startswith("random:"):
        try:
            seed = int(order.split(":", 1)[1])
        except ValueError:
            raise InvalidArgumentError(f"Bad random order seed in {order!r}")
        return np.random.default_rng(seed).permutation(graph.n)
    raise InvalidArgumentError(f"Unknown colour order {order!r}; expected natural, random:<seed> or degree-desc")


@timed_operation(level=logging.DEBUG)
def greedy_color(graph: MarkovGraph, order: Optional[Sequence[int]] = None) -> Coloring:
    """
    Smallest-available-colour greedy colouring, visiting nodes in ``order``.

    Uses at most max_degree + 1 colours. Isolated nodes receive colour 1.
    """
    n = graph.n
    order = np.arange(n) if order is None else np.asarray(order, dtype=np.int64)
    if order.shape != (n,) or not np.array_equal(np.sort(order), np.arange(n)):
        raise InvalidArgumentError("Colouring order must be a permutation of 0..n-1")

    indptr = graph.indptr.tolist()
    indices = graph.indices.tolist()
    colors = [0] * n
    # mark[c] == v means colour c is taken by a neighbour of v
    mark = [-1] * (graph.max_degree + 2)
    for v in order.tolist():
        for p in range(indptr[v], indptr[v + 1]):
            c = colors[indices[p]]
            if c:
                mark[c] = v
        c = 1
        while mark[c] == v:
            c += 1
        colors[v] = c

    coloring = Coloring.from_assignment(colors)
    logger.debug(f"Greedy colouring of {n} nodes used k={coloring.k} colours (max degree {graph.max_degree})")
    return coloring


def validate_coloring(graph: MarkovGraph, coloring: Coloring) -> bool:
    """True iff the colouring is proper and its classes partition the nodes consistently."""
    assignment = np.asarray(coloring.assignment)
    if assignment.shape != (graph.n,):
        raise InvalidArgumentError(
            f"Colouring covers {assignment.size} nodes but the graph has {graph.n}")
    if graph.n == 0:
        return coloring.k == 0 and len(coloring.classes) == 0
    if assignment.min() < 1 or assignment.max() > coloring.k or len(coloring.classes) != coloring.k:
        return False

    rows = np.repeat(np.arange(graph.n), graph.degrees)
    if np.any(assignment[rows] == assignment[graph.indices]):
        return False

    seen = np.zeros(graph.n, dtype=np.int64)
    for color, members in enumerate(coloring.classes, start=1):
        members = np.asarray(members)
        if members.size == 0 or np.any(assignment[members] != color):
            return False
        np.add.at(seen, members, 1)
    return bool(np.all(seen == 1))


# --- Text IO ---

def read_edge_list(path: str) -> MarkovGraph:
    """
    Read the edge-list format: first line ``n``, then ``i j [w]`` per line.

    Indices are 0-based; ``#`` starts a comment.
    """
    n = None
    edges = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if n is None:
                    if len(parts) != 1:
                        raise ValueError("expected the node count on its own line")
                    n = int(parts[0])
                    continue
                if len(parts) not in (2, 3):
                    raise ValueError(f"expected 'i j [w]', got {len(parts)} fields")
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as e:
                raise InvalidArgumentError(f"{path}:{lineno}: {e}")
            edges.append((i, j, w))
    if n is None:
        raise InvalidArgumentError(f"{path}: missing node count")
    graph = from_edge_list(n, edges)
    logger.info(f"Read graph from {path}: n={graph.n}, edges={graph.n_edges}")
    return graph


def write_edge_list(graph: MarkovGraph, path: str) -> str:
    pairs, weights = graph.edges()
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# undirected edge list: i j w\n{graph.n}\n")
        for (i, j), w in zip(pairs.tolist(), weights.tolist()):
            f.write(f"{i} {j} {w:g}\n")
    return path


def write_coloring_csv(coloring: Coloring, path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    pd.DataFrame({"node": np.arange(coloring.assignment.size), "color": coloring.assignment}).to_csv(path, index=False)
    return path


def car_rho_bounds(graph: MarkovGraph) -> Tuple[float, float]:
    """
    Propriety interval (1/lambda_min, 1/lambda_max) of D^{-1/2} W D^{-1/2}.

    Dense eigen-decomposition; every node needs at least one neighbour.
    """
    if graph.n > DENSE_LIMIT:
        raise InvalidArgumentError(f"Dense eigenvalue bound refused for n={graph.n} > {DENSE_LIMIT}")
    d = graph.weighted_degrees
    if np.any(d <= 0):
        raise InvalidArgumentError("Propriety bounds need every node to have a neighbour")
    scale = 1.0 / np.sqrt(d)
    m = graph.weight_matrix().toarray() * scale[:, None] * scale[None, :]
    eig = np.linalg.eigvalsh(m)
    return float(1.0 / eig[0]), float(1.0 / eig[-1])
