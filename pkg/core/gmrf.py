"""
GMRF precision structures and the three field-update kernels.

Every kernel targets N(Qp^-1 b, Qp^-1) for a ``GmrfConditional`` with
Qp = diag(noise) + prior / prior_scale:

* ``single_site_sweep``: sequential Gibbs in index order (numba loop).
* ``chromatic_sweep``: one colour class at a time, all sites of a class drawn
  together from sparse products with the current field; optionally split across
  a thread pool with output identical to the sequential mode.
* ``block_sample``: one numeric Cholesky factorization and three triangular solves.

Per-site normals are keyed by (iteration, site), so sweep results do not depend on
the order sites are visited within a colour class.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from numba import njit
from scipy import sparse

from config.settings import DENSE_LIMIT
from .errors import InvalidArgumentError, NotPositiveDefiniteError
from .graph import Coloring, MarkovGraph
from .rng import RngStream
from .sparsela import (
    CholeskyCache,
    SparseCounters,
    as_csr,
    dense_cholesky,
    diagonal_positions,
    ensure_diagonal,
    solve_lower,
    solve_upper,
)

logger = logging.getLogger(__name__)


class SamplerKind(str, Enum):
    SINGLE_SITE = "single_site"
    CHROMATIC = "chromatic"
    CHROMATIC_PARALLEL = "chromatic_parallel"
    BLOCK = "block"

    @property
    def is_chromatic(self) -> bool:
        return self in (SamplerKind.CHROMATIC, SamplerKind.CHROMATIC_PARALLEL)


# --- Precision structures ---

def _car_matrix(graph: MarkovGraph, rho: float) -> sparse.csr_matrix:
    """D - rho W with an explicit diagonal entry for every node (zero for isolated ones)."""
    n = graph.n
    deg = graph.degrees
    rows = np.concatenate([np.repeat(np.arange(n), deg), np.arange(n)])
    cols = np.concatenate([graph.indices, np.arange(n)])
    vals = np.concatenate([-rho * graph.weights, graph.weighted_degrees])
    order = np.lexsort((cols, rows))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg + 1, out=indptr[1:])
    return sparse.csr_matrix((vals[order], cols[order], indptr), shape=(n, n))


def iar_structure(graph: MarkovGraph) -> sparse.csr_matrix:
    """Intrinsic autoregressive structure D - W (rank n minus the number of components)."""
    if graph.n < 1:
        raise InvalidArgumentError("IAR structure needs at least one node")
    return _car_matrix(graph, 1.0)


def proper_car_structure(graph: MarkovGraph, rho: float) -> sparse.csr_matrix:
    """
    Proper CAR structure D - rho W.

    rho is not range-checked here; an improper value surfaces as
    NotPositiveDefiniteError when the matrix is factorized.
    """
    if graph.n < 1:
        raise InvalidArgumentError("CAR structure needs at least one node")
    if not np.isfinite(rho):
        raise InvalidArgumentError(f"rho must be finite, got {rho}")
    return _car_matrix(graph, float(rho))


# --- Conditionals and state ---

@dataclass
class GmrfConditional:
    """Target N(Qp^-1 b, Qp^-1) with Qp = diag(noise_diag) + prior / prior_scale."""

    prior: sparse.csr_matrix
    prior_scale: float
    noise_diag: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.prior = ensure_diagonal(self.prior)
        self.noise_diag = np.asarray(self.noise_diag, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        n = self.prior.shape[0]
        if self.noise_diag.shape != (n,) or self.b.shape != (n,):
            raise InvalidArgumentError(
                f"Dimension mismatch: prior is {n}x{n}, noise has {self.noise_diag.shape}, b has {self.b.shape}")
        if not self.prior_scale > 0:
            raise InvalidArgumentError(f"Prior scale must be positive, got {self.prior_scale}")

    @classmethod
    def from_precision(cls, Qp, b) -> "GmrfConditional":
        Qp = as_csr(Qp)
        return cls(prior=Qp, prior_scale=1.0, noise_diag=np.zeros(Qp.shape[0]), b=b)

    @property
    def n(self) -> int:
        return self.prior.shape[0]

    @cached_property
    def prior_diag_pos(self) -> np.ndarray:
        return diagonal_positions(self.prior)

    @cached_property
    def prior_diag(self) -> np.ndarray:
        return self.prior.data[self.prior_diag_pos]

    @cached_property
    def Qp(self) -> sparse.csr_matrix:
        """Conditional precision; same sparsity pattern as the prior."""
        Q = self.prior.copy()
        Q.data /= self.prior_scale
        Q.data[self.prior_diag_pos] += self.noise_diag
        return Q

    def site_precisions(self) -> np.ndarray:
        return self.noise_diag + self.prior_diag / self.prior_scale

    def site_variances(self) -> np.ndarray:
        """sigma_i^2 = 1 / (Qp)_ii."""
        prec = self.site_precisions()
        if np.any(~(prec > 0)):
            i = int(np.flatnonzero(~(prec > 0))[0])
            raise InvalidArgumentError(f"Non-positive conditional variance at site {i}")
        return 1.0 / prec


def posterior_conditional(prior, prior_scale: float, noise_diag, data_vec,
                          allow_zero_noise: bool = False) -> GmrfConditional:
    """
    Qp = diag(noise_diag) + prior / prior_scale and b = data_vec.

    Sites without data may carry zero noise precision when ``allow_zero_noise`` is set;
    otherwise every noise entry must be positive.
    """
    noise = np.asarray(noise_diag, dtype=np.float64)
    if not prior_scale > 0 or not np.isfinite(prior_scale):
        raise InvalidArgumentError(f"Prior scale must be positive, got {prior_scale}")
    bad = ~(noise >= 0) if allow_zero_noise else ~(noise > 0)
    if np.any(bad) or not np.all(np.isfinite(noise)):
        raise InvalidArgumentError("Noise precision diagonal must be positive")
    return GmrfConditional(prior=prior, prior_scale=float(prior_scale), noise_diag=noise, b=data_vec)


@dataclass
class FieldState:
    """Current field x with its per-site conditional variances and kernel counters."""

    x: np.ndarray
    cond_var: Optional[np.ndarray] = None
    counters: SparseCounters = field(default_factory=SparseCounters)
    sweeps: int = 0

    def __post_init__(self):
        self.x = np.array(self.x, dtype=np.float64)

    @property
    def n(self) -> int:
        return self.x.size


# --- Single-site kernel ---

@njit(cache=True)
def _single_site_kernel(indptr, indices, data, diag_pos, scale, noise, b, z, x):
    n = x.shape[0]
    for i in range(n):
        off = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if j != i:
                off += data[p] * x[j]
        prec = noise[i] + data[diag_pos[i]] / scale
        x[i] = (b[i] - off / scale) / prec + z[i] / math.sqrt(prec)


def single_site_sweep(state: FieldState, cond: GmrfConditional, s: RngStream, iteration: int = 0) -> FieldState:
    """
    One sequential Gibbs sweep in node order, each draw using the latest neighbour values.

    The Gaussian image conditional (y, beta0, sigma2, tau2, graph) enters through
    ``cond`` as built by ``posterior_conditional``.
    """
    if state.n != cond.n:
        raise InvalidArgumentError(f"State has {state.n} sites but the conditional has {cond.n}")
    state.cond_var = cond.site_variances()
    z = s.site_normals(iteration, np.arange(cond.n))
    P = cond.prior
    _single_site_kernel(P.indptr, P.indices, P.data, cond.prior_diag_pos, float(cond.prior_scale),
                        cond.noise_diag, cond.b, z, state.x)
    state.sweeps += 1
    return state


# --- Chromatic kernel ---

@dataclass(frozen=True, eq=False)
class _ClassBlock:
    sites: np.ndarray
    offdiag: sparse.csr_matrix  # prior rows of ``sites`` with the diagonal removed


@dataclass(frozen=True, eq=False)
class ChromaticPlan:
    """Per-colour (and per-chunk) row blocks of the prior, built once per chain."""

    coloring: Coloring
    blocks: Tuple[Tuple[_ClassBlock, ...], ...]

    @classmethod
    def build(cls, prior, coloring: Coloring, chunks: int = 1) -> "ChromaticPlan":
        P = ensure_diagonal(prior)
        n = P.shape[0]
        classes = [np.asarray(c, dtype=np.int64) for c in coloring.classes]
        if coloring.assignment.shape != (n,):
            raise InvalidArgumentError(f"Colouring covers {coloring.assignment.size} nodes, prior has {n}")
        members = np.concatenate(classes) if classes else np.zeros(0, dtype=np.int64)
        if members.size != n or not np.array_equal(np.sort(members), np.arange(n)):
            raise InvalidArgumentError("Colour classes do not partition the nodes")

        blocks = []
        for color, sites in enumerate(classes, start=1):
            if sites.size == 0:
                raise InvalidArgumentError(f"Colour class {color} is empty")
            rows = P[sites]
            local = np.repeat(np.arange(sites.size), np.diff(rows.indptr))
            self_term = rows.indices == sites[local]
            same_color = np.isin(rows.indices[~self_term], sites)
            if same_color.any():
                raise InvalidArgumentError(f"Colouring is not proper: colour {color} contains adjacent sites")
            rows.data[self_term] = 0.0
            rows.eliminate_zeros()
            parts = np.array_split(np.arange(sites.size), max(1, min(chunks, sites.size)))
            blocks.append(tuple(_ClassBlock(sites=sites[idx], offdiag=rows[idx]) for idx in parts))
        return cls(coloring=coloring, blocks=tuple(blocks))


def _update_block(block: _ClassBlock, x: np.ndarray, prec: np.ndarray, cond: GmrfConditional,
                  s: RngStream, iteration: int) -> None:
    A = block.sites
    off = block.offdiag @ x
    p = prec[A]
    mean = (cond.b[A] - off / cond.prior_scale) / p
    x[A] = mean + s.site_normals(iteration, A) / np.sqrt(p)


def chromatic_sweep(state: FieldState, coloring: Coloring, cond: GmrfConditional, s: RngStream,
                    iteration: int = 0, plan: Optional[ChromaticPlan] = None,
                    executor: Optional[ThreadPoolExecutor] = None) -> FieldState:
    """
    Update colour classes 1..k in order; sites within a class are drawn independently.

    With an executor, each class's chunks run concurrently and the pool is joined
    before the next colour. No factorization is performed.
    """
    if state.n != cond.n:
        raise InvalidArgumentError(f"State has {state.n} sites but the conditional has {cond.n}")
    if plan is None:
        plan = ChromaticPlan.build(cond.prior, coloring)
    prec = cond.site_precisions()
    state.cond_var = cond.site_variances()
    x = state.x
    for chunks in plan.blocks:
        if executor is None or len(chunks) == 1:
            for block in chunks:
                _update_block(block, x, prec, cond, s, iteration)
        else:
            list(executor.map(lambda blk: _update_block(blk, x, prec, cond, s, iteration), chunks))
    state.sweeps += 1
    return state


# --- Block kernel ---

def block_sample(cond: GmrfConditional, factor_cache: CholeskyCache, s: RngStream, iteration: int = 0,
                 counters: Optional[SparseCounters] = None) -> np.ndarray:
    """
    Exact joint draw: factor P Qp P^T = L L^T, then m from two solves and v from one.
    """
    counters = counters if counters is not None else factor_cache.counters
    factor = factor_cache.factorize(cond.Qp)
    perm = factor.perm
    w = solve_lower(factor, cond.b[perm], counters)
    pm = solve_upper(factor, w, counters)
    z = s.site_normals(iteration, np.arange(cond.n))
    pv = solve_upper(factor, z, counters)
    x = np.empty(cond.n)
    x[perm] = pm + pv
    return x


# --- Updater bound to one chain ---

class FieldUpdater:
    """Binds a kernel to its per-chain resources (symbolic factor, colour plan, thread pool)."""

    def __init__(self, kind, prior, coloring: Optional[Coloring] = None, workers: int = 1,
                 ordering: str = "rcm", counters: Optional[SparseCounters] = None):
        try:
            self.kind = SamplerKind(kind)
        except ValueError:
            raise InvalidArgumentError(f"Unknown sampler {kind!r}")
        if self.kind.is_chromatic and coloring is None:
            raise InvalidArgumentError(f"Sampler {self.kind.value} needs a colouring")
        if not self.kind.is_chromatic and coloring is not None:
            raise InvalidArgumentError(f"Sampler {self.kind.value} does not take a colouring")
        if workers < 1:
            raise InvalidArgumentError(f"workers must be >= 1, got {workers}")

        self.counters = counters if counters is not None else SparseCounters()
        self.coloring = coloring
        self.workers = workers
        self.cache: Optional[CholeskyCache] = None
        self.plan: Optional[ChromaticPlan] = None
        self._executor: Optional[ThreadPoolExecutor] = None

        prior = ensure_diagonal(prior)
        if self.kind is SamplerKind.BLOCK:
            self.cache = CholeskyCache(pattern=prior, ordering=ordering, counters=self.counters)
        elif self.kind.is_chromatic:
            chunks = workers if self.kind is SamplerKind.CHROMATIC_PARALLEL else 1
            self.plan = ChromaticPlan.build(prior, coloring, chunks=chunks)
            if self.kind is SamplerKind.CHROMATIC_PARALLEL:
                self._executor = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="chromatic")

    def new_state(self, x0) -> FieldState:
        return FieldState(x=x0, counters=self.counters)

    def update(self, state: FieldState, cond: GmrfConditional, s: RngStream, iteration: int) -> FieldState:
        if self.kind is SamplerKind.SINGLE_SITE:
            return single_site_sweep(state, cond, s, iteration)
        if self.kind.is_chromatic:
            return chromatic_sweep(state, self.coloring, cond, s, iteration, plan=self.plan, executor=self._executor)
        state.cond_var = cond.site_variances()
        state.x = block_sample(cond, self.cache, s, iteration, counters=state.counters)
        state.sweeps += 1
        return state

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self) -> "FieldUpdater":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# --- Oracles and helpers ---

def exact_moments_dense(cond: GmrfConditional) -> Tuple[np.ndarray, np.ndarray]:
    """Dense mean Qp^-1 b and covariance Qp^-1 (test oracle)."""
    n = cond.n
    if n > DENSE_LIMIT:
        raise InvalidArgumentError(f"Dense moments refused for n={n} > {DENSE_LIMIT}")
    Q = cond.Qp.toarray()
    try:
        L = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        dense_cholesky(Q)  # raises with the failing pivot
        raise NotPositiveDefiniteError(-1)
    mean = scipy.linalg.cho_solve((L, True), cond.b)
    cov = scipy.linalg.cho_solve((L, True), np.eye(n))
    return mean, cov


def sample_prior(structure, scale: float, s: RngStream, ordering: str = "rcm") -> np.ndarray:
    """Draw from the proper GMRF N(0, scale * structure^-1); intrinsic structures are refused."""
    if not scale > 0:
        raise InvalidArgumentError(f"Prior scale must be positive, got {scale}")
    Q = ensure_diagonal(structure) / scale
    factor = CholeskyCache(ordering=ordering).factorize(Q)
    z = s.generator.standard_normal(factor.n)
    y = solve_upper(factor, z)
    x = np.empty_like(y)
    x[factor.perm] = y
    return x


def center_field(x: np.ndarray, labels: Optional[np.ndarray] = None) -> np.ndarray:
    """Sum-to-zero projection, per connected component when labels are given."""
    x = np.asarray(x, dtype=np.float64)
    if labels is None:
        return x - x.mean()
    sums = np.bincount(labels, weights=x)
    counts = np.bincount(labels)
    return x - (sums / counts)[labels]
