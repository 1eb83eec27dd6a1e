"""
Sparse symmetric positive-definite linear algebra.

Matrices are ``scipy.sparse.csr_matrix`` in canonical form (sorted, duplicate-free
column indices) with both triangles stored. The Cholesky factor is up-looking over
the elimination tree: a symbolic phase fixes the permutation and the fill pattern
of L once, and every numeric phase after that only recomputes values. L is kept in
compressed-column form with the diagonal first in each column.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.io
from numba import njit
from scipy import sparse
from scipy.sparse.csgraph import reverse_cuthill_mckee

from config.settings import PIVOT_RTOL
from utils.instrument import timed_operation
from .errors import InvalidArgumentError, NotPositiveDefiniteError, SingularFactorError

logger = logging.getLogger(__name__)

ORDERINGS = ("natural", "rcm")


@dataclass
class SparseCounters:
    """Instrumentation shared by the factorization cache and the field kernels."""

    symbolic: int = 0
    numeric: int = 0
    solves: int = 0
    factor_bytes: int = 0

    def as_dict(self) -> dict:
        return {
            "symbolic_factorizations": self.symbolic,
            "numeric_factorizations": self.numeric,
            "triangular_solves": self.solves,
            "factor_bytes": self.factor_bytes,
        }


# --- CSR helpers ---

def as_csr(A, copy: bool = False) -> sparse.csr_matrix:
    """Canonical float64 CSR view of ``A`` (square)."""
    M = sparse.csr_matrix(A, dtype=np.float64, copy=copy)
    if M.shape[0] != M.shape[1]:
        raise InvalidArgumentError(f"Expected a square matrix, got shape {M.shape}")
    if not M.has_canonical_format:
        M = M.copy()
        M.sum_duplicates()
    return M


def spmv(A, x) -> np.ndarray:
    """Sparse product A x."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"Vector of length {x.shape} does not conform with matrix of shape {A.shape}")
    return A @ x


def is_structurally_symmetric(A: sparse.csr_matrix) -> bool:
    P = A.copy()
    P.data = np.ones_like(P.data)
    return (P != P.T).nnz == 0


def diagonal_positions(A: sparse.csr_matrix) -> np.ndarray:
    """Index into ``A.data`` of each diagonal entry, -1 where none is stored."""
    n = A.shape[0]
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    hit = np.flatnonzero(A.indices == rows)
    pos = np.full(n, -1, dtype=np.int64)
    pos[rows[hit]] = hit
    return pos


def ensure_diagonal(A: sparse.csr_matrix) -> sparse.csr_matrix:
    """Return A with an explicitly stored (possibly zero) diagonal entry in every row."""
    A = as_csr(A)
    if np.all(diagonal_positions(A) >= 0):
        return A
    n = A.shape[0]
    rows = np.concatenate([np.repeat(np.arange(n), np.diff(A.indptr)), np.arange(n)])
    cols = np.concatenate([A.indices, np.arange(n)])
    vals = np.concatenate([A.data, np.zeros(n)])
    M = sparse.coo_matrix((vals, (rows, cols)), shape=A.shape).tocsr()
    M.sum_duplicates()
    return M


# --- numba kernels ---

@njit(cache=True)
def _etree(n, cp, ci):
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        for p in range(cp[k], cp[k + 1]):
            i = ci[p]
            while i != -1 and i < k:
                inext = ancestor[i]
                ancestor[i] = k
                if inext == -1:
                    parent[i] = k
                i = inext
    return parent


@njit(cache=True)
def _ereach(k, cp, ci, parent, s, w):
    """Pattern of row k of L, topologically ordered in s[top:n]."""
    n = s.shape[0]
    top = n
    w[k] = k
    for p in range(cp[k], cp[k + 1]):
        i = ci[p]
        if i > k:
            continue
        length = 0
        while w[i] != k:
            s[length] = i
            length += 1
            w[i] = k
            i = parent[i]
        while length > 0:
            top -= 1
            length -= 1
            s[top] = s[length]
    return top


@njit(cache=True)
def _symbolic_kernel(n, cp, ci, parent):
    s = np.empty(n, dtype=np.int64)
    w = np.full(n, -1, dtype=np.int64)
    counts = np.ones(n, dtype=np.int64)
    rptr = np.zeros(n + 1, dtype=np.int64)
    for k in range(n):
        top = _ereach(k, cp, ci, parent, s, w)
        rptr[k + 1] = rptr[k] + (n - top)
        for t in range(top, n):
            counts[s[t]] += 1

    lp = np.zeros(n + 1, dtype=np.int64)
    for j in range(n):
        lp[j + 1] = lp[j] + counts[j]
    li = np.empty(lp[n], dtype=np.int64)
    rcol = np.empty(rptr[n], dtype=np.int64)
    rpos = np.empty(rptr[n], dtype=np.int64)
    nxt = lp[:n].copy()
    w[:] = -1
    for k in range(n):
        top = _ereach(k, cp, ci, parent, s, w)
        q = rptr[k]
        for t in range(top, n):
            i = s[t]
            rcol[q] = i
            rpos[q] = nxt[i]
            li[nxt[i]] = k
            nxt[i] += 1
            q += 1
        li[nxt[k]] = k
        nxt[k] += 1
    return lp, li, rptr, rcol, rpos


@njit(cache=True)
def _numeric_kernel(n, cp, ci, cx, lp, li, rptr, rcol, rpos, tol, lx):
    """Up-looking numeric Cholesky into lx. Returns -1, or the failing pivot row."""
    x = np.zeros(n)
    for k in range(n):
        for p in range(cp[k], cp[k + 1]):
            x[ci[p]] = cx[p]
        d = x[k]
        x[k] = 0.0
        for q in range(rptr[k], rptr[k + 1]):
            i = rcol[q]
            lki = x[i] / lx[lp[i]]
            x[i] = 0.0
            for p in range(lp[i] + 1, rpos[q]):
                x[li[p]] -= lx[p] * lki
            d -= lki * lki
            lx[rpos[q]] = lki
        if not d > tol:
            lx[lp[k]] = d
            return k
        lx[lp[k]] = math.sqrt(d)
    return -1


@njit(cache=True)
def _lsolve(n, lp, li, lx, x):
    for j in range(n):
        if lx[lp[j]] == 0.0:
            return j
        x[j] /= lx[lp[j]]
        xj = x[j]
        for p in range(lp[j] + 1, lp[j + 1]):
            x[li[p]] -= lx[p] * xj
    return -1


@njit(cache=True)
def _ltsolve(n, lp, li, lx, x):
    for j in range(n - 1, -1, -1):
        if lx[lp[j]] == 0.0:
            return j
        acc = x[j]
        for p in range(lp[j] + 1, lp[j + 1]):
            acc -= lx[p] * x[li[p]]
        x[j] = acc / lx[lp[j]]
    return -1


# --- Symbolic / numeric phases ---

@dataclass(frozen=True, eq=False)
class SymbolicCholesky:
    """Permutation, elimination tree and fill pattern of L for one sparsity pattern."""

    n: int
    ordering: str
    perm: np.ndarray       # perm[new] = old
    pinv: np.ndarray       # pinv[old] = new
    parent: np.ndarray
    colptr: np.ndarray     # L column pointers
    rowidx: np.ndarray     # L row indices, diagonal first per column
    row_ptr: np.ndarray    # per-row reach of L, topological order
    row_col: np.ndarray
    row_pos: np.ndarray
    lower_ptr: np.ndarray  # lower triangle of P A P^T, row-wise
    lower_idx: np.ndarray
    value_map: np.ndarray  # lower triangle entry -> index into A.data
    diag_map: np.ndarray   # A.data index of each diagonal entry (-1 if absent)
    pattern_indptr: np.ndarray = field(repr=False)
    pattern_indices: np.ndarray = field(repr=False)

    @property
    def nnz(self) -> int:
        return int(self.colptr[-1])

    @property
    def fill_in(self) -> int:
        """Entries of L beyond the lower triangle of the permuted matrix."""
        return self.nnz - int(self.lower_ptr[-1])

    def matches(self, A: sparse.csr_matrix) -> bool:
        return (A.shape == (self.n, self.n)
                and np.array_equal(A.indptr, self.pattern_indptr)
                and np.array_equal(A.indices, self.pattern_indices))


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Numeric factor L with P A P^T = L L^T, sharing its symbolic structure."""

    symbolic: SymbolicCholesky
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.symbolic.n

    @property
    def perm(self) -> np.ndarray:
        return self.symbolic.perm

    @property
    def nnz(self) -> int:
        return self.symbolic.nnz

    @property
    def nbytes(self) -> int:
        s = self.symbolic
        return int(self.values.nbytes + s.colptr.nbytes + s.rowidx.nbytes)

    def to_sparse(self) -> sparse.csc_matrix:
        s = self.symbolic
        return sparse.csc_matrix((self.values.copy(), s.rowidx.copy(), s.colptr.copy()), shape=(s.n, s.n))

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def solve(self, b, counters: Optional[SparseCounters] = None) -> np.ndarray:
        """Solve A x = b through P, L and L^T."""
        b = np.asarray(b, dtype=np.float64)
        w = solve_lower(self, b[self.perm], counters)
        y = solve_upper(self, w, counters)
        x = np.empty_like(y)
        x[self.perm] = y
        return x


def _ordering_perm(A: sparse.csr_matrix, ordering: str) -> np.ndarray:
    n = A.shape[0]
    if ordering == "natural":
        return np.arange(n, dtype=np.int64)
    if ordering == "rcm":
        return np.asarray(reverse_cuthill_mckee(A, symmetric_mode=True), dtype=np.int64)
    raise InvalidArgumentError(f"Unknown ordering {ordering!r}; expected one of {ORDERINGS}")


@timed_operation(level=logging.DEBUG)
def symbolic_cholesky(pattern, ordering: str = "rcm") -> SymbolicCholesky:
    """
    Fill-reducing permutation, elimination tree and fill pattern of L.

    Only the sparsity of ``pattern`` is used. Deterministic for fixed inputs.
    """
    A = as_csr(pattern)
    if not is_structurally_symmetric(A):
        raise InvalidArgumentError("Cholesky pattern must be structurally symmetric")
    n = A.shape[0]
    perm = _ordering_perm(A, ordering)
    pinv = np.empty(n, dtype=np.int64)
    pinv[perm] = np.arange(n, dtype=np.int64)

    # Permute an index-valued copy so the numeric phase can gather A.data directly.
    T = sparse.csr_matrix((np.arange(1, A.nnz + 1, dtype=np.int64), A.indices, A.indptr), shape=A.shape)
    C = T[perm][:, perm].tocsr()
    C.sort_indices()
    rows = np.repeat(np.arange(n), np.diff(C.indptr))
    keep = C.indices <= rows
    lower_idx = C.indices[keep].astype(np.int64)
    value_map = (C.data[keep] - 1).astype(np.int64)
    lower_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows[keep], minlength=n), out=lower_ptr[1:])

    parent = _etree(n, lower_ptr, lower_idx)
    colptr, rowidx, row_ptr, row_col, row_pos = _symbolic_kernel(n, lower_ptr, lower_idx, parent)

    symbolic = SymbolicCholesky(
        n=n,
        ordering=ordering,
        perm=perm,
        pinv=pinv,
        parent=parent,
        colptr=colptr,
        rowidx=rowidx,
        row_ptr=row_ptr,
        row_col=row_col,
        row_pos=row_pos,
        lower_ptr=lower_ptr,
        lower_idx=lower_idx,
        value_map=value_map,
        diag_map=diagonal_positions(A),
        pattern_indptr=A.indptr.copy(),
        pattern_indices=A.indices.copy(),
    )
    logger.debug(f"Symbolic Cholesky ({ordering}): n={n}, nnz(A)={A.nnz}, nnz(L)={symbolic.nnz}, fill-in={symbolic.fill_in}")
    return symbolic


def numeric_cholesky(symbolic: SymbolicCholesky, values) -> CholeskyFactor:
    """
    Numeric factorization of ``values``, which must have the symbolic pattern exactly.

    Raises NotPositiveDefiniteError carrying the original index of the failing pivot.
    """
    A = as_csr(values)
    if not symbolic.matches(A):
        raise InvalidArgumentError("Matrix sparsity pattern differs from the symbolic factorization")
    n = symbolic.n
    lx = np.zeros(symbolic.nnz)
    if n == 0:
        return CholeskyFactor(symbolic=symbolic, values=lx)
    diag = symbolic.diag_map[symbolic.diag_map >= 0]
    max_diag = float(A.data[diag].max()) if diag.size else 0.0
    tol = PIVOT_RTOL * max(max_diag, 0.0)

    cx = A.data[symbolic.value_map]
    k = _numeric_kernel(n, symbolic.lower_ptr, symbolic.lower_idx, cx, symbolic.colptr, symbolic.rowidx,
                        symbolic.row_ptr, symbolic.row_col, symbolic.row_pos, tol, lx)
    if k >= 0:
        raise NotPositiveDefiniteError(int(symbolic.perm[k]), float(lx[symbolic.colptr[k]]))
    return CholeskyFactor(symbolic=symbolic, values=lx)


def _factor_arrays(L) -> tuple:
    if isinstance(L, CholeskyFactor):
        return L.symbolic.colptr, L.symbolic.rowidx, L.values
    M = sparse.csc_matrix(sparse.tril(sparse.csc_matrix(L, dtype=np.float64)), dtype=np.float64)
    M.sum_duplicates()
    M.sort_indices()
    n = M.shape[0]
    # every column needs its diagonal stored first
    empty = np.flatnonzero(np.diff(M.indptr) == 0)
    if empty.size:
        raise SingularFactorError(int(empty[0]))
    first_rows = M.indices[M.indptr[:-1]]
    if not np.all(first_rows == np.arange(n)):
        j = int(np.flatnonzero(first_rows != np.arange(n))[0])
        raise SingularFactorError(j)
    return M.indptr.astype(np.int64), M.indices.astype(np.int64), M.data


def solve_lower(L: Union[CholeskyFactor, sparse.spmatrix, np.ndarray], b,
                counters: Optional[SparseCounters] = None) -> np.ndarray:
    """Forward substitution L x = b (no permutation applied)."""
    lp, li, lx = _factor_arrays(L)
    n = lp.shape[0] - 1
    x = np.array(b, dtype=np.float64, copy=True)
    if x.shape != (n,):
        raise InvalidArgumentError(f"Right-hand side of shape {x.shape} does not conform with n={n}")
    j = _lsolve(n, lp, li, lx, x)
    if j >= 0:
        raise SingularFactorError(j)
    if counters is not None:
        counters.solves += 1
    return x


def solve_upper(L: Union[CholeskyFactor, sparse.spmatrix, np.ndarray], b,
                counters: Optional[SparseCounters] = None) -> np.ndarray:
    """Backward substitution L^T x = b, reading L in its lower-triangular storage."""
    lp, li, lx = _factor_arrays(L)
    n = lp.shape[0] - 1
    x = np.array(b, dtype=np.float64, copy=True)
    if x.shape != (n,):
        raise InvalidArgumentError(f"Right-hand side of shape {x.shape} does not conform with n={n}")
    j = _ltsolve(n, lp, li, lx, x)
    if j >= 0:
        raise SingularFactorError(j)
    if counters is not None:
        counters.solves += 1
    return x


class CholeskyCache:
    """
    Holds one symbolic analysis and refactorizes numerically on demand.

    The symbolic phase runs on the first call (or eagerly when a pattern is given);
    subsequent matrices must share its pattern.
    """

    def __init__(self, pattern=None, ordering: str = "rcm", counters: Optional[SparseCounters] = None):
        if ordering not in ORDERINGS:
            raise InvalidArgumentError(f"Unknown ordering {ordering!r}; expected one of {ORDERINGS}")
        self.ordering = ordering
        self.counters = counters if counters is not None else SparseCounters()
        self.symbolic: Optional[SymbolicCholesky] = None
        if pattern is not None:
            self._analyse(pattern)

    def _analyse(self, pattern) -> None:
        self.symbolic = symbolic_cholesky(pattern, self.ordering)
        self.counters.symbolic += 1

    def factorize(self, A) -> CholeskyFactor:
        A = as_csr(A)
        if self.symbolic is None:
            self._analyse(A)
        factor = numeric_cholesky(self.symbolic, A)
        self.counters.numeric += 1
        self.counters.factor_bytes = max(self.counters.factor_bytes, factor.nbytes)
        return factor


# --- Oracles and IO ---

def dense_cholesky(A) -> np.ndarray:
    """Textbook dense Cholesky, used as a test oracle."""
    A = np.array(A.toarray() if sparse.issparse(A) else A, dtype=np.float64)
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if d <= 0:
            raise NotPositiveDefiniteError(j, float(d))
        L[j, j] = math.sqrt(d)
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def write_matrix_market(A, path: str, comment: str = "") -> str:
    scipy.io.mmwrite(path, sparse.coo_matrix(A), comment=comment)
    return path


def read_matrix_market(path: str) -> sparse.csr_matrix:
    return as_csr(scipy.io.mmread(path))
