"""Problem representation: the sparse system, its induced graph and scalings.

Node indices are 0-based throughout the Python API. File formats that are
1-based (Matrix Market) convert at the I/O boundary.
"""
from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import SingularMatrix


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Square sparse matrix ``A`` (COO triplets, diagonal always stored) and rhs ``b``.

    Off-diagonal zeros are treated as structural absence and are dropped by
    the constructors. Use :meth:`from_dense` or :meth:`from_entries` rather
    than the raw constructor.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        n = int(self.n)
        rows = _frozen(self.rows, np.int64)
        cols = _frozen(self.cols, np.int64)
        vals = _frozen(self.vals, np.float64)
        b = _frozen(self.b, np.float64).ravel()
        if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
            raise ValueError("rows, cols and vals must be 1-d arrays of equal length")
        if b.shape != (n,):
            raise ValueError(f"b has length {b.size}, expected {n}")
        if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
            raise ValueError("entry index out of range")
        if not np.all(np.isfinite(vals)):
            raise ValueError("matrix entries must be finite")
        if not np.all(np.isfinite(b)):
            raise ValueError("b must be finite")
        # canonical row-major order; duplicates are rejected
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        off = rows != cols
        if np.any(vals[off] == 0.0):
            raise ValueError("stored off-diagonal entries must be nonzero")
        if rows.size > 1:
            dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if np.any(dup):
                k = int(np.argmax(dup))
                raise ValueError(f"duplicate entry ({rows[k]}, {cols[k]})")
        diag_count = np.bincount(rows[~off], minlength=n)
        if np.any(diag_count != 1):
            missing = int(np.argmin(diag_count))
            raise ValueError(f"diagonal entry ({missing}, {missing}) is not stored")
        for name, arr in (("rows", rows), ("cols", cols), ("vals", vals)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_dense(cls, A, b) -> "SparseSystem":
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        mask = (A != 0.0) | np.eye(n, dtype=bool)
        rows, cols = np.nonzero(mask)
        return cls(n, rows, cols, A[rows, cols], np.asarray(b, dtype=np.float64))

    @classmethod
    def from_entries(cls, n, entries, b) -> "SparseSystem":
        """Build from a mapping ``(i, j) -> a_ij``; zero off-diagonals are dropped."""
        keys = [(int(i), int(j), float(v)) for (i, j), v in entries.items() if v != 0.0 or i == j]
        rows = [k[0] for k in keys]
        cols = [k[1] for k in keys]
        vals = [k[2] for k in keys]
        return cls(n, rows, cols, vals, np.asarray(b, dtype=np.float64))

    @classmethod
    def from_sparse(cls, A, b) -> "SparseSystem":
        A = sp.coo_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        A.sum_duplicates()
        n = A.shape[0]
        keep = (A.data != 0.0) | (A.row == A.col)
        rows, cols, vals = A.row[keep], A.col[keep], A.data[keep]
        # diagonals that were stored as explicit zero survive; absent ones error
        return cls(n, rows, cols, vals, np.asarray(b, dtype=np.float64))

    @cached_property
    def csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.n, self.n))

    @cached_property
    def diag(self) -> np.ndarray:
        d = np.empty(self.n)
        on = self.rows == self.cols
        d[self.rows[on]] = self.vals[on]
        d.setflags(write=False)
        return d

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    def entries(self) -> dict:
        return {(int(i), int(j)): float(v) for i, j, v in zip(self.rows, self.cols, self.vals)}

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        A[self.rows, self.cols] = self.vals
        return A

    def get(self, i, j) -> float:
        return float(self.csr[i, j])

    def with_rhs(self, b) -> "SparseSystem":
        return SparseSystem(self.n, self.rows, self.cols, self.vals, b)

    def matvec(self, x) -> np.ndarray:
        return self.csr @ np.asarray(x, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class InducedGraph:
    """Undirected graph with an edge ``{i, j}`` whenever ``a_ij != 0`` or ``a_ji != 0``.

    ``neighbors[i]`` is sorted ascending. Directed edges are enumerated in the
    order ``(i, j)`` for ``i`` ascending, then ``j`` ascending; ``src``, ``dst``
    and ``rev`` index that enumeration.
    """

    n: int
    neighbors: tuple
    edges: frozenset = field(repr=False)

    @cached_property
    def directed_edges(self) -> tuple:
        return tuple((i, j) for i in range(self.n) for j in self.neighbors[i])

    @cached_property
    def src(self) -> np.ndarray:
        return np.array([e[0] for e in self.directed_edges], dtype=np.int64)

    @cached_property
    def dst(self) -> np.ndarray:
        return np.array([e[1] for e in self.directed_edges], dtype=np.int64)

    @cached_property
    def edge_index(self) -> dict:
        return {e: k for k, e in enumerate(self.directed_edges)}

    @cached_property
    def rev(self) -> np.ndarray:
        idx = self.edge_index
        return np.array([idx[(j, i)] for (i, j) in self.directed_edges], dtype=np.int64)

    @cached_property
    def degree(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.neighbors], dtype=np.int64)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def components(self) -> list:
        """Connected components as sorted node lists, ordered by smallest node."""
        seen = np.zeros(self.n, dtype=bool)
        comps = []
        for s in range(self.n):
            if seen[s]:
                continue
            seen[s] = True
            comp, queue = [s], deque([s])
            while queue:
                u = queue.popleft()
                for v in self.neighbors[u]:
                    if not seen[v]:
                        seen[v] = True
                        comp.append(v)
                        queue.append(v)
            comps.append(sorted(comp))
        return comps

    def is_acyclic(self) -> bool:
        return self.num_edges == self.n - len(self.components())

    def distances_from(self, s) -> np.ndarray:
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in self.neighbors[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def diameter(self) -> int:
        """Largest diameter over the connected components (0 for edgeless graphs)."""
        return max((int(self.distances_from(s).max()) for s in range(self.n)), default=0)


def build_induced_graph(sys: SparseSystem) -> InducedGraph:
    off = sys.rows != sys.cols
    r, c = sys.rows[off], sys.cols[off]
    lo, hi = np.minimum(r, c), np.maximum(r, c)
    edges = frozenset(zip(lo.tolist(), hi.tolist()))
    nbrs = [set() for _ in range(sys.n)]
    for i, j in edges:
        nbrs[i].add(j)
        nbrs[j].add(i)
    return InducedGraph(sys.n, tuple(tuple(sorted(s)) for s in nbrs), edges)


def edge_weights(sys: SparseSystem, g: InducedGraph):
    """Return ``(a_ij, a_ji)`` arrays aligned with ``g.directed_edges``.

    Either array may contain zeros when the sparsity pattern is not
    symmetric.
    """
    if not g.directed_edges:
        return np.zeros(0), np.zeros(0)
    A = sys.csr
    a_out = np.asarray(A[g.src, g.dst]).ravel()
    a_in = np.asarray(A[g.dst, g.src]).ravel()
    return a_out, a_in


@dataclass(frozen=True, eq=False)
class Scaling:
    """Positive diagonal scaling ``D = diag(d)``."""

    d: np.ndarray

    def __post_init__(self):
        d = _frozen(self.d, np.float64).ravel()
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ValueError("scaling entries must be positive and finite")
        object.__setattr__(self, "d", d)

    @classmethod
    def identity(cls, n) -> "Scaling":
        return cls(np.ones(n))

    def __len__(self):
        return self.d.size


def as_scaling(d, n=None) -> Scaling:
    if d is None:
        if n is None:
            raise ValueError("need n to build an identity scaling")
        return Scaling.identity(n)
    s = d if isinstance(d, Scaling) else Scaling(d)
    if n is not None and len(s) != n:
        raise ValueError(f"scaling has length {len(s)}, expected {n}")
    return s


@dataclass(frozen=True, eq=False)
class Solution:
    x: np.ndarray
    residual_norm: float


def scaled_max_norm(x, d) -> float:
    """``max_v |x_v| / d_v``; 0 for an empty or zero vector."""
    x = np.asarray(x, dtype=np.float64)
    dv = d.d if isinstance(d, Scaling) else np.asarray(d, dtype=np.float64)
    if x.shape != dv.shape:
        raise ValueError("x and d lengths differ")
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x) / dv))


def direct_solve(sys: SparseSystem) -> Solution:
    """Dense LU with partial pivoting; the reference ``x* = A^{-1} b``."""
    A = sys.to_dense()
    n = sys.n
    if n == 0:
        return Solution(np.zeros(0), 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    perm = np.arange(n)
    for k, p in enumerate(piv):
        perm[k], perm[p] = perm[p], perm[k]
    row_scale = np.max(np.abs(A), axis=1)[perm]
    pivots = np.abs(np.diag(lu))
    bad = np.nonzero(pivots < 1e-14 * row_scale)[0]
    if bad.size:
        raise SingularMatrix(f"pivot {int(bad[0])} has magnitude {pivots[bad[0]]:.3e}")
    x = scipy.linalg.lu_solve((lu, piv), sys.b, check_finite=False)
    resid = float(np.max(np.abs(A @ x - sys.b)))
    x.setflags(write=False)
    return Solution(x, resid)
