"""Diagonal-dominance classification, Perron certificates and the diagonalizer.

For a positive scaling ``d`` the per-node dominance ratio is::

    varrho_i = sum_{j != i} |a_ij| d_j / (a_ii d_i)

All ``varrho_i < 1`` makes ``D^{-1} A D`` strictly diagonally dominant; the
weak condition only asks ``varrho_i * varrho_j < 1`` across every edge.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import GaBPError, IrreducibilityWarning, NonPositiveDiagonal, NotWeaklyDominant
from .system import InducedGraph, Scaling, SparseSystem, as_scaling, build_induced_graph

BORDERLINE_TOL = 1e-12


class Classification(enum.IntEnum):
    """Dominance classes ordered by strength (larger is stronger)."""

    NotWeaklyDD = 0
    WeaklyDScaledDD = 1
    DScaledDD = 2
    StrictDD = 3


class SpectralCertificate(NamedTuple):
    rho: float
    u: np.ndarray


@dataclass(frozen=True, eq=False)
class DominanceReport:
    varrho: np.ndarray
    classification: Classification
    spectral: Optional[SpectralCertificate] = None
    strictly_dominant: bool = False
    borderline_nodes: tuple = ()
    borderline_edges: tuple = ()
    diagnostic: str = ""

    def satisfies(self, cls: Classification) -> bool:
        """True when the reported class implies membership in ``cls``."""
        return self.classification >= cls


@dataclass(frozen=True, eq=False)
class DiagonalizerTrace:
    U_set: tuple
    epsilon: float
    rho_bar: dict
    rho_breve: dict
    d_tilde: Scaling
    transformed_varrho: np.ndarray


def _abs_offdiag(sys: SparseSystem) -> sp.csr_matrix:
    off = sys.rows != sys.cols
    return sp.csr_matrix(
        (np.abs(sys.vals[off]), (sys.rows[off], sys.cols[off])), shape=(sys.n, sys.n)
    )


def _check_diagonal(sys: SparseSystem):
    bad = np.nonzero(sys.diag <= 0)[0]
    if bad.size:
        i = int(bad[0])
        raise NonPositiveDiagonal(f"a[{i},{i}] = {sys.diag[i]!r} is not positive")


def varrho(sys: SparseSystem, d=None) -> np.ndarray:
    _check_diagonal(sys)
    dv = as_scaling(d, sys.n).d
    return (_abs_offdiag(sys) @ dv) / (sys.diag * dv)


def _edge_products(g: InducedGraph, rho_vec):
    if not g.edges:
        return np.zeros(0), []
    pairs = sorted(g.edges)
    i = np.array([p[0] for p in pairs])
    j = np.array([p[1] for p in pairs])
    return rho_vec[i] * rho_vec[j], pairs


def classify(sys: SparseSystem, d=None, spectral: bool = True) -> DominanceReport:
    """Strongest dominance class of ``A`` under scaling ``d`` (identity by default).

    ``StrictDD`` is reported only when ``A`` is row diagonally dominant *and*
    every ``varrho_i < 1`` under ``d``, so that each class implies all the
    weaker ones for the given scaling.
    """
    n = sys.n
    if np.any(sys.diag <= 0):
        i = int(np.argmax(sys.diag <= 0))
        return DominanceReport(
            varrho=np.full(n, np.nan),
            classification=Classification.NotWeaklyDD,
            diagnostic=f"non-positive diagonal at node {i}",
        )
    g = build_induced_graph(sys)
    rv = varrho(sys, d)
    products, pairs = _edge_products(g, rv)
    strict = bool(np.all(varrho(sys, None) < 1.0))

    if np.all(rv < 1.0):
        cls = Classification.StrictDD if strict else Classification.DScaledDD
    elif np.all(products < 1.0):
        cls = Classification.WeaklyDScaledDD
    else:
        cls = Classification.NotWeaklyDD

    b_nodes = tuple(int(i) for i in np.nonzero(np.abs(rv - 1.0) <= BORDERLINE_TOL)[0])
    b_edges = tuple(pairs[k] for k in np.nonzero(np.abs(products - 1.0) <= BORDERLINE_TOL)[0])
    diagnostic = ""
    if cls == Classification.NotWeaklyDD:
        k = int(np.argmax(products))
        diagnostic = f"edge {pairs[k]} has varrho product {products[k]:.6g} >= 1"
    elif b_nodes or b_edges:
        diagnostic = "borderline: some dominance ratios are within 1e-12 of 1"

    cert = spectral_certificate(sys) if spectral else None
    return DominanceReport(rv, cls, cert, strict, b_nodes, b_edges, diagnostic)


def _perron_component(M: sp.csr_matrix, tol, max_iter):
    """Perron pair of a nonnegative block whose undirected pattern is connected.

    Iterates on ``M + I`` so that periodic blocks (bipartite graphs) still
    converge; the Collatz-Wielandt ratios bracket the Perron root and the
    upper end is reported, so ``rho < 1`` is a sound certificate. A
    reducible block takes its root from the largest strongly connected
    piece and its vector from iterating until the vector stops moving.
    Returns ``((rho, v), reducible)``.
    """
    n_scc, labels = csgraph.connected_components(M, directed=True, connection="strong")
    if n_scc > 1:
        rho = 0.0
        for c in range(n_scc):
            idx = np.nonzero(labels == c)[0]
            if idx.size > 1:
                rho = max(rho, _perron_component(M[idx][:, idx], tol, max_iter)[0][0])
        v = np.ones(M.shape[0])
        for _ in range(max_iter):
            w = M @ v + v
            w /= w.max()
            done = np.max(np.abs(w - v)) <= tol
            v = w
            if done:
                break
        return (rho, v), True
    v = np.ones(M.shape[0])
    lo = hi = 0.0
    for _ in range(max_iter):
        w = M @ v + v
        ratios = w / v
        lo, hi = ratios.min(), ratios.max()
        if hi - lo <= tol * hi:
            break
        v = w / w.max()
    else:
        warnings.warn(
            f"power iteration stopped after {max_iter} iterations (gap {hi - lo:.3e})",
            RuntimeWarning,
            stacklevel=3,
        )
    # upper Collatz-Wielandt value for the returned vector: varrho_i(v) <= rho for every i
    return (max(float(hi) - 1.0, 0.0), v / v.max()), False


def spectral_certificate(sys: SparseSystem, tol: float = 1e-10, max_iter: int = 10000) -> SpectralCertificate:
    """Perron root and vector of ``|I - A_d^{-1} A|``, one block per connected component."""
    _check_diagonal(sys)
    Rbar = sp.csr_matrix(_abs_offdiag(sys).multiply(1.0 / sys.diag[:, None]))
    g = build_induced_graph(sys)
    u = np.ones(sys.n)
    rho = 0.0
    reducible = False
    for comp in g.components():
        if len(comp) == 1:
            continue
        idx = np.asarray(comp)
        (rho_c, u_c), red = _perron_component(Rbar[idx][:, idx], tol, max_iter)
        reducible |= red
        rho = max(rho, rho_c)
        u[idx] = u_c
    if reducible or np.any(u < 1e-12):
        warnings.warn(
            "|R| is reducible on some connected component; the Perron vector may be near zero there",
            IrreducibilityWarning,
            stacklevel=2,
        )
    u.setflags(write=False)
    return SpectralCertificate(rho, u)


def construct_diagonalizer(sys: SparseSystem, d=None) -> DiagonalizerTrace:
    """Turn a weakly D-scaled dominant ``A`` into a strictly dominant ``D~^{-1} A D~``.

    Nodes with ``varrho_i >= 1`` get their scale shrunk by
    ``rho_bar_i = eps + max_{j in N_i} varrho_j``. ``eps`` is half of the
    smallest slack in the two constraints ``rho_bar_i < 1`` and
    ``varrho_i * rho_bar_i < 1``.
    """
    d = as_scaling(d, sys.n)
    report = classify(sys, d, spectral=False)
    if not report.satisfies(Classification.WeaklyDScaledDD):
        raise NotWeaklyDominant(report.diagnostic or "matrix is not weakly D-scaled dominant")
    g = build_induced_graph(sys)
    rv = report.varrho
    U = tuple(int(i) for i in np.nonzero(rv >= 1.0)[0])
    if not U:
        return DiagonalizerTrace((), 0.0, {}, {}, d, rv)

    m = {i: max(rv[j] for j in g.neighbors[i]) for i in U}
    eps = 0.5 * min(min(1.0 - m[i], 1.0 / rv[i] - m[i]) for i in U)
    rho_bar = {i: eps + m[i] for i in U}
    in_U = set(U)
    rho_breve = {}
    for i in range(sys.n):
        if i in in_U:
            continue
        V_i = [j for j in g.neighbors[i] if j in in_U]
        rho_breve[i] = min(rho_bar[j] for j in V_i) if V_i else 1.0

    dt = d.d.copy()
    for i in U:
        dt[i] /= rho_bar[i]
    d_tilde = Scaling(dt)
    transformed = varrho(sys, d_tilde)
    if not np.all(transformed < 1.0):
        k = int(np.argmax(transformed))
        raise GaBPError(f"diagonalizer check failed at node {k}: varrho = {transformed[k]!r}")
    return DiagonalizerTrace(U, float(eps), rho_bar, rho_breve, d_tilde, transformed)
