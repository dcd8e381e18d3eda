"""Convergence-rate bounds for the message-passing solver.

Three families are provided:

* the edge-recursive bound (:func:`theorem1_bound`), built from the
  ``Lambda``/``eta`` recursion over directed edges;
* the spectral bound ``u_i rho^(k+1) ||x*||_u`` (:func:`rho_bound`);
* the loop-gain bound ``lambda_star`` (:func:`enumerate_simple_loops`).

:func:`estimate_asymptotic_rate` fits the observed decay for comparison.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dominance import Classification, classify, spectral_certificate, varrho
from .errors import DegenerateFit, NonPositiveLambda, NotGeneralizedDD, NotWeaklyDominant
from .solver import Trajectory, iterate_states
from .system import (
    InducedGraph,
    Solution,
    SparseSystem,
    as_scaling,
    build_induced_graph,
    direct_solve,
    edge_weights,
    scaled_max_norm,
)


@dataclass(frozen=True, eq=False)
class BoundState:
    """``Lambda`` and ``eta`` for every directed edge at one recursion level."""

    level: int
    lambda_edge: np.ndarray
    eta_edge: np.ndarray


@dataclass(frozen=True, eq=False)
class BoundTable:
    """Absolute error bounds: ``values[r, i]`` bounds ``|x_i^(k) - x*_i|`` for ``k = rounds[r]``."""

    rounds: np.ndarray
    values: np.ndarray
    kind: str

    def at(self, k) -> np.ndarray:
        r = np.searchsorted(self.rounds, k)
        if r >= self.rounds.size or self.rounds[r] != k:
            raise KeyError(k)
        return self.values[r]

    def log10_mean_square(self) -> np.ndarray:
        """Bounds on the same scale as ``log10 mean_i (x_i - x*_i)^2``."""
        with np.errstate(divide="ignore"):
            return np.log10(np.mean(self.values**2, axis=1))


@dataclass(frozen=True, eq=False)
class LoopGainReport:
    loops: list
    gains: np.ndarray
    per_node_gains: np.ndarray
    lambda_star: float
    truncated: bool
    acyclic: bool


@dataclass(frozen=True)
class RateEstimate:
    slope: float
    rate: float
    fit_window: tuple


def _require_weak(sys, d):
    report = classify(sys, d, spectral=False)
    if not report.satisfies(Classification.WeaklyDScaledDD):
        raise NotWeaklyDominant(report.diagnostic or "matrix is not weakly D-scaled dominant")


def bound_recursion(sys: SparseSystem, g: InducedGraph, d, levels: int) -> list:
    """``BoundState`` for levels ``0 .. levels-1``.

    For a directed edge ``i -> j``::

        Lambda = |a_ji| d_i - a_ji a_ij d_j varrho_j / a_{i->j}
        eta^0  = varrho_i
        eta^l  = varrho_i * S_eta / (|a_ij| d_j (1 - varrho_i varrho_j) + S_lambda)

    where the ``S`` sums run over ``v in N_i \\ {j}`` of the previous level's
    ``Lambda_{v->i} eta_{v->i}`` and ``Lambda_{v->i}``.
    """
    dv = as_scaling(d, sys.n).d
    rv = varrho(sys, dv)
    a_out, a_in = edge_weights(sys, g)  # a_ij, a_ji for edge i -> j
    src, dst, rev = g.src, g.dst, g.rev
    n = sys.n
    couple = a_in * a_out * dv[dst] * rv[dst]
    floor = np.abs(a_in) * dv[src] * (1.0 - rv[src] * rv[dst])
    base = np.abs(a_out) * dv[dst] * (1.0 - rv[src] * rv[dst])

    states = []
    lam_prev = eta_prev = None
    for level, msg in zip(range(levels), iterate_states(sys, g, max(levels - 1, 0))):
        lam = np.abs(a_in) * dv[src] - couple / msg.a_msg
        live = a_in != 0
        bad = live & ((lam <= 0) | (lam < floor - 1e-12 * np.abs(a_in) * dv[src]))
        if np.any(bad):
            e = int(np.argmax(bad))
            raise NonPositiveLambda(
                f"Lambda{g.directed_edges[e]} = {lam[e]!r} at level {level} (floor {floor[e]!r})"
            )
        if level == 0:
            eta = rv[src].copy()
        else:
            w = lam_prev * eta_prev
            s_eta = np.bincount(dst, weights=w, minlength=n)[src] - w[rev]
            s_lam = np.bincount(dst, weights=lam_prev, minlength=n)[src] - lam_prev[rev]
            s_eta = np.maximum(s_eta, 0.0)
            s_lam = np.maximum(s_lam, 0.0)
            den = base + s_lam
            with np.errstate(invalid="ignore", divide="ignore"):
                eta = np.where(den > 0, rv[src] * s_eta / den, 0.0)
        states.append(BoundState(level, lam, eta))
        lam_prev, eta_prev = lam, eta
    return states


def theorem1_bound(
    sys: SparseSystem,
    g: Optional[InducedGraph] = None,
    d=None,
    K: int = 100,
    solution: Optional[Solution] = None,
) -> BoundTable:
    """Per-node bound on ``|x_i^(k) - x*_i|`` for ``k = 1..K`` under scaling ``d``.

    The bound is ``d_i varrho_i (sum Lambda eta / sum Lambda) ||x*||_d`` with
    both sums over the incoming edges ``v -> i`` at level ``k - 1``. Isolated
    nodes are exact after one round and get bound 0.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    g = build_induced_graph(sys) if g is None else g
    dv = as_scaling(d, sys.n).d
    _require_weak(sys, dv)
    solution = direct_solve(sys) if solution is None else solution
    xnorm = scaled_max_norm(solution.x, dv)
    rv = varrho(sys, dv)
    n = sys.n
    out = np.zeros((K, n))
    for st in bound_recursion(sys, g, dv, K):
        num = np.bincount(g.dst, weights=st.lambda_edge * st.eta_edge, minlength=n)
        den = np.bincount(g.dst, weights=st.lambda_edge, minlength=n)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(den > 0, num / den, 0.0)
        out[st.level] = dv * rv * ratio * xnorm
    return BoundTable(np.arange(1, K + 1), out, "theorem1")


def rho_bound(sys: SparseSystem, K: int = 100, solution: Optional[Solution] = None, certificate=None) -> BoundTable:
    """``u_i rho^(k+1) ||x*||_u`` for ``k = 0..K``."""
    rho, u = spectral_certificate(sys) if certificate is None else certificate
    if rho >= 1.0:
        raise NotGeneralizedDD(f"spectral radius {rho:.6g} >= 1")
    solution = direct_solve(sys) if solution is None else solution
    xnorm = scaled_max_norm(solution.x, u)
    k = np.arange(K + 1)
    values = np.outer(rho ** (k + 1.0), u) * xnorm
    return BoundTable(k, values, "rho")


def _simple_cycles(g: InducedGraph, max_loops: int):
    """Undirected simple cycles of length >= 3, each listed once.

    A cycle is reported from its smallest node ``s`` and only in the
    orientation where the second node is smaller than the last, which
    removes rotations and reflections.
    """
    cycles = []
    truncated = False
    nbrs = g.neighbors
    for s in range(g.n):
        path = [s]
        on_path = {s}
        stack = [iter(nbrs[s])]
        while stack:
            advanced = False
            for v in stack[-1]:
                if v == s:
                    if len(path) >= 3 and path[1] < path[-1]:
                        if len(cycles) >= max_loops:
                            return cycles, True
                        cycles.append(tuple(path))
                elif v > s and v not in on_path:
                    path.append(v)
                    on_path.add(v)
                    stack.append(iter(nbrs[v]))
                    advanced = True
                    break
            if not advanced:
                stack.pop()
                on_path.discard(path.pop())
    return cycles, truncated


def enumerate_simple_loops(g: InducedGraph, varrho_vec, max_loops: int = 10**6) -> LoopGainReport:
    """Loop gains ``g(p) = prod varrho`` and per-node gains ``g(p)^(1/k)`` over simple loops.

    ``lambda_star`` is 0 for an acyclic graph. When more than ``max_loops``
    loops exist the report is truncated and ``lambda_star`` is only a lower
    bound on the true maximum.
    """
    loops, truncated = _simple_cycles(g, max_loops)
    return loop_gains(loops, varrho_vec, truncated)


def loop_gains(loops, varrho_vec, truncated=False) -> LoopGainReport:
    """Gains of an already enumerated loop list under a given ``varrho`` vector."""
    rv = np.asarray(varrho_vec, dtype=np.float64)
    gains = np.array([np.prod(rv[list(p)]) for p in loops])
    lengths = np.array([len(p) for p in loops], dtype=np.float64)
    per_node = gains ** (1.0 / lengths) if loops else np.zeros(0)
    lam = float(per_node.max()) if loops else 0.0
    return LoopGainReport(loops, gains, per_node, lam, truncated, acyclic=not loops and not truncated)


def lambda_star_at_perron(sys: SparseSystem, max_loops: int = 10**6) -> float:
    """Maximum loop gain per node with the Perron vector as scaling (equals ``rho`` on loopy graphs)."""
    rho, u = spectral_certificate(sys)
    if rho >= 1.0:
        raise NotGeneralizedDD(f"spectral radius {rho:.6g} >= 1")
    g = build_induced_graph(sys)
    return enumerate_simple_loops(g, varrho(sys, u), max_loops).lambda_star


def estimate_asymptotic_rate(traj: Trajectory, window=None) -> RateEstimate:
    """Least-squares slope of ``log10 mean_i (x_i^(k) - x*_i)^2`` against ``k``.

    ``window`` is an inclusive ``(first, last)`` round pair. By default the
    last half of the recorded rounds is used, dropping rounds whose RMS
    error is already at the float floor.
    """
    mse = traj.mse()
    rounds = np.arange(mse.size)
    if window is None:
        xstar = traj.x[0] - traj.errors[0]
        floor = 1e2 * np.finfo(float).eps * max(np.max(np.abs(xstar), initial=0.0), 1e-300)
        lo = int(np.ceil(traj.rounds_executed / 2))
        sel = (rounds >= lo) & (np.sqrt(mse) >= floor)
        if sel.sum() < 2:
            raise DegenerateFit("error reached the float floor; convergence is exact")
    else:
        lo, hi = int(window[0]), int(window[1])
        if lo < 0 or hi > traj.rounds_executed or hi - lo < 1:
            raise ValueError(f"window {window} outside recorded rounds 0..{traj.rounds_executed}")
        sel = (rounds >= lo) & (rounds <= hi)
        if np.any(mse[sel] == 0.0):
            raise DegenerateFit("error is exactly zero inside the fit window")
    k = rounds[sel]
    slope = float(np.polyfit(k, np.log10(mse[sel]), 1)[0])
    return RateEstimate(slope, 10.0 ** (slope / 2.0), (int(k[0]), int(k[-1])))
