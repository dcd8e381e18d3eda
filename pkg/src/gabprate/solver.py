"""Synchronous message-passing solver for ``Ax = b`` and the Jacobi baseline.

Each round every node ``i`` forms::

    a_i = a_ii - sum_{v in N_i} a_vi a_iv / a_{v->i}
    b_i = b_i  - sum_{v in N_i} a_iv b_{v->i} / a_{v->i}
    x_i = b_i / a_i

and sends ``a_{i->j} = a_i + a_ji a_ij / a_{j->i}`` and
``b_{i->j} = b_i + a_ij b_{j->i} / a_{j->i}`` to each neighbour ``j``, with
every right-hand side read from the previous round.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import NonPositiveDiagonal, NumericalFailure, ZeroDiagonal
from .system import InducedGraph, Solution, SparseSystem, as_scaling, build_induced_graph, edge_weights

DIVISOR_GUARD = 1e-12


@dataclass(frozen=True, eq=False)
class MessageState:
    """All messages after ``round`` synchronous rounds.

    ``a_msg[e]`` and ``b_msg[e]`` belong to directed edge
    ``g.directed_edges[e]``. ``messages_sent`` counts the directed messages
    emitted in the round that produced this state.
    """

    round: int
    a_msg: np.ndarray
    b_msg: np.ndarray
    a_node: np.ndarray
    b_node: np.ndarray
    x_est: np.ndarray
    messages_sent: int = 0

    def message(self, g: InducedGraph, i, j):
        k = g.edge_index[(i, j)]
        return float(self.a_msg[k]), float(self.b_msg[k])


class Termination(enum.Enum):
    MaxRounds = "max_rounds"
    Converged = "converged"
    NumericalFailure = "numerical_failure"


@dataclass(eq=False)
class Trajectory:
    """Per-round estimates ``x[k]`` for ``k = 0..rounds_executed``.

    ``errors[k] = x[k] - x*`` when an oracle solution was supplied.
    """

    x: np.ndarray
    rounds_executed: int
    termination: Termination
    errors: Optional[np.ndarray] = None
    failure: Optional[NumericalFailure] = None

    def mse(self) -> np.ndarray:
        """Per-round mean squared error against the oracle."""
        if self.errors is None:
            raise ValueError("trajectory was recorded without an oracle")
        return np.mean(self.errors**2, axis=1)

    def log10_mse(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log10(self.mse())


class _Prepared:
    __slots__ = ("g", "diag", "b", "a_out", "a_in", "src", "dst", "rev", "coupling")

    def __init__(self, sys: SparseSystem, g: InducedGraph):
        self.g = g
        self.diag = np.asarray(sys.diag)
        self.b = np.asarray(sys.b)
        self.a_out, self.a_in = edge_weights(sys, g)
        self.src, self.dst, self.rev = g.src, g.dst, g.rev
        self.coupling = self.a_out * self.a_in


def init_messages(sys: SparseSystem, g: InducedGraph) -> MessageState:
    if np.any(sys.diag <= 0):
        i = int(np.argmax(sys.diag <= 0))
        raise NonPositiveDiagonal(f"a[{i},{i}] = {sys.diag[i]!r} is not positive")
    diag, b = np.asarray(sys.diag), np.asarray(sys.b)
    return MessageState(
        round=0,
        a_msg=diag[g.src].copy(),
        b_msg=b[g.src].copy(),
        a_node=diag.copy(),
        b_node=b.copy(),
        x_est=b / diag,
        messages_sent=len(g.directed_edges),
    )


def _step(p: _Prepared, prev: MessageState) -> MessageState:
    k = prev.round + 1
    n = p.diag.size
    a_prev, b_prev = prev.a_msg, prev.b_msg
    if a_prev.size:
        small = np.abs(a_prev) < DIVISOR_GUARD * np.abs(p.diag[p.src])
        if np.any(small):
            e = int(np.argmax(small))
            raise NumericalFailure(k, p.g.directed_edges[e], float(a_prev[e]))
    # edge e = (v -> i): a_out[e] = a_vi, a_in[e] = a_iv
    a_node = p.diag - np.bincount(p.dst, weights=p.coupling / a_prev, minlength=n)
    b_node = p.b - np.bincount(p.dst, weights=p.a_in * b_prev / a_prev, minlength=n)
    small = np.abs(a_node) < DIVISOR_GUARD * np.abs(p.diag)
    if np.any(small):
        i = int(np.argmax(small))
        raise NumericalFailure(k, (i, i), float(a_node[i]))
    x = b_node / a_node
    # edge e = (i -> j) reads the reverse message (j -> i)
    a_rev, b_rev = a_prev[p.rev], b_prev[p.rev]
    a_msg = a_node[p.src] + p.coupling / a_rev
    b_msg = b_node[p.src] + p.a_out * b_rev / a_rev
    return MessageState(k, a_msg, b_msg, a_node, b_node, x, messages_sent=a_msg.size)


def step(sys: SparseSystem, g: InducedGraph, prev: MessageState) -> MessageState:
    """Advance one synchronous round; raises :class:`NumericalFailure` on divisor collapse."""
    return _step(_Prepared(sys, g), prev)


def iterate_states(sys: SparseSystem, g: InducedGraph, rounds: int):
    """Yield the round-0 state and the next ``rounds`` states."""
    p = _Prepared(sys, g)
    state = init_messages(sys, g)
    yield state
    for _ in range(rounds):
        state = _step(p, state)
        yield state


def _record(xs, oracle, termination, failure=None):
    x = np.vstack(xs)
    errors = None if oracle is None else x - np.asarray(oracle.x)[None, :]
    return Trajectory(x, len(xs) - 1, termination, errors, failure)


def run(
    sys: SparseSystem,
    g: Optional[InducedGraph] = None,
    max_rounds: int = 100,
    stop_tol: float = 1e-12,
    oracle: Optional[Solution] = None,
) -> Trajectory:
    """Run the message-passing solver until ``max_rounds`` or successive change < ``stop_tol``.

    A divisor collapse ends the run with ``Termination.NumericalFailure``
    and keeps the rounds computed so far.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    g = build_induced_graph(sys) if g is None else g
    p = _Prepared(sys, g)
    state = init_messages(sys, g)
    xs = [state.x_est]
    for _ in range(max_rounds):
        try:
            nxt = _step(p, state)
        except NumericalFailure as exc:
            return _record(xs, oracle, Termination.NumericalFailure, exc)
        xs.append(nxt.x_est)
        if np.max(np.abs(nxt.x_est - state.x_est), initial=0.0) < stop_tol:
            return _record(xs, oracle, Termination.Converged)
        state = nxt
    return _record(xs, oracle, Termination.MaxRounds)


def jacobi_run(
    sys: SparseSystem,
    max_rounds: int = 100,
    stop_tol: float = 1e-12,
    oracle: Optional[Solution] = None,
) -> Trajectory:
    """Jacobi iteration ``x <- A_d^{-1} (b - (A - A_d) x)`` from ``x0 = A_d^{-1} b``."""
    diag = np.asarray(sys.diag)
    if np.any(diag == 0):
        i = int(np.argmax(diag == 0))
        raise ZeroDiagonal(f"a[{i},{i}] is zero")
    off = sys.rows != sys.cols
    N = sp.csr_matrix((sys.vals[off], (sys.rows[off], sys.cols[off])), shape=(sys.n, sys.n))
    x = sys.b / diag
    xs = [x]
    if sys.n == 0 or N.nnz == 0:
        return _record(xs, oracle, Termination.Converged)
    for _ in range(max_rounds):
        nxt = (sys.b - N @ x) / diag
        xs.append(nxt)
        if np.max(np.abs(nxt - x)) < stop_tol:
            return _record(xs, oracle, Termination.Converged)
        x = nxt
    return _record(xs, oracle, Termination.MaxRounds)


def transform_system(sys: SparseSystem, d) -> SparseSystem:
    """``D^{-1} A D`` and ``D^{-1} b``; sparsity and diagonal are unchanged."""
    dv = as_scaling(d, sys.n).d
    vals = sys.vals * dv[sys.cols] / dv[sys.rows]
    on = sys.rows == sys.cols
    vals[on] = sys.vals[on]
    return SparseSystem(sys.n, sys.rows, sys.cols, vals, sys.b / dv)
