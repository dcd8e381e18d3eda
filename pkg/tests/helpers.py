"""Independent oracles and small fixed instances shared by the test modules."""
import numpy as np

from gabprate.system import SparseSystem

TWO_NODE_A = np.array([[1.0, 0.5], [0.4, 1.0]])
WEAK_3_A = np.array([[1.0, 1.2, 0.0], [0.4, 1.0, 0.4], [0.0, 1.2, 1.0]])
# 5-node graph with edges 1-2, 1-3, 1-4, 2-5, 3-5, 4-5 (0-based below)
TWO_LAYER_EDGES = [(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4)]


def dense_varrho(A, d):
    """Independent dense evaluation of the row dominance ratios."""
    A = np.asarray(A, dtype=float)
    off = np.abs(A - np.diag(np.diag(A)))
    return off @ d / (np.diag(A) * d)


def dense_perron(A):
    """Spectral radius of |I - diag(A)^-1 A| via a full eigen-decomposition."""
    A = np.asarray(A, dtype=float)
    R = np.abs(np.eye(len(A)) - A / np.diag(A)[:, None])
    return float(np.max(np.abs(np.linalg.eigvals(R))))


def two_layer_system(seed=0):
    rng = np.random.default_rng(seed)
    A = np.eye(5) * 3.0
    for i, j in TWO_LAYER_EDGES:
        A[i, j] = rng.uniform(-1, 1)
        A[j, i] = rng.uniform(-1, 1)
    return SparseSystem.from_dense(A, np.arange(1.0, 6.0))



def _neighbors(A):
    n = len(A)
    return {i: [j for j in range(n) if j != i and (A[i, j] != 0 or A[j, i] != 0)] for i in range(n)}


def reference_messages(A, b, rounds):
    """Plain-loop synchronous message passing; returns per-round estimates and a-messages."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(A)
    nb = _neighbors(A)
    a_msg = {(i, j): A[i, i] for i in range(n) for j in nb[i]}
    b_msg = {(i, j): b[i] for i in range(n) for j in nb[i]}
    xs = [b / np.diag(A)]
    a_hist = [dict(a_msg)]
    for _ in range(rounds):
        a_node = np.array([A[i, i] - sum(A[v, i] * A[i, v] / a_msg[(v, i)] for v in nb[i]) for i in range(n)])
        b_node = np.array([b[i] - sum(A[i, v] * b_msg[(v, i)] / a_msg[(v, i)] for v in nb[i]) for i in range(n)])
        new_a, new_b = {}, {}
        for i in range(n):
            for j in nb[i]:
                new_a[(i, j)] = a_node[i] + A[j, i] * A[i, j] / a_msg[(j, i)]
                new_b[(i, j)] = b_node[i] + A[i, j] * b_msg[(j, i)] / a_msg[(j, i)]
        a_msg, b_msg = new_a, new_b
        xs.append(b_node / a_node)
        a_hist.append(dict(a_msg))
    return np.array(xs), a_hist


def reference_edge_bound(A, b, d, K):
    """Plain-loop evaluation of the edge-recursive bound, absolute scale, rounds 1..K."""
    A = np.asarray(A, dtype=float)
    d = np.asarray(d, dtype=float)
    n = len(A)
    nb = _neighbors(A)
    rv = dense_varrho(A, d)
    xstar = np.linalg.solve(A, b)
    xnorm = np.max(np.abs(xstar) / d)
    _, a_hist = reference_messages(A, b, K)
    out = np.zeros((K, n))
    lam_prev = eta_prev = None
    for level in range(K):
        am = a_hist[level]
        lam = {(i, j): abs(A[j, i]) * d[i] - A[j, i] * A[i, j] * d[j] * rv[j] / am[(i, j)] for (i, j) in am}
        if level == 0:
            eta = {(i, j): rv[i] for (i, j) in am}
        else:
            eta = {}
            for (i, j) in am:
                others = [v for v in nb[i] if v != j]
                s_eta = sum(lam_prev[(v, i)] * eta_prev[(v, i)] for v in others)
                s_lam = sum(lam_prev[(v, i)] for v in others)
                den = abs(A[i, j]) * d[j] * (1 - rv[i] * rv[j]) + s_lam
                eta[(i, j)] = rv[i] * s_eta / den if den > 0 else 0.0
        for i in range(n):
            num = sum(lam[(v, i)] * eta[(v, i)] for v in nb[i])
            den = sum(lam[(v, i)] for v in nb[i])
            out[level, i] = d[i] * rv[i] * (num / den if den > 0 else 0.0) * xnorm
        lam_prev, eta_prev = lam, eta
    return out
