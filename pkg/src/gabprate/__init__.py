"""Message-passing solver for sparse linear systems and its convergence-rate bounds."""
