"""Closure, shortest paths and bottleneck paths by repeated squaring on the mesh.

Every solver squares exactly ceil(lg n) times.  The general multiplier runs
in charged mode by default (same ledger as the engine, kernel data path);
pass ``engine="engine"`` to execute the small products on the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import BOOLOR, INF, MAXMIN, MINPLUS, NONE, as_matrix
from .engine import StepLedger
from .errors import ConfigError, NegativeCycleError, UnreachableError
from .meshmul import general_matmul_3d, plan_alg_b, ring_matmul_3d


def squaring_rounds(n):
    return max(0, (int(n) - 1).bit_length())


@dataclass
class WitnessTable:
    """Midpoints of the final path values.

    ``mid[i, j]`` is the vertex through which the value of ``(i, j)`` last
    improved (``NONE`` for a direct edge) and ``round[i, j]`` the squaring
    round in which that happened (0 for the input).
    """

    n: int
    mid: np.ndarray
    round: np.ndarray
    weights: np.ndarray
    dist: np.ndarray


def _squarings(semiring, M, alpha, witness, mode):
    """Square ``M`` ceil(lg n) times, keeping every intermediate matrix."""
    ledger = StepLedger()
    n = M.shape[0]
    rounds = squaring_rounds(n)
    mid = np.full((n, n), NONE, dtype=np.int64)
    when = np.zeros((n, n), dtype=np.int64)
    history = [M.copy()]
    for t in range(1, rounds + 1):
        if witness:
            P, K, led = general_matmul_3d(semiring, M, M, alpha, witness=True, mode=mode)
            better = P < M if semiring is MINPLUS else P > M
            mid = np.where(better, K, mid)
            when = np.where(better, t, when)
        else:
            P, led = general_matmul_3d(semiring, M, M, alpha, mode=mode)
        M = semiring.add(M, P)
        ledger.extend(led, f"square{t}")
        history.append(M.copy())
    ledger.notes["squarings"] = rounds
    return M, mid, when, ledger, history


def transitive_closure(adj, mode="ring", alpha="9/4", history=None, engine="charged"):
    """Reflexive-transitive closure of a 0/1 adjacency matrix.

    ``mode="ring"`` squares under ordinary integer multiplication on the
    nested-grid ring multiplier, clamping every entry back to 0/1;
    ``mode="boolean"`` squares under (or, and) with the general multiplier.
    """
    adj = as_matrix(adj)
    if not np.isin(adj, (0, 1)).all():
        raise ConfigError("adjacency entries must be 0 or 1")
    n = adj.shape[0]
    M = adj.copy()
    np.fill_diagonal(M, 1)
    rounds = squaring_rounds(n)
    ledger = StepLedger()
    trail = [M.copy()]
    if mode == "boolean":
        for t in range(1, rounds + 1):
            M, led = general_matmul_3d(BOOLOR, M, M, alpha, mode=engine)
            ledger.extend(led, f"square{t}")
            trail.append(M.copy())
    elif mode == "ring":
        schedule = plan_alg_b(n, forced_s=1)
        for t in range(1, rounds + 1):
            P, led = ring_matmul_3d(M, M, schedule)
            M = (P != 0).astype(np.int64)
            ledger.extend(led, f"square{t}")
            trail.append(M.copy())
    else:
        raise ConfigError(f"unknown closure mode {mode!r}")
    ledger.notes["squarings"] = rounds
    if history is not None:
        history.extend(trail)
    return M, ledger


def apsp(W, alpha="9/4", history=None, engine="charged"):
    """All-pairs shortest paths; returns ``(dist, WitnessTable, ledger)``."""
    W = as_matrix(W)
    if (np.diag(W) != 0).any():
        raise ConfigError("the weight matrix needs a zero diagonal")
    dist, mid, when, ledger, trail = _squarings(MINPLUS, W, alpha, True, engine)
    if (np.diag(dist) < 0).any():
        raise NegativeCycleError("weight matrix has a negative cycle")
    if history is not None:
        history.extend(trail)
    table = WitnessTable(n=W.shape[0], mid=mid, round=when, weights=W, dist=dist)
    return dist, table, ledger


def bottleneck_apsp(W, alpha="9/4", history=None, engine="charged"):
    """Widest-path values: the best achievable minimum edge weight over all paths."""
    W = as_matrix(W)
    if (np.diag(W) != INF).any():
        raise ConfigError("the capacity matrix needs +INF on the diagonal")
    B, _, _, ledger, trail = _squarings(MAXMIN, W, alpha, False, engine)
    if history is not None:
        history.extend(trail)
    return B, ledger


def reconstruct_path(table, i, j):
    """Vertex sequence of a shortest path from ``i`` to ``j``."""
    n = table.n
    if not (0 <= i < n and 0 <= j < n):
        raise ConfigError(f"vertex out of range: {i}, {j}")
    if table.dist[i, j] >= INF:
        raise UnreachableError(f"no path from {i} to {j}")
    if i == j:
        return [i]
    path = [i]
    stack = [(i, j)]
    while stack:
        u, v = stack.pop()
        k = int(table.mid[u, v])
        if k == NONE or table.round[u, v] == 0:
            path.append(v)
            continue
        # each half was settled in an earlier round, so the expansion terminates
        stack.append((k, v))
        stack.append((u, k))
    return path


def path_weight(W, path):
    W = np.asarray(W)
    total = 0
    for u, v in zip(path, path[1:]):
        if W[u, v] >= INF:
            raise ConfigError(f"({u}, {v}) is not an edge")
        total += int(W[u, v])
    return total


def bounded_hop_oracle(W, hops):
    """Shortest path values using at most ``hops`` edges (Bellman-Ford style)."""
    W = as_matrix(W)
    D = W.copy()
    for _ in range(max(0, hops - 1)):
        D = np.minimum(D, _minplus_dense(D, W))
    return D


def _minplus_dense(A, B):
    total = A[:, :, None] + B[None, :, :]
    total = np.where((A[:, :, None] >= INF) | (B[None, :, :] >= INF), INF, np.minimum(total, INF))
    return total.min(axis=1)

