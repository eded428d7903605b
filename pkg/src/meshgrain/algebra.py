"""Semirings over 64-bit words, dense matrices, and the serial oracles.

Matrices are plain ``(n, n)`` ``int64`` arrays; the semiring travels
alongside as a :class:`Semiring`.  The ring is the integers mod 2**64
(numpy's wrapping ``int64`` arithmetic), which keeps Strassen exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import ConfigError, NegativeCycleError

INF = kernels.INF
NEG_INF = kernels.NEG_INF
NONE = -1


def _sat_add(a, b):
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    blocked = (a >= INF) | (b >= INF)
    total = np.where(blocked, 0, a) + np.where(blocked, 0, b)
    return np.where(blocked, INF, np.minimum(total, INF))


@dataclass(frozen=True)
class Semiring:
    name: str
    plus: Callable
    times: Callable
    plus_identity: int | None
    times_identity: int
    has_additive_inverse: bool
    code: int

    def add(self, a, b):
        return self.plus(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))

    def mul(self, a, b):
        return self.times(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))

    def __repr__(self):
        return f"Semiring({self.name})"


PLUSMUL = Semiring("plusmul", np.add, np.multiply, 0, 1, True, kernels.PLUSMUL)
MINPLUS = Semiring("minplus", np.minimum, _sat_add, INF, 0, False, kernels.MINPLUS)
MAXMIN = Semiring("maxmin", np.maximum, np.minimum, NEG_INF, INF, False, kernels.MAXMIN)
BOOLOR = Semiring("boolor", np.bitwise_or, np.bitwise_and, 0, 1, False, kernels.BOOLOR)

SEMIRINGS = {s.name: s for s in (PLUSMUL, MINPLUS, MAXMIN, BOOLOR)}


def get_semiring(name):
    if isinstance(name, Semiring):
        return name
    try:
        return SEMIRINGS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown semiring {name!r}; choose from {sorted(SEMIRINGS)}") from None


def as_matrix(M):
    M = np.asarray(M, dtype=np.int64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {M.shape}")
    return M


def identity_matrix(semiring, n):
    out = np.full((n, n), semiring.plus_identity, dtype=np.int64)
    np.fill_diagonal(out, semiring.times_identity)
    return out


def random_matrix(semiring, n, rng, density=0.7, low=1, high=100):
    """Random test matrix with entries suited to ``semiring``."""
    if semiring is BOOLOR:
        return (rng.random((n, n)) < density * 0.3).astype(np.int64)
    if semiring is PLUSMUL:
        return rng.integers(-(2**63), 2**63 - 1, size=(n, n), dtype=np.int64, endpoint=True)
    values = rng.integers(low, high, size=(n, n), endpoint=True).astype(np.int64)
    missing = rng.random((n, n)) >= density
    values[missing] = semiring.plus_identity
    return values


def serial_matmul(semiring, A, B):
    """The standard serial product: ``C(i,j) = C(i,j) (+) A(i,k) (x) B(k,j)`` for k = 0..n-1."""
    A, B = as_matrix(A), as_matrix(B)
    if A.shape != B.shape:
        raise ConfigError(f"dimension mismatch: {A.shape} vs {B.shape}")
    n = A.shape[0]
    C = np.full((n, n), semiring.plus_identity, dtype=np.int64)
    for k in range(n):
        C = semiring.add(C, semiring.mul(A[:, k, None], B[None, k, :]))
    return C


def _pad_pow2(M, fill=0):
    n = M.shape[0]
    size = 1 << max(0, (n - 1).bit_length())
    if size == n:
        return M
    out = np.full((size, size), fill, dtype=np.int64)
    out[:n, :n] = M
    return out


STRASSEN_PRODUCTS = (
    # (A terms, B terms) of the seven products, each term (sign, row, col) of a quadrant
    (((1, 0, 0), (1, 1, 1)), ((1, 0, 0), (1, 1, 1))),
    (((1, 1, 0), (1, 1, 1)), ((1, 0, 0),)),
    (((1, 0, 0),), ((1, 0, 1), (-1, 1, 1))),
    (((1, 1, 1),), ((1, 1, 0), (-1, 0, 0))),
    (((1, 0, 0), (1, 0, 1)), ((1, 1, 1),)),
    (((1, 1, 0), (-1, 0, 0)), ((1, 0, 0), (1, 0, 1))),
    (((1, 0, 1), (-1, 1, 1)), ((1, 1, 0), (1, 1, 1))),
)

STRASSEN_COMBINE = {
    (0, 0): ((1, 0), (1, 3), (-1, 4), (1, 6)),
    (0, 1): ((1, 2), (1, 4)),
    (1, 0): ((1, 1), (1, 3)),
    (1, 1): ((1, 0), (-1, 1), (1, 2), (1, 5)),
}


def quadrants(M):
    h = M.shape[-1] // 2
    return {(r, c): M[..., r * h:(r + 1) * h, c * h:(c + 1) * h] for r in (0, 1) for c in (0, 1)}


def linear_combination(quads, terms):
    out = None
    for sign, *key in terms:
        q = quads[tuple(key)]
        out = (q.copy() if sign > 0 else -q) if out is None else (out + q if sign > 0 else out - q)
    return out


def strassen_split(A, B):
    """The seven operand pairs of one Strassen level (wrapping ring)."""
    qa, qb = quadrants(A), quadrants(B)
    return [(linear_combination(qa, ta), linear_combination(qb, tb)) for ta, tb in STRASSEN_PRODUCTS]


def strassen_join(products):
    """Assemble C from the seven products of :func:`strassen_split`."""
    h = products[0].shape[-1]
    C = np.empty(products[0].shape[:-2] + (2 * h, 2 * h), dtype=np.int64)
    for (r, c), terms in STRASSEN_COMBINE.items():
        acc = None
        for sign, index in terms:
            p = products[index]
            acc = (p.copy() if sign > 0 else -p) if acc is None else (acc + p if sign > 0 else acc - p)
        C[..., r * h:(r + 1) * h, c * h:(c + 1) * h] = acc
    return C


def serial_strassen(A, B, threshold=1, stats=None, semiring=PLUSMUL):
    """Strassen product over the wrapping ring; exact against :func:`serial_matmul`.

    Blocks of size ``<= threshold`` use the naive product.  If ``stats`` is a
    dict, ``stats["base_products"]`` counts those base multiplications.
    """
    if not semiring.has_additive_inverse:
        raise ConfigError(f"Strassen needs a ring; {semiring.name} has no additive inverse")
    A, B = as_matrix(A), as_matrix(B)
    if A.shape != B.shape:
        raise ConfigError(f"dimension mismatch: {A.shape} vs {B.shape}")
    n = A.shape[0]
    threshold = max(1, int(threshold))
    if stats is not None:
        stats.setdefault("base_products", 0)

    def rec(X, Y):
        if X.shape[0] <= threshold:
            if stats is not None:
                stats["base_products"] += 1
            return serial_matmul(PLUSMUL, X, Y)
        return strassen_join([rec(x, y) for x, y in strassen_split(X, Y)])

    return rec(_pad_pow2(A), _pad_pow2(B))[:n, :n]


def floyd_warshall(W, semiring=MINPLUS):
    """All-pairs path values with the F-W update, plus the midpoint table.

    ``witness[i, j]`` is the pivot ``k`` at which the final value was first
    reached (``NONE`` when the direct edge is optimal).  Works for MINPLUS
    (shortest paths) and MAXMIN (bottleneck paths).
    """
    if semiring not in (MINPLUS, MAXMIN):
        raise ConfigError("floyd_warshall supports minplus and maxmin")
    C = as_matrix(W).copy()
    n = C.shape[0]
    witness = np.full((n, n), NONE, dtype=np.int64)
    for k in range(n):
        candidate = semiring.mul(C[:, k, None], C[None, k, :])
        updated = semiring.add(C, candidate)
        improved = updated != C
        witness[improved] = k
        C = updated
    if semiring is MINPLUS and (np.diag(C) < 0).any():
        raise NegativeCycleError("weight matrix has a negative cycle")
    return C, witness


def reachability_oracle(adj):
    """Reflexive-transitive closure by depth-first search from every vertex."""
    adj = as_matrix(adj)
    n = adj.shape[0]
    succ = [np.flatnonzero(adj[i]).tolist() for i in range(n)]
    out = np.zeros((n, n), dtype=np.int64)
    for source in range(n):
        seen = {source}
        stack = [source]
        while stack:
            v = stack.pop()
            for w in succ[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        out[source, sorted(seen)] = 1
    return out


def fast_product(semiring, A, B):
    """Compiled semiring product (batched over leading axes)."""
    return kernels.product(semiring.code, A, B)
