"""Compiled semiring products used on the orchestrated (data-level) paths.

The serial oracles in :mod:`meshgrain.algebra` deliberately do not use
these kernels, so every orchestrated result is checked against an
independent code path.
"""

import numpy as np
from numba import njit

INF = 1 << 62
NEG_INF = -(1 << 62)

PLUSMUL, MINPLUS, MAXMIN, BOOLOR = 0, 1, 2, 3


@njit(cache=True)
def _identity(code):
    if code == MINPLUS:
        return INF
    if code == MAXMIN:
        return NEG_INF
    return 0


@njit(cache=True)
def _times(code, a, b):
    if code == PLUSMUL:
        return a * b
    if code == MINPLUS:
        if a >= INF or b >= INF:
            return INF
        s = a + b
        if s > INF:
            return INF
        return s
    if code == MAXMIN:
        return a if a < b else b
    return a & b


@njit(cache=True)
def _plus(code, a, b):
    if code == PLUSMUL:
        return a + b
    if code == MINPLUS:
        return a if a < b else b
    if code == MAXMIN:
        return a if a > b else b
    return a | b


@njit(cache=True)
def batched_product(code, A, B):
    """``C[q] = A[q] (+,x) B[q]`` for a stack of square matrices."""
    batch, n, _ = A.shape
    ident = _identity(code)
    C = np.empty((batch, n, n), dtype=np.int64)
    for q in range(batch):
        for i in range(n):
            for j in range(n):
                C[q, i, j] = ident
            for k in range(n):
                a = A[q, i, k]
                for j in range(n):
                    C[q, i, j] = _plus(code, C[q, i, j], _times(code, a, B[q, k, j]))
    return C


@njit(cache=True)
def batched_witness(code, A, B):
    """Selective product (minplus or maxmin) with the smallest optimal inner index.

    The witness is -1 where no term beats the additive identity.
    """
    batch, n, _ = A.shape
    ident = _identity(code)
    C = np.full((batch, n, n), ident, dtype=np.int64)
    W = np.full((batch, n, n), -1, dtype=np.int64)
    for q in range(batch):
        for i in range(n):
            for k in range(n):
                a = A[q, i, k]
                if a == ident:
                    continue
                for j in range(n):
                    cand = _times(code, a, B[q, k, j])
                    if code == MINPLUS:
                        better = cand < C[q, i, j]
                    else:
                        better = cand > C[q, i, j]
                    if better:
                        C[q, i, j] = cand
                        W[q, i, j] = k
    return C, W


def product(code, A, B):
    A = np.ascontiguousarray(A, dtype=np.int64)
    B = np.ascontiguousarray(B, dtype=np.int64)
    if A.ndim == 2:
        return batched_product(code, A[None], B[None])[0]
    return batched_product(code, A, B)


def witness_product(code, A, B):
    A = np.ascontiguousarray(A, dtype=np.int64)
    B = np.ascontiguousarray(B, dtype=np.int64)
    if A.ndim == 2:
        C, W = batched_witness(code, A[None], B[None])
        return C[0], W[0]
    return batched_witness(code, A, B)


def minplus_witness(A, B):
    return witness_product(MINPLUS, A, B)
