"""
Systolic multiplication on a square mesh
=========================================

Every processor of an n x n mesh holds one entry of A, one of B and one of
the result.  The operands circulate on a torus that is folded into the mesh,
so each link is at most two hops long.
"""

import numpy as np

from meshgrain import MINPLUS, PLUSMUL, serial_matmul, systolic_matmul_2d
from meshgrain.algebra import random_matrix

rng = np.random.default_rng(0)

# a plain integer product first
A = random_matrix(PLUSMUL, 8, rng)
B = random_matrix(PLUSMUL, 8, rng)
C, ledger = systolic_matmul_2d(PLUSMUL, A, B)
print("plusmul 8x8 matches the serial product:", (C == serial_matmul(PLUSMUL, A, B)).all())
print("steps:", ledger.total_steps, "first phases:", ledger.per_phase[:3])

# the same mesh program computes shortest two-hop distances
W = random_matrix(MINPLUS, 8, rng, density=0.5)
D, K, _ = systolic_matmul_2d(MINPLUS, W, W, witness=True)
print("best midpoint for (0, 7):", K[0, 7], "distance", D[0, 7])

# step counts grow linearly: doubling n roughly doubles the time
for n in (8, 16, 32, 64):
    _, led = systolic_matmul_2d(PLUSMUL, np.zeros((n, n)), np.zeros((n, n)))
    print(f"n={n:3d}  steps={led.total_steps}")
