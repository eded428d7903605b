"""
From a square to a cube
=======================

A 2-d program can be replayed on a 3-d mesh with the same number of
processors by stacking tiles of the square into layers of a cube.  The
replay costs a constant factor.  A cube with more processors than entries
pays off: splitting the product into octants runs faster than any square.
"""

import numpy as np

from meshgrain import MINPLUS, bounds, general_matmul_3d, serial_matmul, simulate_2d_on_3d
from meshgrain.algebra import random_matrix
from meshgrain.programs import BroadcastProgram
from meshgrain.systolic import stacked_systolic_ledger, systolic_steps

# replay a broadcast on a 16 x 16 square inside a 3-d cube of 256 processors
regs, ledger, info = simulate_2d_on_3d(BroadcastProgram(16, 42), 256)
print("every cell received the word:", bool((regs["V"][0] == 42).all()))
print("cube edge", info["cube_edge"], "steps", ledger.total_steps)

# the overhead of stacking stays roughly constant as the square grows
for m in (8, 16, 32, 64):
    print(f"m={m:3d}  3-d/2-d step ratio {stacked_systolic_ledger(m).total_steps / systolic_steps(m):.2f}")

# the octant algorithm on n**(9/4) processors
rng = np.random.default_rng(1)
for n in (16, 256):
    A, B = random_matrix(MINPLUS, n, rng), random_matrix(MINPLUS, n, rng)
    C, led = general_matmul_3d(MINPLUS, A, B, "9/4")
    exact = (C == serial_matmul(MINPLUS, A, B)).all()
    print(f"n={n:4d}  exact={exact}  steps={led.total_steps}  mode={led.notes['mode']}")

# why 9/4: it balances the diameter and the work per processor
report = bounds(256, 3)
print("optimal exponent", report.optimal_alpha, "time exponent", report.optimal_time_exponent)
