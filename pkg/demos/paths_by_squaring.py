"""
Paths by repeated squaring
==========================

Shortest paths, widest paths and reachability all come from squaring a
matrix ceil(lg n) times.  Each squaring runs on the expanded 3-d mesh.
"""

import numpy as np

from meshgrain import INF, MINPLUS, apsp, reconstruct_path, transitive_closure
from meshgrain.algebra import floyd_warshall, random_matrix

rng = np.random.default_rng(2)
n = 24
W = random_matrix(MINPLUS, n, rng, density=0.15, low=1, high=9)
np.fill_diagonal(W, 0)

history = []
dist, table, ledger = apsp(W, history=history)
print("matches Floyd-Warshall:", (dist == floyd_warshall(W)[0]).all())
print("squarings:", ledger.notes["squarings"], "charged steps:", ledger.total_steps)

# after t squarings the matrix knows every path of at most 2**t edges
for t, D in enumerate(history):
    print(f"after {t} squarings: {(D < INF).sum()} finite entries")

i, j = 0, n - 1
if dist[i, j] < INF:
    print(f"shortest {i} -> {j}: length {dist[i, j]} via {reconstruct_path(table, i, j)}")

# reachability with integer products: square, then clamp to 0/1
adj = (W < INF).astype(np.int64)
closure, _ = transitive_closure(adj, "ring")
print("reachable pairs:", int(closure.sum()), "of", n * n)
