"""Step counts across sizes, as CSV rows, and power-law fits."""

from __future__ import annotations

import csv
import sys
from dataclasses import astuple, dataclass, fields

import numpy as np

from .algebra import MINPLUS, PLUSMUL, random_matrix
from .errors import ConfigError, MeshError
from .meshmul import as_fraction, general_matmul_3d, plan_alg_a, plan_alg_b, ring_matmul_3d
from .paths import apsp
from .systolic import StackedLayout, stacked_systolic_ledger, systolic_matmul_2d

ALGOS = ("systolic2d", "sim2d-on-3d", "alg-a", "alg-b", "apsp")


@dataclass(frozen=True)
class ScalingRow:
    algo: str
    n: int
    alpha: str
    comm_steps: int
    compute_steps: int
    total_steps: int
    processors: int
    seed: int


HEADER = [f.name for f in fields(ScalingRow)]


def _measure(algo, n, alpha, seed):
    rng = np.random.default_rng(seed)
    if algo == "systolic2d":
        A, B = random_matrix(PLUSMUL, n, rng), random_matrix(PLUSMUL, n, rng)
        _, ledger = systolic_matmul_2d(PLUSMUL, A, B)
        return ledger, n * n
    if algo == "sim2d-on-3d":
        ledger = stacked_systolic_ledger(n)
        return ledger, StackedLayout(n).cube_size
    if algo == "alg-a":
        A, B = random_matrix(PLUSMUL, n, rng), random_matrix(PLUSMUL, n, rng)
        _, ledger = general_matmul_3d(PLUSMUL, A, B, alpha)
        return ledger, plan_alg_a(n, alpha).mesh_size
    if algo == "alg-b":
        schedule = plan_alg_b(n, forced_s=1)
        A, B = random_matrix(PLUSMUL, n, rng), random_matrix(PLUSMUL, n, rng)
        _, ledger = ring_matmul_3d(A, B, schedule)
        return ledger, schedule.edge**3
    if algo == "apsp":
        W = random_matrix(MINPLUS, n, rng, density=0.3)
        np.fill_diagonal(W, 0)
        _, _, ledger = apsp(W, alpha)
        return ledger, plan_alg_a(n, alpha, witness=True).mesh_size
    raise ConfigError(f"unknown algorithm {algo!r}; pick one of {', '.join(ALGOS)}")


def run_scaling(algo, sizes, alpha="9/4", seeds=(0,), log=sys.stderr):
    """One row per (size, seed); sizes that cannot be planned are skipped with a note."""
    if algo not in ALGOS:
        raise ConfigError(f"unknown algorithm {algo!r}; pick one of {', '.join(ALGOS)}")
    alpha = as_fraction(alpha)
    rows = []
    for n in sorted(set(int(x) for x in sizes)):
        if n < 2 or n & (n - 1):
            print(f"skipping n={n}: sizes must be powers of two", file=log)
            continue
        try:
            for seed in seeds:
                ledger, procs = _measure(algo, n, alpha, seed)
                rows.append(
                    ScalingRow(
                        algo, n, str(alpha), ledger.comm_steps, ledger.compute_steps,
                        ledger.total_steps, int(procs), int(seed),
                    )
                )
        except MeshError as err:
            print(f"skipping n={n}: {err}", file=log)
    return rows


def write_csv(rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(HEADER)
    for row in rows:
        writer.writerow(astuple(row))


def read_csv(fh):
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != HEADER:
        raise ConfigError(f"unexpected CSV header {header}")
    rows = []
    for rec in reader:
        algo, n, alpha, comm, comp, total, procs, seed = rec
        rows.append(ScalingRow(algo, int(n), alpha, int(comm), int(comp), int(total), int(procs), int(seed)))
    return rows


def fit_exponent(rows):
    """Least-squares slope and intercept of log(total_steps) against log(n)."""
    pairs = [(r.n, r.total_steps) if isinstance(r, ScalingRow) else tuple(r) for r in rows]
    if len({n for n, _ in pairs}) < 2:
        raise ConfigError("need at least two distinct sizes to fit an exponent")
    x = np.log([n for n, _ in pairs])
    y = np.log([t for _, t in pairs])
    slope, intercept = np.polyfit(x, y, 1)
    return round(float(slope), 3) + 0.0, float(intercept)
