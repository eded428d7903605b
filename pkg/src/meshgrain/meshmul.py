"""Matrix multiplication on 3-d meshes larger than the input.

``general_matmul_3d`` splits the product into octants (each octant pairs
quadrants ``A(i,k)`` and ``B(k,j)``), repeats inside every octant until the
pieces are ``base_m x base_m``, multiplies the pieces with the stacked
systolic program, and adds the two ``k`` halves back together on the way
up.  ``ring_matmul_3d`` runs Strassen's recursion over nested step grids.

Matrices live in a tiled slab.  A block of size ``m`` in a cubic region of
edge ``R`` is cut into ``T x T`` tiles (``T`` is fixed for the whole plan)
and tile ``(a, b)`` sits on layer ``a * T + b`` of the region.  Inside a
tile, rows and columns are accordion-folded at the leaf tile size, which
is exactly the layout the stacked systolic program expects.  With this
layout every octant move is a plain translation of sub-tiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from math import ceil, log

import numpy as np

from . import kernels
from .algebra import MAXMIN, MINPLUS, PLUSMUL, as_matrix, strassen_join, strassen_split
from .engine import (
    DEFAULT_WORD_BUDGET,
    MeshConfig,
    Region,
    StepLedger,
    build_mesh,
    check_disjoint,
    route_formation,
    route_streams,
)
from .errors import BandwidthViolation, BudgetViolation, ConfigError, PlanError, ScheduleError
from .systolic import SystolicProgram, simulate_2d_on_3d, stacked_systolic_ledger, systolic_matmul_2d

ALPHA_MIN = Fraction(2)
ALPHA_MAX = Fraction(9, 4)
ENGINE_LIMIT = 16


def as_fraction(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value).limit_denominator(1000)
    return Fraction(value)


def next_pow2(x):
    return 1 << max(0, (int(x) - 1).bit_length())


def ceil_root_power(n, alpha):
    """Smallest integer ``e`` with ``e**3 >= n**alpha`` (exact for rational alpha)."""
    p, q = alpha.numerator, alpha.denominator
    target = n**p
    e = max(1, int(ceil(n ** (float(alpha) / 3))) - 1)
    while e ** (3 * q) < target:
        e += 1
    while e > 1 and (e - 1) ** (3 * q) >= target:
        e -= 1
    return e


# ---------------------------------------------------------------------------
# Algorithm A
# ---------------------------------------------------------------------------


@dataclass
class AlgAPlan:
    n: int
    alpha: Fraction
    size: int
    edge: int
    levels: int
    base_m: int
    leaf_edge: int
    tile_edge: int
    tiles: int
    slack: float
    regions: list = field(default_factory=list)

    @property
    def depth(self):
        return self.tiles**2

    @property
    def mesh_size(self):
        return self.edge**3

    def region_edge(self, level):
        return self.edge >> level

    def block_size(self, level):
        return self.size >> level

    def level_tile(self, level):
        return self.tile_edge << (self.levels - level)

    def offset(self, path, axis):
        """First global index along ``axis`` (0 = i, 1 = k, 2 = j) of the block at ``path``."""
        return sum(step[axis] * (self.size >> (depth + 1)) for depth, step in enumerate(path))

    def k_offset(self, path):
        return self.offset(path, 1)

    def words_needed(self, witness=False):
        # coordinates, A and B copies per level, C per level plus the incoming half
        per_c = 2 if witness else 1
        return 3 + 2 * (self.levels + 1) + per_c * (self.levels + 2)


def plan_alg_a(n, alpha, word_budget=32, witness=False):
    """Sizes, levels and octant regions of the expanded-mesh product."""
    return _plan_alg_a(int(n), as_fraction(alpha), word_budget, witness)


@lru_cache(maxsize=None)
def _plan_alg_a(n, alpha, word_budget, witness):
    if not ALPHA_MIN <= alpha <= ALPHA_MAX:
        raise ConfigError(f"alpha must lie in [2, 9/4], got {alpha}")
    n = int(n)
    if n < 1:
        raise ConfigError("n must be >= 1")
    size = next_pow2(n)
    edge = next_pow2(ceil_root_power(size, alpha))
    lg = size.bit_length() - 1
    split = (alpha - 2) * lg
    levels = -((-split.numerator) // split.denominator)
    base_m = size >> levels
    leaf_edge = edge >> levels
    if leaf_edge < 1:
        raise PlanError(f"{levels} octant splits do not fit a mesh of edge {edge}")
    tile_edge = min(base_m, leaf_edge)
    tiles = base_m // tile_edge
    if tiles**2 > leaf_edge:
        raise PlanError(
            f"leaf too small: {tiles}**2 stacked tiles of a {base_m}x{base_m} block exceed leaf edge {leaf_edge}"
        )
    plan = AlgAPlan(
        n=n,
        alpha=alpha,
        size=size,
        edge=edge,
        levels=levels,
        base_m=base_m,
        leaf_edge=leaf_edge,
        tile_edge=tile_edge,
        tiles=tiles,
        slack=edge**3 / size ** float(alpha),
    )
    needed = plan.words_needed(witness)
    if needed > word_budget:
        raise PlanError(f"plan needs {needed} words per processor, budget is {word_budget}")
    plan.regions = [[((), Region((0, 0, 0), (edge,) * 3))]]
    for level in range(1, levels + 1):
        half = edge >> level
        current = []
        for path, region in plan.regions[-1]:
            for i in (0, 1):
                for k in (0, 1):
                    for j in (0, 1):
                        origin = tuple(o + d * half for o, d in zip(region.origin, (i, j, k)))
                        current.append((path + ((i, k, j),), Region(origin, (half,) * 3)))
        check_disjoint([r for _, r in current], f"level-{level} octants")
        plan.regions.append(current)
    return plan


def slab_offsets(plan, level, row0=0, col0=0):
    """Offsets ``(X, Y, Z)`` of entry ``(r, c)`` of a level block inside its region.

    ``row0`` and ``col0`` are the block's first global row and column; the
    accordion fold direction follows the global index, which matters when
    a block is a single leaf tile.
    """
    m = plan.block_size(level)
    tile = plan.level_tile(level)
    h = plan.tile_edge

    def axis(first):
        idx = np.arange(m)
        off = idx % h
        folded = np.where((first + idx) // h % 2 == 0, off, h - 1 - off)
        return (idx % tile) // h * h + folded, idx // tile

    (px, lx), (py, ly) = axis(row0), axis(col0)
    X = np.broadcast_to(px[:, None], (m, m))
    Y = np.broadcast_to(py[None, :], (m, m))
    Z = lx[:, None] * plan.tiles + ly[None, :]
    return X, Y, Z


def _scatter_moves(plan, level, which, copy):
    """Sub-tile moves that deliver one copy of the A (or B) quadrants into level-``level`` octants."""
    T = plan.tiles
    half = plan.region_edge(level)
    sub = plan.level_tile(level)
    moves = []
    for _, parent in plan.regions[level - 1]:
        for a in range(2 * T):
            for b in range(2 * T):
                src = ((a % 2) * sub, (b % 2) * sub, (a // 2) * T + b // 2)
                if which == "A":
                    i, k, j = a // T, b // T, copy
                else:
                    i, k, j = copy, a // T, b // T
                dst = (i * half, j * half, k * half + (a % T) * T + b % T)
                moves.append(
                    (
                        Region(tuple(o + s for o, s in zip(parent.origin, src)), (sub, sub, 1)),
                        Region(tuple(o + d for o, d in zip(parent.origin, dst)), (sub, sub, 1)),
                    )
                )
    return moves


def _gather_moves(plan, level):
    """Sub-tile moves that bring the ``k = 0`` octant results back into the parent slab."""
    T = plan.tiles
    half = plan.region_edge(level)
    sub = plan.level_tile(level)
    moves = []
    for _, parent in plan.regions[level - 1]:
        for a in range(2 * T):
            for b in range(2 * T):
                i, j = a // T, b // T
                src = (i * half, j * half, (a % T) * T + b % T)
                dst = ((a % 2) * sub, (b % 2) * sub, (a // 2) * T + b // 2)
                moves.append(
                    (
                        Region(tuple(o + s for o, s in zip(parent.origin, src)), (sub, sub, 1)),
                        Region(tuple(o + d for o, d in zip(parent.origin, dst)), (sub, sub, 1)),
                    )
                )
    return moves


def _fold_moves(plan, level):
    """Moves that carry each ``k = 1`` octant result onto its ``k = 0`` sibling."""
    half = plan.region_edge(level)
    sub = plan.level_tile(level)
    extent = (sub, sub, plan.depth)
    moves = []
    for _, parent in plan.regions[level - 1]:
        for i in (0, 1):
            for j in (0, 1):
                src = tuple(o + d for o, d in zip(parent.origin, (i * half, j * half, half)))
                dst = tuple(o + d for o, d in zip(parent.origin, (i * half, j * half, 0)))
                moves.append((Region(src, extent), Region(dst, extent)))
    return moves


def _route(mesh, moves, source, target, ledger, label, group=None, order=None):
    """Run ``moves`` as formation routes, one group after another."""
    values, _ = mesh.regs[source]
    rounds = {}
    for move in moves:
        rounds.setdefault(group(move) if group else 0, []).append(move)
    for key in sorted(rounds):
        batch = [(s, d, values[s.slices()]) for s, d in rounds[key]]
        led = route_formation(mesh, batch, register=target, order=order)
        ledger.charge(label, led.total_steps, led.words_moved, led.peak_words)


SEQUENTIAL_ORDER = (0, 1, 2)


def _route_together(mesh, streams, ledger, label, group):
    """Like ``_route`` but several registers travel at once, each with its own axis order."""
    keys = sorted({group(mv) for moves, *_ in streams for mv in moves})
    for key in keys:
        batch = []
        for moves, source, target, order in streams:
            values = mesh.regs[source][0]
            chosen = [(src, dst, values[src.slices()]) for src, dst in moves if group((src, dst)) == key]
            batch.append((chosen, target, order))
        led = route_streams(mesh, batch)
        ledger.charge(label, led.total_steps, led.words_moved, led.peak_words)


def _scatter(mesh, plan, ledger, orders):
    """Copy the A and B quadrants down every level; ``orders`` pairs let A and B travel together."""
    for level in range(1, plan.levels + 1):
        sub = plan.level_tile(level)

        def group(move, sub=sub):
            return _quarter(move[0], sub)

        for copy in (0, 1):
            if orders is None:
                for which in ("A", "B"):
                    moves = _scatter_moves(plan, level, which, copy)
                    _route(
                        mesh, moves, f"{which}{level - 1}", f"{which}{level}", ledger, "scatter",
                        group=group, order=SEQUENTIAL_ORDER,
                    )
            else:
                streams = [
                    (_scatter_moves(plan, level, which, copy), f"{which}{level - 1}", f"{which}{level}", order)
                    for which, order in zip("AB", orders)
                ]
                _route_together(mesh, streams, ledger, "scatter", group)


def _scatter_orders(plan):
    return _scatter_orders_for(plan.size, plan.alpha)


@lru_cache(maxsize=None)
def _scatter_orders_for(size, alpha):
    """First axis-order pair under which A and B can scatter at once, else ``None``.

    Candidates are tried in a fixed order on an empty mesh, so the choice
    depends only on the plan.
    """
    plan = _plan_alg_a(size, alpha, DEFAULT_WORD_BUDGET, False)
    for oa in permutations(range(3)):
        for ob in permutations(range(3)):
            mesh = build_mesh(MeshConfig(3, plan.edge))
            X, Y, Z = slab_offsets(plan, 0)
            for name in ("A0", "B0"):
                mesh.set(name, 0, False)
                mesh.regs[name][1][X, Y, Z] = True
            try:
                _scatter(mesh, plan, StepLedger(), (oa, ob))
            except BandwidthViolation:
                continue
            return oa, ob
    return None


def _quarter(region, sub):
    return (region.origin[0] // sub) % 2, (region.origin[1] // sub) % 2


def _leaf_ledger(plan, witness):
    return stacked_systolic_ledger(plan.base_m, plan.tile_edge, witness)


def _run_alg_a(plan, semiring, A, B, witness, with_data):
    """Execute the plan on a 3-d mesh; without data only the schedule is exercised."""
    mesh = build_mesh(MeshConfig(3, plan.edge))
    ledger = StepLedger()
    X, Y, Z = slab_offsets(plan, 0)
    if not with_data:
        A = B = np.zeros((plan.size, plan.size), dtype=np.int64)
    for name, M in (("A0", A), ("B0", B)):
        mesh.set(name, 0, False)
        mesh.regs[name][0][X, Y, Z] = M
        mesh.regs[name][1][X, Y, Z] = True

    _scatter(mesh, plan, ledger, _scatter_orders(plan))

    L = plan.levels
    leaves = plan.regions[L]
    if with_data:

        def index(region, row0, col0):
            X, Y, Z = slab_offsets(plan, L, row0, col0)
            return X + region.origin[0], Y + region.origin[1], Z + region.origin[2]

        starts = [tuple(plan.offset(path, axis) for axis in range(3)) for path, _ in leaves]
        As = np.stack([mesh.regs[f"A{L}"][0][index(r, i0, k0)] for (_, r), (i0, k0, _) in zip(leaves, starts)])
        Bs = np.stack([mesh.regs[f"B{L}"][0][index(r, k0, j0)] for (_, r), (_, k0, j0) in zip(leaves, starts)])
        program = SystolicProgram(semiring, As, Bs, witness)
        regs, leaf, _ = simulate_2d_on_3d(program, plan.base_m**2, batch=(len(leaves),), cube_edge=plan.tile_edge)
        ledger.extend(leaf, "leaf")
        mesh.set(f"C{L}", 0, False)
        if witness:
            mesh.set(f"K{L}", 0, False)
        for q, ((path, r), (i0, _, j0)) in enumerate(zip(leaves, starts)):
            ix = index(r, i0, j0)
            mesh.regs[f"C{L}"][0][ix] = regs["C"][0][q]
            mesh.regs[f"C{L}"][1][ix] = True
            if witness:
                mesh.regs[f"K{L}"][0][ix] = regs["K"][0][q] + plan.k_offset(path)
                mesh.regs[f"K{L}"][1][ix] = True
    else:
        ledger.extend(_leaf_ledger(plan, witness), "leaf")
        mesh.set(f"C{L}", 0, True)
        if witness:
            mesh.set(f"K{L}", 0, True)

    for level in range(L, 0, -1):
        names = ["C"] + (["K"] if witness else [])
        moves = _fold_moves(plan, level)
        for name in names:
            _route(mesh, moves, f"{name}{level}", f"{name}in", ledger, "combine")
        if with_data:
            cv = mesh.regs[f"C{level}"][0]
            inc = mesh.regs["Cin"][0]
            for _, dst in moves:
                sl = dst.slices()
                mine, other = cv[sl], inc[sl]
                if witness:
                    kv = mesh.regs[f"K{level}"][0]
                    better = other < mine if semiring is MINPLUS else other > mine
                    kv[sl] = np.where(better, mesh.regs["Kin"][0][sl], kv[sl])
                cv[sl] = semiring.add(mine, other)
        ledger.charge("combine", 1)
        sub = plan.level_tile(level)
        for name in names:
            _route(
                mesh, _gather_moves(plan, level), f"{name}{level}", f"{name}{level - 1}", ledger, "combine",
                group=lambda mv: _quarter(mv[1], sub), order=(2, 0, 1),
            )

    X, Y, Z = slab_offsets(plan, 0)
    C = mesh.regs["C0"][0][X, Y, Z].copy()
    K = mesh.regs["K0"][0][X, Y, Z].copy() if witness else None
    ledger.peak_words = max(ledger.peak_words, plan.words_needed(witness))
    return C, K, ledger


@lru_cache(maxsize=None)
def _charged_ledger(n, alpha, witness):
    plan = plan_alg_a(n, alpha, witness=witness)
    _, _, ledger = _run_alg_a(plan, None, None, None, witness, with_data=False)
    return ledger


def _blocked_product(plan, semiring, A, B, witness):
    """Data path of the plan: leaf products by compiled kernel, k halves merged in order."""
    g = 1 << plan.levels
    m = plan.base_m
    blocks_a = A.reshape(g, m, g, m).transpose(0, 2, 1, 3)
    blocks_b = B.reshape(g, m, g, m).transpose(0, 2, 1, 3)
    lhs = np.ascontiguousarray(np.broadcast_to(blocks_a[:, :, None], (g, g, g, m, m))).reshape(-1, m, m)
    rhs = np.ascontiguousarray(np.broadcast_to(blocks_b[None], (g, g, g, m, m))).reshape(-1, m, m)
    if witness:
        prods, wits = kernels.batched_witness(semiring.code, lhs, rhs)
        wits = wits.reshape(g, g, g, m, m)
        wits = np.where(wits >= 0, wits + (np.arange(g) * m)[None, :, None, None, None], wits)
    else:
        prods = kernels.batched_product(semiring.code, lhs, rhs)
    prods = prods.reshape(g, g, g, m, m)
    C = prods[:, 0]
    K = wits[:, 0] if witness else None
    for k in range(1, g):
        if witness:
            better = prods[:, k] < C if semiring is MINPLUS else prods[:, k] > C
            K = np.where(better, wits[:, k], K)
        C = semiring.add(C, prods[:, k])
    C = C.transpose(0, 2, 1, 3).reshape(g * m, g * m)
    if witness:
        K = K.transpose(0, 2, 1, 3).reshape(g * m, g * m)
    return C, K


def general_matmul_3d(semiring, A, B, alpha="9/4", witness=False, mode="auto"):
    """Semiring product on an ``n**alpha`` processor mesh.

    ``mode="engine"`` executes every route and the stacked leaf products
    on the simulator.  ``mode="charged"`` takes the (data independent)
    ledger of the same schedule from a dry run and computes the data with
    compiled kernels along the same block decomposition.  ``auto`` picks
    the engine up to n = 16.  Returns ``(C, ledger)`` or, with ``witness``,
    ``(C, K, ledger)`` where ``K`` is the smallest optimal inner index
    (``-1`` when no term is finite).
    """
    A, B = as_matrix(A), as_matrix(B)
    if A.shape != B.shape:
        raise ConfigError(f"dimension mismatch: {A.shape} vs {B.shape}")
    if witness and semiring not in (MINPLUS, MAXMIN):
        raise ConfigError("witness tracking needs minplus or maxmin")
    n = A.shape[0]
    alpha = as_fraction(alpha)
    plan = plan_alg_a(n, alpha, witness=witness)
    if mode == "auto":
        mode = "engine" if plan.size <= ENGINE_LIMIT else "charged"
    if mode not in ("engine", "charged"):
        raise ConfigError(f"unknown mode {mode!r}")
    pad = plan.size - n
    if pad:
        A = np.pad(A, ((0, pad), (0, pad)), constant_values=semiring.plus_identity)
        B = np.pad(B, ((0, pad), (0, pad)), constant_values=semiring.plus_identity)
    if mode == "engine":
        C, K, ledger = _run_alg_a(plan, semiring, A, B, witness, with_data=True)
    else:
        C, K = _blocked_product(plan, semiring, A, B, witness)
        base = _charged_ledger(plan.size, alpha, witness)
        ledger = StepLedger.from_text(base.to_text())
    ledger.notes.update({"mode": mode, "edge": plan.edge, "levels": plan.levels, "base_m": plan.base_m})
    C = C[:n, :n]
    if witness:
        K = K[:n, :n]
        K = np.where(C == semiring.plus_identity, -1, K)
        return C, K, ledger
    return C, ledger


# ---------------------------------------------------------------------------
# Algorithm B: ring multiplication over nested step grids
# ---------------------------------------------------------------------------


def step_grid(edge, step):
    """Processors whose coordinates all end in binary ``0``, ``01``, ``011``, ... (one suffix per step)."""
    first = (1 << step) - 1
    stride = 1 << (step + 1)
    if first >= edge:
        raise ScheduleError(f"step {step} has no workers on a mesh of edge {edge}")
    count = (edge - 1 - first) // stride + 1
    return Region((first,) * 3, (count,) * 3, (stride,) * 3)


@dataclass
class AlgBSchedule:
    n: int
    a: float
    b: float
    alpha_serial: float
    delta: float
    s: int
    r: int
    r_uncapped: int
    levels: list
    memory_cap: float | None
    memory_factor: float
    edge: int
    leaf: int
    grids: list = field(default_factory=list)

    @property
    def total_levels(self):
        return sum(self.levels)


def plan_alg_b(n, a=7, b=2, forced_s=None, memory_cap=64, build_grids=True):
    """Steps, recursion levels per step and worker grids of the nested-grid product."""
    if not a > b > 1:
        raise ConfigError(f"need a > b > 1, got a={a}, b={b}")
    n = int(n)
    if n < 1:
        raise ConfigError("n must be >= 1")
    alpha_serial = log(a) / log(b)
    delta = 8 / 3 - alpha_serial
    levels_needed = max(0, ceil(log(n) / log(b) - 1e-9))
    if delta > 0:
        s = int(delta * log(n) / log(64) + 1e-9)
        if forced_s is not None:
            s = min(s, int(forced_s))
    elif forced_s is None:
        raise ScheduleError(
            f"the nested-grid schedule needs a serial exponent below 8/3; log_{b} {a} = {alpha_serial:.3f} "
            "(pass forced_s to run it anyway)"
        )
    else:
        s = int(forced_s)
    s = max(1, s)
    r_uncapped = max(1, ceil(levels_needed / s)) if levels_needed else 0
    r = r_uncapped
    ratio = a / b
    if memory_cap is not None:
        while r > 0 and ratio**r > memory_cap:
            r -= 1
        if r == 0 and levels_needed:
            raise ScheduleError(f"a/b = {ratio} exceeds the memory cap {memory_cap}")
    levels = []
    remaining = levels_needed
    for _ in range(s):
        levels.append(min(r, remaining))
        remaining -= levels[-1]
    done = sum(levels)
    leaf = max(1, round(n / b**done)) if done else n
    edge = 2 * ceil_root_power(n, Fraction(2))
    schedule = AlgBSchedule(
        n=n,
        a=a,
        b=b,
        alpha_serial=alpha_serial,
        delta=delta,
        s=s,
        r=r,
        r_uncapped=r_uncapped,
        levels=levels,
        memory_cap=memory_cap,
        memory_factor=ratio**r,
        edge=edge,
        leaf=leaf,
    )
    if build_grids:
        schedule.grids = [step_grid(edge, i) for i in range(s + 1)]
        check_disjoint(schedule.grids, "step grids")
    return schedule


def _words_per_point(blocks, points):
    return -(-2 * blocks.shape[0] * blocks.shape[-1] ** 2 // points)


def ring_matmul_3d(A, B, schedule, word_budget=32):
    """Strassen product over the wrapping ring on the nested step grids.

    The recursion is carried out block-wise: step ``i`` workers expand their
    subproblems ``levels[i]`` times, then send the pieces in waves to the
    next (eight times sparser) grid; the leaves are multiplied by the
    stacked systolic program and the results are joined on the way back.
    Communication is charged from grid distances and per-point word counts.
    """
    if schedule.a != 7 or schedule.b != 2:
        raise ConfigError("ring_matmul_3d executes the Strassen scheme (a=7, b=2)")
    A, B = as_matrix(A), as_matrix(B)
    if A.shape != B.shape:
        raise ConfigError(f"dimension mismatch: {A.shape} vs {B.shape}")
    n = A.shape[0]
    if n != schedule.n:
        raise ConfigError(f"schedule was planned for n={schedule.n}, got {n}")
    size = next_pow2(n)
    if size != n:
        A = np.pad(A, ((0, size - n), (0, size - n)))
        B = np.pad(B, ((0, size - n), (0, size - n)))
    if not schedule.grids:
        raise ScheduleError("schedule has no worker grids")
    check_disjoint(schedule.grids, "step grids")
    limit = schedule.memory_factor * word_budget
    ledger = StepLedger()
    lhs, rhs = A[None], B[None]
    depth = 0
    for step, levels in enumerate(schedule.levels):
        grid = schedule.grids[step]
        ledger.notes[f"workers.step{step}"] = grid.size
        for _ in range(levels):
            pairs = strassen_split(lhs, rhs)
            lhs = np.stack([p for p, _ in pairs], axis=1).reshape((-1,) + pairs[0][0].shape[-2:])
            rhs = np.stack([q for _, q in pairs], axis=1).reshape((-1,) + pairs[0][1].shape[-2:])
            depth += 1
            ledger.notes[f"subproblems.level{depth}"] = lhs.shape[0]
            words = _words_per_point(lhs, grid.size)
            if words > limit:
                raise BudgetViolation(
                    f"step {step} holds {words} words per worker, above {schedule.memory_factor:.3g} x {word_budget}"
                )
            ledger.charge(f"step{step}.expand", 2 * words, peak_words=min(words, word_budget))
        nxt = schedule.grids[step + 1]
        words = _words_per_point(lhs, nxt.size)
        if words > limit:
            raise BudgetViolation(f"step {step + 1} workers would hold {words} words")
        ledger.charge(f"step{step}.waves", 3 * (grid.stride[0] // 2) + 8 * _words_per_point(lhs, grid.size) + (1 << (step + 2)))
    m = lhs.shape[-1]
    last = schedule.grids[len(schedule.levels)]
    ledger.notes[f"workers.step{len(schedule.levels)}"] = last.size
    ledger.notes["leaf"] = m
    ledger.notes["leaf_products"] = lhs.shape[0]
    share = -(-lhs.shape[0] * m * m // last.size)
    if m == 1:
        prods = lhs * rhs
        ledger.charge("leaf", share)
    else:
        prods, _ = systolic_matmul_2d(PLUSMUL, lhs, rhs)
        ledger.charge("leaf", share * stacked_systolic_ledger(m).total_steps)
    for step in range(len(schedule.levels) - 1, -1, -1):
        grid = schedule.grids[step]
        ledger.charge(f"step{step}.waves", 3 * (grid.stride[0] // 2) + 8 * _words_per_point(prods, grid.size) + (1 << (step + 2)))
        for _ in range(schedule.levels[step]):
            count = prods.shape[0] // 7
            grouped = prods.reshape((count, 7) + prods.shape[-2:])
            prods = strassen_join([grouped[:, q] for q in range(7)])
            ledger.charge(f"step{step}.join", 2 * _words_per_point(prods, grid.size))
    return prods[0][:n, :n], ledger


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


@dataclass
class BoundReport:
    n: int
    dim: int
    mesh_size: int
    edge: int
    diameter_time: int
    speedup_time: float
    size_exponent: object
    diameter_exponent: object
    speedup_exponent: object
    binding: str
    optimal_alpha: Fraction
    optimal_time_exponent: Fraction
    ring_exponent: object

    def as_dict(self):
        return {key: (str(v) if isinstance(v, Fraction) else v) for key, v in self.__dict__.items()}


def _exponent(n, value):
    """``log_n(value)``, exact when both are powers of two."""
    if n > 1 and n & (n - 1) == 0 and value >= 1 and int(value) == value and int(value) & (int(value) - 1) == 0:
        return Fraction(int(value).bit_length() - 1, n.bit_length() - 1)
    if n <= 1:
        return Fraction(0)
    return log(value) / log(n)


def _compare(x, y):
    if isinstance(x, Fraction) and isinstance(y, Fraction):
        return (x > y) - (x < y)
    diff = float(x) - float(y)
    return 0 if abs(diff) < 1e-9 else (1 if diff > 0 else -1)


def bounds(n, dim=3, mesh_size=None, alpha=None):
    """Diameter and linear-speedup lower bounds for general multiplication.

    The mesh size is ``mesh_size`` if given, else ``n**alpha``, else the
    best size for ``dim`` (``n**2`` in 2-d, ``n**(9/4)`` in 3-d).
    """
    n = int(n)
    if n < 1:
        raise ConfigError("n must be >= 1")
    if dim not in (2, 3):
        raise ConfigError("dim must be 2 or 3")
    optimal = Fraction(3 * dim, dim + 1)
    if mesh_size is None:
        a = optimal if alpha is None else as_fraction(alpha)
        exact = n ** a
        if a.denominator == 1:
            mesh_size = n**a.numerator
        else:
            mesh_size = int(round(float(exact)))
        size_exp = a
    else:
        mesh_size = int(mesh_size)
        size_exp = _exponent(n, mesh_size)
    edge = 1
    while edge**dim < mesh_size:
        edge += 1
    diameter_exp = size_exp / dim if isinstance(size_exp, Fraction) else size_exp / dim
    speedup_exp = 3 - size_exp
    order = _compare(diameter_exp, speedup_exp)
    binding = "tie" if order == 0 else ("diameter" if order > 0 else "speedup")
    return BoundReport(
        n=n,
        dim=dim,
        mesh_size=mesh_size,
        edge=edge,
        diameter_time=dim * (edge - 1),
        speedup_time=n**3 / mesh_size,
        size_exponent=size_exp,
        diameter_exponent=diameter_exp,
        speedup_exponent=speedup_exp,
        binding=binding,
        optimal_alpha=optimal,
        optimal_time_exponent=3 - optimal,
        ring_exponent=Fraction(2, dim),
    )
