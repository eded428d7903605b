"""Systolic 2-d multiplication and the stacked 3-d simulation of 2-d programs.

The systolic product runs on an ``n x n`` mesh that hosts a folded
``n x n`` torus: along each axis, physical position ``p`` is ring position
``pos(p)`` (0, n-1, 1, n-2, ... interleaved), so every ring link spans at
most two mesh links.  Processor ``(p, q)`` keeps ``C(p, q)``; the torus node
with ring coordinates ``(a, b)`` sees pair ``k`` at round ``(a + b + k) mod n``.
Because the labels of C follow the processors rather than the ring, the
result needs no unfolding at the end.

All data movement is done with lockstep permutations along one axis: every
word of the permutation departs at the same step and advances one hop per
step until it reaches its destination.  A relay can tell where a passing
word started from its own coordinate and the elapsed time, so no routing
header travels with the data, and two words moving the same way never
compete for a link.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import isqrt

import numpy as np

from .algebra import MAXMIN, MINPLUS, PLUSMUL
from .engine import (
    DEFAULT_WORD_BUDGET,
    GridProgram,
    MeshConfig,
    StepLedger,
    build_mesh,
    collect_sends,
    deliver,
    load_program,
    run_program,
    step_once,
)
from .errors import BudgetViolation, ConfigError, PlanError


def torus_fold(n):
    """``(logical, physical)`` index maps of the dilation-2 ring folding."""
    p = np.arange(n)
    logical = np.where(p % 2 == 0, p // 2, n - 1 - (p - 1) // 2)
    physical = np.empty(n, dtype=np.int64)
    physical[logical] = p
    return logical.astype(np.int64), physical


def arrival_round(a, b, k, n):
    """Round at which pair ``k`` reaches the torus node with ring coordinates ``(a, b)``."""
    return (a + b + k) % n


@dataclass
class Move:
    register: str
    axis: int
    table: np.ndarray  # destination coordinate along ``axis`` for the word starting at each processor

    def duration(self):
        n = self.table.shape[self.axis]
        shape = [1] * self.table.ndim
        shape[self.axis] = n
        origin = np.arange(n).reshape(shape)
        return int(np.abs(self.table - origin).max()) if self.table.size else 0


@dataclass
class Phase:
    label: str
    moves: list
    action: object = None
    start: int = 0
    duration: int = 0

    @property
    def end(self):
        return self.start + self.duration


class PhasedProgram(GridProgram):
    """Grid program made of lockstep permutation phases with end-of-phase actions."""

    def __init__(self, phases):
        t = 0
        for phase in phases:
            axes = [m.axis for m in phase.moves]
            if len(axes) != len(set(axes)):
                raise ConfigError(f"phase {phase.label} moves two registers along one axis")
            phase.start = t
            phase.duration = max((m.duration() for m in phase.moves), default=0)
            t += phase.duration
        self.phases = phases
        self.n_steps = t

    def phase_ledger(self):
        led = StepLedger()
        for phase in self.phases:
            if phase.duration:
                led.charge(phase.label, phase.duration)
        return led

    @staticmethod
    def _positions(coords, axis):
        return np.broadcast_arrays(*coords)

    def _depart(self, move, coords, regs):
        values, mask = regs[move.register]
        full = np.broadcast_arrays(*coords)
        dest = move.table[tuple(full)]
        pos = full[move.axis]
        go = mask & (dest != pos)
        regs[move.register] = (values, mask & ~go)
        return [
            (move.axis, 1, values, go & (dest > pos)),
            (move.axis, -1, values, go & (dest < pos)),
        ]

    def _arrive(self, move, phase, t, coords, regs, inbox):
        sends = []
        full = np.broadcast_arrays(*coords)
        pos = full[move.axis]
        n = move.table.shape[move.axis]
        for sign in (1, -1):
            if (move.axis, sign) not in inbox:
                continue
            values, mask = inbox[(move.axis, sign)]
            if not mask.any():
                continue
            origin = np.clip(pos - sign * (t - phase.start), 0, n - 1)
            index = list(full)
            index[move.axis] = origin
            dest = move.table[tuple(index)]
            arrived = mask & (dest == pos)
            old_values, old_mask = regs.get(move.register, (np.zeros_like(values), np.zeros_like(mask)))
            regs[move.register] = (np.where(arrived, values, old_values), old_mask | arrived)
            sends.append((move.axis, sign, values, mask & ~arrived))
        return sends

    def _start_phases(self, t, coords, regs):
        sends = []
        for phase in self.phases:
            if phase.start != t:
                continue
            if phase.duration == 0:
                if phase.action is not None:
                    phase.action(coords, regs)
                continue
            for move in phase.moves:
                sends += self._depart(move, coords, regs)
        return sends

    def init(self, coords, regs):
        self.load(coords, regs)
        return self._start_phases(0, coords, regs)

    def load(self, coords, regs):
        pass

    def step(self, t, coords, regs, inbox):
        sends = []
        for phase in self.phases:
            if phase.start < t <= phase.end:
                for move in phase.moves:
                    sends += self._arrive(move, phase, t, coords, regs, inbox)
                if t == phase.end and phase.action is not None:
                    phase.action(coords, regs)
                break
        return sends + self._start_phases(t, coords, regs)


def _skew_tables(n):
    logical, physical = torus_fold(n)
    r = np.arange(n)[:, None]
    c = np.arange(n)[None, :]
    full = np.zeros((n, n), dtype=np.int64)
    return {
        # A(i,k) moves along row i to the column whose ring position is -pos(i)-k
        "A": full + physical[(-logical[r] - c) % n],
        # B(k,j) moves along column j to the row whose ring position is -k-pos(j)
        "B": full + physical[(-r - logical[c]) % n],
        # one ring step east (A) and south (B)
        "east": full + physical[(logical[c] + 1) % n],
        "south": full + physical[(logical[r] + 1) % n],
    }


class SystolicProgram(PhasedProgram):
    """Torus systolic product on a folded mesh (one skew move, then n rounds).

    ``A`` and ``B`` may carry leading batch axes.  With ``witness`` the
    accumulator also keeps the smallest optimal inner index ``k`` (selective
    semirings only), which costs one more word per processor.
    """

    def __init__(self, semiring, A, B, witness=False, trace=None):
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        if A.shape != B.shape or A.ndim < 2 or A.shape[-1] != A.shape[-2]:
            raise ConfigError(f"operands must be square and congruent: {A.shape}, {B.shape}")
        n = A.shape[-1]
        if n == 0:
            raise ConfigError("empty matrices")
        if witness and semiring not in (MINPLUS, MAXMIN):
            raise ConfigError("witness tracking needs a selective semiring (minplus or maxmin)")
        self.semiring, self.A, self.B, self.n = semiring, A, B, n
        self.witness = witness
        self.trace = trace
        self.logical, _ = torus_fold(n)
        super().__init__(systolic_phases(n, witness, self._mac))

    def load(self, coords, regs):
        r, c = coords
        regs["A"] = (self.A[..., r, c], np.ones(self.A[..., r, c].shape, dtype=bool))
        regs["B"] = (self.B[..., r, c], np.ones(self.B[..., r, c].shape, dtype=bool))

    def _mac(self, rnd, coords, regs):
        a, _ = regs["A"]
        b, _ = regs["B"]
        if self.trace is not None:
            self.trace.append(a.copy())
        r, c = coords
        k = (rnd - self.logical[r] - self.logical[c]) % self.n
        cand = self.semiring.mul(a, b)
        full = np.ones(cand.shape, dtype=bool)
        if rnd == 0:
            regs["C"] = (cand, full)
            if self.witness:
                regs["K"] = (np.broadcast_to(k, cand.shape).astype(np.int64), full)
        else:
            acc, _ = regs["C"]
            if self.witness:
                kk, _ = regs["K"]
                better = cand < acc if self.semiring is MINPLUS else cand > acc
                better |= (cand == acc) & (k < kk)
                regs["K"] = (np.where(better, k, kk), full)
            regs["C"] = (self.semiring.add(acc, cand), full)
        if rnd == self.n - 1:
            del regs["A"], regs["B"]


def systolic_phases(n, witness=False, mac=None):
    tables = _skew_tables(n)

    def action(rnd):
        if mac is None:
            return None
        return lambda coords, regs: mac(rnd, coords, regs)

    phases = [Phase("skew", [Move("A", 1, tables["A"]), Move("B", 0, tables["B"])], action(0))]
    for rnd in range(1, n):
        phases.append(Phase("rounds", [Move("A", 1, tables["east"]), Move("B", 0, tables["south"])], action(rnd)))
    return phases


@lru_cache(maxsize=None)
def systolic_steps(n, witness=False):
    """Global steps of :class:`SystolicProgram` for size ``n`` (data independent)."""
    return PhasedProgram(systolic_phases(n, witness)).n_steps


def systolic_matmul_2d(semiring, A, B, witness=False, trace=None, word_budget=DEFAULT_WORD_BUDGET):
    """Multiply on an ``n x n`` mesh; returns ``(C, ledger)`` or ``(C, K, ledger)``.

    Leading batch axes run independent products side by side (one mesh
    each, identical schedules).
    """
    A = np.asarray(A, dtype=np.int64)
    program = SystolicProgram(semiring, A, B, witness, trace)
    mesh = build_mesh(MeshConfig(2, program.n, word_budget), batch=A.shape[:-2])
    ledger = run_program(mesh, program, label="systolic")
    ledger.per_phase = program.phase_ledger().per_phase
    C = mesh.regs["C"][0]
    if witness:
        return C, mesh.regs["K"][0], ledger
    return C, ledger


# ---------------------------------------------------------------------------
# stacked simulation of a 2-d mesh on a 3-d mesh of the same size
# ---------------------------------------------------------------------------


def default_cube_edge(edge2d):
    """Smallest cube edge ``c`` whose ``ceil(e/c)**2`` tiles fit in ``c`` layers."""
    c = 1
    while (-(-edge2d // c)) ** 2 > c:
        c += 1
    return c


def accordion(u, c):
    """Position of global 2-d index ``u`` after folding tiles of edge ``c``."""
    tile, offset = divmod(u, c)
    return np.where(tile % 2 == 0, offset, c - 1 - offset)


@dataclass
class StackedLayout:
    """Tiles of edge ``cube_edge`` cut from the 2-d mesh, one per layer.

    Tile ``(a, b)`` sits on layer ``a * tiles + b``; tiles are stored
    accordion-folded so that neighbouring tiles are mirror images and every
    ghost cell sits directly above or below the processor simulating it.
    """

    edge2d: int
    cube_edge: int = 0
    tiles: int = 0
    layers: int = 0
    assignment: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.edge2d < 1:
            raise ConfigError("2-d edge must be >= 1")
        if not self.cube_edge:
            self.cube_edge = default_cube_edge(self.edge2d)
        c = self.cube_edge
        self.tiles = -(-self.edge2d // c)
        self.layers = self.tiles**2
        if self.layers > c:
            raise PlanError(f"{self.layers} tiles do not fit in a cube of edge {c}")
        self.assignment = {(a, b): a * self.tiles + b for a in range(self.tiles) for b in range(self.tiles)}

    @property
    def cube_size(self):
        return self.cube_edge**3

    def window(self, a):
        c, e = self.cube_edge, self.edge2d
        return max(0, (a - 1) * c), min(e, (a + 2) * c)

    def center(self, a):
        c, e = self.cube_edge, self.edge2d
        return a * c, min(e, (a + 1) * c)

    def axis_load(self, a, margin):
        """Most cells of tile ``a``'s shrinking window that fold onto one position."""
        lo, hi = self.center(a)
        wlo, whi = self.window(a)
        cells = np.arange(max(wlo, lo - margin), min(whi, hi + margin))
        if not len(cells):
            return 0
        return int(np.bincount(accordion(cells, self.cube_edge)).max())

    def load(self, margin):
        return max(self.axis_load(a, margin) for a in range(self.tiles)) ** 2

    def exchange_steps(self, cell_words):
        """Ghost refresh before a major step.

        Every layer pulls its neighbours' tiles straight down (or up) the
        z-columns; a shift by ``d`` layers puts ``d`` words of each register
        on every z-link.  Downward and upward pulls use disjoint links and
        run side by side.
        """
        if self.tiles == 1:
            return 0
        T = self.tiles
        return cell_words * (1 + T + (T + 1) + (T - 1))


def stacked_cost(edge2d, steps2d, cell_words, cube_edge=None):
    """Ledger and layout of simulating ``steps2d`` 2-d steps on the stacked cube.

    ``cell_words`` is the number of live words per 2-d cell handed over at
    each major-step boundary, either one number for all of them or one
    entry per major step.
    """
    layout = StackedLayout(edge2d, cube_edge or 0)
    c = layout.cube_edge
    majors = -(-steps2d // c)
    if np.ndim(cell_words) == 0:
        cell_words = [int(cell_words)] * majors
    if len(cell_words) < majors:
        raise ConfigError(f"need {majors} boundary word counts, got {len(cell_words)}")
    ledger = StepLedger()
    max_cells = 1
    for major in range(majors):
        k = min(c, steps2d - major * c)
        ledger.charge("exchange", layout.exchange_steps(cell_words[major]))
        sim = 0
        for tau in range(1, k + 1):
            cells = layout.load(k - tau)
            max_cells = max(max_cells, cells)
            sim += cells
        ledger.charge("simulate", sim)
    ledger.peak_words = 3 + max_cells * max(cell_words, default=0)
    assert max_cells <= 9
    return ledger, layout, max_cells


def cell_words(regs, outbox):
    count = 0
    for _, mask in regs.values():
        count = count + mask
    for _, mask in outbox.values():
        count = count + mask
    return int(np.max(count)) if np.ndim(count) else int(count)


def simulate_2d_on_3d(program, N, steps=None, batch=(), cube_edge=None, word_budget=None):
    """Replay a 2-d grid program tile by tile with ghost cells.

    Each major step of ``cube_edge`` 2-d steps recomputes every tile's
    3x3-tile window from the previous major step's state; the valid part of
    the window shrinks by one cell per step, so exactly the tile itself is
    correct at the end.  Returns ``(registers, ledger, info)``; the registers
    are the 2-d state and must equal a direct 2-d run.
    """
    edge = isqrt(N)
    if edge * edge != N:
        raise ConfigError(f"2-d mesh size {N} is not a square")
    steps = program.n_steps if steps is None else steps
    if steps is None:
        raise ConfigError("simulate_2d_on_3d needs a step count")
    config = MeshConfig(2, edge)
    layout = StackedLayout(edge, cube_edge or 0)
    c = layout.cube_edge
    if word_budget is None:
        word_budget = 3 + 9 * (config.word_budget - 2)

    mesh = build_mesh(config, batch)
    load_program(mesh, program)
    regs, outbox = mesh.regs, mesh.outbox
    boundary = []
    t = 0
    while t < steps:
        k = min(c, steps - t)
        boundary.append(cell_words(regs, outbox))
        new_regs = {name: (v.copy(), m.copy()) for name, (v, m) in regs.items()}
        new_out = {}
        for (a, b) in layout.assignment:
            r0, r1 = layout.window(a)
            c0, c1 = layout.window(b)
            win = (Ellipsis, slice(r0, r1), slice(c0, c1))
            sub = {name: (v[win].copy(), m[win].copy()) for name, (v, m) in regs.items()}
            sub_out = {key: (v[win].copy(), m[win].copy()) for key, (v, m) in outbox.items()}
            coords = (np.arange(r0, r1)[:, None], np.arange(c0, c1)[None, :])
            shape = batch + (r1 - r0, c1 - c0)
            for tau in range(1, k + 1):
                inbox, _ = deliver(sub_out, 2, strict=False)
                sends = program.step(t + tau, coords, sub, inbox)
                sub_out = collect_sends(sends or [], shape, 2, t + tau)
            R0, R1 = layout.center(a)
            C0, C1 = layout.center(b)
            dst = (Ellipsis, slice(R0, R1), slice(C0, C1))
            src = (Ellipsis, slice(R0 - r0, R1 - r0), slice(C0 - c0, C1 - c0))
            for name in set(new_regs) | set(sub):
                if name not in new_regs:
                    new_regs[name] = (np.zeros(batch + (edge, edge), np.int64), np.zeros(batch + (edge, edge), bool))
                if name in sub:
                    new_regs[name][0][dst] = sub[name][0][src]
                    new_regs[name][1][dst] = sub[name][1][src]
                else:
                    new_regs[name][1][dst] = False
            for key, (v, m) in sub_out.items():
                if key not in new_out:
                    new_out[key] = (np.zeros(batch + (edge, edge), np.int64), np.zeros(batch + (edge, edge), bool))
                new_out[key][0][dst] = v[src]
                new_out[key][1][dst] = m[src]
        regs = {name: val for name, val in new_regs.items() if val[1].any()}
        outbox = new_out
        t += k
    widest = max(boundary, default=0)
    ledger, layout, max_cells = stacked_cost(edge, steps, boundary, c)
    if ledger.peak_words > word_budget:
        raise BudgetViolation(
            f"{max_cells} simulated cells of {widest} words exceed the 3-d budget of {word_budget}"
        )
    info = {
        "edge2d": edge,
        "cube_edge": c,
        "layers": layout.layers,
        "tiles_per_side": layout.tiles,
        "major_steps": -(-steps // c) if steps else 0,
        "max_cells_per_processor": max_cells,
        "cell_words": widest,
        "steps2d": steps,
    }
    return regs, ledger, info


@lru_cache(maxsize=None)
def systolic_boundary_words(m, cube_edge=None, witness=False):
    """Live words per cell of an ``m x m`` systolic run at each major-step boundary."""
    c = cube_edge or default_cube_edge(m)
    semiring = MINPLUS if witness else PLUSMUL
    zeros = np.zeros((m, m), np.int64)
    program = SystolicProgram(semiring, zeros, zeros, witness)
    mesh = build_mesh(MeshConfig(2, m))
    load_program(mesh, program)
    words = []
    for t in range(program.n_steps):
        if t % c == 0:
            words.append(cell_words(mesh.regs, mesh.outbox))
        step_once(mesh, program)
    return tuple(words)


def stacked_systolic_ledger(m, cube_edge=None, witness=False):
    """Charged ledger of an ``m x m`` systolic product run in stacked form."""
    words = systolic_boundary_words(m, cube_edge, witness)
    ledger, _, _ = stacked_cost(m, systolic_steps(m, witness), list(words), cube_edge)
    return ledger
