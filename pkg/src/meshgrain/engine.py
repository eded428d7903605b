"""Lockstep mesh machine.

A mesh is a square (2-d) or cubical (3-d) array of processors, each linked
to its axis neighbours.  Time advances in global steps made of a
communication sub-step (at most one word per directed link) followed by a
compute sub-step in which every processor sees only its own registers and
the words that just arrived.  Sends issued during a compute sub-step are
delivered in the next step's communication sub-step.

Two kinds of programs run on the machine:

* grid programs operate on whole register arrays at once (``init`` /
  ``step`` methods, see :class:`GridProgram`); they are what the matrix
  algorithms use, and may carry leading batch axes;
* per-processor programs are plain callables invoked once per processor
  with a :class:`ProcessorView`.

Registers are stored as ``name -> (values, mask)`` pairs of arrays; a word
is resident where the mask is set.  Every processor also holds its own
coordinates, which count against the word budget.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import BandwidthViolation, BudgetViolation, ConfigError, NonHalting, StructureViolation

DEFAULT_WORD_BUDGET = 32
DEFAULT_STEP_CAP = 10**8


def default_step_cap():
    value = os.environ.get("MESHGRAIN_STEP_CAP")
    return int(value) if value else DEFAULT_STEP_CAP


@dataclass(frozen=True)
class MeshConfig:
    dim: int
    edge: int
    word_budget: int = DEFAULT_WORD_BUDGET
    link_width: int = 1
    step_cap: int | None = None

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigError(f"dim must be 2 or 3, got {self.dim}")
        if self.edge < 1:
            raise ConfigError(f"edge must be >= 1, got {self.edge}")
        if self.word_budget < 4:
            raise ConfigError(f"word_budget must be >= 4, got {self.word_budget}")
        if self.link_width != 1:
            raise ConfigError("link_width is fixed at 1 word per link per phase")
        if self.step_cap is None:
            object.__setattr__(self, "step_cap", default_step_cap())

    @property
    def shape(self):
        return (self.edge,) * self.dim

    @property
    def size(self):
        return self.edge**self.dim

    @property
    def diameter(self):
        return self.dim * (self.edge - 1)


def directions(dim):
    """All ``(axis, sign)`` link directions of a ``dim``-dimensional mesh."""
    return [(axis, sign) for axis in range(dim) for sign in (1, -1)]


@dataclass
class StepLedger:
    """Step and word accounting for one run (or a composition of runs).

    Every global step has one communication and one compute sub-step, and
    idle sub-steps still advance the clock, so the three step counters move
    together.  ``per_phase`` records ``(label, steps)`` in execution order.
    """

    comm_steps: int = 0
    compute_steps: int = 0
    total_steps: int = 0
    peak_words: int = 0
    words_moved: int = 0
    per_phase: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def advance(self, steps=1, words_moved=0, peak_words=0):
        self.comm_steps += steps
        self.compute_steps += steps
        self.total_steps = max(self.comm_steps, self.compute_steps)
        self.words_moved += int(words_moved)
        self.peak_words = max(self.peak_words, int(peak_words))

    def charge(self, label, steps, words_moved=0, peak_words=0):
        """Append a phase of ``steps`` global steps."""
        steps = int(steps)
        self.advance(steps, words_moved, peak_words)
        self.per_phase.append((label, steps))
        return self

    def extend(self, other, label=None):
        """Sequentially compose ``other`` after this ledger."""
        self.advance(other.total_steps, other.words_moved, other.peak_words)
        if label is None:
            self.per_phase.extend(other.per_phase)
        else:
            self.per_phase.append((label, other.total_steps))
        return self

    @classmethod
    def concurrent(cls, ledgers, label):
        """Ledger of runs executed side by side on disjoint processors."""
        ledgers = list(ledgers)
        out = cls()
        if not ledgers:
            return out.charge(label, 0)
        steps = max(led.total_steps for led in ledgers)
        return out.charge(
            label,
            steps,
            words_moved=sum(led.words_moved for led in ledgers),
            peak_words=max(led.peak_words for led in ledgers),
        )

    def phase_steps(self, prefix):
        return sum(steps for label, steps in self.per_phase if label.startswith(prefix))

    def as_dict(self):
        return {
            "comm_steps": self.comm_steps,
            "compute_steps": self.compute_steps,
            "total_steps": self.total_steps,
            "peak_words": self.peak_words,
            "words_moved": self.words_moved,
        }

    def to_text(self):
        lines = [f"{key}={value}" for key, value in self.as_dict().items()]
        lines += [f"phase.{i}={label}:{steps}" for i, (label, steps) in enumerate(self.per_phase)]
        lines += [f"note.{key}={value}" for key, value in sorted(self.notes.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        led = cls()
        phases = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, value = line.split("=", 1)
            if key.startswith("phase."):
                label, steps = value.rsplit(":", 1)
                phases[int(key[6:])] = (label, int(steps))
            elif key.startswith("note."):
                led.notes[key[5:]] = int(value) if value.lstrip("-").isdigit() else value
            else:
                setattr(led, key, int(value))
        led.per_phase = [phases[i] for i in sorted(phases)]
        return led


@dataclass(frozen=True)
class Region:
    """Axis-aligned set of processors ``origin + index * stride``."""

    origin: tuple
    extent: tuple
    stride: tuple | None = None

    def __post_init__(self):
        origin = tuple(int(v) for v in self.origin)
        extent = tuple(int(v) for v in self.extent)
        stride = tuple(int(v) for v in self.stride) if self.stride is not None else (1,) * len(origin)
        if not (len(origin) == len(extent) == len(stride)):
            raise ConfigError("origin, extent and stride must have the same length")
        if any(e < 1 for e in extent) or any(s < 1 for s in stride):
            raise ConfigError(f"region extent and stride must be >= 1: {extent}, {stride}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "stride", stride)

    @property
    def dim(self):
        return len(self.origin)

    @property
    def size(self):
        return int(np.prod(self.extent))

    @property
    def last(self):
        return tuple(o + (e - 1) * s for o, e, s in zip(self.origin, self.extent, self.stride))

    def fits(self, edge):
        return all(o >= 0 for o in self.origin) and all(c < edge for c in self.last)

    def points(self):
        axes = [o + s * np.arange(e) for o, e, s in zip(self.origin, self.extent, self.stride)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def slices(self):
        return tuple(slice(o, o + (e - 1) * s + 1, s) for o, e, s in zip(self.origin, self.extent, self.stride))

    def overlaps(self, other):
        mine = {tuple(p) for p in self.points()}
        return any(tuple(p) in mine for p in other.points())

    def translated(self, displacement):
        return Region(tuple(o + d for o, d in zip(self.origin, displacement)), self.extent, self.stride)


def check_disjoint(regions, what="regions"):
    """Raise StructureViolation if any two regions share a processor."""
    regions = list(regions)
    if not regions:
        return
    shape = tuple(max(r.last[a] for r in regions) + 1 for a in range(regions[0].dim))
    owner = np.full(shape, -1, dtype=np.int64)
    for index, region in enumerate(regions):
        if min(region.origin) < 0:
            raise ConfigError(f"{what} {index} has a negative origin")
        view = owner[region.slices()]
        taken = view >= 0
        if taken.any():
            where = np.unravel_index(int(np.flatnonzero(taken)[0]), view.shape)
            p = tuple(o + i * st for o, i, st in zip(region.origin, where, region.stride))
            raise StructureViolation(f"{what} {int(view[where])} and {index} share a processor", processor=p)
        owner[region.slices()] = index


class MeshState:
    """Registers, in-flight sends and the running ledger of one mesh."""

    def __init__(self, config, batch=()):
        self.config = config
        self.batch = tuple(batch)
        self.regs = {}
        self.outbox = {}
        self.t = 0
        self.ledger = StepLedger()
        self.initialized = False

    @property
    def dim(self):
        return self.config.dim

    @property
    def shape(self):
        return self.batch + self.config.shape

    @property
    def coords(self):
        return tuple(np.ogrid[tuple(slice(0, self.config.edge) for _ in range(self.dim))])

    def set(self, name, values, mask=True):
        values = np.broadcast_to(np.asarray(values, dtype=np.int64), self.shape).copy()
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), self.shape).copy()
        self.regs[name] = (values, mask)

    def get(self, name):
        return self.regs[name]

    def words(self, include_inbox=None):
        count = np.full(self.shape, self.dim, dtype=np.int64)
        for _, mask in self.regs.values():
            count += mask
        if include_inbox:
            for _, mask in include_inbox.values():
                count += mask
        return count

    def snapshot(self):
        return {name: (v.copy(), m.copy()) for name, (v, m) in sorted(self.regs.items())}

    def copy(self):
        return copy.deepcopy(self)


def build_mesh(config, batch=()):
    """Fresh mesh: empty registers (coordinates only) and zeroed counters."""
    if not isinstance(config, MeshConfig):
        raise ConfigError("build_mesh expects a MeshConfig")
    return MeshState(config, batch)


def neighbour_count(config, coords):
    return sum(
        1
        for axis, sign in directions(config.dim)
        if 0 <= coords[axis] + sign < config.edge
    )


def _processor_of(mask, dim):
    index = np.unravel_index(int(np.flatnonzero(mask)[0]), mask.shape)
    return index[len(index) - dim:]


def shift(values, mask, axis, sign, dim, strict=True, step=None):
    """Move every masked word one hop along ``(axis, sign)``."""
    ax = values.ndim - dim + axis
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    edge = [slice(None)] * values.ndim
    if sign > 0:
        src[ax], dst[ax], edge[ax] = slice(0, -1), slice(1, None), slice(-1, None)
    else:
        src[ax], dst[ax], edge[ax] = slice(1, None), slice(0, -1), slice(0, 1)
    if strict and mask[tuple(edge)].any():
        off = np.zeros_like(mask)
        off[tuple(edge)] = mask[tuple(edge)]
        raise BandwidthViolation("send across the mesh boundary", _processor_of(off, dim), step)
    out = np.zeros_like(values)
    out_mask = np.zeros_like(mask)
    out[tuple(dst)] = values[tuple(src)]
    out_mask[tuple(dst)] = mask[tuple(src)]
    return out, out_mask


def collect_sends(sends, shape, dim, step, link_width=1):
    """Merge a list of ``(axis, sign, values, mask)`` sends into one word per link.

    Raises BandwidthViolation when a directed link would carry more than
    ``link_width`` words.
    """
    outbox = {}
    counts = {}
    for axis, sign, values, mask in sends:
        key = (axis, sign)
        values = np.broadcast_to(np.asarray(values, dtype=np.int64), shape)
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), shape)
        if key in outbox:
            counts[key] = counts[key] + mask
            over = counts[key] > link_width
            if over.any():
                raise BandwidthViolation(
                    f"more than {link_width} word on link {key}", _processor_of(over, dim), step
                )
            old_values, old_mask = outbox[key]
            outbox[key] = (np.where(mask, values, old_values), old_mask | mask)
        else:
            counts[key] = mask.astype(np.int64)
            outbox[key] = (values.copy(), mask.copy())
    return outbox


def deliver(outbox, dim, strict=True, step=None):
    """Communication sub-step: returns the inbox and the number of words moved."""
    inbox = {}
    moved = 0
    for (axis, sign), (values, mask) in outbox.items():
        moved += int(mask.sum())
        inbox[(axis, sign)] = shift(values, mask, axis, sign, dim, strict, step)
    return inbox, moved


class GridProgram:
    """Base class for whole-array programs.

    ``init`` loads inputs into ``regs`` and may return the first sends;
    ``step`` is the compute sub-step of global step ``t`` (1-based).  Both
    receive the processor coordinates as broadcastable index arrays, so a
    program can be replayed on any sub-window of the mesh.  Subclasses may
    set ``n_steps`` when their length is fixed.
    """

    n_steps = None

    def init(self, coords, regs):
        return []

    def step(self, t, coords, regs, inbox):
        raise NotImplementedError


class ProcessorView:
    """What one processor sees during its compute sub-step."""

    def __init__(self, coords, registers, inbox, step):
        self.coords = coords
        self.registers = registers
        self.inbox = inbox
        self.step = step
        self.sends = []

    def send(self, direction, word):
        self.sends.append((tuple(direction), int(word)))


class ProcessorProgram:
    """Base class for per-processor programs (``setup`` runs while loading inputs)."""

    def setup(self, proc):
        pass

    def __call__(self, proc):
        raise NotImplementedError


def _run_per_processor(mesh, program, inbox, setup=False):
    dim = mesh.dim
    if mesh.batch:
        raise ConfigError("per-processor programs do not support batch axes")
    sends = []
    for coords in product(range(mesh.config.edge), repeat=dim):
        registers = {name: int(v[coords]) for name, (v, m) in mesh.regs.items() if m[coords]}
        box = {key: int(v[coords]) for key, (v, m) in inbox.items() if m[coords]}
        view = ProcessorView(coords, registers, box, mesh.t)
        if setup:
            getattr(program, "setup", lambda proc: None)(view)
        else:
            program(view)
        for name in list(mesh.regs):
            if name not in registers:
                mesh.regs[name][1][coords] = False
        for name, word in registers.items():
            if name not in mesh.regs:
                mesh.set(name, 0, False)
            values, mask = mesh.regs[name]
            values[coords] = word
            mask[coords] = True
        for (axis, sign), word in view.sends:
            values = np.zeros(mesh.shape, dtype=np.int64)
            mask = np.zeros(mesh.shape, dtype=bool)
            values[coords] = word
            mask[coords] = True
            sends.append((axis, sign, values, mask))
    return sends


def _check_budget(mesh, inbox):
    peak = mesh.words(inbox)
    resident = mesh.words()
    over = resident > mesh.config.word_budget
    if over.any():
        raise BudgetViolation(
            f"processor holds more than {mesh.config.word_budget} words",
            _processor_of(over, mesh.dim),
            mesh.t,
        )
    return int(peak.max()) if peak.size else 0


def load_program(mesh, program):
    if mesh.initialized:
        return
    mesh.initialized = True
    if hasattr(program, "step"):
        sends = program.init(mesh.coords, mesh.regs)
    else:
        sends = _run_per_processor(mesh, program, {}, setup=True)
    mesh.outbox = collect_sends(sends or [], mesh.shape, mesh.dim, mesh.t, mesh.config.link_width)
    mesh.ledger.advance(0, peak_words=_check_budget(mesh, {}))


def step_once(mesh, program, ledger=None):
    """Execute one global step (communication then compute)."""
    mesh.t += 1
    inbox, moved = deliver(mesh.outbox, mesh.dim, True, mesh.t)
    if hasattr(program, "step"):
        sends = program.step(mesh.t, mesh.coords, mesh.regs, inbox)
    else:
        sends = _run_per_processor(mesh, program, inbox)
    mesh.outbox = collect_sends(sends or [], mesh.shape, mesh.dim, mesh.t, mesh.config.link_width)
    peak = _check_budget(mesh, inbox)
    for led in (mesh.ledger, ledger):
        if led is not None:
            led.advance(1, moved, peak)


def run_program(mesh, program, halt=None, steps=None, label="run"):
    """Run ``program`` until ``halt(mesh)`` holds (or for ``steps`` steps).

    Without ``halt`` and ``steps`` the program's ``n_steps`` is used.
    Returns the ledger of this run; ``mesh.ledger`` accumulates across runs.
    """
    if steps is None and halt is None:
        steps = getattr(program, "n_steps", None)
        if steps is None:
            raise ConfigError("run_program needs halt, steps or program.n_steps")
    load_program(mesh, program)
    ledger = StepLedger()
    ledger.peak_words = mesh.ledger.peak_words
    start = mesh.t
    cap = mesh.config.step_cap
    while True:
        done = mesh.t - start
        if steps is not None and done >= steps:
            break
        if steps is None and halt(mesh):
            break
        if done >= cap:
            raise NonHalting(f"program exceeded the step cap of {cap}")
        step_once(mesh, program, ledger)
    ledger.per_phase.append((label, ledger.total_steps))
    return ledger


# ---------------------------------------------------------------------------
# block routing
# ---------------------------------------------------------------------------


def route_steps(extent, displacement):
    """Closed-form step count of a dimension-ordered pipelined block move.

    ``D + L - 1`` where ``D`` is the Manhattan displacement and ``L`` the
    block extent along the first axis that moves (the words per lane).
    """
    distance = sum(abs(int(d)) for d in displacement)
    if distance == 0:
        return 0
    first = next(axis for axis, d in enumerate(displacement) if d)
    return distance + int(extent[first]) - 1


def _word_plan(src, displacement):
    points = src.points()
    moving = [axis for axis, d in enumerate(displacement) if d]
    if not moving:
        return points, np.zeros(len(points), dtype=np.int64)
    first = moving[0]
    column = points[:, first]
    if displacement[first] > 0:
        rank = column.max() - column
    else:
        rank = column - column.min()
    return points, rank // src.stride[first]


def route_blocks(mesh, moves, register="blk"):
    """Move several blocks concurrently; link usage is checked every step.

    ``moves`` is a list of ``(src, dst, payload)`` with congruent regions and
    ``payload`` an array of ``src.extent``.  Each lane starts from its front:
    the word ``q`` places behind the lane head leaves at step ``q + 1`` and
    travels axis 0, then axis 1, then axis 2 without pausing.  Arrived words
    are stored in ``register`` at the destination processors.
    """
    dim = mesh.dim
    budget = mesh.config.word_budget
    positions, remaining, ranks, legs, values, targets = [], [], [], [], [], []
    for src, dst, payload in moves:
        if src.extent != dst.extent or src.stride != dst.stride:
            raise ConfigError("source and destination regions must be congruent")
        if not (src.fits(mesh.config.edge) and dst.fits(mesh.config.edge)):
            raise ConfigError("region does not fit inside the mesh")
        displacement = tuple(d - s for d, s in zip(dst.origin, src.origin))
        points, rank = _word_plan(src, displacement)
        positions.append(points.copy())
        remaining.append(np.tile(np.abs(displacement), (len(points), 1)))
        legs.append(np.tile(np.sign(displacement), (len(points), 1)))
        ranks.append(rank)
        values.append(np.asarray(payload, dtype=np.int64).reshape(-1))
        targets.append(dst.points())
    if not positions:
        return StepLedger().charge("route", 0)
    pos = np.concatenate(positions)
    rem = np.concatenate(remaining)
    sgn = np.concatenate(legs)
    rank = np.concatenate(ranks)
    vals = np.concatenate(values)
    edge = mesh.config.edge
    weights = edge ** np.arange(dim - 1, -1, -1)
    ledger = StepLedger()
    peak = 0
    tau = 0
    while rem.any():
        tau += 1
        if tau > mesh.config.step_cap:
            raise NonHalting("block route exceeded the step cap")
        active = (rem.sum(axis=1) > 0) & (rank < tau)
        axis = np.argmax(rem > 0, axis=1)
        idx = np.flatnonzero(active)
        if len(idx):
            ax = axis[idx]
            sign = sgn[idx, ax]
            link = (pos[idx] @ weights) * (2 * dim) + ax * 2 + (sign > 0)
            uniq, counts = np.unique(link, return_counts=True)
            if (counts > 1).any():
                bad = idx[np.flatnonzero(link == uniq[np.argmax(counts > 1)])[0]]
                raise BandwidthViolation("two words on one link in one phase", pos[bad], mesh.t + tau)
            pos[idx, ax] += sign
            rem[idx, ax] -= 1
        occupancy = np.bincount(pos @ weights, minlength=edge**dim)
        peak = max(peak, int(occupancy.max()) + dim)
        if peak > budget:
            where = np.unravel_index(int(np.argmax(occupancy)), mesh.config.shape)
            raise BudgetViolation("relay buffers exceed the word budget", where, mesh.t + tau)
        ledger.advance(1, len(idx), peak)
    target = np.concatenate(targets)
    assert (pos == target).all()
    if register is not None:
        if register not in mesh.regs:
            mesh.set(register, 0, False)
        reg_values, reg_mask = mesh.regs[register]
        index = tuple(target.T)
        reg_values[(Ellipsis,) + index] = vals
        reg_mask[(Ellipsis,) + index] = True
    mesh.t += tau
    mesh.ledger.advance(tau, ledger.words_moved, peak)
    ledger.per_phase.append(("route", tau))
    return ledger


def route_block(mesh, src, dst, payload, register="blk"):
    """Move one block from ``src`` to ``dst``; returns the route's ledger."""
    return route_blocks(mesh, [(src, dst, payload)], register)


def route_formation(mesh, moves, register="blk", order=None):
    """Translate blocks one axis at a time, every word moving in lockstep.

    During the phase for an axis all words with a displacement along it
    leave together and advance one hop per step until they arrive, so the
    phase lasts as long as the longest displacement.  Words moving the same
    way never meet on a link, provided no two of them start a phase on the
    same processor; that (and the budget) is still checked every step.
    """
    return route_streams(mesh, [(moves, register, order)])


def route_streams(mesh, streams):
    """Run several formations at once, each with its own register and axis order.

    ``streams`` holds ``(moves, register, order)`` triples.  Each stream
    steps through its own axis phases; all streams start together and
    share the links, so two words crossing one link in one step still
    raise ``BandwidthViolation``.
    """
    dim = mesh.dim
    edge = mesh.config.edge
    pos, delta, tag, schedules, deliveries = [], [], [], [], []
    for sid, (moves, register, order) in enumerate(streams):
        order = tuple(range(dim)) if order is None else tuple(order)
        values, targets, start = [], [], len(pos)
        for src, dst, payload in moves:
            if src.extent != dst.extent or src.stride != dst.stride:
                raise ConfigError("source and destination regions must be congruent")
            if not (src.fits(edge) and dst.fits(edge)):
                raise ConfigError("region does not fit inside the mesh")
            p = src.points()
            pos += list(p)
            delta += [[d - s for d, s in zip(dst.origin, src.origin)]] * len(p)
            tag += [sid] * len(p)
            values.append(np.asarray(payload, dtype=np.int64).reshape(-1))
            targets.append(dst.points())
        span = np.abs(np.array(delta[start:], dtype=np.int64).reshape(-1, dim)).max(axis=0, initial=0)
        phases, t = [], 0
        for axis in order:
            if len(span) and span[axis]:
                phases.append((axis, t, t + int(span[axis])))
                t += int(span[axis])
        schedules.append(phases)
        if targets:
            deliveries.append((register, np.concatenate(targets), np.concatenate(values)))
    ledger = StepLedger()
    if not pos:
        return ledger.charge("route", 0)
    pos = np.array(pos, dtype=np.int64).reshape(-1, dim)
    delta = np.array(delta, dtype=np.int64).reshape(-1, dim)
    tag = np.array(tag)
    weights = edge ** np.arange(dim - 1, -1, -1)
    budget = mesh.config.word_budget
    total = max((ph[-1][2] for ph in schedules if ph), default=0)
    if total > mesh.config.step_cap:
        raise NonHalting("block route exceeded the step cap")
    peak = 0
    for tau in range(1, total + 1):
        axis = np.full(len(pos), -1)
        for sid, phases in enumerate(schedules):
            for ax, lo, hi in phases:
                if lo < tau <= hi:
                    axis[tag == sid] = ax
        rows = np.flatnonzero(axis >= 0)
        ax = axis[rows]
        step = delta[rows, ax]
        moving = step != 0
        idx, ax, step = rows[moving], ax[moving], np.sign(step[moving])
        link = ((pos[idx] @ weights) * dim + ax) * 2 + (step > 0)
        uniq, counts = np.unique(link, return_counts=True)
        if (counts > 1).any():
            bad = idx[np.flatnonzero(link == uniq[np.argmax(counts > 1)])[0]]
            raise BandwidthViolation("two words on one link in one phase", pos[bad], mesh.t + tau)
        pos[idx, ax] += step
        delta[idx, ax] -= step
        occupancy = np.bincount(pos @ weights, minlength=edge**dim)
        peak = max(peak, int(occupancy.max()) + dim)
        if peak > budget:
            where = np.unravel_index(int(np.argmax(occupancy)), mesh.config.shape)
            raise BudgetViolation("relay buffers exceed the word budget", where, mesh.t + tau)
        ledger.advance(1, len(idx), peak)
    assert not delta.any()
    for register, target, values in deliveries:
        if register is None:
            continue
        if register not in mesh.regs:
            mesh.set(register, 0, False)
        reg_values, reg_mask = mesh.regs[register]
        index = tuple(target.T)
        reg_values[(Ellipsis,) + index] = values
        reg_mask[(Ellipsis,) + index] = True
    mesh.t += total
    mesh.ledger.advance(total, ledger.words_moved, peak)
    ledger.per_phase.append(("route", total))
    return ledger
