"""Small 2-d grid programs used to exercise the simulator."""

import numpy as np

from .engine import GridProgram

UNSEEN = -1


class BroadcastProgram(GridProgram):
    """Spread the corner word to every processor.

    A processor forwards the word east and south on the step it first holds
    it; ``V`` ends up equal everywhere after ``2 (edge - 1)`` steps.
    """

    def __init__(self, edge, value):
        self.edge = edge
        self.value = int(value)
        self.n_steps = 2 * (edge - 1)

    def init(self, coords, regs):
        r, c = np.broadcast_arrays(*coords)
        corner = (r == 0) & (c == 0)
        regs["V"] = (np.where(corner, self.value, 0), corner)
        return self._forward(coords, corner)

    def _forward(self, coords, fresh):
        r, c = np.broadcast_arrays(*coords)
        return [
            (0, 1, self.value, fresh & (r < self.edge - 1)),
            (1, 1, self.value, fresh & (c < self.edge - 1)),
        ]

    def step(self, t, coords, regs, inbox):
        held = regs["V"][1]
        got = np.zeros_like(held)
        for key in ((0, 1), (1, 1)):
            if key in inbox:
                got |= inbox[key][1]
        fresh = got & ~held
        regs["V"] = (np.where(fresh, self.value, regs["V"][0]), held | fresh)
        return self._forward(coords, fresh)


class WavefrontProgram(GridProgram):
    """Breadth-first distance wave through the open cells of a 2-d maze.

    ``D`` holds the hop distance from ``source`` (``UNSEEN`` where the wave
    has not arrived).  Each newly reached cell announces ``distance + 1`` to
    its four neighbours once.
    """

    def __init__(self, open_cells, source, n_steps=None):
        self.open = np.asarray(open_cells, dtype=bool)
        self.source = tuple(source)
        self.edge = self.open.shape[0]
        self.n_steps = n_steps if n_steps is not None else self.open.size

    def _announce(self, coords, value, fresh):
        r, c = np.broadcast_arrays(*coords)
        e = self.edge
        return [
            (0, 1, value + 1, fresh & (r < e - 1)),
            (0, -1, value + 1, fresh & (r > 0)),
            (1, 1, value + 1, fresh & (c < e - 1)),
            (1, -1, value + 1, fresh & (c > 0)),
        ]

    def init(self, coords, regs):
        r, c = np.broadcast_arrays(*coords)
        start = (r == self.source[0]) & (c == self.source[1]) & self.open[r, c]
        regs["D"] = (np.where(start, 0, UNSEEN), start)
        return self._announce(coords, regs["D"][0], start)

    def step(self, t, coords, regs, inbox):
        dist, seen = regs["D"]
        r, c = np.broadcast_arrays(*coords)
        fresh = np.zeros_like(seen)
        value = dist.copy()
        for _, (words, mask) in inbox.items():
            take = mask & ~seen & ~fresh & self.open[r, c]
            value = np.where(take, words, value)
            fresh |= take
        regs["D"] = (value, seen | fresh)
        return self._announce(coords, value, fresh)
