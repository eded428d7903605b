"""Mazes, the wave-propagation oracle and the recursive boundary solvers.

A block of the maze is summarized by the shortest distances (inside the
block) between its white cells that touch a white cell outside it.  Blocks
are merged in groups of four (2-d) or eight (3-d): the children's summaries
and the white adjacencies across their shared sides form a small graph
whose all-pairs distances give the parent's summary.  The path is rebuilt
top-down by expanding each summary edge inside the child it came from.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import ceil

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra, shortest_path

from .algebra import INF, NONE
from .errors import ConfigError, SizeError
from .meshmul import as_fraction, plan_alg_a
from .paths import apsp, reconstruct_path, squaring_rounds

BASE_EDGE = 4
MATRIX_WORDS = 24


@dataclass
class Maze:
    cells: np.ndarray
    start: tuple
    finish: tuple

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=bool)
        if self.cells.ndim not in (2, 3) or len(set(self.cells.shape)) != 1:
            raise ConfigError(f"maze must be a square or cube, got shape {self.cells.shape}")
        self.start = tuple(int(c) for c in self.start)
        self.finish = tuple(int(c) for c in self.finish)
        for name, cell in (("start", self.start), ("finish", self.finish)):
            if len(cell) != self.dim or not all(0 <= c < self.n for c in cell):
                raise ConfigError(f"{name} {cell} is outside the maze")
            if not self.cells[cell]:
                raise ConfigError(f"{name} {cell} is not white")
        if self.start == self.finish:
            raise ConfigError("start and finish must differ")

    @property
    def dim(self):
        return self.cells.ndim

    @property
    def n(self):
        return self.cells.shape[0]


@dataclass
class PathResult:
    reachable: bool
    distance: int | None
    path: list
    charged_time: int
    mesh_size_used: int
    levels: list = field(default_factory=list)


def neighbours(cell, n):
    for axis in range(len(cell)):
        for sign in (-1, 1):
            c = cell[axis] + sign
            if 0 <= c < n:
                yield cell[:axis] + (c,) + cell[axis + 1:]


def wave_bfs(maze):
    """Breadth-first wave from the start; each cell remembers where the wave came from."""
    came = {maze.start: None}
    frontier = deque([maze.start])
    layers = 0
    depth = {maze.start: 0}
    while frontier:
        cell = frontier.popleft()
        if cell == maze.finish:
            break
        for nxt in neighbours(cell, maze.n):
            if maze.cells[nxt] and nxt not in came:
                came[nxt] = cell
                depth[nxt] = depth[cell] + 1
                layers = max(layers, depth[nxt])
                frontier.append(nxt)
    if maze.finish not in came:
        return PathResult(False, None, [], layers, maze.n**maze.dim)
    path = [maze.finish]
    while came[path[-1]] is not None:
        path.append(came[path[-1]])
    path.reverse()
    return PathResult(True, len(path) - 1, path, len(path) - 1, maze.n**maze.dim)


def validate_path(maze, result):
    """Raise ConfigError unless ``result`` is a consistent answer for ``maze``."""
    if not result.reachable:
        if result.distance is not None or result.path:
            raise ConfigError("unreachable result carries a path")
        return
    path = [tuple(c) for c in result.path]
    if not path or path[0] != maze.start or path[-1] != maze.finish:
        raise ConfigError("path does not run from start to finish")
    if len(path) - 1 != result.distance:
        raise ConfigError("path length differs from the distance")
    for a, b in zip(path, path[1:]):
        if sum(abs(x - y) for x, y in zip(a, b)) != 1:
            raise ConfigError(f"cells {a} and {b} are not adjacent")
    for c in path:
        if not maze.cells[c]:
            raise ConfigError(f"cell {c} is black")


def random_maze(dim, n, white_density, seed):
    """Reproducible random maze with start and finish at opposite corners."""
    if not 0 < white_density <= 1:
        raise ConfigError("white density must lie in (0, 1]")
    if n < 2:
        raise ConfigError("maze edge must be >= 2")
    rng = np.random.default_rng(seed)
    cells = rng.random((n,) * dim) < white_density
    start, finish = (0,) * dim, (n - 1,) * dim
    cells[start] = cells[finish] = True
    return Maze(cells, start, finish)


def component_oracle(maze):
    """Label of the white component of every cell (union-find over white adjacencies)."""
    flat = maze.cells.reshape(-1)
    parent = np.arange(flat.size)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    strides = np.array([maze.n ** (maze.dim - 1 - a) for a in range(maze.dim)])
    for cell in zip(*np.nonzero(maze.cells)):
        here = int(np.dot(cell, strides))
        for axis in range(maze.dim):
            if cell[axis] + 1 < maze.n:
                nxt = cell[:axis] + (cell[axis] + 1,) + cell[axis + 1:]
                if maze.cells[nxt]:
                    a, b = find(here), find(int(np.dot(nxt, strides)))
                    if a != b:
                        parent[max(a, b)] = min(a, b)
    return np.array([find(i) for i in range(flat.size)]).reshape(maze.cells.shape)


# ---------------------------------------------------------------------------
# recursive boundary solver
# ---------------------------------------------------------------------------


@dataclass
class BoundaryGraph:
    """Summary of one block: distances between its boundary vertices.

    ``vertices`` are flat cell indices; ``dist`` is symmetric with a zero
    diagonal and ``INF`` for pairs not connected inside the block.
    """

    origin: tuple
    edge: int
    vertices: np.ndarray
    dist: np.ndarray
    children: list = field(default_factory=list)
    union: np.ndarray | None = None
    weights: np.ndarray | None = None
    witness: object = None
    predecessors: np.ndarray | None = None
    charge: int = 0

    def first_step(self, u, v):
        """Next vertex of the union graph on the recorded ``u``-``v`` path."""
        i, j = self._index(self.union, u), self._index(self.union, v)
        if self.witness is not None:
            while self.witness.mid[i, j] != NONE and self.witness.round[i, j] > 0:
                j = self.witness.mid[i, j]
            return int(self.union[j])
        row = self._index(self.vertices, u)
        while self.predecessors[row, j] != i:
            j = self.predecessors[row, j]
        return int(self.union[j])

    @staticmethod
    def _index(array, value):
        pos = int(np.searchsorted(array, value))
        if pos >= len(array) or array[pos] != value:
            raise ConfigError(f"cell {value} is not a vertex here")
        return pos


class _Solver:
    def __init__(self, maze, merge, machine, base_edge=BASE_EDGE):
        self.maze = maze
        self.n = maze.n
        self.dim = maze.dim
        self.merge = merge
        self.base_edge = min(base_edge, self.n)
        self.flat = maze.cells.reshape(-1)
        self.strides = np.array([self.n ** (self.dim - 1 - a) for a in range(self.dim)])
        self.special = {self.index(maze.start), self.index(maze.finish)}
        self.level_charges = {}
        self.machine = machine

    def host_processors(self, edge):
        """Processors of the machine that belong to a block of this edge."""
        return self.machine * edge**self.dim // self.n**self.dim

    def index(self, cell):
        return int(np.dot(cell, self.strides))

    def cell(self, index):
        return tuple(int(c) for c in np.unravel_index(index, self.maze.cells.shape))

    def block_cells(self, origin, edge):
        axes = [o + np.arange(edge) for o in origin]
        grids = np.meshgrid(*axes, indexing="ij")
        return sum(g * s for g, s in zip(grids, self.strides)).reshape(-1)

    def boundary(self, origin, edge, top=False):
        """White cells of the block with a white neighbour outside it (plus start and finish)."""
        block = tuple(slice(o, o + edge) for o in origin)
        white = self.maze.cells
        exits = np.zeros((edge,) * self.dim, dtype=bool)
        if not top:
            for axis in range(self.dim):
                lo, hi = origin[axis] - 1, origin[axis] + edge
                for outside, face in ((lo, 0), (hi, edge - 1)):
                    if 0 <= outside < self.n:
                        src = list(block)
                        src[axis] = outside
                        dst = [slice(None)] * self.dim
                        dst[axis] = face
                        exits[tuple(dst)] |= white[tuple(src)]
        exits &= white[block]
        for cell in (self.maze.start, self.maze.finish):
            if all(o <= c < o + edge for c, o in zip(cell, origin)):
                exits[tuple(c - o for c, o in zip(cell, origin))] = True
        local = np.argwhere(exits) + np.asarray(origin)
        return np.sort(local @ self.strides).astype(np.int64)

    def solve(self, origin, edge, level=0):
        top = level == 0
        vertices = self.boundary(origin, edge, top)
        if edge <= self.base_edge:
            return self.base(origin, edge, vertices)
        half = edge // 2
        children = [
            self.solve(tuple(o + d * half for o, d in zip(origin, offs)), half, level + 1)
            for offs in product((0, 1), repeat=self.dim)
        ]
        node = self.merge(self, origin, edge, vertices, children, level)
        self.level_charges[level] = max(self.level_charges.get(level, 0), node.charge)
        return node

    def base(self, origin, edge, vertices):
        cells = self.block_cells(origin, edge)
        shape = (edge,) * self.dim
        white = self.flat[cells].reshape(shape)
        ids = np.arange(cells.size).reshape(shape)
        rows, cols = [], []
        for axis in range(self.dim):
            lo = [slice(None)] * self.dim
            hi = [slice(None)] * self.dim
            lo[axis], hi[axis] = slice(0, -1), slice(1, None)
            both = white[tuple(lo)] & white[tuple(hi)]
            a, b = ids[tuple(lo)][both], ids[tuple(hi)][both]
            rows += [a, b]
            cols += [b, a]
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(cells), len(cells))).tocsr()
        sources = np.searchsorted(cells, vertices)
        if len(sources):
            d, pred = shortest_path(graph, unweighted=True, indices=sources, return_predecessors=True)
            d = d[:, sources]
        else:
            d, pred = np.zeros((0, 0)), np.zeros((0, len(cells)), dtype=np.int64)
        dist = np.where(np.isinf(d), INF, d).astype(np.int64)
        node = BoundaryGraph(origin, edge, vertices, dist)
        node.union = cells
        node.predecessors = pred
        charge = len(cells) * self.dim * (edge - 1)
        node.charge = charge
        self.level_charges["base"] = max(self.level_charges.get("base", 0), charge)
        return node

    def union_graph(self, children):
        union = np.unique(np.concatenate([c.vertices for c in children] + [np.zeros(0, np.int64)]))
        pos = {int(v): q for q, v in enumerate(union)}
        m = len(union)
        W = np.full((m, m), INF, dtype=np.int64)
        np.fill_diagonal(W, 0)
        owner = {}
        for child in children:
            q = np.array([pos[int(v)] for v in child.vertices], dtype=np.int64)
            if len(q):
                W[np.ix_(q, q)] = np.minimum(W[np.ix_(q, q)], child.dist)
            for v in child.vertices:
                owner[int(v)] = id(child)
        for v in union:
            for nb in neighbours(self.cell(int(v)), self.n):
                j = self.index(nb)
                if j in pos and owner[j] != owner[int(v)]:
                    W[pos[int(v)], pos[j]] = 1
        return union, W

    # path expansion -----------------------------------------------------

    def expand(self, node, u, v):
        """Cells of the recorded shortest ``u``-``v`` path inside ``node`` (both ends included)."""
        if u == v:
            return [u]
        if not node.children:
            cells = node.union
            row = int(np.searchsorted(node.vertices, u))
            first, path = int(np.searchsorted(cells, u)), [int(np.searchsorted(cells, v))]
            while path[-1] != first:
                path.append(int(node.predecessors[row, path[-1]]))
            return [int(cells[q]) for q in reversed(path)]
        hops = self.union_path(node, u, v)
        out = [u]
        for a, b in zip(hops, hops[1:]):
            owner = next(c for c in node.children if a in c.vertex_set)
            if b in owner.vertex_set:
                out += self.expand(owner, a, b)[1:]
            else:
                out.append(b)
        return out

    @staticmethod
    def upos(node, value):
        return int(np.searchsorted(node.union, value))

    def union_path(self, node, u, v):
        i, j = self.upos(node, u), self.upos(node, v)
        if node.witness is not None:
            return [int(node.union[q]) for q in reconstruct_path(node.witness, i, j)]
        row = int(np.searchsorted(node.vertices, u))
        seq = [j]
        while seq[-1] != i:
            seq.append(int(node.predecessors[row, seq[-1]]))
        return [int(node.union[q]) for q in reversed(seq)]

    def run(self):
        root = self.solve((0,) * self.dim, self.n)
        s, f = self.index(self.maze.start), self.index(self.maze.finish)
        vs = root.vertices
        d = root.dist[int(np.searchsorted(vs, s)), int(np.searchsorted(vs, f))]
        return root, s, f, d

    def result(self):
        root, s, f, d = self.run()
        charged = sum(self.level_charges.values())
        levels = [(str(k), v) for k, v in sorted(self.level_charges.items(), key=lambda kv: str(kv[0]))]
        if d >= INF:
            return PathResult(False, None, [], charged, self.machine, levels)
        path = [self.cell(c) for c in self.expand(root, s, f)]
        return PathResult(True, int(d), path, charged, self.machine, levels)


def _annotate(children):
    for child in children:
        child.vertex_set = {int(v) for v in child.vertices}


def _merge_2d(alpha):
    def merge(solver, origin, edge, vertices, children, level):
        _annotate(children)
        union, W = solver.union_graph(children)
        host = solver.host_processors(edge)
        if len(union) ** 2 > host * MATRIX_WORDS:
            raise SizeError(
                f"{len(union)}x{len(union)} boundary matrix exceeds {host} processors x {MATRIX_WORDS} words"
            )
        dist, table, ledger = apsp(W, alpha)
        rows = np.searchsorted(union, vertices)
        node = BoundaryGraph(origin, edge, vertices, dist[np.ix_(rows, rows)], children, union, W, table)
        node.charge = ledger.total_steps
        return node

    return merge


def solve_maze_2d(maze, alpha="9/4"):
    """Quadrant recursion; merges run repeated-squaring APSP on the expanded mesh."""
    if maze.dim != 2:
        raise ConfigError("solve_maze_2d needs a 2-d maze")
    n = maze.n
    if n & (n - 1):
        raise ConfigError(f"maze edge must be a power of two, got {n}")
    alpha = as_fraction(alpha)
    # the top merge has at most 4n - 4 vertices: the cells beside the two middle lines
    machine = plan_alg_a(4 * n, alpha).mesh_size
    return _Solver(maze, _merge_2d(alpha), machine).result()


def _apsp_charge(vertices, processors):
    """Squaring rounds times the larger of the diameter and the per-processor work."""
    if vertices <= 1:
        return 0
    side = ceil(processors ** (1 / 3))
    work = ceil(vertices**3 / processors)
    return squaring_rounds(vertices) * max(side, work)


def _merge_3d(c):
    def merge(solver, origin, edge, vertices, children, level):
        _annotate(children)
        union, W = solver.union_graph(children)
        host = solver.host_processors(edge)
        if len(union) ** 2 > host * MATRIX_WORDS:
            raise SizeError(
                f"boundary matrix of {len(union)} vertices needs {len(union) ** 2} words but the "
                f"{host}-processor share of the n^{c} mesh holds {host * MATRIX_WORDS}; "
                "the merge needs Theta(n^4) space"
            )
        finite = W < INF
        rows, cols = np.nonzero(finite & ~np.eye(len(union), dtype=bool))
        graph = coo_matrix((W[rows, cols].astype(float), (rows, cols)), shape=W.shape).tocsr()
        src = np.searchsorted(union, vertices)
        if len(src):
            d, pred = dijkstra(graph, indices=src, return_predecessors=True)
        else:
            d, pred = np.zeros((0, len(union))), np.zeros((0, len(union)), dtype=np.int64)
        full = np.where(np.isinf(d), INF, d).astype(np.int64)
        node = BoundaryGraph(origin, edge, vertices, full[:, src], children, union, W)
        node.predecessors = pred
        node.charge = _apsp_charge(len(union), host)
        return node

    return merge


def solve_maze_3d(maze, c="9/2"):
    """Octant recursion on a mesh of ``n**c`` processors (``4 <= c <= 9/2``)."""
    if maze.dim != 3:
        raise ConfigError("solve_maze_3d needs a 3-d maze")
    n = maze.n
    if n & (n - 1):
        raise ConfigError(f"maze edge must be a power of two, got {n}")
    c = as_fraction(c)
    if c < 4:
        raise SizeError(f"c = {c} is too small: merging boundary distances needs Theta(n^4) processors")
    if c > Fraction(9, 2):
        raise ConfigError(f"c must lie in [4, 9/2], got {c}")
    machine = int(round(n ** float(c)))
    return _Solver(maze, _merge_3d(c), machine).result()
