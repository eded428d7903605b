"""Plain-text matrix and maze files."""

import numpy as np

from .algebra import INF, NEG_INF
from .errors import ConfigError
from .maze import Maze

WALL, OPEN, START, FINISH, MARK = "#", ".", "S", "F", "*"


def _token(x, sentinels):
    if sentinels and x >= INF:
        return "INF"
    if sentinels and x <= NEG_INF:
        return "-INF"
    return str(int(x))


def format_matrix(M, semiring=None):
    """Text form of ``M``; INF and -INF are spelled out unless ``semiring`` is a ring or boolean."""
    M = np.asarray(M)
    sentinels = semiring is None or semiring.name in ("minplus", "maxmin")
    lines = [str(M.shape[0])]
    lines += [" ".join(_token(x, sentinels) for x in row) for row in M]
    return "\n".join(lines) + "\n"


def parse_matrix(text):
    tokens = text.split()
    if not tokens:
        raise ConfigError("empty matrix file")
    try:
        n = int(tokens[0])
    except ValueError:
        raise ConfigError(f"first token must be the size, got {tokens[0]!r}") from None
    body = tokens[1:]
    if n < 1 or len(body) != n * n:
        raise ConfigError(f"expected {n * n} entries for n = {n}, got {len(body)}")
    values = []
    for tok in body:
        if tok == "INF":
            values.append(INF)
        elif tok == "-INF":
            values.append(NEG_INF)
        else:
            try:
                values.append(int(tok))
            except ValueError:
                raise ConfigError(f"bad matrix entry {tok!r}") from None
    return np.array(values, dtype=np.int64).reshape(n, n)


def read_matrix(path):
    with open(path) as fh:
        return parse_matrix(fh.read())


def write_matrix(path, M, semiring=None):
    with open(path, "w") as fh:
        fh.write(format_matrix(M, semiring))


def format_maze(maze, path=()):
    on_path = {tuple(c) for c in path}
    grid = np.where(maze.cells, OPEN, WALL).astype("<U1")
    for cell in on_path:
        grid[cell] = MARK
    grid[maze.start] = START
    grid[maze.finish] = FINISH
    layers = grid.reshape((-1,) + grid.shape[-2:])
    blocks = ["\n".join("".join(row) for row in layer) for layer in layers]
    return f"{maze.dim} {maze.n}\n" + "\n\n".join(blocks) + "\n"


def parse_maze(text):
    lines = text.splitlines()
    if not lines:
        raise ConfigError("empty maze file")
    try:
        dim, n = (int(x) for x in lines[0].split())
    except ValueError:
        raise ConfigError(f"first line must be 'dim n', got {lines[0]!r}") from None
    if dim not in (2, 3) or n < 2:
        raise ConfigError(f"unsupported maze header {lines[0]!r}")
    rows = [ln.strip() for ln in lines[1:] if ln.strip()]
    if len(rows) != n ** (dim - 1):
        raise ConfigError(f"expected {n ** (dim - 1)} rows, got {len(rows)}")
    chars = np.array([list(r) for r in rows if len(r) == n] or [[]])
    if chars.shape != (len(rows), n):
        raise ConfigError(f"every row must have {n} characters")
    bad = set(chars.ravel()) - {WALL, OPEN, START, FINISH, MARK}
    if bad:
        raise ConfigError(f"unknown maze characters {sorted(bad)}")
    chars = chars.reshape((n,) * dim)
    found = {}
    for mark in (START, FINISH):
        where = np.argwhere(chars == mark)
        if len(where) != 1:
            raise ConfigError(f"maze needs exactly one {mark!r}")
        found[mark] = tuple(int(c) for c in where[0])
    return Maze(chars != WALL, found[START], found[FINISH])


def read_maze(path):
    with open(path) as fh:
        return parse_maze(fh.read())


def write_maze(path, maze, path_cells=()):
    with open(path, "w") as fh:
        fh.write(format_maze(maze, path_cells))
