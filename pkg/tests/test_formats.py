import io

import numpy as np
import pytest

from meshgrain.algebra import INF, MAXMIN, MINPLUS, NEG_INF, PLUSMUL, random_matrix
from meshgrain.errors import ConfigError
from meshgrain.formats import format_matrix, format_maze, parse_matrix, parse_maze, read_matrix, write_matrix
from meshgrain.maze import Maze, random_maze, solve_maze_2d
from meshgrain.scaling import HEADER, ScalingRow, fit_exponent, read_csv, run_scaling, write_csv


def test_matrix_text():
    M = np.array([[0, INF], [NEG_INF, -3]])
    text = format_matrix(M)
    assert text == "2\n0 INF\n-INF -3\n"
    assert (parse_matrix(text) == M).all()


def test_ring_entries_are_plain_numbers():
    M = np.array([[2**62, -(2**63)]] * 2)
    assert "INF" not in format_matrix(M, PLUSMUL)
    assert (parse_matrix(format_matrix(M, PLUSMUL)) == M).all()


@pytest.mark.parametrize("semiring", [PLUSMUL, MINPLUS, MAXMIN], ids=lambda s: s.name)
def test_matrix_round_trip(semiring, tmp_path):
    rng = np.random.default_rng(0)
    for q in range(50):
        M = random_matrix(semiring, int(rng.integers(1, 12)), rng)
        path = tmp_path / f"m{q}.txt"
        write_matrix(path, M, semiring)
        assert (read_matrix(path) == M).all()


@pytest.mark.parametrize("text", ["", "x", "2\n1 2 3", "2\n1 2 3 y", "0\n"])
def test_bad_matrix_text(text):
    with pytest.raises(ConfigError):
        parse_matrix(text)


def test_maze_text():
    cells = np.ones((4, 4), bool)
    cells[0, 1] = False
    maze = Maze(cells, (0, 0), (0, 2))
    assert format_maze(maze) == "2 4\nS#F.\n....\n....\n....\n"
    result = solve_maze_2d(maze)
    marked = format_maze(maze, result.path)
    assert marked.count("*") == result.distance - 1
    back = parse_maze(marked)
    assert (back.cells == cells).all() and back.start == (0, 0) and back.finish == (0, 2)


def test_maze_round_trip():
    for seed in range(50):
        dim = 2 + seed % 2
        maze = random_maze(dim, 4 + seed % 5, 0.6, seed)
        back = parse_maze(format_maze(maze))
        assert (back.cells == maze.cells).all()
        assert (back.start, back.finish) == (maze.start, maze.finish)


def test_cube_layers_are_separated():
    maze = random_maze(3, 3, 1.0, 0)
    assert format_maze(maze) == "3 3\nS..\n...\n...\n\n...\n...\n...\n\n...\n...\n..F\n"


@pytest.mark.parametrize(
    "text",
    ["", "2\n", "4 3\n", "2 2\nS.\n", "2 2\nS.\n.x\n", "2 2\nS.\n..\n", "2 2\nSS\n.F\n", "2 2\nS..\n.F\n"],
)
def test_bad_maze_text(text):
    with pytest.raises(ConfigError):
        parse_maze(text)


def test_csv_round_trip():
    rows = run_scaling("systolic2d", [4, 8, 6], seeds=(0, 1), log=io.StringIO())
    assert [r.n for r in rows] == [4, 4, 8, 8]
    fh = io.StringIO()
    write_csv(rows, fh)
    assert fh.getvalue().splitlines()[0] == ",".join(HEADER)
    assert HEADER == ["algo", "n", "alpha", "comm_steps", "compute_steps", "total_steps", "processors", "seed"]
    fh.seek(0)
    assert read_csv(fh) == rows


def test_csv_bad_header():
    with pytest.raises(ConfigError):
        read_csv(io.StringIO("a,b\n"))


def test_fit_examples():
    assert fit_exponent([(2, 2), (4, 4), (8, 8)])[0] == 1.000
    assert fit_exponent([(16, 8), (256, 64)])[0] == 0.750
    assert fit_exponent([(4, 7), (8, 7), (64, 7)])[0] == 0.000
    with pytest.raises(ConfigError):
        fit_exponent([(4, 1), (4, 2)])


def test_fit_rows():
    rows = [ScalingRow("x", n, "2", 0, 0, n * n, 1, 0) for n in (4, 8, 16)]
    assert fit_exponent(rows)[0] == 2.0


def test_unplannable_sizes_are_skipped():
    log = io.StringIO()
    rows = run_scaling("alg-a", [2, 4], alpha="9/4", log=log)
    assert {r.n for r in rows} <= {2, 4}
    with pytest.raises(ConfigError):
        run_scaling("bubble", [4])
