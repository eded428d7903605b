"""Command line: ``meshgrain {matmul,paths,maze,bounds,scaling} ...``.

Data goes to stdout (or ``-o``), diagnostics to stderr.  Exit codes: 0 ok,
1 bad input or flags, 2 a machine constraint was violated (the message
names the processor and step), 3 a required path does not exist.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .algebra import BOOLOR, MAXMIN, MINPLUS, PLUSMUL, get_semiring, random_matrix
from .errors import ConstraintViolation, MeshError, NonHalting, UnreachableError
from .faults import FAULTS, run_fault
from .formats import format_matrix, format_maze, parse_maze, read_matrix
from .maze import random_maze, solve_maze_2d, solve_maze_3d, wave_bfs
from .meshmul import bounds, general_matmul_3d, plan_alg_b, ring_matmul_3d
from .paths import apsp, bottleneck_apsp, reconstruct_path, transitive_closure
from .scaling import ALGOS, fit_exponent, run_scaling, write_csv
from .systolic import SystolicProgram, simulate_2d_on_3d, systolic_matmul_2d

OK, INPUT_ERROR, VIOLATION, NO_PATH = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _emit(text, path, stdout):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def _write_ledger(args, ledger, extra=None):
    if not args.ledger:
        return
    text = ledger.to_text()
    for key, value in sorted((extra or {}).items()):
        text += f"{key}={value}\n"
    with open(args.ledger, "w") as fh:
        fh.write(text)


def _inputs(args, semiring):
    if args.A and args.B:
        return read_matrix(args.A), read_matrix(args.B)
    if args.A or args.B:
        raise UsageError("give both -A and -B, or neither with --n for random inputs")
    if not args.n:
        raise UsageError("matmul needs -A and -B, or --n for random inputs")
    rng = np.random.default_rng(args.seed)
    return random_matrix(semiring, args.n, rng), random_matrix(semiring, args.n, rng)


def cmd_matmul(args, stdout):
    if args.inject:
        run_fault(args.inject)
    semiring = get_semiring(args.semiring)
    A, B = _inputs(args, semiring)
    if args.algo == "systolic2d":
        C, ledger = systolic_matmul_2d(semiring, A, B, word_budget=args.word_budget)
    elif args.algo == "sim2d-on-3d":
        program = SystolicProgram(semiring, A, B)
        regs, ledger, _ = simulate_2d_on_3d(program, A.shape[0] ** 2, word_budget=args.word_budget)
        C = regs["C"][0]
    elif args.algo == "alg-a":
        C, ledger = general_matmul_3d(semiring, A, B, args.alpha, mode=args.engine)
    else:
        if semiring is not PLUSMUL:
            raise UsageError("alg-b needs a ring; only plusmul qualifies")
        schedule = plan_alg_b(A.shape[0], forced_s=args.forced_s)
        C, ledger = ring_matmul_3d(A, B, schedule, word_budget=args.word_budget)
    _emit(format_matrix(C, semiring), args.output, stdout)
    _write_ledger(args, ledger, {"algo": args.algo, "semiring": semiring.name, "n": A.shape[0]})
    return OK


def cmd_paths(args, stdout):
    W = read_matrix(args.input)
    table = None
    if args.problem == "closure":
        M, ledger = transitive_closure(W, args.mode, args.alpha)
        semiring = BOOLOR
    elif args.problem == "apsp":
        M, table, ledger = apsp(W, args.alpha)
        semiring = MINPLUS
    else:
        M, ledger = bottleneck_apsp(W, args.alpha)
        semiring = MAXMIN
    if args.path is not None and table is None:
        raise UsageError("--path needs --problem apsp")
    if args.output or args.path is None:
        _emit(format_matrix(M, semiring), args.output, stdout)
    _write_ledger(args, ledger, {"problem": args.problem, "n": W.shape[0]})
    if args.path is not None:
        i, j = args.path
        try:
            path = reconstruct_path(table, i, j)
        except UnreachableError as err:
            print(f"meshgrain: {err}", file=sys.stderr)
            return NO_PATH
        stdout.write(f"distance={int(M[i, j])}\npath={' '.join(map(str, path))}\n")
    return OK


def cmd_maze(args, stdout):
    if args.input:
        with open(args.input) as fh:
            maze = parse_maze(fh.read())
    elif args.random:
        maze = random_maze(args.dim, args.random, args.density, args.seed)
    else:
        raise UsageError("maze needs --in FILE or --random N")
    if maze.dim != args.dim:
        raise UsageError(f"--dim {args.dim} but the maze is {maze.dim}-d")
    if args.solver == "bfs":
        result = wave_bfs(maze)
    elif maze.dim == 2:
        result = solve_maze_2d(maze, args.alpha)
    else:
        result = solve_maze_3d(maze, args.c)
    summary = (
        f"reachable={str(result.reachable).lower()}\n"
        f"distance={'NONE' if result.distance is None else result.distance}\n"
        f"charged_time={result.charged_time}\n"
        f"mesh_size_used={result.mesh_size_used}\n"
    )
    if args.mark:
        _emit(format_maze(maze, result.path), args.output, stdout)
        sys.stderr.write(summary)
    else:
        _emit(summary, args.output, stdout)
    if args.ledger:
        with open(args.ledger, "w") as fh:
            fh.write(summary)
            for label, steps in result.levels:
                fh.write(f"level.{label}={steps}\n")
    if args.require_path and not result.reachable:
        print("meshgrain: finish is not reachable from start", file=sys.stderr)
        return NO_PATH
    return OK


def cmd_bounds(args, stdout):
    if args.alpha is not None and args.size is not None:
        raise UsageError("give --alpha or --size, not both")
    report = bounds(args.n, args.dim, mesh_size=args.size, alpha=args.alpha)
    text = "".join(f"{key}={value}\n" for key, value in report.as_dict().items())
    _emit(text, args.output, stdout)
    return OK


def cmd_scaling(args, stdout):
    sizes = [int(x) for x in args.sizes.split(",") if x]
    seeds = [int(x) for x in args.seeds.split(",")] if args.seeds else [args.seed]
    rows = run_scaling(args.algo, sizes, args.alpha, seeds)
    if len({r.n for r in rows}) < 2:
        print("meshgrain: fewer than two sizes succeeded", file=sys.stderr)
        return INPUT_ERROR
    if args.output:
        with open(args.output, "w") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, stdout)
    slope, _ = fit_exponent(rows)
    print(f"fitted exponent {slope:.3f}", file=sys.stderr)
    return OK


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--ledger", help="write the step ledger here as key=value lines")
    common.add_argument("--seed", type=int, default=0, help="seed for random inputs")
    common.add_argument("-o", "--output", help="output file (default stdout)")

    parser = _Parser(prog="meshgrain", description="Fine-grained mesh algorithms on a step-counting simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("matmul", parents=[common], help="multiply two matrices on a mesh")
    p.add_argument("--algo", choices=("systolic2d", "sim2d-on-3d", "alg-a", "alg-b"), default="systolic2d")
    p.add_argument("--semiring", default="plusmul", choices=("plusmul", "minplus", "maxmin", "boolor"))
    p.add_argument("-A", help="left matrix file")
    p.add_argument("-B", help="right matrix file")
    p.add_argument("--n", type=int, help="size of random inputs when no files are given")
    p.add_argument("--alpha", default="9/4", help="mesh size exponent for alg-a")
    p.add_argument("--forced-s", type=int, default=1, help="number of grid steps for alg-b")
    p.add_argument("--engine", choices=("auto", "engine", "charged"), default="auto")
    p.add_argument("--word-budget", type=int, default=32)
    p.add_argument("--inject", choices=sorted(FAULTS), help="run a deliberately broken program first")
    p.set_defaults(func=cmd_matmul)

    p = sub.add_parser("paths", parents=[common], help="closure, shortest or widest paths")
    p.add_argument("--problem", choices=("closure", "apsp", "bottleneck"), required=True)
    p.add_argument("--mode", choices=("ring", "boolean"), default="ring")
    p.add_argument("--alpha", default="9/4")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--path", nargs=2, type=int, metavar=("I", "J"))
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("maze", parents=[common], help="shortest path through a maze")
    p.add_argument("--dim", type=int, choices=(2, 3), required=True)
    p.add_argument("--in", dest="input")
    p.add_argument("--random", type=int, metavar="N", help="solve a random maze of edge N")
    p.add_argument("--density", type=float, default=0.6)
    p.add_argument("--mark", action="store_true", help="print the maze with the path marked '*'")
    p.add_argument("--alpha", default="9/4", help="expansion exponent for 2-d mazes")
    p.add_argument("--c", default="9/2", help="expansion exponent for 3-d mazes")
    p.add_argument("--solver", choices=("recursive", "bfs"), default="recursive")
    p.add_argument("--require-path", action="store_true")
    p.set_defaults(func=cmd_maze)

    p = sub.add_parser("bounds", parents=[common], help="lower bounds for general multiplication")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, choices=(2, 3), default=3)
    p.add_argument("--alpha")
    p.add_argument("--size", type=int)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("scaling", parents=[common], help="step counts across sizes as CSV")
    p.add_argument("--algo", choices=ALGOS, required=True)
    p.add_argument("--sizes", required=True, help="comma separated, e.g. 8,16,32")
    p.add_argument("--alpha", default="9/4")
    p.add_argument("--seeds", help="comma separated seeds (default: --seed)")
    p.set_defaults(func=cmd_scaling)
    return parser


def run_cli(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, stdout)
    except UsageError as err:
        print(err, file=sys.stderr)
        return INPUT_ERROR
    except (ConstraintViolation, NonHalting) as err:
        print(f"meshgrain: constraint violated: {err}", file=sys.stderr)
        return VIOLATION
    except (MeshError, OSError, ValueError) as err:
        print(f"meshgrain: {err}", file=sys.stderr)
        return INPUT_ERROR


def main():
    sys.exit(run_cli())
