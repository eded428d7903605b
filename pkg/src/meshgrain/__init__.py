"""Fine-grained mesh algorithms on a step-counting simulator."""

from .algebra import BOOLOR, INF, MAXMIN, MINPLUS, NEG_INF, PLUSMUL, get_semiring, serial_matmul, serial_strassen
from .engine import MeshConfig, Region, StepLedger, build_mesh, run_program
from .errors import (
    BandwidthViolation,
    BudgetViolation,
    ConfigError,
    ConstraintViolation,
    MeshError,
    NonHalting,
    PlanError,
    ScheduleError,
    SizeError,
    StructureViolation,
)
from .maze import Maze, PathResult, random_maze, solve_maze_2d, solve_maze_3d, wave_bfs
from .meshmul import bounds, general_matmul_3d, plan_alg_a, plan_alg_b, ring_matmul_3d
from .paths import apsp, bottleneck_apsp, reconstruct_path, transitive_closure
from .systolic import simulate_2d_on_3d, systolic_matmul_2d

__version__ = "0.1.0"

__all__ = [
    "BOOLOR",
    "BandwidthViolation",
    "BudgetViolation",
    "ConfigError",
    "ConstraintViolation",
    "INF",
    "MAXMIN",
    "MINPLUS",
    "Maze",
    "MeshConfig",
    "MeshError",
    "NEG_INF",
    "NonHalting",
    "PLUSMUL",
    "PathResult",
    "PlanError",
    "Region",
    "ScheduleError",
    "SizeError",
    "StepLedger",
    "StructureViolation",
    "apsp",
    "bottleneck_apsp",
    "bounds",
    "build_mesh",
    "general_matmul_3d",
    "get_semiring",
    "plan_alg_a",
    "plan_alg_b",
    "random_maze",
    "reconstruct_path",
    "ring_matmul_3d",
    "run_program",
    "serial_matmul",
    "serial_strassen",
    "simulate_2d_on_3d",
    "solve_maze_2d",
    "solve_maze_3d",
    "systolic_matmul_2d",
    "transitive_closure",
    "wave_bfs",
]
