from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshgrain.algebra import BOOLOR, MAXMIN, MINPLUS, PLUSMUL, random_matrix, serial_matmul
from meshgrain.engine import check_disjoint
from meshgrain.errors import BudgetViolation, ConfigError, ScheduleError
from meshgrain.meshmul import (
    bounds,
    general_matmul_3d,
    plan_alg_a,
    plan_alg_b,
    ring_matmul_3d,
    step_grid,
)

SPECS = [PLUSMUL, MINPLUS, MAXMIN, BOOLOR]


@pytest.mark.parametrize(
    "n, alpha, expected",
    [
        (16, "9/4", (16, 8, 1, 8, 4, 4, 2)),
        (256, "9/4", (256, 64, 2, 64, 16, 16, 4)),
        (8, 2, (8, 4, 0, 8, 4, 4, 2)),
        (64, 2, (64, 16, 0, 64, 16, 16, 4)),
        (5, "9/4", (8, 8, 1, 4, 4, 4, 1)),
    ],
)
def test_plan_shapes(n, alpha, expected):
    p = plan_alg_a(n, alpha)
    assert (p.size, p.edge, p.levels, p.base_m, p.leaf_edge, p.tile_edge, p.tiles) == expected
    assert len(p.regions[-1]) == 8**p.levels


def test_plan_mesh_is_n_to_alpha_for_powers_of_two():
    for n in (16, 256):
        assert plan_alg_a(n, "9/4").mesh_size == round(n**2.25)


def test_plan_regions_disjoint():
    p = plan_alg_a(256, "9/4")
    for level in p.regions[1:]:
        check_disjoint([r for _, r in level])


@pytest.mark.parametrize("alpha", ["1", "5/2", "3"])
def test_alpha_out_of_range(alpha):
    with pytest.raises(ConfigError):
        plan_alg_a(16, alpha)


@pytest.mark.parametrize("semiring", SPECS, ids=lambda s: s.name)
def test_engine_matches_oracle(semiring):
    rng = np.random.default_rng(0)
    for n in (1, 3, 8, 16):
        A, B = random_matrix(semiring, n, rng), random_matrix(semiring, n, rng)
        C, ledger = general_matmul_3d(semiring, A, B, mode="engine")
        assert (C == serial_matmul(semiring, A, B)).all()
        assert ledger.notes["mode"] == "engine"


@pytest.mark.parametrize("alpha", ["9/4", 2])
def test_charged_agrees_with_engine(alpha):
    rng = np.random.default_rng(1)
    for n in (4, 11, 16):
        A, B = random_matrix(MINPLUS, n, rng), random_matrix(MINPLUS, n, rng)
        Ce, Ke, le = general_matmul_3d(MINPLUS, A, B, alpha, witness=True, mode="engine")
        Cc, Kc, lc = general_matmul_3d(MINPLUS, A, B, alpha, witness=True, mode="charged")
        assert (Ce == Cc).all() and (Ke == Kc).all()
        assert le.per_phase == lc.per_phase
        assert le.total_steps == lc.total_steps


def test_frozen_totals():
    rng = np.random.default_rng(2)
    cases = [(16, "9/4", False, 329), (16, "9/4", True, 403), (8, 2, False, 192), (64, 2, False, 1645)]
    for n, alpha, witness, total in cases:
        semiring = MINPLUS if witness else PLUSMUL
        A, B = random_matrix(semiring, n, rng), random_matrix(semiring, n, rng)
        out = general_matmul_3d(semiring, A, B, alpha, witness=witness, mode="charged")
        assert out[-1].total_steps == total


def test_large_charged_product():
    rng = np.random.default_rng(3)
    A, B = random_matrix(MINPLUS, 256, rng), random_matrix(MINPLUS, 256, rng)
    C, ledger = general_matmul_3d(MINPLUS, A, B, "9/4")
    assert ledger.notes["mode"] == "charged"
    assert ledger.total_steps == 3275
    rows = rng.choice(256, 8, replace=False)
    assert (C[rows] == MINPLUS.mul(A[rows][:, :, None], B[None]).min(axis=1)).all()


def test_witness_none_marker():
    A = np.full((4, 4), 2**62, dtype=np.int64)
    C, K, _ = general_matmul_3d(MINPLUS, A, A, witness=True)
    assert (K == -1).all()


def test_witness_needs_ordered_semiring():
    with pytest.raises(ConfigError):
        general_matmul_3d(PLUSMUL, np.eye(2), np.eye(2), witness=True)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(SPECS), st.integers(1, 20), st.integers(0, 10**6))
def test_alg_a_property(semiring, n, seed):
    rng = np.random.default_rng(seed)
    A, B = random_matrix(semiring, n, rng), random_matrix(semiring, n, rng)
    C, _ = general_matmul_3d(semiring, A, B, mode="charged")
    assert (C == serial_matmul(semiring, A, B)).all()


def test_step_grids():
    g0, g1, g2 = (step_grid(32, i) for i in range(3))
    assert (g0.origin, g0.stride, g0.extent) == ((0,) * 3, (2,) * 3, (16,) * 3)
    assert (g1.origin, g1.stride, g1.extent) == ((1,) * 3, (4,) * 3, (8,) * 3)
    assert (g2.origin, g2.stride, g2.extent) == ((3,) * 3, (8,) * 3, (4,) * 3)
    check_disjoint([g0, g1, g2])
    assert g0.size // g1.size == 8
    with pytest.raises(ScheduleError):
        step_grid(4, 3)


def test_strassen_needs_forced_steps():
    with pytest.raises(ScheduleError):
        plan_alg_b(64)
    s = plan_alg_b(64, forced_s=1)
    assert s.s == 1 and s.levels == [3] and s.memory_factor == 42.875


def test_cheap_scheme_has_positive_delta():
    s = plan_alg_b(64, a=6, b=2.5)
    assert s.delta > 0
    assert s.r == 4 and s.r_uncapped == 5
    assert s.memory_factor <= 64


def test_ring_product():
    rng = np.random.default_rng(4)
    for n in (2, 13, 64):
        A, B = random_matrix(PLUSMUL, n, rng), random_matrix(PLUSMUL, n, rng)
        C, ledger = ring_matmul_3d(A, B, plan_alg_b(n, forced_s=1))
        assert (C == A @ B).all()
    assert ledger.notes["leaf_products"] == 343
    assert ledger.notes["workers.step0"] == 4096


def test_ring_memory_cap():
    rng = np.random.default_rng(5)
    A, B = random_matrix(PLUSMUL, 64, rng), random_matrix(PLUSMUL, 64, rng)
    with pytest.raises(BudgetViolation):
        ring_matmul_3d(A, B, plan_alg_b(64, forced_s=2))


def test_ring_rejects_wrong_size():
    with pytest.raises(ConfigError):
        ring_matmul_3d(np.eye(4), np.eye(4), plan_alg_b(8, forced_s=1))


def test_bounds_three_d():
    r = bounds(16)
    assert r.mesh_size == 512 and r.edge == 8
    assert r.diameter_exponent == Fraction(3, 4) == r.speedup_exponent
    assert r.binding == "tie"
    assert r.optimal_alpha == Fraction(9, 4)
    assert r.ring_exponent == Fraction(2, 3)


def test_bounds_two_d_tie():
    r = bounds(16, dim=2)
    assert r.optimal_alpha == 2 and r.binding == "tie"
    assert r.diameter_time == 30 and r.speedup_time == 16


def test_bounds_binding_side():
    assert bounds(16, alpha=2).binding == "speedup"
    assert bounds(16, alpha="5/2").binding == "diameter"
    r = bounds(16, mesh_size=4096)
    assert r.binding == "diameter" and r.speedup_exponent == 0
