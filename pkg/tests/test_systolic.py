import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshgrain.algebra import BOOLOR, MAXMIN, MINPLUS, PLUSMUL, identity_matrix, random_matrix, serial_matmul
from meshgrain.engine import MeshConfig, build_mesh, run_program
from meshgrain.errors import BudgetViolation, ConfigError
from meshgrain.programs import BroadcastProgram, WavefrontProgram
from meshgrain.systolic import (
    StackedLayout,
    SystolicProgram,
    accordion,
    arrival_round,
    default_cube_edge,
    simulate_2d_on_3d,
    stacked_systolic_ledger,
    systolic_matmul_2d,
    systolic_steps,
    torus_fold,
)

SPECS = [PLUSMUL, MINPLUS, MAXMIN, BOOLOR]


def test_arrival_times_at_one_processor():
    assert [arrival_round(1, 2, k, 4) for k in range(4)] == [3, 0, 1, 2]


def test_every_slot_gets_one_pair():
    n = 8
    for a in range(n):
        for b in range(n):
            assert sorted(arrival_round(a, b, k, n) for k in range(n)) == list(range(n))


def test_fold_is_dilation_two():
    for n in (2, 3, 8, 9, 16):
        logical, physical = torus_fold(n)
        assert sorted(logical) == list(range(n))
        for pos in range(n):
            hop = abs(int(physical[(pos + 1) % n]) - int(physical[pos]))
            assert hop <= 2


def test_operands_seen_in_arrival_order():
    n = 4
    A = np.arange(n * n).reshape(n, n)
    trace = []
    systolic_matmul_2d(PLUSMUL, A, np.zeros((n, n)), trace=trace)
    logical, physical = torus_fold(n)
    p, q = int(physical[1]), int(physical[2])
    seen = [int(trace[r][p, q]) % n for r in range(n)]
    # ring node (1, 2) sees A(1, k) in round (1 + 2 + k) mod 4
    assert [arrival_round(1, 2, k, n) for k in seen] == list(range(n))


def test_identity_times_a():
    rng = np.random.default_rng(0)
    A = random_matrix(PLUSMUL, 4, rng)
    C, _ = systolic_matmul_2d(PLUSMUL, identity_matrix(PLUSMUL, 4), A)
    assert (C == A).all()


def test_minplus_eight():
    rng = np.random.default_rng(1)
    A, B = random_matrix(MINPLUS, 8, rng), random_matrix(MINPLUS, 8, rng)
    C, _ = systolic_matmul_2d(MINPLUS, A, B)
    assert (C == serial_matmul(MINPLUS, A, B)).all()


@pytest.mark.parametrize("semiring", SPECS, ids=lambda s: s.name)
def test_batched_oracle(semiring):
    rng = np.random.default_rng(2)
    for n in (1, 3, 5, 6):
        A = np.stack([random_matrix(semiring, n, rng) for _ in range(10)])
        B = np.stack([random_matrix(semiring, n, rng) for _ in range(10)])
        C, _ = systolic_matmul_2d(semiring, A, B)
        for q in range(10):
            assert (C[q] == serial_matmul(semiring, A[q], B[q])).all()


def test_witness_is_smallest_optimal_k():
    rng = np.random.default_rng(3)
    A, B = random_matrix(MINPLUS, 8, rng, high=4), random_matrix(MINPLUS, 8, rng, high=4)
    C, K, _ = systolic_matmul_2d(MINPLUS, A, B, witness=True)
    terms = MINPLUS.mul(A[:, :, None], B[None, :, :])
    best = terms.min(axis=1)
    assert (C == best).all()
    assert (K == np.argmax(terms == best[:, None, :], axis=1)).all()


def test_step_counts_are_linear():
    counts = {n: systolic_steps(n) for n in (2, 4, 8, 16, 32, 64)}
    assert counts == {2: 2, 4: 9, 8: 21, 16: 45, 32: 93, 64: 189}
    for n, t in counts.items():
        assert t <= 8 * n


def test_ledger_matches_schedule():
    rng = np.random.default_rng(4)
    _, led = systolic_matmul_2d(PLUSMUL, random_matrix(PLUSMUL, 8, rng), random_matrix(PLUSMUL, 8, rng))
    assert led.total_steps == 21
    assert led.per_phase[0][0] == "skew"
    assert sum(s for _, s in led.per_phase) == 21


def test_bad_operands():
    with pytest.raises(ConfigError):
        SystolicProgram(PLUSMUL, np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(ConfigError):
        SystolicProgram(PLUSMUL, np.zeros((2, 2)), np.zeros((2, 2)), witness=True)


def test_small_budget_is_enforced():
    with pytest.raises(BudgetViolation):
        systolic_matmul_2d(PLUSMUL, np.ones((4, 4)), np.ones((4, 4)), word_budget=4)


def test_layout_for_sixty_four():
    layout = StackedLayout(8)
    assert layout.cube_edge == 4
    assert layout.tiles == 2 and layout.layers == 4
    assert layout.cube_size == 64
    assert sorted(layout.assignment.values()) == [0, 1, 2, 3]


def test_default_cube_edge():
    for e in (1, 2, 4, 8, 16, 64, 100):
        c = default_cube_edge(e)
        assert (-(-e // c)) ** 2 <= c
        assert c == 1 or (-(-e // (c - 1))) ** 2 > c - 1


def test_accordion_mirrors_neighbours():
    c = 4
    u = np.arange(16)
    folded = accordion(u, c)
    assert folded.tolist() == [0, 1, 2, 3, 3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]


def _direct(program, edge):
    mesh = build_mesh(MeshConfig(2, edge))
    run_program(mesh, program)
    return mesh.regs


def _same_state(a, b):
    assert set(a) == set(b)
    for name in a:
        assert (a[name][1] == b[name][1]).all()
        assert (a[name][0][a[name][1]] == b[name][0][b[name][1]]).all()


def test_simulated_broadcast():
    for edge in (8, 16):
        regs, _, info = simulate_2d_on_3d(BroadcastProgram(edge, 5), edge * edge)
        _same_state(regs, _direct(BroadcastProgram(edge, 5), edge))
        assert info["max_cells_per_processor"] <= 9


def test_simulated_wavefront():
    rng = np.random.default_rng(5)
    open_cells = rng.random((16, 16)) < 0.7
    open_cells[0, 0] = True
    program = WavefrontProgram(open_cells, (0, 0), n_steps=60)
    regs, _, _ = simulate_2d_on_3d(program, 256)
    _same_state(regs, _direct(WavefrontProgram(open_cells, (0, 0), n_steps=60), 16))


def test_simulated_systolic_sixteen():
    rng = np.random.default_rng(6)
    A, B = random_matrix(MINPLUS, 16, rng), random_matrix(MINPLUS, 16, rng)
    regs, ledger, info = simulate_2d_on_3d(SystolicProgram(MINPLUS, A, B, witness=True), 256)
    C, K, direct = systolic_matmul_2d(MINPLUS, A, B, witness=True)
    assert (regs["C"][0] == C).all() and (regs["K"][0] == K).all()
    assert info["steps2d"] == direct.total_steps
    assert ledger.total_steps == stacked_systolic_ledger(16, witness=True).total_steps


def test_stacked_ledger_values():
    assert stacked_systolic_ledger(8).total_steps == 192
    assert stacked_systolic_ledger(64).total_steps == 1645


def test_amortized_constant():
    small = stacked_systolic_ledger(8).total_steps / systolic_steps(8)
    large = stacked_systolic_ledger(64).total_steps / systolic_steps(64)
    assert abs(large / small - 1) <= 0.25


def test_simulated_budget():
    with pytest.raises(BudgetViolation):
        simulate_2d_on_3d(BroadcastProgram(8, 1), 64, word_budget=3)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(SPECS), st.integers(1, 9), st.integers(0, 10**6))
def test_systolic_property(semiring, n, seed):
    rng = np.random.default_rng(seed)
    A, B = random_matrix(semiring, n, rng), random_matrix(semiring, n, rng)
    C, led = systolic_matmul_2d(semiring, A, B)
    assert (C == serial_matmul(semiring, A, B)).all()
    assert led.total_steps == systolic_steps(n)
