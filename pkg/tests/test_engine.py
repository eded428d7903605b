import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshgrain.engine import (
    GridProgram,
    MeshConfig,
    ProcessorProgram,
    Region,
    StepLedger,
    build_mesh,
    check_disjoint,
    neighbour_count,
    route_block,
    route_formation,
    route_steps,
    route_streams,
    run_program,
)
from meshgrain.errors import (
    BandwidthViolation,
    BudgetViolation,
    ConfigError,
    NonHalting,
    StructureViolation,
)
from meshgrain.faults import run_fault
from meshgrain.programs import BroadcastProgram


def test_corner_cube_degrees():
    cfg = MeshConfig(3, 2)
    assert cfg.size == 8
    for p in np.ndindex(cfg.shape):
        assert neighbour_count(cfg, p) == 3


def test_square_interior_degree():
    cfg = MeshConfig(2, 4)
    assert cfg.size == 16
    assert neighbour_count(cfg, (1, 1)) == 4
    assert neighbour_count(cfg, (0, 0)) == 2


def test_diameter():
    assert MeshConfig(3, 8).size == 512
    assert MeshConfig(3, 8).diameter == 21


@pytest.mark.parametrize("kwargs", [dict(dim=4, edge=2), dict(dim=2, edge=0), dict(dim=2, edge=4, word_budget=3)])
def test_bad_config(kwargs):
    with pytest.raises(ConfigError):
        MeshConfig(**kwargs)


def test_fresh_mesh_holds_only_coordinates():
    mesh = build_mesh(MeshConfig(2, 3))
    assert mesh.regs == {}
    assert (mesh.words() == 2).all()
    assert mesh.t == 0 and mesh.ledger.total_steps == 0


def test_broadcast_from_corner():
    mesh = build_mesh(MeshConfig(2, 4))
    ledger = run_program(mesh, BroadcastProgram(4, 99))
    assert ledger.comm_steps == 6
    assert ledger.total_steps == 6
    assert (mesh.regs["V"][0] == 99).all()


def test_broadcast_halts_on_predicate():
    mesh = build_mesh(MeshConfig(2, 5))
    ledger = run_program(mesh, BroadcastProgram(5, 1), halt=lambda m: bool(m.regs["V"][1].all()))
    assert ledger.total_steps == 8


def test_budget_violation_names_processor_and_step():
    with pytest.raises(BudgetViolation) as err:
        run_fault("budget", edge=4, word_budget=8)
    assert err.value.processor == (0, 0)
    assert err.value.step == 7
    assert "processor=(0, 0)" in str(err.value)


def test_double_send_is_caught():
    with pytest.raises(BandwidthViolation) as err:
        run_fault("double-send")
    assert err.value.processor == (1, 1)
    assert err.value.step == 2


def test_send_off_the_edge():
    class OffEdge(GridProgram):
        n_steps = 1

        def step(self, t, coords, regs, inbox):
            r, c = np.broadcast_arrays(*coords)
            return [(0, 1, 1, r == 2)]

    mesh = build_mesh(MeshConfig(2, 3))
    with pytest.raises(BandwidthViolation):
        run_program(mesh, OffEdge(), steps=2)


def test_step_cap(monkeypatch):
    monkeypatch.setenv("MESHGRAIN_STEP_CAP", "5")

    class Forever(GridProgram):
        def step(self, t, coords, regs, inbox):
            return []

    mesh = build_mesh(MeshConfig(2, 2))
    with pytest.raises(NonHalting):
        run_program(mesh, Forever(), halt=lambda m: False)


def test_sends_arrive_next_step():
    seen = []

    class Probe(GridProgram):
        n_steps = 2

        def init(self, coords, regs):
            r, c = np.broadcast_arrays(*coords)
            return [(1, 1, 5, (r == 0) & (c == 0))]

        def step(self, t, coords, regs, inbox):
            words, mask = inbox.get((1, 1), (None, np.zeros((2, 2), bool)))
            seen.append((t, mask.copy()))
            return []

    run_program(build_mesh(MeshConfig(2, 2)), Probe())
    assert seen[0][1][0, 1] and seen[0][1].sum() == 1
    assert not seen[1][1].any()


def test_per_processor_program_matches_grid_program():
    class Relay(ProcessorProgram):
        def setup(self, proc):
            if proc.coords == (0, 0):
                proc.registers["V"] = 42
                proc.send((1, 1), 42)
                proc.send((0, 1), 42)

        def __call__(self, proc):
            if "V" in proc.registers:
                return
            for word in proc.inbox.values():
                proc.registers["V"] = word
                r, c = proc.coords
                if c < 3:
                    proc.send((1, 1), word)
                if r < 3:
                    proc.send((0, 1), word)
                break

    a = build_mesh(MeshConfig(2, 4))
    la = run_program(a, Relay(), steps=6)
    b = build_mesh(MeshConfig(2, 4))
    run_program(b, BroadcastProgram(4, 42))
    assert (a.regs["V"][0] == b.regs["V"][0]).all()
    assert la.total_steps == 6


def test_route_block_pipelined_lanes():
    mesh = build_mesh(MeshConfig(3, 16))
    src = Region((0, 0, 0), (4, 4, 1))
    ledger = route_block(mesh, src, src.translated((8, 0, 0)), np.arange(16))
    assert ledger.comm_steps == 11
    assert (mesh.regs["blk"][0][8:12, 0:4, 0].ravel() == np.arange(16)).all()


def test_route_single_word():
    mesh = build_mesh(MeshConfig(3, 8))
    src = Region((1, 1, 1), (1, 1, 1))
    assert route_block(mesh, src, src.translated((3, 2, 0)), [7]).comm_steps == 5


def test_route_zero_displacement():
    mesh = build_mesh(MeshConfig(3, 4))
    src = Region((0, 0, 0), (2, 2, 1))
    ledger = route_block(mesh, src, src, [1, 2, 3, 4])
    assert ledger.comm_steps == 0
    assert (mesh.regs["blk"][0][0:2, 0:2, 0].ravel() == [1, 2, 3, 4]).all()


def test_route_formula_matches_engine():
    rng = np.random.default_rng(11)
    for _ in range(20):
        edge = int(rng.integers(4, 17))
        extent = tuple(int(x) for x in rng.integers(1, 4, size=3))
        origin = tuple(int(rng.integers(0, edge - e + 1)) for e in extent)
        target = tuple(int(rng.integers(0, edge - e + 1)) for e in extent)
        disp = tuple(t - o for t, o in zip(target, origin))
        mesh = build_mesh(MeshConfig(3, edge))
        src = Region(origin, extent)
        payload = rng.integers(0, 100, size=src.size)
        ledger = route_block(mesh, src, src.translated(disp), payload)
        assert ledger.comm_steps == route_steps(extent, disp)
        assert (mesh.regs["blk"][0][src.translated(disp).slices()].ravel() == payload).all()


def test_formation_conflict_detected():
    mesh = build_mesh(MeshConfig(2, 6))
    a = Region((0, 0), (1, 1))
    # both words leave (0, 0) eastward in the same step
    moves = [(a, a.translated((0, 3)), [1]), (a, a.translated((0, 2)), [2])]
    with pytest.raises(BandwidthViolation):
        route_formation(mesh, moves)


def test_streams_on_different_axes_share_a_start():
    mesh = build_mesh(MeshConfig(2, 6))
    a = Region((0, 0), (2, 2))
    led = route_streams(
        mesh,
        [
            ([(a, a.translated((3, 0)), [1, 2, 3, 4])], "X", (0, 1)),
            ([(a, a.translated((0, 3)), [5, 6, 7, 8])], "Y", (1, 0)),
        ],
    )
    assert led.total_steps == 3
    assert mesh.regs["X"][0][3:5, 0:2].ravel().tolist() == [1, 2, 3, 4]
    assert mesh.regs["Y"][0][0:2, 3:5].ravel().tolist() == [5, 6, 7, 8]


def test_check_disjoint():
    check_disjoint([Region((0, 0, 0), (2, 2, 2)), Region((2, 0, 0), (2, 2, 2))])
    with pytest.raises(StructureViolation) as err:
        check_disjoint([Region((0, 0, 0), (3, 3, 3)), Region((2, 2, 2), (2, 2, 2))], "blocks")
    assert err.value.processor == (2, 2, 2)
    # interleaved strided grids are disjoint
    check_disjoint([Region((0, 0), (4, 4), (2, 2)), Region((1, 1), (4, 4), (2, 2))])


def test_region_validation():
    with pytest.raises(ConfigError):
        Region((0, 0), (0, 1))
    r = Region((1, 2), (3, 2), (2, 1))
    assert r.last == (5, 3)
    assert r.fits(6) and not r.fits(5)
    assert len(r.points()) == 6


def test_ledger_text_round_trip():
    led = StepLedger()
    led.charge("scatter", 5, 10, 7)
    led.charge("leaf", 3)
    led.notes["mode"] = "charged"
    led.notes["levels"] = 2
    back = StepLedger.from_text(led.to_text())
    assert back == led


def test_ledger_composition():
    a = StepLedger().charge("x", 4, 2, 5)
    b = StepLedger().charge("y", 6, 1, 3)
    both = StepLedger.concurrent([a, b], "pair")
    assert both.total_steps == 6 and both.words_moved == 3 and both.peak_words == 5
    seq = StepLedger().extend(a).extend(b)
    assert seq.total_steps == 10 and seq.per_phase == [("x", 4), ("y", 6)]
    assert seq.phase_steps("y") == 6


def test_replay_is_identical():
    def run():
        mesh = build_mesh(MeshConfig(2, 5))
        led = run_program(mesh, BroadcastProgram(5, 3))
        return led.to_text(), mesh.snapshot()

    (ta, sa), (tb, sb) = run(), run()
    assert ta == tb
    for name in sa:
        assert (sa[name][0] == sb[name][0]).all() and (sa[name][1] == sb[name][1]).all()


@settings(max_examples=40, deadline=None)
@given(
    st.lists(
        st.tuples(st.sampled_from(["route", "leaf", "mix.2"]), st.integers(0, 10**6)),
        max_size=8,
    ),
    st.integers(0, 100),
)
def test_ledger_round_trip_property(phases, peak):
    led = StepLedger()
    for label, steps in phases:
        led.charge(label, steps, steps // 2, peak)
    assert StepLedger.from_text(led.to_text()) == led
    assert led.total_steps == sum(s for _, s in phases)


@settings(max_examples=30, deadline=None)
@given(
    st.integers(1, 3),
    st.integers(1, 3),
    st.integers(-4, 4),
    st.integers(-4, 4),
)
def test_formation_moves_every_word(ex, ey, dx, dy):
    edge = 12
    src = Region((4, 4), (ex, ey))
    mesh = build_mesh(MeshConfig(2, edge))
    payload = np.arange(src.size) + 1
    led = route_formation(mesh, [(src, src.translated((dx, dy)), payload)], register="R")
    assert led.total_steps == abs(dx) + abs(dy)
    assert (mesh.regs["R"][0][src.translated((dx, dy)).slices()].ravel() == payload).all()
