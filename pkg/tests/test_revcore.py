import pytest

from app.exceptions import AncillaNotClean, DeadRegister, RadixMismatch, ShapeMismatch
from app.services.circuits import NOT, ProgramBuilder
from app.services.encoding import contains_prog, encode_basic
from app.services.revcore import CALCULATE_TAG, Machine, Slot


def _increment(width: int = 3):
    b = ProgramBuilder("inc")
    v = b.param("v", width)
    b.increment(b.cells(v))
    return b.build()


def test_slot_bits_count_two_per_trit():
    assert Slot("t", 3, 3).bits == 6
    assert Slot("b", 5).bits == 5


def test_alloc_and_free_track_live_and_peak_width():
    machine = Machine()
    a = machine.alloc_ancilla(4)
    b = machine.alloc_ancilla(2, radix=3)
    assert machine.live_cells == 6
    assert machine.live_bits == 8
    machine.free_ancilla(b)
    machine.free_ancilla(a)
    assert machine.live_cells == 0
    assert machine.peak_cells == 6


def test_free_requires_zeroed_register():
    machine = Machine()
    reg = machine.alloc_ancilla(2)
    machine.write(reg, [0, 1])
    with pytest.raises(AncillaNotClean):
        machine.free_ancilla(reg)


@pytest.mark.parametrize("width, radix", [(0, 2), (-1, 2), (2, 1), (2, 4)])
def test_alloc_rejects_bad_shapes(width, radix):
    with pytest.raises(ShapeMismatch):
        Machine().alloc_ancilla(width, radix)


def test_double_free_and_dead_access():
    machine = Machine()
    reg = machine.alloc_ancilla(1)
    machine.free_ancilla(reg)
    with pytest.raises(DeadRegister):
        machine.free_ancilla(reg)
    with pytest.raises(DeadRegister):
        machine.read(reg)


def test_write_checks_radix_and_shape():
    machine = Machine()
    reg = machine.alloc_ancilla(2)
    with pytest.raises(RadixMismatch):
        machine.write(reg, [0, 2])
    with pytest.raises(ShapeMismatch):
        machine.write(reg, [0])
    with pytest.raises(ShapeMismatch):
        machine.write_int(reg, 4)


def test_increment_and_its_inverse():
    prog = _increment()
    machine = Machine()
    reg = machine.alloc_ancilla(3)
    machine.write_int(reg, 5)
    machine.run(prog, {"v": reg})
    assert machine.read_int(reg) == 6
    machine.write_int(reg, 7)
    machine.run(prog, {"v": reg})
    assert machine.read_int(reg) == 0
    machine.run(prog.inverse(), {"v": reg})
    assert machine.read_int(reg) == 7
    assert prog.inverse().inverse() is prog


def test_multi_controlled_gate_returns_ladder_clean():
    b = ProgramBuilder("and4")
    c = b.cells(b.param("c", 4))
    b.mc_gate(c[3], NOT, [(c[0], 1), (c[1], 1), (c[2], 1)])
    prog = b.build()
    machine = Machine()
    reg = machine.alloc_ancilla(4)
    machine.write(reg, [1, 1, 1, 0])
    machine.run(prog, {"c": reg})
    assert machine.read(reg) == [1, 1, 1, 1]
    machine.write(reg, [1, 0, 1, 0])
    machine.run(prog, {"c": reg})
    assert machine.read(reg) == [1, 0, 1, 0]
    assert machine.live_cells == 4


def test_dirty_ancilla_is_reported():
    b = ProgramBuilder("leaky")
    b.param("x", 1)
    t = b.cells(b.ancilla("t", 1))
    b.gate(t[0], NOT)
    prog = b.build()
    machine = Machine()
    reg = machine.alloc_ancilla(1)
    with pytest.raises(AncillaNotClean):
        machine.run(prog, {"x": reg})


def test_binding_must_match_parameters():
    prog = _increment()
    machine = Machine()
    with pytest.raises(ShapeMismatch):
        machine.run(prog, {"v": machine.alloc_ancilla(2)})
    with pytest.raises(ShapeMismatch):
        machine.run(prog, {"w": machine.alloc_ancilla(3)})


def test_tagged_calls_are_counted_statically_and_at_run_time():
    leaf = ProgramBuilder("leaf", tag=CALCULATE_TAG)
    x = leaf.param("x", 1)
    leaf.gate(leaf.cells(x)[0], NOT)
    leaf_prog = leaf.build()

    outer = ProgramBuilder("outer")
    y = outer.param("y", 1)
    outer.call(leaf_prog, x=outer.view(y))
    outer.call(leaf_prog, inverse=True, x=outer.view(y))
    prog = outer.build()
    assert prog.cost.calls_tagged(CALCULATE_TAG) == 2

    machine = Machine()
    reg = machine.alloc_ancilla(1)
    machine.run(prog, {"y": reg})
    assert machine.calculate_calls == 2
    assert machine.read(reg) == [0]


def test_fast_mode_charges_the_gate_level_cost():
    N, S, x = 6, [2, 5], 5
    prog = contains_prog(N, 2, materialize=True)
    counts = []
    for fast in (False, True):
        machine = Machine(fast=fast)
        enc = machine.alloc_ancilla(len(encode_basic(N, S).cells), 3)
        xr = machine.alloc_ancilla(3)
        out = machine.alloc_ancilla(1)
        machine.write(enc, list(encode_basic(N, S).cells))
        machine.write_int(xr, x)
        machine.run(prog, {"enc": enc, "x": xr, "out": out})
        assert machine.read(out) == [1]
        counts.append(machine.gate_count)
    assert counts[0] == counts[1] == prog.gate_cost
