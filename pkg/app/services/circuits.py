"""
Program builder and the small reversible arithmetic toolkit the encoding,
set-generation and oracle programs are written with.

A builder either materializes the step list or only counts it. Counting
runs the same construction code and produces an opaque program whose cost
is exactly what the materialized program would report.
"""
from __future__ import annotations

from collections import Counter
from contextlib import contextmanager
from typing import Iterator, List, Optional, Sequence, Tuple, Union

from app.exceptions import MachineError, RadixMismatch, ShapeMismatch
from app.services.revcore import (
    Call,
    Cell,
    Control,
    Cost,
    Gate,
    Program,
    Semantics,
    Slot,
    Step,
    Swap,
    View,
    invert_step,
)

NOT = (1, 0)
PLUS1 = (1, 2, 0)
PLUS2 = (2, 0, 1)

LADDER = "_ladder"


def ones(cells: Sequence[Cell]) -> List[Control]:
    return [(c, 1) for c in cells]


def equals(cells: Sequence[Cell], value: int) -> List[Control]:
    """Controls that hold when the little-endian bits equal value"""
    if value >> len(cells):
        raise ShapeMismatch(f"{value} does not fit in {len(cells)} bits")
    return [(c, (value >> i) & 1) for i, c in enumerate(cells)]


class ProgramBuilder:
    def __init__(self, name: str, materialize: bool = True, tag: Optional[str] = None, level: int = 0):
        self.name = name
        self.materialize = materialize
        self.tag = tag
        self.level = level
        self.params: List[Slot] = []
        self.ancillas: List[Slot] = []
        self._blocks: List[List[Step]] = [[]]
        self._ladder = 0
        self._gates = 0
        self._inner_cells = 0
        self._inner_bits = 0
        self._calls: Counter = Counter()

    # Declarations

    def _slot(self, name: str) -> Slot:
        for slot in self.params + self.ancillas:
            if slot.name == name:
                return slot
        raise ShapeMismatch(f"'{self.name}' has no slot '{name}'")

    def param(self, name: str, width: int, radix: int = 2) -> Slot:
        slot = Slot(name, width, radix)
        self.params.append(slot)
        return slot

    def ancilla(self, name: str, width: int, radix: int = 2) -> Slot:
        slot = Slot(name, width, radix)
        self.ancillas.append(slot)
        return slot

    def cells(self, slot: Union[Slot, str], start: int = 0, width: Optional[int] = None) -> List[Cell]:
        slot = slot if isinstance(slot, Slot) else self._slot(slot)
        width = slot.width - start if width is None else width
        if start < 0 or start + width > slot.width:
            raise ShapeMismatch(f"cells [{start}, {start + width}) outside '{slot.name}'")
        return [Cell(slot.name, start + i) for i in range(width)]

    def view(self, slot: Union[Slot, str], start: int = 0, width: Optional[int] = None) -> View:
        slot = slot if isinstance(slot, Slot) else self._slot(slot)
        width = slot.width - start if width is None else width
        if start < 0 or start + width > slot.width:
            raise ShapeMismatch(f"view [{start}, {start + width}) outside '{slot.name}'")
        return View(slot.name, start, width)

    # Emission

    def _emit(self, step: Step) -> None:
        if self.materialize:
            self._blocks[-1].append(step)

    @contextmanager
    def inverted(self) -> Iterator[None]:
        """Steps emitted inside the block are appended reversed and inverted"""
        self._blocks.append([])
        try:
            yield
        finally:
            block = self._blocks.pop()
            self._blocks[-1].extend(invert_step(s) for s in reversed(block))

    def gate(self, target: Cell, perm: Tuple[int, ...], controls: Sequence[Control] = ()) -> None:
        if len(controls) > 2:
            raise MachineError("primitive gates take at most two controls; use mc_gate")
        self._gates += 1
        self._emit(Gate(target, tuple(perm), tuple(controls)))

    def swap(self, first: Cell, second: Cell, controls: Sequence[Control] = ()) -> None:
        if len(controls) > 2:
            raise MachineError("primitive swaps take at most two controls")
        self._gates += 1
        self._emit(Swap(first, second, tuple(controls)))

    def mc_gate(self, target: Cell, perm: Tuple[int, ...], controls: Sequence[Control]) -> None:
        """Permutation gate under any number of controls via an AND ladder"""
        controls = list(controls)
        if len(controls) <= 2:
            self.gate(target, perm, controls)
            return
        rungs = len(controls) - 2
        self._ladder = max(self._ladder, rungs)
        if not self.materialize:
            self._gates += 2 * rungs + 1
            return
        ladder = [Cell(LADDER, i) for i in range(rungs)]
        self.gate(ladder[0], NOT, controls[:2])
        for i in range(1, rungs):
            self.gate(ladder[i], NOT, [(ladder[i - 1], 1), controls[i + 1]])
        self.gate(target, perm, [(ladder[-1], 1), controls[-1]])
        for i in range(rungs - 1, 0, -1):
            self.gate(ladder[i], NOT, [(ladder[i - 1], 1), controls[i + 1]])
        self.gate(ladder[0], NOT, controls[:2])

    def call(self, program: Program, inverse: bool = False, **bindings: View) -> None:
        names = {s.name for s in program.params}
        if set(bindings) != names:
            raise ShapeMismatch(f"call to '{program.name}' binds {sorted(bindings)}, expects {sorted(names)}")
        for slot in program.params:
            view = bindings[slot.name]
            outer = self._slot(view.slot)
            if outer.radix != slot.radix:
                raise RadixMismatch(f"'{slot.name}' of '{program.name}' wants radix {slot.radix}")
            if view.width != slot.width:
                raise ShapeMismatch(
                    f"'{slot.name}' of '{program.name}' wants width {slot.width}, got {view.width}"
                )
        sub = program.cost
        self._gates += sub.gates
        self._inner_cells = max(self._inner_cells, sub.peak_cells)
        self._inner_bits = max(self._inner_bits, sub.peak_bits)
        self._calls.update(sub.calls)
        if program.tag:
            self._calls[(program.tag, program.level)] += 1
        self._emit(Call(program, tuple(sorted(bindings.items())), inverse))

    # Arithmetic on little-endian bit strings

    def xor_const(self, cells: Sequence[Cell], value: int, controls: Sequence[Control] = ()) -> None:
        for i, cell in enumerate(cells):
            if (value >> i) & 1:
                self.mc_gate(cell, NOT, controls)

    def xor_register(self, dst: Sequence[Cell], src: Sequence[Cell], controls: Sequence[Control] = ()) -> None:
        for d, s in zip(dst, src):
            self.mc_gate(d, NOT, [(s, 1), *controls])

    def flip_if_equal(self, target: Cell, cells: Sequence[Cell], value: int,
                      controls: Sequence[Control] = ()) -> None:
        self.mc_gate(target, NOT, [*equals(cells, value), *controls])

    def increment(self, cells: Sequence[Cell], controls: Sequence[Control] = ()) -> None:
        """cells += 1 mod 2^width"""
        for i in range(len(cells) - 1, -1, -1):
            self.mc_gate(cells[i], NOT, [*ones(cells[:i]), *controls])

    def add_const(self, cells: Sequence[Cell], value: int, controls: Sequence[Control] = ()) -> None:
        for j in range(len(cells)):
            if (value >> j) & 1:
                self.increment(cells[j:], controls)

    def sub_const(self, cells: Sequence[Cell], value: int, controls: Sequence[Control] = ()) -> None:
        with self.inverted():
            self.add_const(cells, value, controls)

    def add_register(self, dst: Sequence[Cell], src: Sequence[Cell], controls: Sequence[Control] = ()) -> None:
        """dst += src mod 2^len(dst)"""
        for j, bit in enumerate(src[:len(dst)]):
            self.increment(dst[j:], [(bit, 1), *controls])

    def sub_register(self, dst: Sequence[Cell], src: Sequence[Cell], controls: Sequence[Control] = ()) -> None:
        with self.inverted():
            self.add_register(dst, src, controls)

    # Result

    @property
    def gates(self) -> int:
        return self._gates

    def build(self, semantics: Optional[Semantics] = None) -> Program:
        if len(self._blocks) != 1:
            raise MachineError(f"unclosed inverted block in '{self.name}'")
        ancillas = list(self.ancillas)
        if self._ladder:
            ancillas.append(Slot(LADDER, self._ladder))
        if self.materialize:
            return Program(
                name=self.name,
                params=tuple(self.params),
                ancillas=tuple(ancillas),
                steps=tuple(self._blocks[0]),
                semantics=semantics,
                tag=self.tag,
                level=self.level,
            )
        declared = Cost(
            gates=self._gates,
            peak_cells=sum(s.width for s in ancillas) + self._inner_cells,
            peak_bits=sum(s.bits for s in ancillas) + self._inner_bits,
            calls=Counter(self._calls),
        )
        return Program(
            name=self.name,
            params=tuple(self.params),
            ancillas=tuple(ancillas),
            semantics=semantics,
            tag=self.tag,
            level=self.level,
            declared=declared,
        )
