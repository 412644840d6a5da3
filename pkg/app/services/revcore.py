"""
Reversible register machine

Programs are static step lists over named register slots (bits or trits).
A step is a permutation gate with at most two controls, a controlled swap,
or a call into another program with its parameters bound to views of the
caller's slots. Cost and peak ancilla width are properties of the program,
never of the data it runs on.

Programs that carry functional semantics can be run in fast mode: the
machine applies the semantics directly and charges the static cost, so
counters agree with a gate-by-gate run.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from app.config import settings
from app.exceptions import (
    AncillaNotClean,
    DeadRegister,
    MachineError,
    OracleContractViolation,
    RadixMismatch,
    ShapeMismatch,
)
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

CALCULATE_TAG = "calculate"


def cell_bits(radix: int) -> int:
    """Bits needed to hold one cell of the given radix (trit -> 2)"""
    return max(1, (radix - 1).bit_length())


@dataclass(frozen=True)
class Slot:
    name: str
    width: int
    radix: int = 2

    @property
    def bits(self) -> int:
        return self.width * cell_bits(self.radix)


@dataclass(frozen=True)
class Cell:
    slot: str
    index: int


Control = Tuple[Cell, int]


@dataclass(frozen=True)
class Gate:
    target: Cell
    perm: Tuple[int, ...]
    controls: Tuple[Control, ...] = ()

    def inverted(self) -> "Gate":
        inv = [0] * len(self.perm)
        for src, dst in enumerate(self.perm):
            inv[dst] = src
        return Gate(self.target, tuple(inv), self.controls)


@dataclass(frozen=True)
class Swap:
    first: Cell
    second: Cell
    controls: Tuple[Control, ...] = ()


@dataclass(frozen=True)
class View:
    """Contiguous window of a caller slot bound to a callee parameter"""
    slot: str
    start: int
    width: int


@dataclass(frozen=True)
class Call:
    program: "Program"
    bindings: Tuple[Tuple[str, View], ...]
    inverse: bool = False


Step = Union[Gate, Swap, Call]
Values = Dict[str, List[int]]


@dataclass(frozen=True)
class Semantics:
    """Functional action of a program on its parameter values (mutated in place)"""
    forward: Callable[[Values], None]
    backward: Callable[[Values], None]

    def inverted(self) -> "Semantics":
        return Semantics(self.backward, self.forward)


@dataclass
class Cost:
    gates: int = 0
    peak_cells: int = 0
    peak_bits: int = 0
    calls: Counter = field(default_factory=Counter)

    def calls_tagged(self, tag: str) -> int:
        return sum(n for (t, _), n in self.calls.items() if t == tag)


def invert_step(step: Step) -> Step:
    if isinstance(step, Gate):
        return step.inverted()
    if isinstance(step, Swap):
        return step
    return Call(step.program, step.bindings, not step.inverse)


@dataclass(eq=False)
class Program:
    name: str
    params: Tuple[Slot, ...]
    ancillas: Tuple[Slot, ...] = ()
    steps: Tuple[Step, ...] = ()
    semantics: Optional[Semantics] = None
    tag: Optional[str] = None
    level: int = 0
    inverted: bool = False
    declared: Optional[Cost] = None

    def __post_init__(self):
        names = [s.name for s in self.params + self.ancillas]
        if len(names) != len(set(names)):
            raise MachineError(f"duplicate slot names in program '{self.name}'")

    @property
    def opaque(self) -> bool:
        return self.declared is not None

    @cached_property
    def slots(self) -> Dict[str, Slot]:
        return {s.name: s for s in self.params + self.ancillas}

    def param(self, name: str) -> Slot:
        for slot in self.params:
            if slot.name == name:
                return slot
        raise ShapeMismatch(f"program '{self.name}' has no parameter '{name}'")

    @cached_property
    def cost(self) -> Cost:
        if self.declared is not None:
            return self.declared
        gates = 0
        inner_cells = 0
        inner_bits = 0
        calls: Counter = Counter()
        for step in self.steps:
            if isinstance(step, Call):
                callee = step.program
                sub = callee.cost
                gates += sub.gates
                inner_cells = max(inner_cells, sub.peak_cells)
                inner_bits = max(inner_bits, sub.peak_bits)
                calls.update(sub.calls)
                if callee.tag:
                    calls[(callee.tag, callee.level)] += 1
            else:
                gates += 1
        return Cost(
            gates=gates,
            peak_cells=sum(s.width for s in self.ancillas) + inner_cells,
            peak_bits=sum(s.bits for s in self.ancillas) + inner_bits,
            calls=calls,
        )

    @property
    def gate_cost(self) -> int:
        return self.cost.gates

    @property
    def peak_ancilla(self) -> int:
        return self.cost.peak_cells

    def inverse(self) -> "Program":
        cached = self.__dict__.get("_inverse")
        if cached is None:
            cached = Program(
                name=self.name,
                params=self.params,
                ancillas=self.ancillas,
                steps=tuple(invert_step(s) for s in reversed(self.steps)),
                semantics=self.semantics.inverted() if self.semantics else None,
                tag=self.tag,
                level=self.level,
                inverted=not self.inverted,
                declared=self.declared,
            )
            cached.__dict__["_inverse"] = self
            self.__dict__["_inverse"] = cached
        return cached


class Register:
    """Storage allocated by a machine; RegisterRef in the public API"""
    __slots__ = ("name", "values", "radix", "alive")

    def __init__(self, name: str, width: int, radix: int):
        self.name = name
        self.values = [0] * width
        self.radix = radix
        self.alive = True

    @property
    def width(self) -> int:
        return len(self.values)

    @property
    def bits(self) -> int:
        return self.width * cell_bits(self.radix)

    def view(self, start: int, width: int) -> "RegisterView":
        if start < 0 or start + width > self.width:
            raise ShapeMismatch(f"view [{start}, {start + width}) outside '{self.name}'")
        return RegisterView(self, start, width)

    def __repr__(self) -> str:
        return f"Register({self.name!r}, width={self.width}, radix={self.radix})"


RegisterRef = Register


@dataclass(frozen=True)
class RegisterView:
    register: Register
    start: int
    width: int


Binding = Union[Register, RegisterView]
_Env = Dict[str, Tuple[List[int], int]]


class Machine:
    """
    Executes programs over allocated registers and keeps the counters the
    analyses read: gates applied, live and peak allocated width, Calculate
    invocations and per (tag, level) call frames.
    """

    def __init__(self, fast: bool = False, debug: Optional[bool] = None):
        self.fast = fast
        self.debug = settings.DEBUG if debug is None else debug
        self.gate_count = 0
        self.calculate_calls = 0
        self.frames: Counter = Counter()
        self.live_cells = 0
        self.live_bits = 0
        self.peak_cells = 0
        self.peak_bits = 0
        self._serial = 0

    # Allocation

    def _touch(self, cells: int, bits: int) -> None:
        if cells > self.peak_cells:
            self.peak_cells = cells
        if bits > self.peak_bits:
            self.peak_bits = bits

    def alloc_ancilla(self, width: int, radix: int = 2, name: Optional[str] = None) -> Register:
        if width < 1 or radix not in (2, 3):
            raise ShapeMismatch(f"cannot allocate width={width} radix={radix}")
        self._serial += 1
        reg = Register(name or f"r{self._serial}", width, radix)
        self.live_cells += reg.width
        self.live_bits += reg.bits
        self._touch(self.live_cells, self.live_bits)
        return reg

    def free_ancilla(self, ref: Register, owner: str = "machine") -> None:
        if not ref.alive:
            raise DeadRegister(f"register '{ref.name}' already freed")
        if any(ref.values):
            raise AncillaNotClean(owner, ref.name)
        ref.alive = False
        self.live_cells -= ref.width
        self.live_bits -= ref.bits

    # Register access

    def write(self, ref: Binding, values: Sequence[int]) -> None:
        reg, start, width = self._window(ref)
        if len(values) != width:
            raise ShapeMismatch(f"expected {width} values, got {len(values)}")
        for v in values:
            if not 0 <= v < reg.radix:
                raise RadixMismatch(f"value {v} outside radix {reg.radix}")
        reg.values[start:start + width] = list(values)

    def read(self, ref: Binding) -> List[int]:
        reg, start, width = self._window(ref)
        return reg.values[start:start + width]

    def write_int(self, ref: Binding, value: int) -> None:
        _, _, width = self._window(ref)
        if value < 0 or value >> width:
            raise ShapeMismatch(f"{value} does not fit in {width} bits")
        self.write(ref, [(value >> i) & 1 for i in range(width)])

    def read_int(self, ref: Binding) -> int:
        return sum(bit << i for i, bit in enumerate(self.read(ref)))

    @staticmethod
    def _window(ref: Binding) -> Tuple[Register, int, int]:
        if isinstance(ref, RegisterView):
            reg, start, width = ref.register, ref.start, ref.width
        else:
            reg, start, width = ref, 0, ref.width
        if not reg.alive:
            raise DeadRegister(f"register '{reg.name}' is freed")
        return reg, start, width

    # Execution

    def run(self, program: Program, bindings: Mapping[str, Binding]) -> None:
        env: _Env = {}
        if set(bindings) != {s.name for s in program.params}:
            raise ShapeMismatch(
                f"'{program.name}' expects {[s.name for s in program.params]}, got {sorted(bindings)}"
            )
        for slot in program.params:
            reg, start, width = self._window(bindings[slot.name])
            if reg.radix != slot.radix:
                raise RadixMismatch(f"'{slot.name}' wants radix {slot.radix}, got {reg.radix}")
            if width != slot.width:
                raise ShapeMismatch(f"'{slot.name}' wants width {slot.width}, got {width}")
            env[slot.name] = (reg.values, start)
        self._execute(program, env)

    def inverse(self, program: Program) -> Program:
        return program.inverse()

    def _count_frame(self, program: Program) -> None:
        if program.tag:
            self.frames[(program.tag, program.level)] += 1
            if program.tag == CALCULATE_TAG:
                self.calculate_calls += 1

    def _execute(self, program: Program, env: _Env) -> None:
        self._count_frame(program)
        if program.opaque and program.semantics is None:
            raise MachineError(f"'{program.name}' was only counted and cannot run")
        if program.semantics is not None and (self.fast or program.opaque):
            self._apply_semantics(program, env)
            return

        local_regs = []
        if program.ancillas:
            env = dict(env)
            for slot in program.ancillas:
                reg = self.alloc_ancilla(slot.width, slot.radix, f"{program.name}.{slot.name}")
                local_regs.append(reg)
                env[slot.name] = (reg.values, 0)

        for step in program.steps:
            kind = type(step)
            if kind is Gate:
                if self._controls_hold(step.controls, env):
                    buf, off = env[step.target.slot]
                    i = off + step.target.index
                    buf[i] = step.perm[buf[i]]
                self.gate_count += 1
            elif kind is Swap:
                if self._controls_hold(step.controls, env):
                    b1, o1 = env[step.first.slot]
                    b2, o2 = env[step.second.slot]
                    i, j = o1 + step.first.index, o2 + step.second.index
                    b1[i], b2[j] = b2[j], b1[i]
                self.gate_count += 1
            else:
                sub_env = {}
                for name, view in step.bindings:
                    buf, off = env[view.slot]
                    sub_env[name] = (buf, off + view.start)
                callee = step.program.inverse() if step.inverse else step.program
                self._execute(callee, sub_env)

        for reg in local_regs:
            if any(reg.values):
                if self.debug and program.tag == CALCULATE_TAG:
                    raise OracleContractViolation(program.name, reg.name)
                raise AncillaNotClean(program.name, reg.name)
            self.free_ancilla(reg, program.name)

    @staticmethod
    def _controls_hold(controls: Tuple[Control, ...], env: _Env) -> bool:
        for cell, value in controls:
            buf, off = env[cell.slot]
            if buf[off + cell.index] != value:
                return False
        return True

    def _apply_semantics(self, program: Program, env: _Env) -> None:
        values: Values = {}
        for slot in program.params:
            buf, off = env[slot.name]
            values[slot.name] = buf[off:off + slot.width]
        program.semantics.forward(values)
        for slot in program.params:
            new = values[slot.name]
            if len(new) != slot.width:
                raise ShapeMismatch(f"semantics of '{program.name}' resized '{slot.name}'")
            if self.debug and any(not 0 <= v < slot.radix for v in new):
                raise RadixMismatch(f"semantics of '{program.name}' left '{slot.name}' out of radix")
            buf, off = env[slot.name]
            buf[off:off + slot.width] = new

        cost = program.cost
        self.gate_count += cost.gates
        self._touch(self.live_cells + cost.peak_cells, self.live_bits + cost.peak_bits)
        for (tag, level), n in cost.calls.items():
            self.frames[(tag, level)] += n
            if tag == CALCULATE_TAG:
                self.calculate_calls += n
