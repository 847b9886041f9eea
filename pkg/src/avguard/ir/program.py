"""Data model of the app intermediate representation.

A program is a set of message handlers, each a control-flow graph of basic
blocks.  Operands are either local variable names (``str``) or float
literals; booleans only arise from comparisons, logical ops, boolean message
fields and ``true``/``false`` constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

Operand = Union[str, float]
Literal = Union[float, bool]

BINARY_OPS = frozenset({"add", "sub", "mul", "div", "pow", "min", "max", "lt", "le", "eq", "and", "or"})
UNARY_OPS = frozenset({"sqrt", "abs", "sin", "cos", "neg", "not"})
COMPARISONS = frozenset({"lt", "le", "eq"})
LOGICAL = frozenset({"and", "or", "not"})

TABLE_COLUMNS = ("x", "y", "heading")


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    heading: float


@dataclass(frozen=True)
class Table:
    name: str
    rows: tuple[Waypoint, ...]
    source: str | None = None  # asset file name, None for inline tables


# ------------------------------------------------------------ instructions


@dataclass(frozen=True)
class Const:
    dst: str
    value: Literal


@dataclass(frozen=True)
class ReadField:
    dst: str
    path: str


@dataclass(frozen=True)
class ReadGlobal:
    dst: str
    name: str


@dataclass(frozen=True)
class WriteGlobal:
    name: str
    src: Operand


@dataclass(frozen=True)
class BinOp:
    dst: str
    op: str
    a: Operand
    b: Operand | None = None


@dataclass(frozen=True)
class TableLookup:
    dst: str
    table: str
    index: Operand
    column: str


@dataclass(frozen=True)
class TableLength:
    dst: str
    table: str


@dataclass(frozen=True)
class Publish:
    kind: str
    fields: tuple[tuple[str, Operand], ...]


@dataclass(frozen=True)
class NetSend:
    host: str
    values: tuple[Operand, ...]


@dataclass(frozen=True)
class Store:
    key: str
    values: tuple[Operand, ...]


@dataclass(frozen=True)
class Branch:
    cond: str
    then: str
    orelse: str


@dataclass(frozen=True)
class Jump:
    target: str


@dataclass(frozen=True)
class Halt:
    pass


Instruction = Union[
    Const, ReadField, ReadGlobal, WriteGlobal, BinOp, TableLookup, TableLength,
    Publish, NetSend, Store, Branch, Jump, Halt,
]
TERMINATORS = (Branch, Jump, Halt)


def is_terminator(ins) -> bool:
    return isinstance(ins, TERMINATORS)


def defined_var(ins) -> str | None:
    return getattr(ins, "dst", None)


def used_vars(ins) -> list[str]:
    """Local variables read by an instruction (literals excluded)."""
    if isinstance(ins, BinOp):
        ops = [ins.a] if ins.b is None else [ins.a, ins.b]
    elif isinstance(ins, WriteGlobal):
        ops = [ins.src]
    elif isinstance(ins, TableLookup):
        ops = [ins.index]
    elif isinstance(ins, Publish):
        ops = [v for _, v in ins.fields]
    elif isinstance(ins, (NetSend, Store)):
        ops = list(ins.values)
    elif isinstance(ins, Branch):
        ops = [ins.cond]
    else:
        ops = []
    return [o for o in ops if isinstance(o, str)]


def successors(ins) -> tuple[str, ...]:
    if isinstance(ins, Branch):
        return (ins.then, ins.orelse)
    if isinstance(ins, Jump):
        return (ins.target,)
    return ()


# -------------------------------------------------------------- structure


@dataclass(frozen=True)
class BasicBlock:
    id: str
    instructions: tuple

    @property
    def terminator(self):
        return self.instructions[-1] if self.instructions else None

    @property
    def body(self) -> tuple:
        return self.instructions[:-1]

    def successors(self) -> tuple[str, ...]:
        t = self.terminator
        return successors(t) if t is not None and is_terminator(t) else ()


@dataclass(frozen=True)
class Handler:
    trigger: str
    blocks: tuple[BasicBlock, ...]
    entry: str

    def block(self, block_id: str) -> BasicBlock:
        for b in self.blocks:
            if b.id == block_id:
                return b
        raise KeyError(block_id)

    @property
    def block_map(self) -> dict[str, BasicBlock]:
        return {b.id: b for b in self.blocks}

    def predecessors(self) -> dict[str, list[str]]:
        preds: dict[str, list[str]] = {b.id: [] for b in self.blocks}
        for b in self.blocks:
            for s in b.successors():
                if s in preds:
                    preds[s].append(b.id)
        return preds

    def reachable(self) -> list[str]:
        bm = self.block_map
        if self.entry not in bm:
            return []
        order, seen, stack = [], {self.entry}, [self.entry]
        while stack:
            bid = stack.pop()
            order.append(bid)
            for s in reversed(bm[bid].successors()):
                if s in bm and s not in seen:
                    seen.add(s)
                    stack.append(s)
        return order


@dataclass(eq=True)
class AppProgram:
    app_id: str
    handlers: dict[str, Handler]
    globals: dict[str, Literal] = field(default_factory=dict)
    tables: dict[str, Table] = field(default_factory=dict)
    _compiled: object = field(default=None, compare=False, repr=False)

    def all_instructions(self):
        """Yield ``(handler, block, index, instruction)`` over every instruction."""
        for kind, h in self.handlers.items():
            for b in h.blocks:
                for i, ins in enumerate(b.instructions):
                    yield h, b, i, ins

    def location(self, handler: Handler, block: BasicBlock, index: int | None = None) -> str:
        loc = f"{handler.trigger}/{block.id}"
        return loc if index is None else f"{loc}[{index}]"


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi
