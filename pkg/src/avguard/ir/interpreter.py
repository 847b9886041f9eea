"""Deterministic execution of IR handlers.

Handlers are compiled once per program into lists of small closures; the
interpreter then walks blocks, charging one unit of fuel per instruction
(terminators included).  Runtime faults never escape: they come back as an
:class:`AppFault` in the outcome and the handler's effects are discarded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .. import bus
from .program import (
    AppProgram,
    BinOp,
    Branch,
    Const,
    Halt,
    Jump,
    NetSend,
    Publish,
    ReadField,
    ReadGlobal,
    Store,
    TableLength,
    TableLookup,
    WriteGlobal,
)

DEFAULT_FUEL = 10_000


@dataclass(frozen=True)
class AppState:
    """Mutable-by-replacement global store of one app instance."""

    globals: Mapping[str, float | bool]

    @classmethod
    def initial(cls, p: AppProgram) -> "AppState":
        return cls(MappingProxyType(dict(p.globals)))

    def __eq__(self, other):
        return isinstance(other, AppState) and dict(self.globals) == dict(other.globals)

    def __hash__(self):
        return hash(tuple(sorted(self.globals.items())))


@dataclass(frozen=True)
class AppFault:
    kind: str  # division_by_zero | table_index | domain_error | type_error | undefined | fuel_exhausted
    handler: str
    block: str
    detail: str = ""


@dataclass(frozen=True)
class HandlerOutcome:
    state: AppState
    publishes: tuple[bus.BusMessage, ...] = ()
    netsends: tuple[bus.NetSendRecord, ...] = ()
    stores: tuple[bus.StorageRecord, ...] = ()
    fuel_exhausted: bool = False
    fault: AppFault | None = None
    steps: int = 0


class _TableIndexError(Exception):
    pass


class _BranchTypeError(Exception):
    pass


_BIN = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "pow": math.pow,
    "min": min,
    "max": max,
    "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b,
    "eq": lambda a, b: a == b,
    "and": lambda a, b: bool(a and b),
    "or": lambda a, b: bool(a or b),
}
_UN = {
    "sqrt": math.sqrt,
    "abs": abs,
    "sin": math.sin,
    "cos": math.cos,
    "neg": lambda a: -a,
    "not": lambda a: not a,
}


def _getter(o):
    if isinstance(o, str):
        return lambda env: env[o]
    value = float(o)
    return lambda env: value


class _Ctx:
    """Per-invocation scratch: globals copy, outputs, current message."""

    __slots__ = ("g", "msg", "pubs", "nets", "stores", "sender", "time")


def _compile_instruction(ins, p: AppProgram):
    # Each closure takes (env, ctx).
    if isinstance(ins, Const):
        dst, v = ins.dst, ins.value

        def f(env, ctx):
            env[dst] = v
    elif isinstance(ins, ReadField):
        dst, path = ins.dst, ins.path

        def f(env, ctx):
            env[dst] = ctx.msg.payload[path]
    elif isinstance(ins, ReadGlobal):
        dst, name = ins.dst, ins.name

        def f(env, ctx):
            env[dst] = ctx.g[name]
    elif isinstance(ins, WriteGlobal):
        name, get = ins.name, _getter(ins.src)

        def f(env, ctx):
            ctx.g[name] = get(env)
    elif isinstance(ins, BinOp):
        dst = ins.dst
        if ins.b is None:
            fn, ga = _UN[ins.op], _getter(ins.a)

            def f(env, ctx):
                env[dst] = fn(ga(env))
        else:
            fn, ga, gb = _BIN[ins.op], _getter(ins.a), _getter(ins.b)
            if isinstance(ins.a, str) and isinstance(ins.b, str):
                a, b = ins.a, ins.b

                def f(env, ctx):
                    env[dst] = fn(env[a], env[b])
            else:

                def f(env, ctx):
                    env[dst] = fn(ga(env), gb(env))
    elif isinstance(ins, TableLookup):
        dst, col = ins.dst, ins.column
        rows = p.tables[ins.table].rows if ins.table in p.tables else ()
        column = tuple(getattr(w, col) for w in rows)
        get = _getter(ins.index)
        n = len(column)

        def f(env, ctx):
            i = get(env)
            k = int(i)
            if k != i or not 0 <= k < n:
                raise _TableIndexError(f"index {i!r} outside [0, {n})")
            env[dst] = column[k]
    elif isinstance(ins, TableLength):
        dst = ins.dst
        n = float(len(p.tables[ins.table].rows)) if ins.table in p.tables else 0.0

        def f(env, ctx):
            env[dst] = n
    elif isinstance(ins, Publish):
        kind = ins.kind
        getters = [(k, _getter(v)) for k, v in ins.fields]

        def f(env, ctx):
            ctx.pubs.append(bus.from_payload(kind, {k: g(env) for k, g in getters}, ctx.sender))
    elif isinstance(ins, NetSend):
        host, getters = ins.host, [_getter(v) for v in ins.values]

        def f(env, ctx):
            ctx.nets.append(bus.NetSendRecord(host, tuple(g(env) for g in getters), ctx.sender, ctx.time))
    elif isinstance(ins, Store):
        key, getters = ins.key, [_getter(v) for v in ins.values]

        def f(env, ctx):
            ctx.stores.append(bus.StorageRecord(key, tuple(g(env) for g in getters), ctx.sender, ctx.time))
    else:
        raise TypeError(f"not a body instruction: {ins!r}")
    return f


def _compile_terminator(ins, index: dict[str, int]):
    if isinstance(ins, Halt):
        return lambda env: -1
    if isinstance(ins, Jump):
        t = index[ins.target]
        return lambda env: t
    if isinstance(ins, Branch):
        c, a, b = ins.cond, index[ins.then], index[ins.orelse]

        def term(env):
            v = env[c]
            if v is True:
                return a
            if v is False:
                return b
            raise _BranchTypeError(f"branch on non-boolean {v!r}")

        return term
    raise TypeError(f"not a terminator: {ins!r}")


class CompiledHandler:
    __slots__ = ("trigger", "entry", "blocks", "names")

    def __init__(self, handler, p: AppProgram):
        self.trigger = handler.trigger
        index = {b.id: i for i, b in enumerate(handler.blocks)}
        self.entry = index[handler.entry]
        self.names = [b.id for b in handler.blocks]
        self.blocks = [
            (
                [_compile_instruction(ins, p) for ins in b.body],
                _compile_terminator(b.terminator, index),
                len(b.instructions),
            )
            for b in handler.blocks
        ]


def compile_program(p: AppProgram) -> dict[str, CompiledHandler]:
    if p._compiled is None:
        p._compiled = {k: CompiledHandler(h, p) for k, h in p.handlers.items()}
    return p._compiled


def execute_handler(
    p: AppProgram,
    state: AppState,
    msg: bus.BusMessage,
    fuel: int = DEFAULT_FUEL,
    time: float = 0.0,
) -> HandlerOutcome:
    compiled = compile_program(p).get(msg.kind)
    if compiled is None:
        return HandlerOutcome(state)

    ctx = _Ctx()
    ctx.g = dict(state.globals)
    ctx.msg = msg
    ctx.pubs, ctx.nets, ctx.stores = [], [], []
    ctx.sender = p.app_id
    ctx.time = time
    env: dict = {}
    blocks = compiled.blocks
    b = compiled.entry
    steps = 0

    def fault(kind, detail):
        return HandlerOutcome(
            state,
            fault=AppFault(kind, compiled.trigger, compiled.names[b], detail),
            fuel_exhausted=kind == "fuel_exhausted",
            steps=steps,
        )

    try:
        while True:
            ops, term, n = blocks[b]
            if steps + n > fuel:
                # run exactly up to the budget, one instruction at a time
                for op in ops[: fuel - steps]:
                    op(env, ctx)
                    steps += 1
                steps = fuel
                return fault("fuel_exhausted", f"budget of {fuel} instructions spent")
            for op in ops:
                op(env, ctx)
            steps += n
            b = term(env)
            if b < 0:
                break
    except ZeroDivisionError as exc:
        return fault("division_by_zero", str(exc))
    except _TableIndexError as exc:
        return fault("table_index", str(exc))
    except _BranchTypeError as exc:
        return fault("type_error", str(exc))
    except (ValueError, OverflowError) as exc:
        return fault("domain_error", str(exc))
    except KeyError as exc:
        return fault("undefined", f"unbound name {exc}")
    except TypeError as exc:
        return fault("type_error", str(exc))

    return HandlerOutcome(
        AppState(MappingProxyType(ctx.g)),
        tuple(ctx.pubs),
        tuple(ctx.nets),
        tuple(ctx.stores),
        False,
        None,
        steps,
    )
