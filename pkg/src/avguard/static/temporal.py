"""Temporal vehicle rules as finite automata, checked on CFG x automaton.

Rule files are plain text::

    rule park_before_engine_off
    state running
    state parked
    state violated bad
    start running
    on running publish:gear_cmd.gear=park -> parked
    on running publish:engine_cmd.on=false -> violated

Events are ``publish:<kind>[.<field><op><const>]`` (fired by a publish
instruction) and ``observe:<kind>.<field><op><const>`` (fired when a handler
for ``<kind>`` is entered with a matching message).  ``op`` is one of
``= != < <= > >=``.  For a concrete event the first matching transition out
of the current state wins; unlisted events self-loop.
"""

from __future__ import annotations

import heapq
import itertools
import math
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path

from .. import bus
from ..errors import AVGuardError
from ..findings import REJECT, Finding
from ..ir.program import (
    AppProgram,
    BinOp,
    Branch,
    Const,
    Halt,
    Handler,
    Jump,
    Publish,
    ReadField,
    ReadGlobal,
    TableLength,
    TableLookup,
    WriteGlobal,
    defined_var,
)
from ..ir.syntax import parse_literal

_OPS = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}
_EVENT = re.compile(r"(publish|observe):([a-z_]+)(?:\.([a-z_.]+?)(!=|<=|>=|=|<|>)(\S+))?\Z")

# finite domains of enum-valued fields; values here are tracked exactly
ENUM_DOMAINS = {
    ("traffic_signal", "state"): tuple(sorted(bus.SIGNALS.values())),
    ("vehicle_report", "gear"): tuple(sorted(bus.GEARS.values())),
    ("vehicle_report", "engine_on"): (False, True),
    ("gear_cmd", "gear"): tuple(sorted(bus.GEARS.values())),
    ("engine_cmd", "on"): (False, True),
}


class RuleError(AVGuardError):
    pass


@dataclass(frozen=True)
class Event:
    mode: str  # publish | observe
    kind: str
    field: str | None = None
    op: str | None = None
    const: float | bool | None = None
    label: str = ""

    def matches(self, values: dict) -> bool:
        if self.field is None:
            return True
        v = values.get(self.field)
        if v is None:
            return False
        try:
            return bool(_OPS[self.op](v, self.const))
        except TypeError:
            return False


@dataclass(frozen=True)
class Transition:
    src: str
    event: Event
    dst: str


@dataclass(frozen=True)
class RuleAutomaton:
    rule_id: str
    states: tuple[str, ...]
    start: str
    transitions: tuple[Transition, ...]
    bad: frozenset[str]
    severity: str = REJECT

    def step(self, q: str, mode: str, kind: str, values: dict) -> tuple[str, Transition | None]:
        for t in self.transitions:
            if t.src == q and t.event.mode == mode and t.event.kind == kind and t.event.matches(values):
                return t.dst, t
        return q, None

    def fields_of(self, mode: str, kind: str) -> list[str]:
        out = []
        for t in self.transitions:
            e = t.event
            if e.mode == mode and e.kind == kind and e.field and e.field not in out:
                out.append(e.field)
        return out

    def constants_of(self, mode: str, kind: str, fld: str) -> list:
        return [t.event.const for t in self.transitions
                if t.event.mode == mode and t.event.kind == kind and t.event.field == fld]

    def mentions(self, mode: str, kind: str) -> bool:
        return any(t.event.mode == mode and t.event.kind == kind for t in self.transitions)


def parse_event(text: str, line: int = 0) -> Event:
    m = _EVENT.match(text)
    if not m:
        raise RuleError(f"line {line}: bad event {text!r}")
    mode, kind, fld, op, const = m.groups()
    if kind not in bus.MESSAGE_FIELDS:
        raise RuleError(f"line {line}: unknown message kind {kind!r}")
    if mode == "publish" and not bus.is_command(kind):
        raise RuleError(f"line {line}: {kind} is not a command")
    if mode == "observe" and kind not in bus.SENSOR_KINDS:
        raise RuleError(f"line {line}: {kind} is not a sensor message")
    if mode == "observe" and fld is None:
        raise RuleError(f"line {line}: observe events need a field predicate")
    value = None
    if fld is not None:
        if fld not in bus.MESSAGE_FIELDS[kind]:
            raise RuleError(f"line {line}: {kind} has no field {fld!r}")
        value = parse_literal(const, line)
    return Event(mode, kind, fld, op, value, text)


def parse_rule(text: str, default_id: str | None = None) -> RuleAutomaton:
    rule_id = None
    states: list[str] = []
    bad: set[str] = set()
    start = None
    transitions = []
    severity = REJECT
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = raw.split("#", 1)[0].split()
        if not toks:
            continue
        head = toks[0]
        if head == "rule" and len(toks) == 2:
            rule_id = toks[1]
        elif head == "severity" and len(toks) == 2 and toks[1] in ("reject", "warn"):
            severity = toks[1]
        elif head == "state" and len(toks) in (2, 3):
            if toks[1] in states:
                raise RuleError(f"line {lineno}: duplicate state {toks[1]!r}")
            states.append(toks[1])
            if len(toks) == 3:
                if toks[2] != "bad":
                    raise RuleError(f"line {lineno}: expected 'bad', got {toks[2]!r}")
                bad.add(toks[1])
        elif head == "start" and len(toks) == 2:
            start = toks[1]
        elif head == "on" and len(toks) == 5 and toks[3] == "->":
            transitions.append(Transition(toks[1], parse_event(toks[2], lineno), toks[4]))
        else:
            raise RuleError(f"line {lineno}: cannot parse {raw.strip()!r}")
    rule_id = rule_id or default_id
    if rule_id is None:
        raise RuleError("rule has no id")
    if start is None or start not in states:
        raise RuleError(f"{rule_id}: missing or unknown start state")
    seen = set()
    for t in transitions:
        if t.src not in states or t.dst not in states:
            raise RuleError(f"{rule_id}: transition uses undeclared state ({t.src} -> {t.dst})")
        key = (t.src, t.event.label)
        if key in seen:
            raise RuleError(f"{rule_id}: duplicate transition on {t.event.label} from {t.src}")
        seen.add(key)
    return RuleAutomaton(rule_id, tuple(states), start, tuple(transitions), frozenset(bad), severity)


def load_rule(path) -> RuleAutomaton:
    path = Path(path)
    return parse_rule(path.read_text(), path.stem)


def builtin_rules() -> list[RuleAutomaton]:
    here = Path(__file__).resolve().parent.parent / "rules"
    return [load_rule(p) for p in sorted(here.glob("*.rule"))]


# ------------------------------------------------------ constant propagation

TOP = object()


def _never_written(p: AppProgram) -> set[str]:
    written = {ins.name for _, _, _, ins in p.all_instructions() if isinstance(ins, WriteGlobal)}
    return set(p.globals) - written


def _eval(ins, env, p: AppProgram, fixed_globals, facts):
    """Constant value assigned by ``ins`` under ``env`` (or TOP)."""
    from ..ir.interpreter import _BIN, _UN

    def get(o):
        if isinstance(o, str):
            return env.get(o, TOP)
        return float(o)

    if isinstance(ins, Const):
        return ins.value
    if isinstance(ins, ReadField):
        return facts.get(ins.path, TOP)
    if isinstance(ins, ReadGlobal):
        return p.globals[ins.name] if ins.name in fixed_globals else TOP
    if isinstance(ins, TableLength):
        t = p.tables.get(ins.table)
        return float(len(t.rows)) if t is not None else TOP
    if isinstance(ins, TableLookup):
        i = get(ins.index)
        t = p.tables.get(ins.table)
        if i is TOP or t is None or isinstance(i, bool):
            return TOP
        k = int(i)
        if k != i or not 0 <= k < len(t.rows):
            return TOP
        return getattr(t.rows[k], ins.column)
    if isinstance(ins, BinOp):
        a = get(ins.a)
        b = None if ins.b is None else get(ins.b)
        if a is TOP or b is TOP:
            return TOP
        try:
            return _UN[ins.op](a) if ins.b is None else _BIN[ins.op](a, b)
        except (ArithmeticError, ValueError, TypeError, KeyError):
            return TOP
    return TOP


@dataclass
class ConstInfo:
    env_in: dict  # block id -> {var: value} (absent = unknown)
    succ: dict  # block id -> feasible successor ids


def propagate_constants(p: AppProgram, h: Handler, facts: dict) -> ConstInfo:
    """Flat-lattice constant propagation that only follows feasible branches."""
    fixed = _never_written(p)
    bm = h.block_map
    env_in: dict[str, dict] = {h.entry: {}}
    succ: dict[str, tuple] = {}
    work = [h.entry]
    while work:
        bid = work.pop()
        env = dict(env_in[bid])
        block = bm[bid]
        for ins in block.body:
            d = defined_var(ins)
            if d is not None:
                v = _eval(ins, env, p, fixed, facts)
                if v is TOP:
                    env.pop(d, None)
                else:
                    env[d] = v
        term = block.terminator
        if isinstance(term, Branch):
            c = env.get(term.cond, TOP)
            if c is True:
                nxt = (term.then,)
            elif c is False:
                nxt = (term.orelse,)
            else:
                nxt = (term.then, term.orelse)
        elif isinstance(term, Jump):
            nxt = (term.target,)
        else:
            nxt = ()
        succ[bid] = nxt
        for s in nxt:
            if s not in env_in:
                env_in[s] = dict(env)
                work.append(s)
            else:
                old = env_in[s]
                merged = {k: v for k, v in old.items() if k in env and _same(env[k], v)}
                if merged != old or len(merged) != len(old):
                    env_in[s] = merged
                    work.append(s)
    return ConstInfo(env_in, succ)


def _same(a, b) -> bool:
    return type(a) is type(b) and (a == b or (a != a and b != b))


# ---------------------------------------------------------- representatives


def representatives(kind: str, fld: str, constants) -> tuple:
    dom = ENUM_DOMAINS.get((kind, fld))
    if dom is not None:
        return dom
    vals = set()
    for c in constants:
        if isinstance(c, bool):
            vals.update((False, True))
        else:
            vals.update((c - 1.0, c, c + 1.0))
    return tuple(sorted(vals, key=lambda v: (isinstance(v, bool), v))) or (0.0,)


def observation_assumptions(rule: RuleAutomaton, kind: str) -> list[dict]:
    fields = rule.fields_of("observe", kind)
    if not fields:
        return [{}]
    reps = [representatives(kind, f, rule.constants_of("observe", kind, f)) for f in fields]
    return [dict(zip(fields, combo)) for combo in itertools.product(*reps)]


# ------------------------------------------------------------- product BFS


@dataclass(order=True)
class _Item:
    cost: int
    seq: int
    node: tuple = field(compare=False)


def _publish_outcomes(rule: RuleAutomaton, q: str, ins: Publish, env: dict):
    """All (next state, fired transition) pairs a publish can cause."""
    if not rule.mentions("publish", ins.kind):
        return [(q, None)]
    fields = rule.fields_of("publish", ins.kind)
    known, unknown = {}, []
    given = dict(ins.fields)
    for f in fields:
        o = given.get(f)
        v = TOP if o is None else (env.get(o, TOP) if isinstance(o, str) else float(o))
        if v is TOP:
            unknown.append(f)
        else:
            known[f] = v
    if not unknown:
        return [rule.step(q, "publish", ins.kind, known)]
    reps = [representatives(ins.kind, f, rule.constants_of("publish", ins.kind, f)) for f in unknown]
    outs = []
    for combo in itertools.product(*reps):
        r = rule.step(q, "publish", ins.kind, {**known, **dict(zip(unknown, combo))})
        if r not in outs:
            outs.append(r)
    return outs


def check_temporal_rule(p: AppProgram, rule: RuleAutomaton) -> list[Finding]:
    kinds = sorted(p.handlers)
    assumptions = {k: observation_assumptions(rule, k) for k in kinds}
    consts: dict = {}
    for k in kinds:
        for ai, asm in enumerate(assumptions[k]):
            facts = {f: v for f, v in asm.items() if (k, f) in ENUM_DOMAINS}
            consts[(k, ai)] = propagate_constants(p, p.handlers[k], facts)

    start = ("idle", rule.start)
    dist = {start: 0}
    parent: dict = {start: None}
    heap = [_Item(0, 0, start)]
    counter = itertools.count(1)
    hit = None

    def relax(node, cost, prev, labels, where):
        nonlocal hit
        if node not in dist or cost < dist[node]:
            dist[node] = cost
            parent[node] = (prev, labels, where)
            heapq.heappush(heap, _Item(cost, next(counter), node))

    if rule.start in rule.bad:
        return [Finding(f"rule:{rule.rule_id}", rule.rule_id, rule.severity, "start state is bad", ())]

    while heap:
        item = heapq.heappop(heap)
        node, cost = item.node, item.cost
        if cost > dist.get(node, math.inf):
            continue
        if node[-1] in rule.bad:
            hit = node
            break
        if node[0] == "idle":
            q = node[1]
            for k in kinds:
                h = p.handlers[k]
                for ai, asm in enumerate(assumptions[k]):
                    if rule.mentions("observe", k):
                        q2, t = rule.step(q, "observe", k, asm)
                    else:
                        q2, t = q, None
                    labels = (t.event.label,) if t else ()
                    relax(("blk", k, ai, h.entry, q2), cost + len(labels), node, labels, f"{k}/{h.entry}")
            continue

        _, k, ai, bid, q = node
        info = consts[(k, ai)]
        h = p.handlers[k]
        block = h.block(bid)
        env = dict(info.env_in.get(bid, {}))
        # states reachable inside the block: (q, labels, bad_location)
        frontier = [(q, ())]
        fixed = _never_written(p)
        asm = assumptions[k][ai]
        facts = {f: v for f, v in asm.items() if (k, f) in ENUM_DOMAINS}
        stop_at = None
        for i, ins in enumerate(block.body):
            if isinstance(ins, Publish):
                nxt = []
                for qq, labels in frontier:
                    for q2, t in _publish_outcomes(rule, qq, ins, env):
                        lab = labels + ((t.event.label,) if t else ())
                        if (q2, lab) not in nxt:
                            nxt.append((q2, lab))
                frontier = nxt
                for qq, labels in frontier:
                    if qq in rule.bad:
                        relax(("bad", k, ai, bid, i, qq), cost + len(labels), node, labels, f"{k}/{bid}[{i}]")
                frontier = [(qq, lab) for qq, lab in frontier if qq not in rule.bad]
            d = defined_var(ins)
            if d is not None:
                v = _eval(ins, env, p, fixed, facts)
                if v is TOP:
                    env.pop(d, None)
                else:
                    env[d] = v
        term = block.terminator
        for qq, labels in frontier:
            c = cost + len(labels)
            if isinstance(term, Halt):
                relax(("idle", qq), c, node, labels, f"{k}/{bid}")
            else:
                for s in info.succ.get(bid, ()):
                    relax(("blk", k, ai, s, qq), c, node, labels, f"{k}/{bid}")

    if hit is None:
        return []
    witness: list[str] = []
    where = ""
    node = hit
    first = True
    while parent[node] is not None:
        prev, labels, loc = parent[node]
        if first:
            where, first = loc, False
        witness[:0] = list(labels)
        node = prev
    return [
        Finding(
            f"rule:{rule.rule_id}",
            rule.rule_id,
            rule.severity,
            f"bad state {hit[-1]!r} reachable at {where}",
            tuple(witness),
        )
    ]
