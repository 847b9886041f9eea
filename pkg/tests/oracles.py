"""Independent reference implementations used to check the library.

Each oracle answers the same question as a library routine by a different
route: explicit path enumeration instead of a dataflow fixed point,
concrete execution instead of constant propagation, closed-form kinematics
instead of stepping the simulator.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque

import numpy as np
from scipy import stats

from avguard import bus
from avguard.ir.interpreter import AppState, execute_handler
from avguard.ir.program import (
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

# --------------------------------------------------------------- taint


def _ops(ins):
    if isinstance(ins, BinOp):
        return [ins.a, ins.b]
    if isinstance(ins, TableLookup):
        return [ins.index]
    if isinstance(ins, WriteGlobal):
        return [ins.src]
    if isinstance(ins, (NetSend, Store)):
        return list(ins.values)
    return []


def _run_path_taint(h, prefix, gtaint, max_visits, hits, finals):
    """Depth-first over every block path of one invocation.  Taint sets are
    tracked per path; each path ends with a global taint map in ``finals``."""
    bm = h.block_map

    def go(bid, env, g, visits):
        if visits.get(bid, 0) >= max_visits:
            return
        visits = {**visits, bid: visits.get(bid, 0) + 1}
        env, g = dict(env), dict(g)
        block = bm[bid]
        for i, ins in enumerate(block.instructions):
            t = frozenset().union(*(env.get(o, frozenset()) for o in _ops(ins) if isinstance(o, str)))
            if isinstance(ins, ReadField):
                full = f"{h.trigger}.{ins.path}"
                env[ins.dst] = frozenset({full}) if full.startswith(prefix) else frozenset()
            elif isinstance(ins, ReadGlobal):
                env[ins.dst] = g.get(ins.name, frozenset())
            elif isinstance(ins, (Const, TableLength)):
                env[ins.dst] = frozenset()
            elif isinstance(ins, (BinOp, TableLookup)):
                env[ins.dst] = t
            elif isinstance(ins, WriteGlobal):
                g[ins.name] = t
            elif isinstance(ins, (NetSend, Store)):
                sink = f"net_send({ins.host})" if isinstance(ins, NetSend) else f"storage({ins.key})"
                for s in t:
                    hits.add((s, sink, f"{h.trigger}/{bid}[{i}]"))
        term = block.terminator
        if isinstance(term, Branch):
            go(term.then, env, g, visits)
            go(term.orelse, env, g, visits)
        elif isinstance(term, Jump):
            go(term.target, env, g, visits)
        else:
            finals.add(frozenset((k, v) for k, v in g.items() if v))

    go(h.entry, {}, gtaint, {})


def taint_by_paths(p, prefix="vehicle_report.position.", max_visits=3, max_states=10_000):
    """(source, sink, location) triples seen on some explicit execution path.

    Invocations repeat without bound: the set of global taint maps reachable
    after any sequence of handler runs is closed by breadth-first search.
    """
    hits: set = set()
    start = frozenset()
    seen = {start}
    queue = deque([start])
    while queue:
        g = queue.popleft()
        for h in p.handlers.values():
            finals: set = set()
            _run_path_taint(h, prefix, dict(g), max_visits, hits, finals)
            for f in finals:
                if f not in seen and len(seen) < max_states:
                    seen.add(f)
                    queue.append(f)
    return hits


# --------------------------------------------------------- interpreter

_REF_BIN = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "pow": lambda a, b: a ** b,
    "min": min,
    "max": max,
    "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b,
    "eq": lambda a, b: a == b,
    "and": lambda a, b: a and b,
    "or": lambda a, b: a or b,
}
_REF_UN = {
    "sqrt": math.sqrt,
    "abs": abs,
    "sin": math.sin,
    "cos": math.cos,
    "neg": lambda a: -a,
    "not": lambda a: not a,
}


def reference_execute(p, globals_, payload, trigger, fuel=10_000):
    """Walk the dataclass IR directly.  Returns (globals, [(kind, payload)],
    [(host, values)]) or the string "fault" / "fuel"."""
    h = p.handlers[trigger]
    bm = h.block_map
    env, g = {}, dict(globals_)
    pubs, nets = [], []
    val = lambda o: env[o] if isinstance(o, str) else o  # noqa: E731
    bid, steps = h.entry, 0
    try:
        while True:
            for ins in bm[bid].instructions:
                if steps >= fuel:
                    return "fuel"
                steps += 1
                if isinstance(ins, Const):
                    env[ins.dst] = ins.value
                elif isinstance(ins, ReadField):
                    env[ins.dst] = payload[ins.path]
                elif isinstance(ins, ReadGlobal):
                    env[ins.dst] = g[ins.name]
                elif isinstance(ins, WriteGlobal):
                    g[ins.name] = val(ins.src)
                elif isinstance(ins, BinOp):
                    if ins.b is None:
                        env[ins.dst] = _REF_UN[ins.op](val(ins.a))
                    else:
                        env[ins.dst] = _REF_BIN[ins.op](val(ins.a), val(ins.b))
                elif isinstance(ins, TableLength):
                    env[ins.dst] = float(len(p.tables[ins.table].rows))
                elif isinstance(ins, TableLookup):
                    i = val(ins.index)
                    rows = p.tables[ins.table].rows
                    if int(i) != i or not 0 <= int(i) < len(rows):
                        return "fault"
                    env[ins.dst] = getattr(rows[int(i)], ins.column)
                elif isinstance(ins, NetSend):
                    nets.append((ins.host, tuple(val(v) for v in ins.values)))
                elif isinstance(ins, Store):
                    pass
                elif isinstance(ins, Branch):
                    if not isinstance(env[ins.cond], bool):
                        return "fault"
                    bid = ins.then if env[ins.cond] else ins.orelse
                    break
                elif isinstance(ins, Jump):
                    bid = ins.target
                    break
                elif isinstance(ins, Publish):
                    pubs.append((ins.kind, {k: val(v) for k, v in ins.fields}))
                elif isinstance(ins, Halt):
                    return g, pubs, nets
    except (ArithmeticError, ValueError, TypeError):
        return "fault"


# ------------------------------------------------------------ temporal

NUMERIC_GRID = (0.0, 20.0)


def message_grid(kind):
    """A finite set of concrete sensor messages of ``kind``."""
    names, choices = [], []
    for name, typ in bus.MESSAGE_FIELDS[kind].items():
        names.append(name)
        if typ == bus.BOOL:
            choices.append((False, True))
        elif (kind, name) == (bus.VEHICLE_REPORT, "gear"):
            choices.append(tuple(bus.GEARS.values()))
        elif (kind, name) == (bus.TRAFFIC_SIGNAL, "state"):
            choices.append(tuple(bus.SIGNALS.values()))
        else:
            choices.append(NUMERIC_GRID)
    return [bus.BusMessage(kind, dict(zip(names, combo))) for combo in itertools.product(*choices)]


def temporal_by_execution(p, rule, max_states=20_000):
    """Shortest event witness to a bad rule state, found by running the app.

    Nodes are (rule state, app globals); edges are concrete handler runs on
    every grid message.  Returns the witness label tuple or None.
    """
    grids = {k: message_grid(k) for k in sorted(p.handlers)}
    if rule.start in rule.bad:
        return ()
    start = (rule.start, AppState.initial(p))
    settled = set()
    counter = itertools.count()
    heap = [(0, next(counter), start, ())]
    while heap:
        _, _, node, labels = heapq.heappop(heap)
        if node == "bad":
            return labels
        if node in settled:
            continue
        settled.add(node)
        if len(settled) > max_states:
            break
        q, st = node
        for kind, msgs in grids.items():
            for msg in msgs:
                out = execute_handler(p, st, msg)
                if out.fault is not None:
                    continue
                q2, t = rule.step(q, "observe", kind, dict(msg.payload))
                lab = labels + ((t.event.label,) if t else ())
                for pub in out.publishes:
                    if q2 in rule.bad:
                        break
                    q2, t = rule.step(q2, "publish", pub.kind, dict(pub.payload))
                    lab += (t.event.label,) if t else ()
                nxt = "bad" if q2 in rule.bad else (q2, out.state)
                if nxt not in settled:
                    heapq.heappush(heap, (len(lab), next(counter), nxt, lab))
    return None


# ------------------------------------------------------- car following

EMERGENCY_DECEL = 10.0  # full brake, m/s^2


def _travel(v0, t0, decel, t):
    """Distance from time 0 to ``t`` for a vehicle at ``v0`` that brakes at
    ``decel`` from ``t0`` until it stops."""
    if t <= t0:
        return v0 * t
    tb = t - t0
    if decel > 0.0:
        tb = min(tb, v0 / decel)
    return v0 * t0 + v0 * tb - 0.5 * decel * tb * tb


def min_gap_after(gap, ego_speed, lead_speed, lead_decel, onset, brake_at, ego_decel=EMERGENCY_DECEL):
    """Smallest gap over all time when the lead brakes at ``lead_decel``
    from ``onset`` and the ego holds speed until ``brake_at`` and then brakes
    at ``ego_decel``.

    Gap is piecewise quadratic in time, so its minimum lies at a segment
    boundary or where the two speeds match.
    """
    t_lead_stop = onset + (lead_speed / lead_decel if lead_decel > 0 else math.inf)
    t_ego_stop = brake_at + ego_speed / ego_decel
    cands = {0.0, onset, brake_at, t_ego_stop}
    if math.isfinite(t_lead_stop):
        cands.add(t_lead_stop)

    def speeds(t):
        vl = lead_speed if t <= onset else max(0.0, lead_speed - lead_decel * (t - onset))
        ve = ego_speed if t <= brake_at else max(0.0, ego_speed - ego_decel * (t - brake_at))
        return vl, ve

    bounds = sorted(cands)
    for a, b in zip(bounds, bounds[1:]):
        (la, ea), (lb, eb) = speeds(a), speeds(b)
        da, db = la - ea, lb - eb
        if da * db < 0:
            cands.add(a + (b - a) * da / (da - db))
    cands.add(max(cands) + 1.0)
    return min(gap + _travel(lead_speed, onset, lead_decel, t) - _travel(ego_speed, brake_at, ego_decel, t)
               for t in cands)


def ttc_trigger_time(gap, ego_speed, lead_speed, lead_decel, onset, tau):
    """First instant at which gap <= tau * closing speed while the ego holds
    ``ego_speed``; ``inf`` if it never happens.

    On each segment gap(t) - tau*c(t) is a quadratic in t, solved exactly.
    """
    t_stop = onset + (lead_speed / lead_decel if lead_decel > 0 else math.inf)
    # (start, end, lead acceleration) with the lead's state carried across
    segs = [(0.0, onset, 0.0), (onset, t_stop, -lead_decel), (t_stop, math.inf, 0.0)]
    for a, b, al in segs:
        if not b > a:
            continue
        xl = _travel(lead_speed, onset, lead_decel, a)
        vl = lead_speed if a <= onset else max(0.0, lead_speed - lead_decel * (a - onset))
        g0 = gap + xl - ego_speed * a
        # f(s) = gap(a+s) - tau * closing(a+s), quadratic in s
        c2, c1, c0 = 0.5 * al, (vl - ego_speed) + tau * al, g0 - tau * (ego_speed - vl)
        if c0 <= 0 and ego_speed > vl:
            return a
        if c2 != 0:
            roots = [r.real for r in np.roots([c2, c1, c0]) if abs(r.imag) < 1e-12]
        elif c1 != 0:
            roots = [-c0 / c1]
        else:
            roots = []
        for r in sorted(roots):
            if 0.0 <= r <= b - a and ego_speed > vl + al * r:
                return a + r
    return math.inf


def certified_avoidable(gap, ego_speed, lead_speed, lead_decel, onset, tau=1.5, tick=0.05):
    """Constant-deceleration check: an ego that holds speed, starts full
    braking one tick after the time-to-collision trigger, never touches the
    lead.  Returns (avoidable, min_gap, brake_start)."""
    t_trig = ttc_trigger_time(gap, ego_speed, lead_speed, lead_decel, onset, tau)
    if not math.isfinite(t_trig):
        return True, math.inf, math.inf
    brake_at = t_trig + tick
    mg = min_gap_after(gap, ego_speed, lead_speed, lead_decel, onset, brake_at)
    return mg > 0.0, mg, brake_at


# ---------------------------------------------------------------- toys


def normal_tail(threshold):
    return float(stats.norm.sf(threshold))


def exact_grid_probability(model, indicator_fn):
    """Sum of atom probabilities over the hit set of a discrete model."""
    pts, probs = model.atoms()
    hits = np.array([indicator_fn(x) for x in pts], dtype=bool)
    return float(np.sum(probs[hits]))


def brake_grid_model():
    """10,000-atom quantized car-following space: gap x ego speed x lead
    deceleration, with discretized normal / exponential weights."""
    gap = np.arange(5.0, 55.0, 2.0)  # 25 values
    speed = np.arange(15.0, 35.0, 1.0)  # 20 values
    decel = np.linspace(0.5, 10.0, 20)
    from avguard.evaluation.distributions import DiscreteGridModel

    return DiscreteGridModel.of(
        initial_gap=(gap, stats.norm.pdf(gap, 35.0, 8.0)),
        ego_speed=(speed, stats.norm.pdf(speed, 25.0, 3.0)),
        lead_decel=(decel, np.exp(-decel / 1.2)),
    )


def brake_margin(X):
    """Final separation when the lead (at ego speed) brakes at ``d`` and the
    ego follows after a 1 s reaction at 8 m/s^2; a rear-end when <= 0."""
    X = np.atleast_2d(X)
    gap, v, d = X[:, 0], X[:, 1], X[:, 2]
    ego = v * 1.0 + v * v / 16.0
    lead = v * v / (2.0 * d)
    return gap + lead - ego


def brake_hit(X):
    return brake_margin(X) <= 0.0
