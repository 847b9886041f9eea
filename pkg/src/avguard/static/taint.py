"""Forward may-taint analysis over the IR control-flow graphs.

Flow-sensitive inside a handler, path-insensitive, explicit flows only:
a value is tainted when it is computed from a tainted operand.  Globals are
summarised flow-insensitively across handlers, and the whole analysis is
iterated until the global summary is stable, so taint carried from one
handler invocation to a later one is not lost.
"""

from __future__ import annotations

import fnmatch
from collections import deque
from dataclasses import dataclass

from ..ir.program import (
    AppProgram,
    BinOp,
    Const,
    Handler,
    NetSend,
    ReadField,
    ReadGlobal,
    Store,
    TableLength,
    TableLookup,
    WriteGlobal,
    defined_var,
)

LOCATION_SOURCES = frozenset({"vehicle_report.position.*"})
NET_SEND = "net_send"
STORAGE = "storage"
ALL_SINKS = frozenset({NET_SEND, STORAGE})


@dataclass(frozen=True, order=True)
class TaintFlow:
    source: str  # full field path, e.g. vehicle_report.position.x
    sink: str  # net_send(<host>) | storage(<key>)
    location: str  # handler/block[index] of the sink instruction
    witness_path: tuple[str, ...] = ()

    @property
    def sink_kind(self) -> str:
        return self.sink.split("(", 1)[0]

    @property
    def host(self) -> str | None:
        if self.sink_kind != NET_SEND:
            return None
        return self.sink[len(NET_SEND) + 1 : -1]


# taint label: (source path, handler kind, block id) of the reading instruction
Label = tuple[str, str, str]


def _matches(path: str, sources) -> bool:
    return any(fnmatch.fnmatchcase(path, pat) for pat in sources)


def _operands(ins):
    if isinstance(ins, BinOp):
        return [ins.a] if ins.b is None else [ins.a, ins.b]
    if isinstance(ins, TableLookup):
        return [ins.index]
    if isinstance(ins, WriteGlobal):
        return [ins.src]
    if isinstance(ins, (NetSend, Store)):
        return list(ins.values)
    return []


def _taint_of(ops, env) -> frozenset:
    out = frozenset()
    for o in ops:
        if isinstance(o, str):
            out |= env.get(o, frozenset())
    return out


def _handler_fixpoint(h: Handler, sources, gtaint: dict):
    """Return (sink hits, global writes) for one handler under ``gtaint``."""
    bm = h.block_map
    reach = h.reachable()
    preds = h.predecessors()
    out: dict[str, dict] = {b: {} for b in reach}
    inn: dict[str, dict] = {}

    def transfer(bid, env, hits=None, gwrites=None):
        env = dict(env)
        for i, ins in enumerate(bm[bid].instructions):
            if isinstance(ins, Const):
                env[ins.dst] = frozenset()
            elif isinstance(ins, ReadField):
                full = f"{h.trigger}.{ins.path}"
                env[ins.dst] = frozenset({(full, h.trigger, bid)}) if _matches(full, sources) else frozenset()
            elif isinstance(ins, ReadGlobal):
                env[ins.dst] = gtaint.get(ins.name, frozenset())
            elif isinstance(ins, TableLength):
                env[ins.dst] = frozenset()
            elif isinstance(ins, (BinOp, TableLookup)):
                env[ins.dst] = _taint_of(_operands(ins), env)
            elif isinstance(ins, WriteGlobal):
                if gwrites is not None:
                    t = _taint_of(_operands(ins), env)
                    if t:
                        gwrites.setdefault(ins.name, set()).update(t)
            elif isinstance(ins, (NetSend, Store)) and hits is not None:
                t = _taint_of(_operands(ins), env)
                if t:
                    sink = f"{NET_SEND}({ins.host})" if isinstance(ins, NetSend) else f"{STORAGE}({ins.key})"
                    hits.append((sink, f"{h.trigger}/{bid}[{i}]", bid, t))
        return env

    changed = True
    while changed:
        changed = False
        for bid in reach:
            env: dict = {}
            for p in preds[bid]:
                for v, t in out.get(p, {}).items():
                    env[v] = env.get(v, frozenset()) | t
            inn[bid] = env
            new = transfer(bid, env)
            if new != out[bid]:
                out[bid] = new
                changed = True

    hits: list = []
    gwrites: dict = {}
    for bid in reach:
        transfer(bid, inn[bid], hits, gwrites)
    return hits, gwrites


def _super_graph(p: AppProgram):
    """Block graph across handlers: a halting block may be followed by the
    entry of any handler (the next invocation)."""
    succ: dict[tuple[str, str], list] = {}
    for kind, h in p.handlers.items():
        for b in h.blocks:
            nxt = [(kind, s) for s in b.successors()]
            if not b.successors():
                nxt += [(k2, h2.entry) for k2, h2 in p.handlers.items()]
            succ[(kind, b.id)] = nxt
    return succ


def _shortest_path(succ, src, dst) -> tuple[str, ...]:
    prev = {src: None}
    q = deque([src])
    while q:
        node = q.popleft()
        if node == dst:
            break
        for n in succ.get(node, ()):
            if n not in prev:
                prev[n] = node
                q.append(n)
    if dst not in prev:
        return ()
    path = []
    node = dst
    while node is not None:
        path.append(f"{node[0]}/{node[1]}")
        node = prev[node]
    return tuple(reversed(path))


def taint_analysis(p: AppProgram, sources=LOCATION_SOURCES, sinks=ALL_SINKS) -> list[TaintFlow]:
    sources = frozenset(sources)
    sinks = frozenset(sinks)
    gtaint: dict[str, frozenset] = {}
    while True:
        all_hits = []
        new_g = dict(gtaint)
        for kind, h in p.handlers.items():
            hits, gw = _handler_fixpoint(h, sources, gtaint)
            all_hits.extend(hits)
            for name, t in gw.items():
                new_g[name] = new_g.get(name, frozenset()) | frozenset(t)
        if new_g == gtaint:
            break
        gtaint = new_g

    succ = _super_graph(p)
    flows = set()
    for sink, loc, bid, labels in all_hits:
        kind = loc.split("/", 1)[0]
        if sink.split("(", 1)[0] not in sinks:
            continue
        for src, h_src, b_src in labels:
            path = _shortest_path(succ, (h_src, b_src), (kind, bid))
            flows.add(TaintFlow(src, sink, loc, path))
    # one flow per (source, sink, location); keep the shortest witness
    best: dict = {}
    for f in sorted(flows, key=lambda f: (len(f.witness_path), f)):
        best.setdefault((f.source, f.sink, f.location), f)
    return sorted(best.values())
