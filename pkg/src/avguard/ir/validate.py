"""Well-formedness checks: CFG structure, definite assignment, typing."""

from __future__ import annotations

import math

from .. import bus
from ..findings import REJECT, WARN, Finding, sort_findings
from .program import (
    BINARY_OPS,
    COMPARISONS,
    LOGICAL,
    TABLE_COLUMNS,
    UNARY_OPS,
    AppProgram,
    BinOp,
    Branch,
    Const,
    Handler,
    Publish,
    ReadField,
    ReadGlobal,
    TableLength,
    TableLookup,
    WriteGlobal,
    defined_var,
    is_terminator,
    used_vars,
)

NUM, BOOL = bus.NUM, bus.BOOL


def _literal_type(v) -> str:
    return BOOL if isinstance(v, bool) else NUM


def result_type(ins, types: dict[str, frozenset], program: AppProgram, trigger: str) -> frozenset:
    """Possible types of the value an instruction assigns."""
    if isinstance(ins, Const):
        return frozenset({_literal_type(ins.value)})
    if isinstance(ins, ReadField):
        t = bus.MESSAGE_FIELDS.get(trigger, {}).get(ins.path)
        return frozenset({t}) if t else frozenset({NUM, BOOL})
    if isinstance(ins, ReadGlobal):
        if ins.name in program.globals:
            return frozenset({_literal_type(program.globals[ins.name])})
        return frozenset({NUM, BOOL})
    if isinstance(ins, BinOp):
        if ins.op in COMPARISONS or ins.op in LOGICAL:
            return frozenset({BOOL})
        return frozenset({NUM})
    if isinstance(ins, (TableLookup, TableLength)):
        return frozenset({NUM})
    return frozenset()


def _operand_types(o, types) -> frozenset:
    if isinstance(o, str):
        return types.get(o, frozenset())
    return frozenset({NUM})


def _check_structure(h: Handler, where, findings):
    ids = [b.id for b in h.blocks]
    idset = set(ids)
    if len(idset) != len(ids):
        findings.append(Finding(where(None), "duplicate_block", REJECT, "block ids repeat"))
    if h.entry not in idset:
        findings.append(Finding(where(None), "missing_entry", REJECT, f"entry {h.entry!r} not found"))
        return False
    ok = True
    for b in h.blocks:
        terms = [i for i, ins in enumerate(b.instructions) if is_terminator(ins)]
        if terms != [len(b.instructions) - 1]:
            findings.append(
                Finding(where(b), "terminator", REJECT, "block needs exactly one terminator, last")
            )
            ok = False
        for s in b.successors():
            if s not in idset:
                findings.append(Finding(where(b), "undefined_block", REJECT, f"jump to {s!r}"))
                ok = False
    reach = set(h.reachable())
    for b in h.blocks:
        if b.id not in reach:
            findings.append(Finding(where(b), "unreachable_block", WARN, "block not reachable from entry"))
    return ok


def _definite_assignment(h: Handler, program: AppProgram, findings):
    bm = h.block_map
    reach = h.reachable()
    preds = h.predecessors()
    universe = frozenset(v for b in h.blocks for ins in b.instructions if (v := defined_var(ins)))
    out = {bid: universe for bid in reach}
    inn: dict[str, frozenset] = {}
    changed = True
    while changed:
        changed = False
        for bid in reach:
            if bid == h.entry:
                cur = frozenset()
            else:
                ps = [out[p] for p in preds[bid] if p in out]
                cur = frozenset.intersection(*ps) if ps else frozenset()
            inn[bid] = cur
            defs = set(cur)
            for ins in bm[bid].instructions:
                if (d := defined_var(ins)) is not None:
                    defs.add(d)
            new = frozenset(defs)
            if new != out[bid]:
                out[bid] = new
                changed = True
    for bid in reach:
        defs = set(inn[bid])
        for i, ins in enumerate(bm[bid].instructions):
            for v in used_vars(ins):
                if v not in defs:
                    findings.append(
                        Finding(f"{h.trigger}/{bid}[{i}]", "use_before_def", REJECT,
                                f"{v!r} may be read before assignment")
                    )
            if (d := defined_var(ins)) is not None:
                defs.add(d)


def _types(h: Handler, program: AppProgram, findings):
    bm = h.block_map
    reach = h.reachable()
    preds = h.predecessors()
    out: dict[str, dict] = {bid: {} for bid in reach}
    inn: dict[str, dict] = {}

    def transfer(bid, env):
        env = dict(env)
        for ins in bm[bid].instructions:
            if (d := defined_var(ins)) is not None:
                env[d] = result_type(ins, env, program, h.trigger)
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

    def expect(loc, o, want, what):
        got = _operand_types(o, env)
        if got and got != frozenset({want}):
            findings.append(
                Finding(loc, "type_mismatch", REJECT, f"{what} expects {want}, got {'/'.join(sorted(got))}")
            )

    for bid in reach:
        env = dict(inn[bid])
        for i, ins in enumerate(bm[bid].instructions):
            loc = f"{h.trigger}/{bid}[{i}]"
            if isinstance(ins, Branch):
                expect(loc, ins.cond, BOOL, "branch condition")
            elif isinstance(ins, BinOp):
                want = BOOL if ins.op in LOGICAL else NUM
                if ins.op == "eq":
                    ta, tb = _operand_types(ins.a, env), _operand_types(ins.b, env)
                    if ta and tb and ta != tb:
                        findings.append(Finding(loc, "type_mismatch", REJECT, "eq compares mixed types"))
                else:
                    for o in (ins.a, ins.b):
                        if o is not None:
                            expect(loc, o, want, f"'{ins.op}'")
            elif isinstance(ins, TableLookup):
                expect(loc, ins.index, NUM, "table index")
            elif isinstance(ins, Publish):
                for name, o in ins.fields:
                    want = bus.MESSAGE_FIELDS.get(ins.kind, {}).get(name)
                    if want:
                        expect(loc, o, want, f"{ins.kind}.{name}")
            elif isinstance(ins, WriteGlobal) and ins.name in program.globals:
                expect(loc, ins.src, _literal_type(program.globals[ins.name]), f"global {ins.name}")
            if (d := defined_var(ins)) is not None:
                env[d] = result_type(ins, env, program, h.trigger)


def _instruction_checks(h: Handler, program: AppProgram, findings):
    fields = bus.MESSAGE_FIELDS.get(h.trigger, {})
    for b in h.blocks:
        for i, ins in enumerate(b.instructions):
            loc = f"{h.trigger}/{b.id}[{i}]"
            if isinstance(ins, BinOp):
                unary = ins.op in UNARY_OPS
                if ins.op not in BINARY_OPS | UNARY_OPS or unary != (ins.b is None):
                    findings.append(Finding(loc, "bad_arity", REJECT, f"operator {ins.op!r}"))
            elif isinstance(ins, ReadField) and ins.path not in fields:
                findings.append(Finding(loc, "unknown_field", REJECT, f"{h.trigger} has no {ins.path!r}"))
            elif isinstance(ins, ReadGlobal) and ins.name not in program.globals:
                findings.append(Finding(loc, "undefined_global", REJECT, ins.name))
            elif isinstance(ins, WriteGlobal):
                if ins.name in program.tables:
                    findings.append(Finding(loc, "immutable_table", REJECT, f"{ins.name} is a table"))
                elif ins.name not in program.globals:
                    findings.append(Finding(loc, "undefined_global", REJECT, ins.name))
            elif isinstance(ins, (TableLookup, TableLength)):
                if ins.table not in program.tables:
                    findings.append(Finding(loc, "undefined_table", REJECT, ins.table))
                elif isinstance(ins, TableLookup) and ins.column not in TABLE_COLUMNS:
                    findings.append(Finding(loc, "bad_column", REJECT, ins.column))
            elif isinstance(ins, Publish):
                spec = bus.MESSAGE_FIELDS.get(ins.kind)
                if spec is None or not bus.is_command(ins.kind):
                    findings.append(Finding(loc, "bad_publish", REJECT, f"cannot publish {ins.kind!r}"))
                    continue
                given = [k for k, _ in ins.fields]
                for k in given:
                    if k not in spec:
                        findings.append(Finding(loc, "unknown_field", REJECT, f"{ins.kind}.{k}"))
                missing = [k for k in spec if k not in given]
                if missing or len(set(given)) != len(given):
                    findings.append(
                        Finding(loc, "publish_fields", REJECT,
                                f"{ins.kind} needs exactly {', '.join(spec)}")
                    )


def validate_program(p: AppProgram) -> list[Finding]:
    findings: list[Finding] = []
    if not p.app_id:
        findings.append(Finding("app", "app_id_required", REJECT, "program has no app id"))
    for name, t in p.tables.items():
        if not t.rows:
            findings.append(Finding(f"table:{name}", "unresolved_table", REJECT, f"table {name} has no rows"))
        for j, w in enumerate(t.rows):
            if not (-math.pi < w.heading <= math.pi):
                findings.append(
                    Finding(f"table:{name}[{j}]", "waypoint_heading", REJECT, "heading outside (-pi, pi]")
                )
    for kind, h in p.handlers.items():
        if kind != h.trigger or kind not in bus.SENSOR_KINDS:
            findings.append(Finding(kind, "bad_trigger", REJECT, f"handler keyed {kind!r} triggers on {h.trigger!r}"))
        def where(b, h=h):
            return h.trigger if b is None else f"{h.trigger}/{b.id}"
        if not _check_structure(h, where, findings):
            continue
        _instruction_checks(h, p, findings)
        _definite_assignment(h, p, findings)
        _types(h, p, findings)
    return sort_findings(findings)
