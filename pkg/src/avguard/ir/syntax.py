"""Line-oriented textual form of the IR (``.avir`` files).

Example::

    app cruise
    global target = 25
    table map = asset map.dat

    handler vehicle_report:
    block entry:
        v = field speed
        fast = lt target v
        branch fast slow done
    block slow:
        p = const 0
        publish throttle_cmd percent=p
        halt
    block done:
        halt
"""

from __future__ import annotations

import csv
import io
import math
import re
from typing import Mapping

from .. import bus
from ..errors import IRSyntaxError, UnknownField, UnknownMessageKind
from .program import (
    BINARY_OPS,
    TABLE_COLUMNS,
    UNARY_OPS,
    AppProgram,
    BasicBlock,
    BinOp,
    Branch,
    Const,
    Halt,
    Handler,
    Jump,
    NetSend,
    Publish,
    ReadField,
    ReadGlobal,
    Store,
    Table,
    TableLength,
    TableLookup,
    Waypoint,
    WriteGlobal,
    is_terminator,
)

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_TOKEN = re.compile(r'"[^"]*"|\S+')
RESERVED = {"true", "false", *bus.ENUM_CONSTANTS}


def parse_literal(tok: str, line: int = 0, col: int = 0):
    if tok == "true":
        return True
    if tok == "false":
        return False
    if tok in bus.ENUM_CONSTANTS:
        return bus.ENUM_CONSTANTS[tok]
    try:
        value = float(tok)
    except ValueError:
        raise IRSyntaxError(f"bad literal {tok!r}", line, col) from None
    if not math.isfinite(value):
        raise IRSyntaxError(f"non-finite literal {tok!r}", line, col)
    return value


def format_literal(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(float(v))


def load_path_csv(data: bytes | str) -> tuple[Waypoint, ...]:
    """Parse an ``x,y,heading`` waypoint file (header optional)."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    rows = []
    for rec in csv.reader(io.StringIO(data)):
        if not rec or rec[0].strip().startswith("#"):
            continue
        if rec[0].strip() == "x":
            continue
        x, y, h = (float(v) for v in rec[:3])
        rows.append(Waypoint(x, y, h))
    return tuple(rows)


def dump_path_csv(rows) -> str:
    lines = ["x,y,heading"]
    lines += [f"{w.x!r},{w.y!r},{w.heading!r}" for w in rows]
    return "\n".join(lines) + "\n"


class _Parser:
    def __init__(self, text: str, assets: Mapping[str, bytes] | None):
        self.text = text
        self.assets = assets
        self.app_id: str | None = None
        self.globals: dict = {}
        self.tables: dict[str, Table] = {}
        self.handlers: dict[str, Handler] = {}
        # per-handler scratch
        self.kind: str | None = None
        self.kind_line = 0
        self.blocks: list[tuple[str, list, int]] = []
        self.refs: list[tuple[str, int, int]] = []

    def error(self, msg, line, col=1, cls=IRSyntaxError):
        raise cls(msg, line, col)

    def run(self) -> AppProgram:
        for lineno, raw in enumerate(self.text.splitlines(), start=1):
            body = raw.split("#", 1)[0]
            if '"' in raw:  # quoted hosts may contain '#'
                body = _strip_comment(raw)
            if not body.strip():
                continue
            col = len(body) - len(body.lstrip()) + 1
            toks = _TOKEN.findall(body)
            self.statement(toks, lineno, col)
        self.finish_handler()
        if self.app_id is None:
            self.error("missing 'app <id>' line", 1)
        return AppProgram(self.app_id, self.handlers, self.globals, self.tables)

    # -- top level
    def statement(self, toks, line, col):
        head = toks[0]
        if head == "app":
            if len(toks) != 2 or self.app_id is not None:
                self.error("expected a single 'app <id>'", line, col)
            self.app_id = toks[1]
        elif head == "global":
            self.global_decl(toks, line, col)
        elif head == "table":
            self.table_decl(toks, line, col)
        elif head == "handler":
            self.finish_handler()
            if len(toks) != 2 or not toks[1].endswith(":"):
                self.error("expected 'handler <kind>:'", line, col)
            kind = toks[1][:-1]
            if kind not in bus.SENSOR_KINDS:
                self.error(f"unknown message kind {kind!r}", line, col, UnknownMessageKind)
            if kind in self.handlers:
                self.error(f"duplicate handler for {kind}", line, col)
            self.kind, self.kind_line = kind, line
        elif head == "block":
            if self.kind is None:
                self.error("block outside of a handler", line, col)
            if len(toks) != 2 or not toks[1].endswith(":"):
                self.error("expected 'block <id>:'", line, col)
            bid = toks[1][:-1]
            if not _IDENT.match(bid):
                self.error(f"bad block id {bid!r}", line, col)
            if any(b[0] == bid for b in self.blocks):
                self.error(f"duplicate block {bid!r}", line, col)
            if self.blocks and not self.blocks[-1][1]:
                self.error(f"block {self.blocks[-1][0]!r} is empty", line, col)
            self.blocks.append((bid, [], line))
        else:
            if not self.blocks:
                self.error("instruction outside of a block", line, col)
            bid, instrs, _ = self.blocks[-1]
            if instrs and is_terminator(instrs[-1]):
                self.error(f"instruction after terminator in block {bid!r}", line, col)
            instrs.append(self.instruction(toks, line, col))

    def global_decl(self, toks, line, col):
        if len(toks) != 4 or toks[2] != "=":
            self.error("expected 'global <name> = <literal>'", line, col)
        name = self.ident(toks[1], line, col)
        if name in self.globals or name in self.tables:
            self.error(f"duplicate global {name!r}", line, col)
        self.globals[name] = parse_literal(toks[3], line, col)

    def table_decl(self, toks, line, col):
        if len(toks) < 4 or toks[2] != "=":
            self.error("expected 'table <name> = asset <file>' or '= inline ...'", line, col)
        name = self.ident(toks[1], line, col)
        if name in self.globals or name in self.tables:
            self.error(f"duplicate global {name!r}", line, col)
        if toks[3] == "asset" and len(toks) == 5:
            src = toks[4]
            rows: tuple = ()
            if self.assets is not None:
                if src not in self.assets:
                    self.error(f"missing asset {src!r}", line, col)
                try:
                    rows = load_path_csv(self.assets[src])
                except (ValueError, IndexError) as exc:
                    self.error(f"bad path asset {src!r}: {exc}", line, col)
            self.tables[name] = Table(name, rows, src)
        elif toks[3] == "inline":
            nums = " ".join(toks[4:]).split(";")
            rows = []
            for chunk in nums:
                parts = chunk.split()
                if not parts:
                    continue
                if len(parts) != 3:
                    self.error("inline waypoints need 'x y heading'", line, col)
                rows.append(Waypoint(*(float(p) for p in parts)))
            self.tables[name] = Table(name, tuple(rows), None)
        else:
            self.error("expected 'asset <file>' or 'inline ...'", line, col)

    def finish_handler(self):
        if self.kind is None:
            return
        if not self.blocks:
            self.error(f"handler {self.kind} has no blocks", self.kind_line)
        ids = {b[0] for b in self.blocks}
        for target, line, col in self.refs:
            if target not in ids:
                self.error(f"undefined block {target!r}", line, col)
        blocks = []
        for bid, instrs, line in self.blocks:
            if not instrs or not is_terminator(instrs[-1]):
                self.error(f"block {bid!r} does not end with branch/jump/halt", line)
            blocks.append(BasicBlock(bid, tuple(instrs)))
        self.handlers[self.kind] = Handler(self.kind, tuple(blocks), blocks[0].id)
        self.kind, self.blocks, self.refs = None, [], []

    # -- instructions
    def ident(self, tok, line, col):
        if not _IDENT.match(tok) or tok in RESERVED:
            self.error(f"bad identifier {tok!r}", line, col)
        return tok

    def operand(self, tok, line, col):
        if _IDENT.match(tok) and tok not in RESERVED:
            return tok
        value = parse_literal(tok, line, col)
        if isinstance(value, bool):
            self.error("boolean literals are not operands; use 'const'", line, col)
        return value

    def host(self, tok, line, col):
        if not (len(tok) >= 2 and tok[0] == tok[-1] == '"'):
            self.error(f"expected quoted string, got {tok!r}", line, col)
        return tok[1:-1]

    def ref(self, tok, line, col):
        self.refs.append((tok, line, col))
        return tok

    def instruction(self, toks, line, col):
        head = toks[0]
        n = len(toks)
        if head == "halt" and n == 1:
            return Halt()
        if head == "jump" and n == 2:
            return Jump(self.ref(toks[1], line, col))
        if head == "branch" and n == 4:
            return Branch(self.ident(toks[1], line, col), self.ref(toks[2], line, col),
                          self.ref(toks[3], line, col))
        if head == "setglobal" and n == 3:
            return WriteGlobal(self.ident(toks[1], line, col), self.operand(toks[2], line, col))
        if head == "publish" and n >= 2:
            kind = toks[1]
            if kind not in bus.COMMAND_KINDS:
                self.error(f"cannot publish {kind!r}", line, col, UnknownMessageKind)
            fields = []
            for tok in toks[2:]:
                name, eq, val = tok.partition("=")
                if not eq:
                    self.error(f"expected field=value, got {tok!r}", line, col)
                if name not in bus.MESSAGE_FIELDS[kind]:
                    self.error(f"{kind} has no field {name!r}", line, col, UnknownField)
                fields.append((name, self.operand(val, line, col)))
            return Publish(kind, tuple(fields))
        if head in ("netsend", "store") and n >= 2:
            target = self.host(toks[1], line, col)
            values = tuple(self.operand(t, line, col) for t in toks[2:])
            return NetSend(target, values) if head == "netsend" else Store(target, values)
        if n >= 3 and toks[1] == "=":
            dst = self.ident(head, line, col)
            op, args = toks[2], toks[3:]
            if op == "const" and len(args) == 1:
                return Const(dst, parse_literal(args[0], line, col))
            if op == "field" and len(args) == 1:
                fields = bus.MESSAGE_FIELDS[self.kind]
                if args[0] not in fields:
                    self.error(f"{self.kind} has no field {args[0]!r}", line, col, UnknownField)
                return ReadField(dst, args[0])
            if op == "global" and len(args) == 1:
                return ReadGlobal(dst, self.ident(args[0], line, col))
            if op == "lookup" and len(args) == 3:
                if args[2] not in TABLE_COLUMNS:
                    self.error(f"bad table column {args[2]!r}", line, col)
                return TableLookup(dst, self.ident(args[0], line, col),
                                   self.operand(args[1], line, col), args[2])
            if op == "len" and len(args) == 1:
                return TableLength(dst, self.ident(args[0], line, col))
            if op in BINARY_OPS and len(args) == 2:
                return BinOp(dst, op, self.operand(args[0], line, col), self.operand(args[1], line, col))
            if op in UNARY_OPS and len(args) == 1:
                return BinOp(dst, op, self.operand(args[0], line, col))
            self.error(f"bad instruction '{op}' with {len(args)} operand(s)", line, col)
        self.error(f"cannot parse instruction {' '.join(toks)!r}", line, col)


def _strip_comment(raw: str) -> str:
    inside = False
    for i, ch in enumerate(raw):
        if ch == '"':
            inside = not inside
        elif ch == "#" and not inside:
            return raw[:i]
    return raw


def parse_program(text: str, assets: Mapping[str, bytes] | None = None) -> AppProgram:
    """Parse ``.avir`` text.  Asset-backed tables are resolved from ``assets``
    when given; otherwise they are left empty (``validate_program`` flags them)."""
    return _Parser(text, assets).run()


# ---------------------------------------------------------------- printing


def _opnd(o) -> str:
    return o if isinstance(o, str) else repr(float(o))


def format_instruction(ins) -> str:
    if isinstance(ins, Const):
        return f"{ins.dst} = const {format_literal(ins.value)}"
    if isinstance(ins, ReadField):
        return f"{ins.dst} = field {ins.path}"
    if isinstance(ins, ReadGlobal):
        return f"{ins.dst} = global {ins.name}"
    if isinstance(ins, WriteGlobal):
        return f"setglobal {ins.name} {_opnd(ins.src)}"
    if isinstance(ins, BinOp):
        args = _opnd(ins.a) if ins.b is None else f"{_opnd(ins.a)} {_opnd(ins.b)}"
        return f"{ins.dst} = {ins.op} {args}"
    if isinstance(ins, TableLookup):
        return f"{ins.dst} = lookup {ins.table} {_opnd(ins.index)} {ins.column}"
    if isinstance(ins, TableLength):
        return f"{ins.dst} = len {ins.table}"
    if isinstance(ins, Publish):
        return " ".join([f"publish {ins.kind}"] + [f"{k}={_opnd(v)}" for k, v in ins.fields])
    if isinstance(ins, NetSend):
        return " ".join([f'netsend "{ins.host}"'] + [_opnd(v) for v in ins.values])
    if isinstance(ins, Store):
        return " ".join([f'store "{ins.key}"'] + [_opnd(v) for v in ins.values])
    if isinstance(ins, Branch):
        return f"branch {ins.cond} {ins.then} {ins.orelse}"
    if isinstance(ins, Jump):
        return f"jump {ins.target}"
    if isinstance(ins, Halt):
        return "halt"
    raise TypeError(f"not an instruction: {ins!r}")


def print_program(p: AppProgram) -> str:
    out = [f"app {p.app_id}"]
    for name, value in p.globals.items():
        out.append(f"global {name} = {format_literal(value)}")
    for name, t in p.tables.items():
        if t.source is not None:
            out.append(f"table {name} = asset {t.source}")
        else:
            rows = " ; ".join(f"{w.x!r} {w.y!r} {w.heading!r}" for w in t.rows)
            out.append(f"table {name} = inline {rows}")
    for kind, h in p.handlers.items():
        out.append("")
        out.append(f"handler {kind}:")
        # entry block first so the reparsed handler keeps the same entry
        ordered = [h.block(h.entry)] + [b for b in h.blocks if b.id != h.entry]
        for b in ordered:
            out.append(f"block {b.id}:")
            out.extend("    " + format_instruction(i) for i in b.instructions)
    return "\n".join(out) + "\n"
