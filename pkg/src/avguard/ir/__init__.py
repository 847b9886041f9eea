"""Memory-safe intermediate representation for vehicle apps."""

from .interpreter import DEFAULT_FUEL, AppFault, AppState, HandlerOutcome, execute_handler
from .program import (
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
    normalize_angle,
)
from .syntax import dump_path_csv, load_path_csv, parse_program, print_program
from .validate import validate_program

__all__ = [
    "AppFault", "AppProgram", "AppState", "BasicBlock", "BinOp", "Branch", "Const",
    "DEFAULT_FUEL", "Halt", "Handler", "HandlerOutcome", "Jump", "NetSend", "Publish",
    "ReadField", "ReadGlobal", "Store", "Table", "TableLength", "TableLookup", "Waypoint",
    "WriteGlobal", "dump_path_csv", "execute_handler", "load_path_csv", "normalize_angle",
    "parse_program", "print_program", "validate_program",
]
