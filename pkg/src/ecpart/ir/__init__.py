"""The MicroIR program representation: types, text format and CFGs."""

from ecpart.ir.cfg import Cfg, Edge, build_cfg
from ecpart.ir.model import BasicBlock, Br, Function, Global, Instr, Jmp, Lit, Module, Param, Reg, Ret
from ecpart.ir.parser import IrParseError, parse_module
from ecpart.ir.printer import print_module
from ecpart.ir.types import BOOL, IrType, IrTypeError, enum, ptr, sint, uint

__all__ = [
    "BOOL", "BasicBlock", "Br", "Cfg", "Edge", "Function", "Global", "Instr", "IrParseError", "IrType",
    "IrTypeError", "Jmp", "Lit", "Module", "Param", "Reg", "Ret", "build_cfg", "enum", "parse_module",
    "print_module", "ptr", "sint", "uint",
]
