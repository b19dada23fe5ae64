"""Compiles expressions to a compact stack-machine form.

The compiled form is shared by the accelerated evaluator (a C loop over
rows) and kept independent of it so it can be unit-tested from Python.
Instructions are (opcode, argument) pairs flattened into one int32
array; jump arguments are absolute instruction indices. Booleans live
on the stack as 0.0/1.0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Collection, Sequence

import numpy as np

from ..errors import InputSchemaError
from ..expr import (
    Arith,
    Bool,
    Const,
    Expr,
    IfThenElse,
    Position,
    Rel,
    Var,
)

OP_CONST = 0
OP_VAR = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_LE = 6
OP_LT = 7
OP_EQ = 8
OP_GE = 9
OP_GT = 10
OP_NOT = 11
OP_JZ = 12
OP_JNZ = 13
OP_JMP = 14
OP_PUSH0 = 15
OP_PUSH1 = 16
OP_MARK = 17

_REL_OPCODES = {"<=": OP_LE, "<": OP_LT, "=": OP_EQ, ">=": OP_GE, ">": OP_GT}


@dataclass(frozen=True)
class CompiledProgram:
    code: np.ndarray
    consts: np.ndarray
    stack_size: int
    err_positions: tuple[Position, ...]
    columns: tuple[str, ...]
    returns_bool: bool


def _stack_depth(node: Expr) -> int:
    if isinstance(node, (Const, Var)):
        return 1
    if isinstance(node, Arith):
        ops = node.operands
        if node.op in ("+", "*"):
            return max(_stack_depth(ops[0]), *(1 + _stack_depth(c) for c in ops[1:]))
        return max(_stack_depth(ops[0]), 1 + _stack_depth(ops[1]))
    if isinstance(node, Rel):
        return max(_stack_depth(node.left), 1 + _stack_depth(node.right))
    if isinstance(node, Bool):
        return max(1, *(_stack_depth(c) for c in node.operands))
    if isinstance(node, IfThenElse):
        return max(_stack_depth(c) for c in node.children())
    raise TypeError(f"not an expression node: {node!r}")


def compile_program(
    expr: Expr, columns: Sequence[str], marked: Collection[Position] = ()
) -> CompiledProgram:
    """Compile ``expr`` against a column layout, optionally marking positions.

    A marked position contributes a reach flag: running the program on a
    row reports whether control passed through any marked node.
    """
    col_index = {name: i for i, name in enumerate(columns)}
    marked_set = frozenset(marked)
    code: list[int] = []  # flat (op, arg) pairs
    consts: list[float] = []
    err_positions: list[Position] = []

    def emit(op: int, arg: int = 0) -> int:
        code.append(op)
        code.append(arg)
        return len(code) // 2 - 1

    def here() -> int:
        return len(code) // 2

    def patch(instr: int, target: int) -> None:
        code[2 * instr + 1] = target

    def gen(node: Expr, pos: Position) -> None:
        if pos in marked_set:
            emit(OP_MARK)
        if isinstance(node, Const):
            consts.append(float(node.value))
            emit(OP_CONST, len(consts) - 1)
        elif isinstance(node, Var):
            if node.name not in col_index:
                raise InputSchemaError(f"table does not define feature {node.name!r}")
            emit(OP_VAR, col_index[node.name])
        elif isinstance(node, Arith):
            if node.op in ("+", "*"):
                gen(node.operands[0], pos + (0,))
                for i, child in enumerate(node.operands[1:], start=1):
                    gen(child, pos + (i,))
                    emit(OP_ADD if node.op == "+" else OP_MUL)
            else:
                gen(node.operands[0], pos + (0,))
                gen(node.operands[1], pos + (1,))
                if node.op == "-":
                    emit(OP_SUB)
                else:
                    err_positions.append(pos)
                    emit(OP_DIV, len(err_positions) - 1)
        elif isinstance(node, Rel):
            gen(node.left, pos + (0,))
            gen(node.right, pos + (1,))
            emit(_REL_OPCODES[node.op])
        elif isinstance(node, Bool):
            if node.op == "not":
                gen(node.operands[0], pos + (0,))
                emit(OP_NOT)
            else:
                jump = OP_JZ if node.op == "and" else OP_JNZ
                exits: list[int] = []
                for i, child in enumerate(node.operands):
                    gen(child, pos + (i,))
                    exits.append(emit(jump))
                emit(OP_PUSH1 if node.op == "and" else OP_PUSH0)
                done = emit(OP_JMP)
                target = here()
                for instr in exits:
                    patch(instr, target)
                emit(OP_PUSH0 if node.op == "and" else OP_PUSH1)
                patch(done, here())
        elif isinstance(node, IfThenElse):
            gen(node.guard, pos + (0,))
            to_else = emit(OP_JZ)
            gen(node.then, pos + (1,))
            to_end = emit(OP_JMP)
            patch(to_else, here())
            gen(node.orelse, pos + (2,))
            patch(to_end, here())
        else:
            raise TypeError(f"not an expression node: {node!r}")

    gen(expr, ())
    return CompiledProgram(
        code=np.asarray(code, dtype=np.int32),
        consts=np.asarray(consts, dtype=np.float64),
        stack_size=max(1, _stack_depth(expr)),
        err_positions=tuple(err_positions),
        columns=tuple(columns),
        returns_bool=expr.type == "bool",
    )
