# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Stack-machine evaluator: the hot loop behind the compiled backend.

Runs bytecode produced by ``bytecode.compile_program`` over every row of
a float64 table. Booleans are represented as 0.0/1.0. Returns -1 on
success, otherwise the index of the failing division site with the row
recorded in ``err[0]``.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF OP_CONST = 0
DEF OP_VAR = 1
DEF OP_ADD = 2
DEF OP_SUB = 3
DEF OP_MUL = 4
DEF OP_DIV = 5
DEF OP_LE = 6
DEF OP_LT = 7
DEF OP_EQ = 8
DEF OP_GE = 9
DEF OP_GT = 10
DEF OP_NOT = 11
DEF OP_JZ = 12
DEF OP_JNZ = 13
DEF OP_JMP = 14
DEF OP_PUSH0 = 15
DEF OP_PUSH1 = 16
DEF OP_MARK = 17


def run_table(
    const int[::1] code,
    const double[::1] consts,
    const double[:, ::1] table,
    double[::1] out,
    unsigned char[::1] reach,
    bint track_reach,
    double[::1] stack,
    long long[::1] err,
):
    cdef Py_ssize_t n_rows = table.shape[0]
    cdef Py_ssize_t n_instr = code.shape[0] // 2
    cdef Py_ssize_t row, pc, sp
    cdef int op, arg
    cdef double b
    cdef unsigned char flag
    cdef int status = -1

    with nogil:
        for row in range(n_rows):
            pc = 0
            sp = 0
            flag = 0
            while pc < n_instr:
                op = code[2 * pc]
                arg = code[2 * pc + 1]
                if op == OP_CONST:
                    stack[sp] = consts[arg]
                    sp += 1
                    pc += 1
                elif op == OP_VAR:
                    stack[sp] = table[row, arg]
                    sp += 1
                    pc += 1
                elif op == OP_ADD:
                    sp -= 1
                    stack[sp - 1] = stack[sp - 1] + stack[sp]
                    pc += 1
                elif op == OP_SUB:
                    sp -= 1
                    stack[sp - 1] = stack[sp - 1] - stack[sp]
                    pc += 1
                elif op == OP_MUL:
                    sp -= 1
                    stack[sp - 1] = stack[sp - 1] * stack[sp]
                    pc += 1
                elif op == OP_DIV:
                    sp -= 1
                    b = stack[sp]
                    if b == 0.0:
                        status = arg
                        err[0] = row
                        break
                    stack[sp - 1] = stack[sp - 1] / b
                    pc += 1
                elif op == OP_LE:
                    sp -= 1
                    stack[sp - 1] = 1.0 if stack[sp - 1] <= stack[sp] else 0.0
                    pc += 1
                elif op == OP_LT:
                    sp -= 1
                    stack[sp - 1] = 1.0 if stack[sp - 1] < stack[sp] else 0.0
                    pc += 1
                elif op == OP_EQ:
                    sp -= 1
                    stack[sp - 1] = 1.0 if stack[sp - 1] == stack[sp] else 0.0
                    pc += 1
                elif op == OP_GE:
                    sp -= 1
                    stack[sp - 1] = 1.0 if stack[sp - 1] >= stack[sp] else 0.0
                    pc += 1
                elif op == OP_GT:
                    sp -= 1
                    stack[sp - 1] = 1.0 if stack[sp - 1] > stack[sp] else 0.0
                    pc += 1
                elif op == OP_NOT:
                    stack[sp - 1] = 1.0 - stack[sp - 1]
                    pc += 1
                elif op == OP_JZ:
                    sp -= 1
                    if stack[sp] == 0.0:
                        pc = arg
                    else:
                        pc += 1
                elif op == OP_JNZ:
                    sp -= 1
                    if stack[sp] != 0.0:
                        pc = arg
                    else:
                        pc += 1
                elif op == OP_JMP:
                    pc = arg
                elif op == OP_PUSH0:
                    stack[sp] = 0.0
                    sp += 1
                    pc += 1
                elif op == OP_PUSH1:
                    stack[sp] = 1.0
                    sp += 1
                    pc += 1
                elif op == OP_MARK:
                    flag = 1
                    pc += 1
                else:
                    status = -2
                    err[0] = row
                    break
            if status != -1:
                break
            out[row] = stack[0]
            if track_reach:
                reach[row] = flag
    return status
