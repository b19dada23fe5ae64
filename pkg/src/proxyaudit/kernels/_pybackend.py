"""Pure-numpy table evaluator; the reference backend.

Evaluates an expression over every row of a float64 table at once.
Vectorization computes both sides of every branch, so an activity mask
is threaded through the recursion: it records which rows actually
execute the current node under short-circuit semantics. The mask drives
division-by-zero detection and reach flags; values for inactive rows
are computed but discarded at the enclosing join, which keeps results
bit-identical to a per-row short-circuit interpreter.
"""

from __future__ import annotations

from typing import Collection, Sequence

import numpy as np

from ..errors import EvaluationError, InputSchemaError
from ..expr import (
    Arith,
    Bool,
    Const,
    Expr,
    IfThenElse,
    Position,
    Rel,
    Var,
    format_position,
    free_vars,
)

_REL_UFUNCS = {
    "<=": np.less_equal,
    "<": np.less,
    "=": np.equal,
    ">=": np.greater_equal,
    ">": np.greater,
}


class PyEvaluator:
    """Evaluates one expression over row-major float64 tables."""

    backend = "python"

    def __init__(
        self, expr: Expr, columns: Sequence[str], reach_positions: Collection[Position] = ()
    ):
        self._expr = expr
        self._col = {name: i for i, name in enumerate(columns)}
        missing = sorted(free_vars(expr) - set(self._col))
        if missing:
            raise InputSchemaError(f"table does not define feature {missing[0]!r}")
        self._reach = frozenset(reach_positions)
        self._returns_bool = expr.type == "bool"

    def values(self, table: np.ndarray) -> np.ndarray:
        out, _ = self._run(table, track_reach=False)
        return out

    def values_and_reach(self, table: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._run(table, track_reach=True)

    def _run(self, table: np.ndarray, track_reach: bool) -> tuple[np.ndarray, np.ndarray]:
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 2:
            raise InputSchemaError("table must be two-dimensional")
        n = table.shape[0]
        state = _EvalState(
            table=table,
            reach=np.zeros(n, dtype=bool) if track_reach else None,
            reach_positions=self._reach,
            col=self._col,
        )
        out = state.eval(self._expr, (), np.ones(n, dtype=bool))
        state.raise_pending()
        if out.dtype != np.float64:
            out = out.astype(np.float64)
        reach = state.reach if state.reach is not None else np.zeros(n, dtype=bool)
        return out, reach


class _EvalState:
    def __init__(self, table, reach, reach_positions, col):
        self.table = table
        self.reach = reach
        self.reach_positions = reach_positions
        self.col = col
        # Division errors are deferred until the whole tree is evaluated so
        # the reported (row, position) matches a per-row interpreter: the
        # first failing row, and within it the first executed division.
        self.div_errors: list[tuple[Position, np.ndarray]] = []

    def raise_pending(self) -> None:
        if not self.div_errors:
            return
        first_row = min(int(np.argmax(bad)) for _, bad in self.div_errors if bad.any())
        for pos, bad in self.div_errors:
            if bad[first_row]:
                raise EvaluationError(
                    f"division by zero at position {format_position(pos)!r}",
                    pos,
                    row=first_row,
                )
        raise AssertionError("unreachable")

    def eval(self, node: Expr, pos: Position, mask: np.ndarray) -> np.ndarray:
        if self.reach is not None and pos in self.reach_positions:
            self.reach |= mask
        n = self.table.shape[0]
        if isinstance(node, Const):
            if isinstance(node.value, bool):
                return np.full(n, node.value, dtype=bool)
            return np.full(n, node.value, dtype=np.float64)
        if isinstance(node, Var):
            v = self.table[:, self.col[node.name]]
            return (v != 0.0) if node.is_bool else v
        if isinstance(node, Arith):
            if node.op in ("+", "*"):
                ufunc = np.add if node.op == "+" else np.multiply
                acc = self.eval(node.operands[0], pos + (0,), mask)
                for i, child in enumerate(node.operands[1:], start=1):
                    acc = ufunc(acc, self.eval(child, pos + (i,), mask))
                return acc
            left = self.eval(node.operands[0], pos + (0,), mask)
            right = self.eval(node.operands[1], pos + (1,), mask)
            if node.op == "-":
                return left - right
            bad = mask & (right == 0.0)
            if bad.any():
                self.div_errors.append((pos, bad))
            with np.errstate(divide="ignore", invalid="ignore"):
                return left / right
        if isinstance(node, Rel):
            left = self.eval(node.left, pos + (0,), mask)
            right = self.eval(node.right, pos + (1,), mask)
            return _REL_UFUNCS[node.op](left, right)
        if isinstance(node, Bool):
            if node.op == "not":
                return ~self.eval(node.operands[0], pos + (0,), mask)
            is_and = node.op == "and"
            active = mask
            out = None
            for i, child in enumerate(node.operands):
                v = self.eval(child, pos + (i,), active)
                out = v if out is None else (out & v if is_and else out | v)
                active = active & v if is_and else active & ~v
            return out
        if isinstance(node, IfThenElse):
            g = self.eval(node.guard, pos + (0,), mask)
            t = self.eval(node.then, pos + (1,), mask & g)
            e = self.eval(node.orelse, pos + (2,), mask & ~g)
            return np.where(g, t, e)
        raise TypeError(f"not an expression node: {node!r}")
