"""Table evaluation backends.

Two interchangeable backends evaluate a program over every row of a
float64 table: a pure-numpy reference and a compiled stack machine.
Both produce bit-identical values, reach flags, and errors. The
compiled backend is used when the extension module built from
``_ckernels.pyx`` is importable; set ``PROXYAUDIT_KERNEL=python`` or
``=compiled`` to force a choice at import time.
"""

from __future__ import annotations

import importlib
import os
from typing import Collection, Sequence

import numpy as np

from ..errors import EvaluationError, InputSchemaError
from ..expr import Expr, Position, format_position
from ._pybackend import PyEvaluator

__all__ = ["backend_name", "make_evaluator", "PyEvaluator", "CompiledEvaluator"]

_FORCED = os.environ.get("PROXYAUDIT_KERNEL", "").strip().lower()
if _FORCED not in ("", "python", "compiled"):
    raise ImportError(
        f"PROXYAUDIT_KERNEL must be 'python' or 'compiled', got {_FORCED!r}"
    )

_ckernels = None
if _FORCED != "python":
    try:
        _ckernels = importlib.import_module("._ckernels", __name__)
    except ImportError:
        if _FORCED == "compiled":
            raise
        _ckernels = None


class CompiledEvaluator:
    """Evaluates one expression over tables via the compiled stack machine."""

    backend = "compiled"

    def __init__(
        self, expr: Expr, columns: Sequence[str], reach_positions: Collection[Position] = ()
    ):
        from .bytecode import compile_program

        self._prog = compile_program(expr, columns, reach_positions)
        self._n_cols = len(columns)

    def values(self, table: np.ndarray) -> np.ndarray:
        out, _ = self._run(table, track_reach=False)
        return out

    def values_and_reach(self, table: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._run(table, track_reach=True)

    def _run(self, table: np.ndarray, track_reach: bool) -> tuple[np.ndarray, np.ndarray]:
        table = np.ascontiguousarray(table, dtype=np.float64)
        if table.ndim != 2:
            raise InputSchemaError("table must be two-dimensional")
        if table.shape[1] == 0:
            table = np.zeros((table.shape[0], 1), dtype=np.float64)
        n = table.shape[0]
        out = np.empty(n, dtype=np.float64)
        reach = np.zeros(n, dtype=np.uint8)
        stack = np.empty(self._prog.stack_size, dtype=np.float64)
        err = np.zeros(1, dtype=np.int64)
        status = _ckernels.run_table(
            self._prog.code, self._prog.consts, table, out, reach, track_reach, stack, err
        )
        if status >= 0:
            pos = self._prog.err_positions[status]
            raise EvaluationError(
                f"division by zero at position {format_position(pos)!r}",
                pos,
                row=int(err[0]),
            )
        if status == -2:
            raise AssertionError("corrupt bytecode")
        return out, reach.astype(bool)


def backend_name() -> str:
    """Name of the backend new evaluators will use: 'compiled' or 'python'."""
    return "compiled" if _ckernels is not None else "python"


def make_evaluator(
    expr: Expr, columns: Sequence[str], reach_positions: Collection[Position] = ()
):
    """Build a table evaluator for ``expr`` with the active backend."""
    if _ckernels is not None:
        return CompiledEvaluator(expr, columns, reach_positions)
    return PyEvaluator(expr, columns, reach_positions)
