"""Shared hypothesis strategies: random programs, rows, and tables.

Values come from a small pool of exact binary fractions so arithmetic
is deterministic and comparisons exercise real collisions; division is
included, so strategies can produce partial programs on purpose.
"""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from proxyaudit.expr import (
    Const,
    Var,
    add,
    and_,
    div,
    eq,
    ge,
    gt,
    ite,
    le,
    lt,
    mul,
    not_,
    or_,
    sub,
)

COLUMNS = ("a", "b", "c")
VALUE_POOL = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0)

values = st.sampled_from(VALUE_POOL)
rows = st.fixed_dictionaries({name: values for name in COLUMNS})


def _nary(build, operands):
    return st.lists(operands, min_size=2, max_size=3).map(lambda xs: build(*xs))


def _guards():
    # shallow guards keep generated programs small
    return st.tuples(
        st.sampled_from((lt, le, gt, ge, eq)),
        st.sampled_from(COLUMNS).map(Var),
        values.map(Const),
    ).map(lambda t: t[0](t[1], t[2]))


def numeric_exprs(max_depth: int = 3, allow_division: bool = True):
    leaves = st.one_of(
        values.map(Const),
        st.sampled_from(COLUMNS).map(Var),
    )

    def extend(children):
        options = [
            _nary(add, children),
            _nary(mul, children),
            st.tuples(children, children).map(lambda p: sub(*p)),
            st.tuples(_guards(), children, children).map(lambda t: ite(*t)),
        ]
        if allow_division:
            options.append(st.tuples(children, children).map(lambda p: div(*p)))
        return st.one_of(options)

    return st.recursive(leaves, extend, max_leaves=2**max_depth)


def bool_exprs(max_depth: int = 3, allow_division: bool = True):
    numeric = numeric_exprs(max_depth=2, allow_division=allow_division)
    comparisons = st.tuples(
        st.sampled_from((lt, le, gt, ge, eq)), numeric, numeric
    ).map(lambda t: t[0](t[1], t[2]))
    leaves = st.one_of(st.booleans().map(Const), comparisons)

    def extend(children):
        return st.one_of(
            _nary(and_, children),
            _nary(or_, children),
            children.map(not_),
            st.tuples(children, children, children).map(lambda t: ite(*t)),
        )

    return st.recursive(leaves, extend, max_leaves=4)


def programs(allow_division: bool = True):
    return st.one_of(
        numeric_exprs(allow_division=allow_division),
        bool_exprs(allow_division=allow_division),
    )


tables = st.lists(rows, min_size=1, max_size=12).map(
    lambda rs: np.array([[r[c] for c in COLUMNS] for r in rs], dtype=np.float64)
)
