"""Typed expression language for audited decision models.

Programs are finite trees of constants, feature reads, arithmetic,
comparisons, boolean connectives, and if-then-else. Two invariants are
maintained by the constructors in this module: every node is well-typed
(guards and connective operands are boolean, arithmetic and comparison
operands are numeric), and n-ary ``+``/``*`` chains are kept flattened
(an operand of a chain is never a chain with the same operator).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Iterator, Mapping

from .errors import (
    EvaluationError,
    InputSchemaError,
    ModelSchemaError,
    PositionError,
    TypingError,
)

Position = tuple[int, ...]

#: Variable name used for the hole when a subprogram is cut out of a program.
HOLE = "_hole"

ARITH_OPS = ("+", "-", "*", "/")
REL_OPS = ("<=", "<", "=", ">=", ">")
BOOL_OPS = ("and", "or", "not")

NUM = "num"
BOOL = "bool"


def format_position(pos: Position) -> str:
    """Render a position as slash-joined child indices; the root is ''."""
    return "/".join(str(i) for i in pos)


def parse_position(text: str) -> Position:
    if text == "":
        return ()
    try:
        return tuple(int(part) for part in text.split("/"))
    except ValueError as exc:
        raise PositionError(f"malformed position {text!r}") from exc


class Expr:
    """Base class for expression nodes. Instances are immutable."""

    @cached_property
    def type(self) -> str:
        return self._type()

    @cached_property
    def node_count(self) -> int:
        return 1 + sum(c.node_count for c in self.children())

    @cached_property
    def non_constant_count(self) -> int:
        """Nodes that are not constants; with node_count, a repair potential."""
        own = 0 if isinstance(self, Const) else 1
        return own + sum(c.non_constant_count for c in self.children())

    @cached_property
    def canon_key(self) -> tuple:
        """Structural identity key; commutative operands are order-insensitive."""
        return self._canon_key()

    def children(self) -> tuple[Expr, ...]:
        return ()

    def _type(self) -> str:
        raise NotImplementedError

    def _canon_key(self) -> tuple:
        raise NotImplementedError

    def __repr__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, eq=False, repr=False)
class Const(Expr):
    value: float | bool

    def __post_init__(self) -> None:
        v = self.value
        if isinstance(v, bool):
            return
        if isinstance(v, (int, float)):
            object.__setattr__(self, "value", float(v))
            return
        raise TypingError(f"constant must be a number or boolean, got {type(v).__name__}")

    def _type(self) -> str:
        return BOOL if isinstance(self.value, bool) else NUM

    def _canon_key(self) -> tuple:
        return ("const", isinstance(self.value, bool), float(self.value))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Const)
            and isinstance(self.value, bool) == isinstance(other.value, bool)
            and self.value == other.value
        )

    def __hash__(self) -> int:
        return hash(("const", isinstance(self.value, bool), float(self.value)))


@dataclass(frozen=True, repr=False)
class Var(Expr):
    name: str
    is_bool: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise TypingError("variable name must be a non-empty string")

    def _type(self) -> str:
        return BOOL if self.is_bool else NUM

    def _canon_key(self) -> tuple:
        return ("var", self.name, self.is_bool)


@dataclass(frozen=True, repr=False)
class Arith(Expr):
    op: str
    operands: tuple[Expr, ...]

    def __post_init__(self) -> None:
        if self.op not in ARITH_OPS:
            raise TypingError(f"unknown arithmetic operator {self.op!r}")
        n = len(self.operands)
        if self.op in ("-", "/") and n != 2:
            raise TypingError(f"{self.op!r} takes exactly two operands, got {n}")
        if self.op in ("+", "*"):
            if n < 2:
                raise TypingError(f"{self.op!r} chain needs at least two operands, got {n}")
            for child in self.operands:
                if isinstance(child, Arith) and child.op == self.op:
                    raise TypingError(f"{self.op!r} chain must be flattened")
        for child in self.operands:
            if child.type != NUM:
                raise TypingError(f"operand of {self.op!r} must be numeric: {to_text(child)}")

    def children(self) -> tuple[Expr, ...]:
        return self.operands

    def _type(self) -> str:
        return NUM

    def _canon_key(self) -> tuple:
        keys = [c.canon_key for c in self.operands]
        if self.op in ("+", "*"):
            keys.sort()
        return ("arith", self.op, tuple(keys))


@dataclass(frozen=True, repr=False)
class Rel(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self) -> None:
        if self.op not in REL_OPS:
            raise TypingError(f"unknown comparison operator {self.op!r}")
        for child in (self.left, self.right):
            if child.type != NUM:
                raise TypingError(f"operand of {self.op!r} must be numeric: {to_text(child)}")

    def children(self) -> tuple[Expr, ...]:
        return (self.left, self.right)

    def _type(self) -> str:
        return BOOL

    def _canon_key(self) -> tuple:
        keys = [self.left.canon_key, self.right.canon_key]
        if self.op == "=":
            keys.sort()
        return ("rel", self.op, tuple(keys))


@dataclass(frozen=True, repr=False)
class Bool(Expr):
    op: str
    operands: tuple[Expr, ...]

    def __post_init__(self) -> None:
        if self.op not in BOOL_OPS:
            raise TypingError(f"unknown boolean operator {self.op!r}")
        n = len(self.operands)
        if self.op == "not" and n != 1:
            raise TypingError(f"'not' takes exactly one operand, got {n}")
        if self.op in ("and", "or") and n < 2:
            raise TypingError(f"{self.op!r} needs at least two operands, got {n}")
        for child in self.operands:
            if child.type != BOOL:
                raise TypingError(f"operand of {self.op!r} must be boolean: {to_text(child)}")

    def children(self) -> tuple[Expr, ...]:
        return self.operands

    def _type(self) -> str:
        return BOOL

    def _canon_key(self) -> tuple:
        keys = [c.canon_key for c in self.operands]
        if self.op in ("and", "or"):
            keys.sort()
        return ("bool", self.op, tuple(keys))


@dataclass(frozen=True, repr=False)
class IfThenElse(Expr):
    guard: Expr
    then: Expr
    orelse: Expr

    def __post_init__(self) -> None:
        if self.guard.type != BOOL:
            raise TypingError(f"guard must be boolean: {to_text(self.guard)}")
        if self.then.type != self.orelse.type:
            raise TypingError(
                f"branches must share a type: {to_text(self.then)} vs {to_text(self.orelse)}"
            )

    def children(self) -> tuple[Expr, ...]:
        return (self.guard, self.then, self.orelse)

    def _type(self) -> str:
        return self.then.type

    def _canon_key(self) -> tuple:
        return ("ite", self.guard.canon_key, self.then.canon_key, self.orelse.canon_key)


# ---------------------------------------------------------------------------
# Constructors. These are the supported way to build programs: they flatten
# +/* chains and reject ill-typed trees at construction time.


def const(value: float | bool) -> Const:
    return Const(value)


def var(name: str) -> Var:
    return Var(name)


def _chain(op: str, operands: tuple[Expr, ...]) -> Expr:
    flat: list[Expr] = []
    for e in operands:
        if isinstance(e, Arith) and e.op == op:
            flat.extend(e.operands)
        else:
            flat.append(e)
    if len(flat) == 1:
        return flat[0]
    return Arith(op, tuple(flat))


def add(*operands: Expr) -> Expr:
    return _chain("+", operands)


def mul(*operands: Expr) -> Expr:
    return _chain("*", operands)


def sub(left: Expr, right: Expr) -> Arith:
    return Arith("-", (left, right))


def div(left: Expr, right: Expr) -> Arith:
    return Arith("/", (left, right))


def rel(op: str, left: Expr, right: Expr) -> Rel:
    return Rel(op, left, right)


def le(left: Expr, right: Expr) -> Rel:
    return Rel("<=", left, right)


def lt(left: Expr, right: Expr) -> Rel:
    return Rel("<", left, right)


def eq(left: Expr, right: Expr) -> Rel:
    return Rel("=", left, right)


def ge(left: Expr, right: Expr) -> Rel:
    return Rel(">=", left, right)


def gt(left: Expr, right: Expr) -> Rel:
    return Rel(">", left, right)


def and_(*operands: Expr) -> Bool:
    return Bool("and", tuple(operands))


def or_(*operands: Expr) -> Bool:
    return Bool("or", tuple(operands))


def not_(operand: Expr) -> Bool:
    return Bool("not", (operand,))


def ite(guard: Expr, then: Expr, orelse: Expr) -> IfThenElse:
    return IfThenElse(guard, then, orelse)


def rebuild(node: Expr, children: tuple[Expr, ...]) -> Expr:
    """Reconstruct a node with new children, re-applying the construction rules."""
    if isinstance(node, (Const, Var)):
        return node
    if isinstance(node, Arith):
        if node.op in ("+", "*"):
            return _chain(node.op, children)
        return Arith(node.op, children)
    if isinstance(node, Rel):
        return Rel(node.op, children[0], children[1])
    if isinstance(node, Bool):
        return Bool(node.op, children)
    if isinstance(node, IfThenElse):
        return IfThenElse(children[0], children[1], children[2])
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Structure helpers.


def preorder(expr: Expr, prefix: Position = ()) -> Iterator[tuple[Position, Expr]]:
    """Yield (position, node) pairs in depth-first preorder."""
    yield prefix, expr
    for i, child in enumerate(expr.children()):
        yield from preorder(child, prefix + (i,))


def subexpr_at(expr: Expr, pos: Position) -> Expr:
    node = expr
    for depth, i in enumerate(pos):
        kids = node.children()
        if not 0 <= i < len(kids):
            raise PositionError(
                f"position {format_position(pos)} does not exist "
                f"(no child {i} at {format_position(pos[:depth])})"
            )
        node = kids[i]
    return node


def replace_at(expr: Expr, replacements: Mapping[Position, Expr]) -> Expr:
    """Return a copy of ``expr`` with each given position replaced.

    Replacement subtrees are spliced in via the construction rules, so
    chains re-flatten and the result is type-checked. No position may be
    a prefix of another.
    """
    targets = sorted(replacements)
    for a, b in zip(targets, targets[1:]):
        if b[: len(a)] == a:
            raise PositionError(
                f"overlapping replacement positions {format_position(a)} "
                f"and {format_position(b)}"
            )
    for pos in targets:
        subexpr_at(expr, pos)  # validate early for a clear error

    def go(node: Expr, pos: Position) -> Expr:
        if pos in replacements:
            return replacements[pos]
        if not any(t[: len(pos)] == pos for t in targets):
            return node
        kids = tuple(go(c, pos + (i,)) for i, c in enumerate(node.children()))
        return rebuild(node, kids)

    return go(expr, ())


def free_vars(expr: Expr) -> frozenset[str]:
    names: set[str] = set()
    for _, node in preorder(expr):
        if isinstance(node, Var):
            names.add(node.name)
    return frozenset(names)


def structurally_equal(a: Expr, b: Expr) -> bool:
    """Equality up to operand order of commutative operators."""
    return a.canon_key == b.canon_key


def canonicalize(expr: Expr) -> Expr:
    """Rewrite commutative operator operands into canonical (sorted) order."""
    kids = tuple(canonicalize(c) for c in expr.children())
    if isinstance(expr, (Arith, Bool)) and expr.op in ("+", "*", "and", "or"):
        kids = tuple(sorted(kids, key=lambda e: e.canon_key))
        return Arith(expr.op, kids) if isinstance(expr, Arith) else Bool(expr.op, kids)
    if isinstance(expr, Rel) and expr.op == "=":
        left, right = sorted(kids, key=lambda e: e.canon_key)
        return Rel("=", left, right)
    return rebuild(expr, kids)


# ---------------------------------------------------------------------------
# Evaluation over one row.

_REL_FUNCS: dict[str, Callable[[float, float], bool]] = {
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    "=": lambda a, b: a == b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


def _eval(node: Expr, row: Mapping[str, Any], pos: Position, visited: set[Position] | None):
    if visited is not None:
        visited.add(pos)
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        try:
            v = row[node.name]
        except KeyError:
            raise InputSchemaError(f"row does not define feature {node.name!r}") from None
        return bool(v) if node.is_bool else float(v)
    if isinstance(node, Arith):
        if node.op == "+" or node.op == "*":
            acc = _eval(node.operands[0], row, pos + (0,), visited)
            for i, child in enumerate(node.operands[1:], start=1):
                v = _eval(child, row, pos + (i,), visited)
                acc = acc + v if node.op == "+" else acc * v
            return acc
        left = _eval(node.operands[0], row, pos + (0,), visited)
        right = _eval(node.operands[1], row, pos + (1,), visited)
        if node.op == "-":
            return left - right
        if right == 0.0:
            raise EvaluationError(
                f"division by zero at position {format_position(pos)!r}", pos
            )
        return left / right
    if isinstance(node, Rel):
        left = _eval(node.left, row, pos + (0,), visited)
        right = _eval(node.right, row, pos + (1,), visited)
        return _REL_FUNCS[node.op](left, right)
    if isinstance(node, Bool):
        if node.op == "not":
            return not _eval(node.operands[0], row, pos + (0,), visited)
        stop = node.op == "or"  # short-circuit value
        for i, child in enumerate(node.operands):
            if _eval(child, row, pos + (i,), visited) == stop:
                return stop
        return not stop
    if isinstance(node, IfThenElse):
        if _eval(node.guard, row, pos + (0,), visited):
            return _eval(node.then, row, pos + (1,), visited)
        return _eval(node.orelse, row, pos + (2,), visited)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(expr: Expr, row: Mapping[str, Any]) -> float | bool:
    """Evaluate a program on one row (a mapping from feature name to value).

    Boolean connectives short-circuit left to right and if-then-else
    evaluates only the taken branch, so errors in unreached subtrees do
    not surface. Division by zero raises EvaluationError carrying the
    position of the division node.
    """
    return _eval(expr, row, (), None)


def reaches(expr: Expr, pos: Position, row: Mapping[str, Any]) -> bool:
    """Whether evaluating ``expr`` on ``row`` requires evaluating the node at ``pos``."""
    subexpr_at(expr, pos)  # raise PositionError for unknown positions
    visited: set[Position] = set()
    _eval(expr, row, (), visited)
    return pos in visited


def substitute(replacement: Expr, name: str, context: Expr) -> Expr:
    """Replace every occurrence of variable ``name`` in ``context`` by ``replacement``.

    Splicing goes through the construction rules, so chains re-flatten and
    a type mismatch between the replacement and an occurrence raises
    TypingError.
    """

    def go(node: Expr) -> Expr:
        if isinstance(node, Var) and node.name == name:
            if replacement.type != node.type:
                raise TypingError(
                    f"cannot substitute {node.type} occurrence of {name!r} "
                    f"with a {replacement.type} expression"
                )
            return replacement
        kids = tuple(go(c) for c in node.children())
        return node if not kids else rebuild(node, kids)

    return go(context)


# ---------------------------------------------------------------------------
# Rendering and the JSON exchange format.


def _fmt_value(v: float | bool) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v)


def to_text(expr: Expr) -> str:
    """Deterministic human-readable rendering used in reports and witnesses."""
    if isinstance(expr, Const):
        return _fmt_value(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Arith):
        joined = f" {expr.op} ".join(to_text(c) for c in expr.operands)
        return f"({joined})"
    if isinstance(expr, Rel):
        return f"({to_text(expr.left)} {expr.op} {to_text(expr.right)})"
    if isinstance(expr, Bool):
        if expr.op == "not":
            return f"(not {to_text(expr.operands[0])})"
        joined = f" {expr.op} ".join(to_text(c) for c in expr.operands)
        return f"({joined})"
    if isinstance(expr, IfThenElse):
        return (
            f"(if {to_text(expr.guard)} then {to_text(expr.then)} "
            f"else {to_text(expr.orelse)})"
        )
    raise TypeError(f"not an expression node: {expr!r}")


def to_json_dict(expr: Expr) -> dict[str, Any]:
    if isinstance(expr, Const):
        return {"kind": "const", "value": expr.value}
    if isinstance(expr, Var):
        return {"kind": "var", "name": expr.name}
    if isinstance(expr, Arith):
        return {
            "kind": "arith",
            "op": expr.op,
            "operands": [to_json_dict(c) for c in expr.operands],
        }
    if isinstance(expr, Rel):
        return {
            "kind": "rel",
            "op": expr.op,
            "left": to_json_dict(expr.left),
            "right": to_json_dict(expr.right),
        }
    if isinstance(expr, Bool):
        return {
            "kind": "bool",
            "op": expr.op,
            "operands": [to_json_dict(c) for c in expr.operands],
        }
    if isinstance(expr, IfThenElse):
        return {
            "kind": "ite",
            "guard": to_json_dict(expr.guard),
            "then": to_json_dict(expr.then),
            "else": to_json_dict(expr.orelse),
        }
    raise TypeError(f"not an expression node: {expr!r}")


def _require(d: dict, key: str, where: str) -> Any:
    if key not in d:
        raise ModelSchemaError(f"{where}: missing field {key!r}")
    return d[key]


def from_json_dict(d: Any) -> Expr:
    if not isinstance(d, dict):
        raise ModelSchemaError(f"expression node must be an object, got {type(d).__name__}")
    kind = _require(d, "kind", "expression node")
    if kind == "const":
        value = _require(d, "value", "const node")
        if not isinstance(value, (bool, int, float)):
            raise ModelSchemaError("const node: value must be a number or boolean")
        return Const(value)
    if kind == "var":
        name = _require(d, "name", "var node")
        if not isinstance(name, str) or not name:
            raise ModelSchemaError("var node: name must be a non-empty string")
        return Var(name)
    if kind == "arith":
        op = _require(d, "op", "arith node")
        if op not in ARITH_OPS:
            raise ModelSchemaError(f"arith node: unknown operator {op!r}")
        operands = _require(d, "operands", "arith node")
        if not isinstance(operands, list):
            raise ModelSchemaError("arith node: operands must be an array")
        kids = tuple(from_json_dict(c) for c in operands)
        if op in ("+", "*"):
            if len(kids) < 2:
                raise ModelSchemaError(f"arith node: {op!r} needs at least two operands")
            return _chain(op, kids)
        if len(kids) != 2:
            raise ModelSchemaError(f"arith node: {op!r} takes exactly two operands")
        return Arith(op, kids)
    if kind == "rel":
        op = _require(d, "op", "rel node")
        if op not in REL_OPS:
            raise ModelSchemaError(f"rel node: unknown operator {op!r}")
        return Rel(op, from_json_dict(_require(d, "left", "rel node")),
                   from_json_dict(_require(d, "right", "rel node")))
    if kind == "bool":
        op = _require(d, "op", "bool node")
        if op not in BOOL_OPS:
            raise ModelSchemaError(f"bool node: unknown operator {op!r}")
        operands = _require(d, "operands", "bool node")
        if not isinstance(operands, list):
            raise ModelSchemaError("bool node: operands must be an array")
        return Bool(op, tuple(from_json_dict(c) for c in operands))
    if kind == "ite":
        return IfThenElse(
            from_json_dict(_require(d, "guard", "ite node")),
            from_json_dict(_require(d, "then", "ite node")),
            from_json_dict(_require(d, "else", "ite node")),
        )
    raise ModelSchemaError(f"unknown expression kind {kind!r}")


def dumps(expr: Expr, indent: int | None = None) -> str:
    return json.dumps(to_json_dict(expr), indent=indent, sort_keys=True)


def loads(text: str) -> Expr:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSchemaError(f"model is not valid JSON: {exc}") from exc
    return from_json_dict(data)


def program_digest(expr: Expr) -> str:
    """Stable content digest of a program; changes iff the tree changes."""
    from .util import canonical_json, sha256_hex

    return sha256_hex(canonical_json(to_json_dict(expr)))
