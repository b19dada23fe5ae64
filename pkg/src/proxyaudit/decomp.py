"""Decompositions: ways of cutting a subprogram out of a program.

A decomposition fixes a subprogram p1, the set of positions it is cut
from, and the context p2 (the program with a fresh hole variable at the
cut positions), such that substituting p1 back into p2 reproduces the
program up to commutative operand order.

Two families are enumerated: occurrence subsets (a structurally
identical subtree removed at any non-empty subset of its occurrences)
and chain subsets (two or more operands of a flattened ``+``/``*``
chain removed together as one sub-chain). Trivial constant subprograms
are not candidates, but the whole program cut at the root is.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, Sequence

from .errors import PositionError
from .expr import (
    HOLE,
    Arith,
    Const,
    Expr,
    IfThenElse,
    Position,
    Var,
    format_position,
    preorder,
    replace_at,
    structurally_equal,
    subexpr_at,
)

OCCURRENCE = "occurrence"
CHAIN_SUBSET = "chain_subset"


@dataclass(frozen=True)
class EnumerationCaps:
    """Blowup guards for decomposition enumeration.

    A subtree with more than ``max_occurrences`` structurally identical
    occurrences contributes only the all-occurrences subset and each
    singleton; a chain longer than ``max_chain`` contributes only its
    contiguous operand pairs.
    """

    max_occurrences: int = 12
    max_chain: int = 8

    def __post_init__(self) -> None:
        if self.max_occurrences < 1 or self.max_chain < 3:
            raise ValueError("caps too small to enumerate anything useful")


@dataclass(frozen=True)
class Decomposition:
    program: Expr
    subprogram: Expr
    hole_positions: tuple[Position, ...]
    context: Expr
    kind: str = OCCURRENCE

    @property
    def node_path(self) -> str:
        return format_position(self.hole_positions[0])

    @property
    def parent_path(self) -> str:
        first = self.hole_positions[0]
        return format_position(first[:-1]) if first else "-"

    def sort_key(self) -> tuple:
        return (self.hole_positions[0], self.hole_positions, self.subprogram.canon_key)


@dataclass(frozen=True)
class DecompositionSet(Sequence):
    items: tuple[Decomposition, ...]
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def __iter__(self) -> Iterator[Decomposition]:
        return iter(self.items)


def _hole_var(subprogram: Expr) -> Var:
    return Var(HOLE, is_bool=subprogram.type == "bool")


def make_context(program: Expr, holes: Sequence[Position], subprogram: Expr) -> Expr:
    hole = _hole_var(subprogram)
    return replace_at(program, {pos: hole for pos in holes})


def occurrence_decomposition(program: Expr, holes: Sequence[Position]) -> Decomposition:
    """Build the occurrence decomposition cutting the given positions.

    The positions must hold structurally identical, non-constant
    subtrees; the representative subprogram is the one at the first
    position.
    """
    ordered = tuple(sorted(holes))
    if not ordered:
        raise PositionError("a decomposition needs at least one hole position")
    rep = subexpr_at(program, ordered[0])
    for pos in ordered[1:]:
        other = subexpr_at(program, pos)
        if not structurally_equal(rep, other):
            raise PositionError(
                f"positions {format_position(ordered[0])} and {format_position(pos)} "
                "hold different subprograms"
            )
    return Decomposition(program, rep, ordered, make_context(program, ordered, rep), OCCURRENCE)


def chain_subset_decomposition(
    program: Expr, chain_pos: Position, indices: Sequence[int]
) -> Decomposition:
    """Cut a subset of a flattened chain's operands out as one sub-chain."""
    node = subexpr_at(program, chain_pos)
    if not (isinstance(node, Arith) and node.op in ("+", "*")):
        raise PositionError(f"no chain at position {format_position(chain_pos)!r}")
    chosen = sorted(set(indices))
    if not 2 <= len(chosen) <= len(node.operands) - 1:
        raise PositionError("chain subset must leave at least one operand behind")
    if chosen[0] < 0 or chosen[-1] >= len(node.operands):
        raise PositionError("chain subset index out of range")
    picked = sorted((node.operands[i] for i in chosen), key=lambda e: e.canon_key)
    subprogram = Arith(node.op, tuple(picked))
    hole = _hole_var(subprogram)
    remaining = [
        hole if i == chosen[0] else op
        for i, op in enumerate(node.operands)
        if i == chosen[0] or i not in chosen
    ]
    context = replace_at(program, {chain_pos: Arith(node.op, tuple(remaining))})
    holes = tuple(chain_pos + (i,) for i in chosen)
    return Decomposition(program, subprogram, holes, context, CHAIN_SUBSET)


def decomposition_from_holes(
    program: Expr, holes: Sequence[Position], kind: str
) -> Decomposition:
    """Rebuild a decomposition from its hole positions (checkpoint/replay path)."""
    if kind == OCCURRENCE:
        return occurrence_decomposition(program, holes)
    if kind == CHAIN_SUBSET:
        parents = {pos[:-1] for pos in holes}
        if len(parents) != 1:
            raise PositionError("chain subset holes must share one chain node")
        (chain_pos,) = parents
        return chain_subset_decomposition(program, chain_pos, [pos[-1] for pos in holes])
    raise PositionError(f"unknown decomposition kind {kind!r}")


def _occurrence_groups(program: Expr) -> dict[tuple, list[Position]]:
    groups: dict[tuple, list[Position]] = {}
    for pos, node in preorder(program):
        if isinstance(node, Const):
            continue
        groups.setdefault(node.canon_key, []).append(pos)
    return groups


def enumerate_decompositions(
    program: Expr, caps: EnumerationCaps = EnumerationCaps()
) -> DecompositionSet:
    """Enumerate candidate decompositions of ``program`` in deterministic order.

    The order is by first hole position, then full hole-position tuple,
    then subprogram identity. ``truncated`` is set when any cap cuts the
    enumeration short.
    """
    decs: list[Decomposition] = []
    truncated = False

    for _, positions in _occurrence_groups(program).items():
        m = len(positions)
        if m <= caps.max_occurrences:
            subsets: Iterator[tuple[Position, ...]] = (
                s for size in range(1, m + 1) for s in combinations(positions, size)
            )
        else:
            truncated = True
            singles = [(p,) for p in positions]
            subsets = iter([tuple(positions)] + singles)
        for subset in subsets:
            decs.append(occurrence_decomposition(program, subset))

    for pos, node in preorder(program):
        if not (isinstance(node, Arith) and node.op in ("+", "*")):
            continue
        k = len(node.operands)
        if k <= caps.max_chain:
            index_sets: Iterator[Sequence[int]] = (
                s for size in range(2, k) for s in combinations(range(k), size)
            )
        else:
            truncated = True
            index_sets = iter([(i, i + 1) for i in range(k - 1)])
        for indices in index_sets:
            decs.append(chain_subset_decomposition(program, pos, indices))

    decs.sort(key=Decomposition.sort_key)
    return DecompositionSet(tuple(decs), truncated)


def _is_guard_hole(program: Expr, pos: Position) -> bool:
    if not pos or pos[-1] != 0:
        return False
    return isinstance(subexpr_at(program, pos[:-1]), IfThenElse)


def local_expressions(program: Expr, dec: Decomposition) -> list[Decomposition]:
    """Enumerate the local decompositions a repair may replace by a constant.

    These are: the cut subprogram itself, each of its non-constant
    sub-expressions (cut at the corresponding offset inside every hole),
    and, when a hole sits in guard position of an if-then-else, each
    non-constant sub-expression of that hole's branches.
    """
    locals_: list[Decomposition] = []

    if dec.kind == CHAIN_SUBSET:
        locals_.append(dec)
        for hole in dec.hole_positions:
            operand = subexpr_at(program, hole)
            for rel_pos, sub in preorder(operand):
                if isinstance(sub, Const):
                    continue
                locals_.append(occurrence_decomposition(program, (hole + rel_pos,)))
        return locals_

    rep = dec.subprogram
    for rel_pos, sub in preorder(rep):
        if isinstance(sub, Const):
            continue
        holes = tuple(h + rel_pos for h in dec.hole_positions)
        try:
            locals_.append(occurrence_decomposition(program, holes))
        except PositionError:
            # Structurally identical holes can still disagree at a fixed
            # offset when commutative operands are ordered differently;
            # such offsets are not jointly replaceable, so skip them.
            continue

    for hole in dec.hole_positions:
        if not _is_guard_hole(program, hole):
            continue
        parent = hole[:-1]
        for branch_index in (1, 2):
            branch_pos = parent + (branch_index,)
            branch = subexpr_at(program, branch_pos)
            for rel_pos, sub in preorder(branch):
                if isinstance(sub, Const):
                    continue
                locals_.append(occurrence_decomposition(program, (branch_pos + rel_pos,)))

    return locals_
