"""Builders that bring common model shapes into the expression language.

Supported sources: nested decision-tree dictionaries, the indented
text rendering of trees (one ``|---`` node per line), linear threshold
models, ordered rule lists, and a small built-in CART learner for
producing audit subjects from raw data. All importers produce ordinary
expressions; nothing here is remembered by the audit itself.
"""

from __future__ import annotations

import re
from typing import Any, Sequence

import numpy as np

from .dataset import Dataset
from .errors import DatasetError, ModelSchemaError
from .expr import (
    Const,
    Expr,
    add,
    const,
    from_json_dict,
    ite,
    le,
    mul,
    var,
)


def from_decision_tree(tree: Any) -> Expr:
    """Convert ``{"feature", "threshold", "left", "right"}`` / ``{"leaf"}`` nests.

    Internal nodes test ``feature <= threshold``; ``left`` is the branch
    taken when the test holds.
    """
    if not isinstance(tree, dict):
        raise ModelSchemaError("decision tree node must be an object")
    if "leaf" in tree:
        extra = set(tree) - {"leaf"}
        if extra:
            raise ModelSchemaError(f"leaf node has unexpected fields {sorted(extra)}")
        value = tree["leaf"]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ModelSchemaError("leaf value must be a number")
        return const(float(value))
    missing = {"feature", "threshold", "left", "right"} - set(tree)
    if missing:
        raise ModelSchemaError(f"tree node missing fields {sorted(missing)}")
    extra = set(tree) - {"feature", "threshold", "left", "right"}
    if extra:
        raise ModelSchemaError(f"tree node has unexpected fields {sorted(extra)}")
    name = tree["feature"]
    threshold = tree["threshold"]
    if not isinstance(name, str) or not name:
        raise ModelSchemaError("tree node feature must be a non-empty string")
    if isinstance(threshold, bool) or not isinstance(threshold, (int, float)):
        raise ModelSchemaError("tree node threshold must be a number")
    return ite(
        le(var(name), const(float(threshold))),
        from_decision_tree(tree["left"]),
        from_decision_tree(tree["right"]),
    )


def from_linear_model(
    weights: dict[str, float], intercept: float, threshold: float = 0.0
) -> Expr:
    """Threshold model: 1.0 when ``intercept + sum(w * x)`` exceeds ``threshold``."""
    terms: list[Expr] = [const(float(intercept))]
    for name in weights:
        terms.append(mul(const(float(weights[name])), var(name)))
    score = terms[0] if len(terms) == 1 else add(*terms)
    return ite(le(score, const(float(threshold))), const(0.0), const(1.0))


def from_rule_list(
    rules: Sequence[tuple[Any, float]], default: float
) -> Expr:
    """Ordered rules: first condition that fires decides the output.

    Conditions may be expressions or their JSON forms.
    """
    program: Expr = const(float(default))
    for condition, value in reversed(list(rules)):
        guard = condition if isinstance(condition, Expr) else from_json_dict(condition)
        if guard.type != "bool":
            raise ModelSchemaError(f"rule condition must be boolean: {guard!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ModelSchemaError("rule output must be a number")
        program = ite(guard, const(float(value)), program)
    return program


_NODE_RE = re.compile(r"^((?:\|   )*)\|--- (.+)$")
_SPLIT_RE = re.compile(r"^(.+?)\s*(<=|>)\s*([-+0-9.eE]+)$")
_LEAF_RE = re.compile(r"^(?:class|value):\s*\[?\s*([-+0-9.eE]+)\s*\]?$")


def parse_tree_text(text: str) -> Expr:
    """Parse the indented one-node-per-line tree rendering."""
    entries: list[tuple[int, str]] = []
    for raw in text.splitlines():
        if not raw.strip():
            continue
        m = _NODE_RE.match(raw)
        if not m:
            raise ModelSchemaError(f"unrecognized tree line: {raw!r}")
        entries.append((len(m.group(1)) // 4, m.group(2).strip()))
    if not entries:
        raise ModelSchemaError("tree text has no nodes")

    pos = 0

    def parse(depth: int) -> Expr:
        nonlocal pos
        if pos >= len(entries):
            raise ModelSchemaError("tree text ended unexpectedly")
        d, label = entries[pos]
        if d != depth:
            raise ModelSchemaError(f"unexpected indentation at {label!r}")
        leaf = _LEAF_RE.match(label)
        if leaf:
            pos += 1
            return const(float(leaf.group(1)))
        split = _SPLIT_RE.match(label)
        if not split or split.group(2) != "<=":
            raise ModelSchemaError(f"expected a '<=' split, got {label!r}")
        name, threshold = split.group(1).strip(), float(split.group(3))
        pos += 1
        left = parse(depth + 1)
        if pos >= len(entries):
            raise ModelSchemaError(f"missing '>' sibling for {name!r}")
        d2, label2 = entries[pos]
        sibling = _SPLIT_RE.match(label2)
        if d2 != depth or not sibling or sibling.group(2) != ">" or sibling.group(1).strip() != name:
            raise ModelSchemaError(f"missing '>' sibling for {name!r}")
        pos += 1
        right = parse(depth + 1)
        return ite(le(var(name), const(threshold)), left, right)

    tree = parse(0)
    if pos != len(entries):
        raise ModelSchemaError("trailing tree lines after the root subtree")
    return tree


# ---------------------------------------------------------------------------
# Built-in CART learner (deterministic; used to produce audit subjects).

_MAX_THRESHOLDS = 32


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - (p * p).sum())


def _majority(y: np.ndarray) -> float:
    values, counts = np.unique(y, return_counts=True)
    return float(values[np.argmax(counts)])


def _candidate_thresholds(column: np.ndarray) -> np.ndarray:
    uniq = np.unique(column)
    if uniq.size < 2:
        return np.empty(0)
    mids = (uniq[:-1] + uniq[1:]) / 2.0
    if mids.size > _MAX_THRESHOLDS:
        pick = np.linspace(0, mids.size - 1, _MAX_THRESHOLDS).round().astype(int)
        mids = mids[np.unique(pick)]
    return mids


def train_cart(
    data: Dataset,
    label: str,
    features: Sequence[str] | None = None,
    max_depth: int = 5,
    min_leaf: int = 1,
) -> dict[str, Any]:
    """Fit a Gini decision tree on the analysis subset.

    Deterministic: features are scanned in the given order, thresholds
    ascending, and ties keep the first candidate. Returns the nested
    dictionary form accepted by ``from_decision_tree``.
    """
    if features is None:
        features = [c for c in data.columns if c != label]
    for name in features:
        data.column_index(name)
    if label in features:
        raise DatasetError("label column cannot be a model feature")
    table = data.analysis_table
    x = table[:, [data.column_index(f) for f in features]]
    y = table[:, data.column_index(label)]

    def grow(rows: np.ndarray, depth: int) -> dict[str, Any]:
        sub_y = y[rows]
        classes, counts = np.unique(sub_y, return_counts=True)
        if depth >= max_depth or classes.size == 1 or rows.size < 2 * min_leaf:
            return {"leaf": _majority(sub_y)}
        parent_impurity = _gini(counts)
        best: tuple[float, int, float] | None = None
        for j in range(len(features)):
            column = x[rows, j]
            for threshold in _candidate_thresholds(column):
                mask = column <= threshold
                n_left = int(mask.sum())
                if n_left < min_leaf or rows.size - n_left < min_leaf:
                    continue
                _, lc = np.unique(sub_y[mask], return_counts=True)
                _, rc = np.unique(sub_y[~mask], return_counts=True)
                impurity = (
                    n_left * _gini(lc) + (rows.size - n_left) * _gini(rc)
                ) / rows.size
                if best is None or impurity < best[0] - 1e-12:
                    best = (impurity, j, float(threshold))
        if best is None or best[0] >= parent_impurity - 1e-12:
            return {"leaf": _majority(sub_y)}
        _, j, threshold = best
        column = x[rows, j]
        mask = column <= threshold
        return {
            "feature": features[j],
            "threshold": threshold,
            "left": grow(rows[mask], depth + 1),
            "right": grow(rows[~mask], depth + 1),
        }

    return grow(np.arange(table.shape[0]), 0)
