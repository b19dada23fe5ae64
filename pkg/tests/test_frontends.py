"""Model importers: tree dicts, tree text, linear models, rule lists, CART."""

from __future__ import annotations

import numpy as np
import pytest

from proxyaudit.dataset import dataset_from_arrays
from proxyaudit.errors import DatasetError, ModelSchemaError
from proxyaudit.expr import add, const, evaluate, gt, ite, le, mul, to_json_dict, var
from proxyaudit.frontends import (
    from_decision_tree,
    from_linear_model,
    from_rule_list,
    parse_tree_text,
    train_cart,
)

TREE = {
    "feature": "age",
    "threshold": 30,
    "left": {"leaf": 1},
    "right": {
        "feature": "hours",
        "threshold": 12.5,
        "left": {"leaf": 0},
        "right": {"leaf": 1},
    },
}


def tree_predict(tree, row):
    while "leaf" not in tree:
        tree = tree["left"] if row[tree["feature"]] <= tree["threshold"] else tree["right"]
    return float(tree["leaf"])


# ---------------------------------------------------------------------------
# from_decision_tree
# ---------------------------------------------------------------------------


def test_decision_tree_import_golden():
    expr = from_decision_tree(TREE)
    expected = ite(
        le(var("age"), const(30.0)),
        const(1.0),
        ite(le(var("hours"), const(12.5)), const(0.0), const(1.0)),
    )
    assert expr == expected


def test_decision_tree_import_matches_dict_walk():
    expr = from_decision_tree(TREE)
    for age in (10.0, 30.0, 31.0, 80.0):
        for hours in (0.0, 12.5, 13.0):
            row = {"age": age, "hours": hours}
            assert evaluate(expr, row) == tree_predict(TREE, row)


@pytest.mark.parametrize(
    "bad",
    [
        "not a dict",
        {"leaf": 1, "feature": "x"},  # leaf with extra fields
        {"leaf": True},  # leaf must be numeric, not boolean
        {"leaf": "one"},
        {"feature": "x", "threshold": 1.0, "left": {"leaf": 0}},  # right missing
        {
            "feature": "",
            "threshold": 1.0,
            "left": {"leaf": 0},
            "right": {"leaf": 1},
        },
        {
            "feature": "x",
            "threshold": True,
            "left": {"leaf": 0},
            "right": {"leaf": 1},
        },
        {
            "feature": "x",
            "threshold": 1.0,
            "left": {"leaf": 0},
            "right": {"leaf": 1},
            "gain": 0.3,
        },
    ],
)
def test_decision_tree_import_rejects_malformed(bad):
    with pytest.raises(ModelSchemaError):
        from_decision_tree(bad)


# ---------------------------------------------------------------------------
# from_linear_model
# ---------------------------------------------------------------------------


def test_linear_model_golden():
    expr = from_linear_model({"a": 2.0, "b": -1.0}, intercept=0.5)
    score = add(const(0.5), mul(const(2.0), var("a")), mul(const(-1.0), var("b")))
    assert expr == ite(le(score, const(0.0)), const(0.0), const(1.0))


def test_linear_model_semantics():
    expr = from_linear_model({"a": 2.0, "b": -1.0}, intercept=0.5, threshold=1.0)
    for a, b in [(0.0, 0.0), (1.0, 0.0), (0.25, 0.0), (2.0, 3.5)]:
        score = 0.5 + 2.0 * a - b
        assert evaluate(expr, {"a": a, "b": b}) == (1.0 if score > 1.0 else 0.0)


def test_linear_model_intercept_only():
    always = from_linear_model({}, intercept=1.0)
    never = from_linear_model({}, intercept=-1.0)
    assert evaluate(always, {}) == 1.0
    assert evaluate(never, {}) == 0.0


# ---------------------------------------------------------------------------
# from_rule_list
# ---------------------------------------------------------------------------


def test_rule_list_golden_first_match_wins():
    rules = [
        (gt(var("a"), const(1.0)), 5.0),
        (le(var("b"), const(0.0)), 2.0),
    ]
    expr = from_rule_list(rules, default=7.0)
    expected = ite(
        gt(var("a"), const(1.0)),
        const(5.0),
        ite(le(var("b"), const(0.0)), const(2.0), const(7.0)),
    )
    assert expr == expected
    assert evaluate(expr, {"a": 2.0, "b": -1.0}) == 5.0  # first rule shadows second
    assert evaluate(expr, {"a": 0.0, "b": -1.0}) == 2.0
    assert evaluate(expr, {"a": 0.0, "b": 1.0}) == 7.0


def test_rule_list_accepts_json_conditions():
    rules = [(to_json_dict(gt(var("a"), const(1.0))), 5.0)]
    assert from_rule_list(rules, default=0.0) == from_rule_list(
        [(gt(var("a"), const(1.0)), 5.0)], default=0.0
    )


def test_rule_list_validates_inputs():
    assert from_rule_list([], default=3.0) == const(3.0)
    with pytest.raises(ModelSchemaError):
        from_rule_list([(add(var("a"), const(1.0)), 5.0)], default=0.0)
    with pytest.raises(ModelSchemaError):
        from_rule_list([(gt(var("a"), const(1.0)), True)], default=0.0)


# ---------------------------------------------------------------------------
# parse_tree_text
# ---------------------------------------------------------------------------

TREE_TEXT = """\
|--- age <= 30.50
|   |--- class: 1
|--- age >  30.50
|   |--- hours <= 12.50
|   |   |--- value: [0]
|   |--- hours >  12.50
|   |   |--- class: 1
"""


def test_parse_tree_text_golden():
    expr = parse_tree_text(TREE_TEXT)
    expected = ite(
        le(var("age"), const(30.5)),
        const(1.0),
        ite(le(var("hours"), const(12.5)), const(0.0), const(1.0)),
    )
    assert expr == expected


@pytest.mark.parametrize(
    "bad",
    [
        "",
        "age <= 30\n",  # no |--- marker
        "|--- age <= 30.5\n|   |--- class: 1\n",  # missing '>' sibling
        # sibling tests a different feature
        "|--- age <= 30.5\n|   |--- class: 1\n|--- hours >  30.5\n|   |--- class: 0\n",
        # sibling at the wrong depth
        "|--- age <= 30.5\n|   |--- class: 1\n|   |--- age >  30.5\n|   |--- class: 0\n",
        # trailing content after the root subtree
        TREE_TEXT + "|--- age <= 99.0\n",
        "|--- mystery\n",
    ],
)
def test_parse_tree_text_rejects_malformed(bad):
    with pytest.raises(ModelSchemaError):
        parse_tree_text(bad)


# ---------------------------------------------------------------------------
# train_cart
# ---------------------------------------------------------------------------


def _training_data():
    rows = []
    for i in range(40):
        a = float(i % 4)
        b = float(i % 3)
        y = 1.0 if a >= 2.0 else 0.0
        rows.append([a, b, y])
    return dataset_from_arrays(("a", "b", "y"), np.array(rows), seed=0)


def test_train_cart_learns_a_separable_split():
    data = _training_data()
    tree = train_cart(data, "y")
    assert tree["feature"] == "a"
    assert tree["threshold"] == 1.5
    assert tree["left"] == {"leaf": 0.0}
    assert tree["right"] == {"leaf": 1.0}


def test_train_cart_is_deterministic_and_consistent_with_import():
    data = _training_data()
    tree = train_cart(data, "y")
    assert tree == train_cart(data, "y")
    expr = from_decision_tree(tree)
    for row_values in data.analysis_table:
        row = dict(zip(data.columns, row_values))
        assert evaluate(expr, row) == tree_predict(tree, row)
        assert evaluate(expr, row) == row["y"]  # separable: perfect fit


def test_train_cart_depth_and_leaf_limits():
    data = _training_data()
    assert train_cart(data, "y", max_depth=0) == {"leaf": 0.0}  # majority class
    assert train_cart(data, "y", min_leaf=1000) == {"leaf": 0.0}


def test_train_cart_validates_features():
    data = _training_data()
    with pytest.raises(DatasetError):
        train_cart(data, "y", features=["a", "y"])
    with pytest.raises(DatasetError):
        train_cart(data, "y", features=["nope"])
