"""Deterministic fixture generators used by tests, benchmarks, and docs.

Three scenario families:

* **masked redlining** — a loan model that branches on a zip-code guard
  perfectly aligned with a protected race column while its final output
  is engineered to show almost no association. The canonical
  demonstration that output-level checks miss intermediate proxies.
* **promotion exams** — a 118-row reconstruction of a two-position
  promotion exam: a position-rooted decision tree over a combined score
  whose subtrees are each more associated with minority status than the
  whole tree is. Counts per position/race/outcome band follow the
  public record of the case this models; individual scores are
  synthetic, so tests assert the ordering property rather than exact
  association values.
* **income/loan scenario** — a ~4,000-row synthetic income dataset
  whose `relationship` codes correlate with a withheld `gender` column,
  for end-to-end detect-then-repair runs on a tree trained in-package.

Plus a corpus generator producing small random expression programs over
a 200-row dataset for soundness/completeness sweeps against the
brute-force reference pipeline.

Run ``python3 -m proxyaudit.fixtures OUTDIR`` to materialize CSV/JSON
files for CLI use.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from .dataset import Dataset, dataset_from_arrays
from .expr import (
    Const,
    Expr,
    add,
    and_,
    const,
    dumps,
    eq,
    evaluate,
    ge,
    gt,
    ite,
    le,
    lt,
    mul,
    not_,
    or_,
    sub,
    var,
)

# ---------------------------------------------------------------------------
# masked redlining
# ---------------------------------------------------------------------------


def masked_redlining_model() -> Expr:
    """Loan decision keyed on a zip-code guard, output-masked by design.

    Zips 0 and 1 are the protected-race zips. Inside the guard the
    decision contradicts `interest`; outside it follows `interest`.
    Since `interest` is independent of zip, the output looks balanced
    while the guard itself is a perfect race proxy.
    """
    guard = or_(eq(var("zip"), const(0.0)), eq(var("zip"), const(1.0)))
    follow = ite(gt(var("interest"), const(0.5)), const(1.0), const(0.0))
    contra = ite(gt(var("interest"), const(0.5)), const(0.0), const(1.0))
    return ite(guard, contra, follow)


def masked_redlining_table(
    seed: int = 7, repeats: int = 60
) -> tuple[tuple[str, ...], np.ndarray]:
    """Balanced population: 4 zips x 2 interest levels x `repeats` rows.

    race = 1 exactly when zip < 2, so d(zip-guard, race) = 1. The
    `decision` column replays the model so the fixture is
    self-contained for utility scoring.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for zip_code in range(4):
        for interest in (0.0, 1.0):
            for _ in range(repeats):
                jitter = float(np.round(rng.normal(0.0, 0.01), 6))
                rows.append((float(zip_code), interest + jitter))
    base = np.asarray(rows, dtype=np.float64)
    race = (base[:, 0] < 2).astype(np.float64)
    columns = ("zip", "interest", "race", "decision")
    model = masked_redlining_model()
    decision = np.array(
        [
            evaluate(model, {"zip": z, "interest": i})
            for z, i in zip(base[:, 0], base[:, 1])
        ],
        dtype=np.float64,
    )
    table = np.column_stack([base, race, decision])
    return columns, table


def masked_redlining_dataset(seed: int = 7, split_seed: int = 0, repeats: int = 60) -> Dataset:
    columns, table = masked_redlining_table(seed=seed, repeats=repeats)
    return dataset_from_arrays(columns, table, seed=split_seed)


# ---------------------------------------------------------------------------
# promotion exams (two positions, one combined score)
# ---------------------------------------------------------------------------

LIEUTENANT_CUT = 77.52
CAPTAIN_CUT = 80.68


def promotion_model() -> Expr:
    """Position-rooted eligibility tree with per-position score cuts."""
    return ite(
        eq(var("position"), const(0.0)),  # position code 0 = lieutenant
        ite(le(var("combine"), const(LIEUTENANT_CUT)), const(0.0), const(1.0)),
        ite(le(var("combine"), const(CAPTAIN_CUT)), const(0.0), const(1.0)),
    )


def _band(lo: float, hi: float, count: int) -> np.ndarray:
    return np.round(np.linspace(lo, hi, count), 2)


def promotion_exam_rows() -> tuple[tuple[str, ...], list[list[str]]]:
    """118 rows: position, race (minority collapsed), combined score.

    Aggregate pass/fail counts per position and race match the public
    record: 77 lieutenant candidates (34 passing, 25 non-minority) and
    41 captain candidates (22 passing, 16 non-minority; 9 above the
    captain cut, 2 of them minority). Individual scores are synthetic,
    spread so the two position cuts interleave: a few candidates of
    each position land between 77.52 and 80.68, which is what makes
    each position subtree a sharper minority signal than the whole
    tree when scored over the full population.
    """
    rows: list[tuple[str, str, float]] = []

    def emit(position: str, scores: np.ndarray, minority_at: set[int]) -> None:
        for i, score in enumerate(scores):
            race = "minority" if i in minority_at else "nonminority"
            rows.append((position, race, float(score)))

    # Lieutenant: 43 fail (25 minority), 22 pass below the cut
    # (6 minority), 4 in the 77.52-80.68 overlap (3 minority),
    # 8 clear of both cuts (0 minority).
    emit("lieutenant", _band(46.0, 69.5, 43), set(range(20)) | {21, 23, 25, 27, 29})
    emit("lieutenant", _band(70.1, 77.3, 22), {0, 1, 2, 3, 4, 6})
    emit("lieutenant", np.array([77.9, 78.6, 79.4, 80.1]), {0, 1, 2})
    emit("lieutenant", _band(80.9, 84.0, 8), set())
    # Captain: 19 fail (10 minority), 13 pass-below-cut (4 minority,
    # all below 77.52 so the overlap stays non-minority), 9 above the
    # cut (2 minority).
    emit("captain", _band(47.0, 69.2, 19), set(range(10)))
    emit("captain", _band(70.2, 80.3, 13), {0, 2, 4, 6})
    emit("captain", _band(81.0, 88.0, 9), {1, 4})

    header = ("position", "race", "combine")
    return header, [[p, r, repr(s)] for p, r, s in rows]


def promotion_dataset(split_seed: int = 0) -> Dataset:
    header, rows = promotion_exam_rows()
    position = np.array([0.0 if r[0] == "lieutenant" else 1.0 for r in rows])
    race = np.array([1.0 if r[1] == "minority" else 0.0 for r in rows])
    combine = np.array([float(r[2]) for r in rows])
    table = np.column_stack([position, race, combine])
    codebook = {
        "position": ("lieutenant", "captain"),
        "race": ("nonminority", "minority"),
    }
    return dataset_from_arrays(header, table, codebook=codebook, seed=split_seed)


# ---------------------------------------------------------------------------
# income/loan scenario
# ---------------------------------------------------------------------------

RELATIONSHIP_CODES = ("husband", "wife", "own_child", "not_in_family", "unmarried")


def income_scenario_table(
    seed: int = 29, n_rows: int = 4000
) -> tuple[tuple[str, ...], np.ndarray]:
    """Synthetic income data where `relationship` leaks `gender`.

    Married rows are `husband` (code 0) for men and `wife` (code 1) for
    women; the income-relevant married/unmarried distinction is gender
    neutral, but the husband/wife split inside it is a near-perfect
    gender proxy with a real income gap, so trained trees pick it up.
    The husband premium only applies in the mid-education band, which
    keeps education the dominant signal: trees lean on the proxy for a
    minority of rows, so a repair can neutralize it at a small utility
    cost. Relationship is stored as numeric codes so thresholds on it
    are stable; `gender` stays out of the feature set and is the
    protected column.
    """
    rng = np.random.default_rng(seed)
    male = rng.random(n_rows) < 0.5
    married = rng.random(n_rows) < 0.6
    relationship = np.where(
        married,
        np.where(male, 0.0, 1.0),
        rng.integers(2, 5, size=n_rows).astype(np.float64),
    )
    education = np.clip(np.round(rng.normal(10.0, 2.5, n_rows)), 1, 16)
    hours = np.clip(np.round(rng.normal(41.0, 9.0, n_rows)), 10, 80)
    age = np.clip(np.round(rng.normal(39.0, 12.0, n_rows)), 18, 80)
    gain = np.where(rng.random(n_rows) < 0.08, np.round(rng.gamma(2.0, 4000.0, n_rows)), 0.0)
    mid_education = (education >= 8) & (education <= 12)

    score = (
        0.4 * married
        + 0.9 * (relationship == 0.0) * mid_education
        + 0.5 * (education - 10.0)
        + 0.06 * (hours - 40.0)
        + 1.6 * (gain > 5000.0)
        - 0.5
    )
    prob = 1.0 / (1.0 + np.exp(-score))
    income = (rng.random(n_rows) < prob).astype(np.float64)
    gender = np.where(male, 1.0, 0.0)

    columns = ("age", "education_num", "hours_per_week", "relationship", "capital_gain", "gender", "income")
    table = np.column_stack([age, education, hours, relationship, gain, gender, income])
    return columns, np.ascontiguousarray(table)


def income_scenario_dataset(seed: int = 29, split_seed: int = 0, n_rows: int = 4000) -> Dataset:
    columns, table = income_scenario_table(seed=seed, n_rows=n_rows)
    codebook = {"gender": ("female", "male")}
    return dataset_from_arrays(columns, table, codebook=codebook, seed=split_seed)


INCOME_FEATURES = ("age", "education_num", "hours_per_week", "relationship", "capital_gain")


# ---------------------------------------------------------------------------
# random program corpus
# ---------------------------------------------------------------------------

CORPUS_FEATURES = ("x0", "x1", "x2", "x3")


def corpus_dataset(seed: int = 101, n_rows: int = 200) -> Dataset:
    """200-row table with a protected column correlated to x0.

    z mostly mirrors whether x0 is in its upper range, with 15% noise,
    so random programs that read x0 produce measurable associations
    without being degenerate.
    """
    rng = np.random.default_rng(seed)
    x0 = rng.integers(0, 4, n_rows).astype(np.float64)
    x1 = np.round(rng.normal(0.0, 1.0, n_rows), 4)
    x2 = rng.integers(0, 2, n_rows).astype(np.float64)
    x3 = rng.integers(0, 10, n_rows).astype(np.float64)
    noise = rng.random(n_rows) < 0.15
    z = ((x0 >= 2) ^ noise).astype(np.float64)
    table = np.column_stack([x0, x1, x2, x3, z])
    return dataset_from_arrays(CORPUS_FEATURES + ("z",), table, seed=seed)


def _random_numeric(rng: np.random.Generator, budget: int) -> Expr:
    if budget <= 1 or rng.random() < 0.3:
        if rng.random() < 0.5:
            return var(str(rng.choice(CORPUS_FEATURES)))
        return const(float(np.round(rng.uniform(-2.0, 4.0), 2)))
    choice = rng.random()
    if choice < 0.45:
        left = _random_numeric(rng, (budget - 1) // 2)
        right = _random_numeric(rng, (budget - 1) // 2)
        op = rng.choice(["+", "-", "*"])
        if op == "+":
            return add(left, right)
        if op == "-":
            return sub(left, right)
        return mul(left, right)
    if choice < 0.7:
        guard = _random_bool(rng, (budget - 1) // 3)
        then = _random_numeric(rng, (budget - 1) // 3)
        other = _random_numeric(rng, (budget - 1) // 3)
        return ite(guard, then, other)
    return _random_numeric(rng, budget - 1)


def _random_bool(rng: np.random.Generator, budget: int) -> Expr:
    if budget <= 3 or rng.random() < 0.5:
        left = _random_numeric(rng, max(1, (budget - 1) // 2))
        right = _random_numeric(rng, max(1, (budget - 1) // 2))
        op = rng.choice(["<=", "<", ">=", ">", "="])
        ctor = {"<=": le, "<": lt, ">=": ge, ">": gt, "=": eq}[op]
        return ctor(left, right)
    choice = rng.random()
    third = max(3, (budget - 1) // 2)
    if choice < 0.4:
        return and_(_random_bool(rng, third), _random_bool(rng, third))
    if choice < 0.8:
        return or_(_random_bool(rng, third), _random_bool(rng, third))
    return not_(_random_bool(rng, budget - 1))


def corpus_program(seed: int, max_nodes: int = 25) -> Expr:
    """One random program with <= max_nodes nodes reading the corpus features.

    Division is deliberately excluded: the corpus exercises enumeration
    and measurement, and partiality is covered by dedicated unit tests.
    """
    rng = np.random.default_rng(seed)
    for _ in range(64):
        program = (
            _random_numeric(rng, max_nodes)
            if rng.random() < 0.6
            else _random_bool(rng, max_nodes)
        )
        if program.node_count <= max_nodes and not isinstance(program, Const):
            return program
    raise AssertionError("could not generate a corpus program within budget")


def corpus_programs(count: int = 50, base_seed: int = 500, max_nodes: int = 25) -> list[Expr]:
    return [corpus_program(base_seed + i, max_nodes) for i in range(count)]


# ---------------------------------------------------------------------------
# file materialization
# ---------------------------------------------------------------------------


def _write_csv(path: Path, columns: tuple[str, ...], cells: list[list[str]]) -> None:
    lines = [",".join(columns)]
    lines.extend(",".join(row) for row in cells)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _numeric_csv(columns: tuple[str, ...], table: np.ndarray) -> list[list[str]]:
    return [[repr(float(v)) for v in row] for row in table]


def write_fixtures(out_dir: str | Path) -> dict[str, Path]:
    """Materialize every fixture as CSV + model JSON under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    columns, table = masked_redlining_table()
    path = out / "masked_data.csv"
    rows = _numeric_csv(columns, table)
    race_idx = columns.index("race")
    for row, raw in zip(rows, table):
        row[race_idx] = "protected" if raw[race_idx] == 1.0 else "other"
    _write_csv(path, columns, rows)
    written["masked_data"] = path
    path = out / "masked_model.json"
    path.write_text(dumps(masked_redlining_model(), indent=2) + "\n", encoding="utf-8")
    written["masked_model"] = path

    header, prows = promotion_exam_rows()
    path = out / "promotion_data.csv"
    _write_csv(path, header, prows)
    written["promotion_data"] = path
    path = out / "promotion_model.json"
    path.write_text(dumps(promotion_model(), indent=2) + "\n", encoding="utf-8")
    written["promotion_model"] = path

    columns, table = income_scenario_table()
    path = out / "income_data.csv"
    rows = _numeric_csv(columns, table)
    g_idx = columns.index("gender")
    for row, raw in zip(rows, table):
        row[g_idx] = "male" if raw[g_idx] == 1.0 else "female"
    _write_csv(path, columns, rows)
    written["income_data"] = path

    return written


def main(argv: list[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    out_dir = args[0] if args else "fixtures_out"
    written = write_fixtures(out_dir)
    for name, path in sorted(written.items()):
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
