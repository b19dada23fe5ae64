"""Tabular datasets: CSV loading, categorical coding, analysis/validation split.

CSV files are UTF-8 with a header row and ``.`` as the decimal mark. A
column whose values all parse as numbers becomes a float column; any
other column is categorical and its distinct strings are coded
0, 1, 2, ... in order of first appearance (the codebook keeps the
mapping). Missing cells are an error; no imputation happens here.

Rows are split once, at load time, into an analysis subset used for
measurement and a validation subset reserved for utility scoring. The
split is seeded and deterministic: two thirds analysis, one third
validation.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DatasetError
from .util import canonical_json, derive_seed

ANALYSIS_FRACTION = 2 / 3


def _split_indices(n_rows: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(derive_seed(seed, "dataset-split"))
    perm = rng.permutation(n_rows)
    n_analysis = int(np.ceil(n_rows * ANALYSIS_FRACTION))
    return np.sort(perm[:n_analysis]), np.sort(perm[n_analysis:])


@dataclass(frozen=True)
class Dataset:
    columns: tuple[str, ...]
    table: np.ndarray
    codebook: dict[str, tuple[str, ...]]
    analysis_indices: np.ndarray = field(repr=False)
    validation_indices: np.ndarray = field(repr=False)
    seed: int = 0

    @property
    def n_rows(self) -> int:
        return int(self.table.shape[0])

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise DatasetError(f"dataset has no column {name!r}") from None

    @cached_property
    def analysis_table(self) -> np.ndarray:
        return np.ascontiguousarray(self.table[self.analysis_indices])

    @cached_property
    def validation_table(self) -> np.ndarray:
        return np.ascontiguousarray(self.table[self.validation_indices])

    def subset_table(self, subset: str) -> np.ndarray:
        if subset == "analysis":
            return self.analysis_table
        if subset == "validation":
            return self.validation_table
        if subset == "all":
            return self.table
        raise ValueError(f"unknown subset {subset!r}")

    def column_values(self, name: str, subset: str = "analysis") -> np.ndarray:
        return self.subset_table(subset)[:, self.column_index(name)]

    def decode(self, name: str, code: float) -> str:
        """Human-readable value of a categorical cell; numbers pass through."""
        cats = self.codebook.get(name)
        if cats is None:
            return repr(float(code))
        i = int(code)
        if not 0 <= i < len(cats):
            return repr(float(code))
        return cats[i]

    @cached_property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(canonical_json(list(self.columns)).encode())
        h.update(canonical_json({k: list(v) for k, v in self.codebook.items()}).encode())
        h.update(np.ascontiguousarray(self.table).tobytes())
        return h.hexdigest()


def dataset_from_arrays(
    columns: tuple[str, ...] | list[str],
    table: np.ndarray,
    codebook: dict[str, tuple[str, ...]] | None = None,
    seed: int = 0,
) -> Dataset:
    table = np.ascontiguousarray(table, dtype=np.float64)
    if table.ndim != 2 or table.shape[1] != len(columns):
        raise DatasetError("table shape does not match the column list")
    if table.shape[0] == 0:
        raise DatasetError("dataset has no rows")
    analysis, validation = _split_indices(table.shape[0], seed)
    return Dataset(
        columns=tuple(columns),
        table=table,
        codebook=dict(codebook or {}),
        analysis_indices=analysis,
        validation_indices=validation,
        seed=seed,
    )


def with_column(data: Dataset, name: str, values: np.ndarray) -> Dataset:
    """New dataset with one appended column; the row split is preserved."""
    if name in data.columns:
        raise DatasetError(f"column {name!r} already exists")
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (data.n_rows,):
        raise DatasetError("appended column length does not match the row count")
    return Dataset(
        columns=data.columns + (name,),
        table=np.ascontiguousarray(np.column_stack([data.table, values])),
        codebook=dict(data.codebook),
        analysis_indices=data.analysis_indices,
        validation_indices=data.validation_indices,
        seed=data.seed,
    )


def _parse_csv(text: str, origin: str) -> tuple[tuple[str, ...], list[list[str]]]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetError(f"{origin}: file is empty") from None
    header = [h.strip() for h in header]
    if any(not h for h in header):
        raise DatasetError(f"{origin}: blank column name in header")
    if len(set(header)) != len(header):
        raise DatasetError(f"{origin}: duplicate column names in header")
    rows: list[list[str]] = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DatasetError(
                f"{origin}: line {line_no} has {len(row)} cells, expected {len(header)}"
            )
        rows.append([cell.strip() for cell in row])
    if not rows:
        raise DatasetError(f"{origin}: no data rows")
    return tuple(header), rows


def load_dataset(path: str | Path, seed: int = 0) -> Dataset:
    """Load a CSV file and split it into analysis/validation subsets."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise DatasetError(f"dataset {path} is not valid UTF-8: {exc}") from exc
    columns, rows = _parse_csv(text, str(path))

    for i, row in enumerate(rows, start=2):
        for name, cell in zip(columns, row):
            if cell == "":
                raise DatasetError(
                    f"{path}: missing value for {name!r} on line {i}; "
                    "drop or fill the row before auditing"
                )

    n = len(rows)
    table = np.empty((n, len(columns)), dtype=np.float64)
    codebook: dict[str, tuple[str, ...]] = {}
    for j, name in enumerate(columns):
        cells = [row[j] for row in rows]
        try:
            values = [float(cell) for cell in cells]
            if not all(np.isfinite(values)):
                bad = next(i for i, v in enumerate(values) if not np.isfinite(v))
                raise DatasetError(
                    f"{path}: non-finite value for {name!r} on line {bad + 2}"
                )
            table[:, j] = values
        except ValueError:
            codes: dict[str, int] = {}
            for i, cell in enumerate(cells):
                table[i, j] = codes.setdefault(cell, len(codes))
            codebook[name] = tuple(codes)
    return dataset_from_arrays(columns, table, codebook, seed)
