"""Quantities the audit is built on: association, influence, utility.

Association between two discrete series is measured as
``1 - (H(X|Z) + H(Z|X)) / H(X,Z)`` (entropies in bits), which is 0 for
independent series, 1 when either determines the other, and invariant
under renaming of levels. Influence of a cut subprogram is the
probability that resampling its value from a second random row changes
the program output; it can be computed exactly by grouping the distinct
subprogram values or estimated from sampled row pairs with a
Hoeffding-style sample size. Utility is plain agreement with a label
column on the validation subset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .decomp import Decomposition
from .errors import DatasetError
from .expr import HOLE, Expr
from .kernels import make_evaluator

EXACT = "exact"
SAMPLED = "sampled"


@dataclass(frozen=True)
class AssociationResult:
    d: float
    h_x_given_z: float
    h_z_given_x: float
    h_joint: float
    x_levels: int
    z_levels: int
    p_value: float | None = None


@dataclass(frozen=True)
class InfluenceResult:
    iota: float
    mode: str
    n_pairs: int
    reach_rate: float
    alpha: float | None = None
    beta: float | None = None


def _entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) if nz.size else 0.0


def _association_from_codes(xi: np.ndarray, zi: np.ndarray, n_x: int, n_z: int) -> float:
    n = xi.shape[0]
    joint = np.bincount(xi * n_z + zi, minlength=n_x * n_z) / n
    h_joint = _entropy(joint)
    if h_joint == 0.0:
        return 0.0
    h_x = _entropy(joint.reshape(n_x, n_z).sum(axis=1))
    h_z = _entropy(joint.reshape(n_x, n_z).sum(axis=0))
    d = 1.0 - ((h_joint - h_z) + (h_joint - h_x)) / h_joint
    return float(min(1.0, max(0.0, d)))


def association(
    xs, zs, *, permutations: int = 0, seed: int = 0
) -> AssociationResult:
    """Association between two equally long discrete series.

    With ``permutations`` > 0 a permutation test is run and the result
    carries the fraction of permuted series scoring at least as high
    (add-one estimate), for flagging small-sample artifacts.
    """
    xs = np.asarray(xs)
    zs = np.asarray(zs)
    if xs.ndim != 1 or xs.shape != zs.shape:
        raise ValueError("association needs two equally long one-dimensional series")
    if xs.shape[0] == 0:
        raise ValueError("association is undefined for empty series")
    x_levels, xi = np.unique(xs, return_inverse=True)
    z_levels, zi = np.unique(zs, return_inverse=True)
    n_x, n_z = len(x_levels), len(z_levels)
    n = xs.shape[0]

    joint = np.bincount(xi * n_z + zi, minlength=n_x * n_z).astype(np.float64) / n
    h_joint = _entropy(joint)
    if h_joint == 0.0:
        d, h_x_given_z, h_z_given_x = 0.0, 0.0, 0.0
    else:
        h_x = _entropy(joint.reshape(n_x, n_z).sum(axis=1))
        h_z = _entropy(joint.reshape(n_x, n_z).sum(axis=0))
        h_x_given_z = max(h_joint - h_z, 0.0)
        h_z_given_x = max(h_joint - h_x, 0.0)
        d = float(min(1.0, max(0.0, 1.0 - (h_x_given_z + h_z_given_x) / h_joint)))

    p_value = None
    if permutations > 0:
        rng = np.random.default_rng(seed)
        at_least = 0
        for _ in range(permutations):
            perm = rng.permutation(zi)
            if _association_from_codes(xi, perm, n_x, n_z) >= d:
                at_least += 1
        p_value = (1 + at_least) / (permutations + 1)

    return AssociationResult(
        d=d,
        h_x_given_z=h_x_given_z,
        h_z_given_x=h_z_given_x,
        h_joint=h_joint,
        x_levels=n_x,
        z_levels=n_z,
        p_value=p_value,
    )


def discretize(values, max_bins: int = 32) -> np.ndarray:
    """Reduce a numeric series to at most ``max_bins`` integer codes.

    Series with few distinct values keep one code per value; otherwise
    values fall into equal-frequency bins. Codes preserve numeric order.
    """
    if max_bins < 1:
        raise ValueError("max_bins must be positive")
    values = np.asarray(values, dtype=np.float64)
    uniq, inv = np.unique(values, return_inverse=True)
    if uniq.shape[0] <= max_bins:
        return inv.astype(np.int64)
    n = values.shape[0]
    counts = np.bincount(inv)
    before = np.concatenate(([0], np.cumsum(counts)[:-1]))
    bins = (before * max_bins) // n
    return bins[inv].astype(np.int64)


def required_pair_samples(alpha: float, beta: float) -> int:
    """Pairs needed so the influence estimate errs by more than ``beta``
    with probability at most ``alpha``."""
    if not 0 < alpha < 1 or not 0 < beta < 1:
        raise ValueError("alpha and beta must lie in (0, 1)")
    return math.ceil(math.log(2.0 / alpha) / (2.0 * beta * beta))


class DecompositionMeasurer:
    """Shared evaluation state for measuring one decomposition on one dataset.

    Building this computes the subprogram's value on every analysis row,
    which rows reach the cut positions, and the program output through
    the context; exact and sampled influence and the subprogram output
    series all reuse that work.
    """

    def __init__(self, dec: Decomposition, data: Dataset):
        self.dec = dec
        self.data = data
        cols = data.columns
        a = data.analysis_table
        n, m = a.shape
        self._n = n
        self._hole_col = m
        self.sub_values = make_evaluator(dec.subprogram, cols).values(a)
        _, reach = make_evaluator(
            dec.program, cols, reach_positions=dec.hole_positions
        ).values_and_reach(a)
        self.reach = reach
        self._ctx_eval = make_evaluator(dec.context, tuple(cols) + (HOLE,))
        self._ext = np.empty((n, m + 1), dtype=np.float64)
        self._ext[:, :m] = a
        self._ext[:, m] = self.sub_values
        self.base = self._ctx_eval.values(self._ext)

    @property
    def reach_rate(self) -> float:
        return float(np.count_nonzero(self.reach)) / self._n

    def exact(self) -> InfluenceResult:
        n = self._n
        reached = np.flatnonzero(self.reach)
        if reached.size == 0:
            return InfluenceResult(0.0, EXACT, n * n, 0.0)
        ext = self._ext[reached].copy()
        base = self.base[reached]
        uniq, counts = np.unique(self.sub_values, return_counts=True)
        changed = 0
        for value, count in zip(uniq, counts):
            ext[:, self._hole_col] = value
            out = self._ctx_eval.values(ext)
            changed += int(count) * int(np.count_nonzero(out != base))
        return InfluenceResult(changed / (n * n), EXACT, n * n, self.reach_rate)

    def sampled(self, alpha: float, beta: float, seed: int) -> InfluenceResult:
        n = self._n
        n_pairs = required_pair_samples(alpha, beta)
        reached = np.flatnonzero(self.reach)
        if reached.size == 0:
            return InfluenceResult(0.0, SAMPLED, n_pairs, 0.0, alpha, beta)
        rng = np.random.default_rng(seed)
        ii = reached[rng.integers(0, reached.size, n_pairs)]
        jj = rng.integers(0, n, n_pairs)
        pairs = self._ext[ii]
        pairs[:, self._hole_col] = self.sub_values[jj]
        out = self._ctx_eval.values(pairs)
        frac = np.count_nonzero(out != self.base[ii]) / n_pairs
        iota = (reached.size / n) * frac
        return InfluenceResult(float(iota), SAMPLED, n_pairs, self.reach_rate, alpha, beta)


def influence_exact(dec: Decomposition, data: Dataset) -> InfluenceResult:
    return DecompositionMeasurer(dec, data).exact()


def influence_sampled(
    dec: Decomposition, data: Dataset, alpha: float, beta: float, seed: int
) -> InfluenceResult:
    return DecompositionMeasurer(dec, data).sampled(alpha, beta, seed)


def subprogram_outputs(dec: Decomposition, data: Dataset) -> np.ndarray:
    """The cut subprogram's value on each analysis row."""
    return make_evaluator(dec.subprogram, data.columns).values(data.analysis_table)


def utility_accuracy(program: Expr, data: Dataset, label: str, subset: str = "validation") -> float:
    """Fraction of subset rows where the program output equals the label column.

    Utility is always scored away from the analysis rows used for
    measurement; by default that means the validation subset.
    """
    table = data.subset_table(subset)
    if table.shape[0] == 0:
        raise DatasetError(f"{subset} subset is empty; cannot score utility")
    out = make_evaluator(program, data.columns).values(table)
    labels = table[:, data.column_index(label)]
    return float(np.mean(out == labels))
