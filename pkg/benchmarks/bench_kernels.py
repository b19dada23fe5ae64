"""Compare the compiled and pure-Python table evaluators.

Runs the same workloads through both backends, checks the outputs are
bit-identical, and prints rows/second plus the speedup. Workloads:

* a deep decision tree evaluated over a wide synthetic table,
* the small hand-built audit fixture,
* a batch of random corpus programs (stresses compile + dispatch),
* a reach-tracked evaluation, the shape the influence estimator uses.

Usage: python3 benchmarks/bench_kernels.py [--rows N] [--repeat K]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from proxyaudit.fixtures import (
    INCOME_FEATURES,
    corpus_programs,
    income_scenario_dataset,
    masked_redlining_dataset,
    masked_redlining_model,
)
from proxyaudit.frontends import from_decision_tree, train_cart
from proxyaudit.kernels import CompiledEvaluator, PyEvaluator, backend_name


def _time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _bench_one(name, expr, columns, table, repeat, reach_positions=()):
    py = PyEvaluator(expr, columns, reach_positions)
    cc = CompiledEvaluator(expr, columns, reach_positions)

    if reach_positions:
        out_py, reach_py = py.values_and_reach(table)
        out_cc, reach_cc = cc.values_and_reach(table)
        assert np.array_equal(reach_py, reach_cc), f"{name}: reach flags differ"
        run_py = lambda: py.values_and_reach(table)
        run_cc = lambda: cc.values_and_reach(table)
    else:
        out_py = py.values(table)
        out_cc = cc.values(table)
        run_py = lambda: py.values(table)
        run_cc = lambda: cc.values(table)
    assert np.array_equal(out_py, out_cc), f"{name}: outputs differ"

    t_py = _time(run_py, repeat)
    t_cc = _time(run_cc, repeat)
    n = table.shape[0]
    print(
        f"{name:<28} {n:>8} rows  "
        f"python {n / t_py:>12,.0f} rows/s  "
        f"compiled {n / t_cc:>12,.0f} rows/s  "
        f"speedup {t_py / t_cc:>6.1f}x"
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=200_000, help="synthetic table size")
    parser.add_argument("--repeat", type=int, default=5, help="timing repetitions (best-of)")
    args = parser.parse_args()

    print(f"default backend: {backend_name()}")

    data = income_scenario_dataset()
    tree = from_decision_tree(
        train_cart(data, "income", features=INCOME_FEATURES, max_depth=5, min_leaf=20)
    )
    rng = np.random.default_rng(0)
    idx = rng.integers(0, data.table.shape[0], size=args.rows)
    big = np.ascontiguousarray(data.table[idx])
    _bench_one("income tree", tree, data.columns, big, args.repeat)

    guard_pos = (0,)
    _bench_one(
        "income tree + reach", tree, data.columns, big, args.repeat,
        reach_positions=[guard_pos],
    )

    masked = masked_redlining_dataset()
    model = masked_redlining_model()
    midx = rng.integers(0, masked.table.shape[0], size=args.rows)
    mbig = np.ascontiguousarray(masked.table[midx])
    _bench_one("masked-redlining model", model, masked.columns, mbig, args.repeat)

    programs = corpus_programs(count=20)
    corpus_cols = ("x0", "x1", "x2", "x3")
    small = np.ascontiguousarray(rng.normal(0.0, 2.0, size=(2_000, 4)))

    def run_corpus(cls):
        def run():
            for p in programs:
                cls(p, corpus_cols).values(small)
        return run

    t_py = _time(run_corpus(PyEvaluator), args.repeat)
    t_cc = _time(run_corpus(CompiledEvaluator), args.repeat)
    print(
        f"{'20 corpus programs':<28} {small.shape[0]:>8} rows  "
        f"python {t_py * 1e3:>10.1f} ms      "
        f"compiled {t_cc * 1e3:>10.1f} ms    "
        f"speedup {t_py / t_cc:>6.1f}x"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
