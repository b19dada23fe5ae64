"""Repair of judged proxy violations by constant substitution.

One repair step takes a violating witness and considers its local
decompositions: the cut subprogram itself, its sub-expressions, and the
branches it guards. Each local is replaced by its best constant (the
one maximizing validation utility); a replacement is kept only if it
actually breaks the proxy, i.e. the re-formed decomposition afterwards
falls to or below either threshold. Replacing the whole subprogram with
a constant always qualifies (a constant has zero association and zero
influence), so a step always exists, and every step strictly shrinks
the program, which bounds the repair loop by the program size.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .dataset import Dataset, with_column
from .decomp import (
    CHAIN_SUBSET,
    OCCURRENCE,
    Decomposition,
    decomposition_from_holes,
    local_expressions,
)
from .detect import (
    AuditConfig,
    EXACT_PAIR_BUDGET,
    Witness,
    proxy_detect,
)
from .errors import CheckpointError, DatasetError, EvaluationError, OracleUnavailable
from .expr import (
    Bool,
    Const,
    Expr,
    HOLE,
    IfThenElse,
    Var,
    evaluate,
    format_position,
    from_json_dict,
    program_digest,
    rebuild,
    substitute,
    to_json_dict,
)
from .kernels import make_evaluator
from .measures import (
    DecompositionMeasurer,
    association,
    discretize,
    utility_accuracy,
)
from .oracle import Judgment
from .util import derive_seed

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class RepairStep:
    witness_id: str
    local_holes: tuple[str, ...]
    constant: float | bool
    pre_utility: float
    post_utility: float
    post_epsilon: float
    post_delta: float
    program_digest: str

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "witness_id": self.witness_id,
            "local_holes": list(self.local_holes),
            "constant": self.constant,
            "pre_utility": self.pre_utility,
            "post_utility": self.post_utility,
            "post_epsilon": self.post_epsilon,
            "post_delta": self.post_delta,
            "program_digest": self.program_digest,
        }

    @classmethod
    def from_json_dict(cls, d: dict[str, Any]) -> "RepairStep":
        try:
            return cls(
                witness_id=str(d["witness_id"]),
                local_holes=tuple(str(h) for h in d["local_holes"]),
                constant=d["constant"],
                pre_utility=float(d["pre_utility"]),
                post_utility=float(d["post_utility"]),
                post_epsilon=float(d["post_epsilon"]),
                post_delta=float(d["post_delta"]),
                program_digest=str(d["program_digest"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"malformed repair step record: {exc}") from exc


def steps_jsonl(steps: Sequence[RepairStep]) -> str:
    return "".join(json.dumps(s.to_json_dict(), sort_keys=True) + "\n" for s in steps)


SELF_LABEL = "model_output"


def self_label(data: Dataset, program: Expr) -> Dataset:
    """Score every row with the original model and use that as the label.

    Without a designated outcome column, repair preserves agreement with
    the pre-repair model's own decisions.
    """
    out = make_evaluator(program, data.columns).values(data.table)
    return with_column(data, SELF_LABEL, np.asarray(out))


def optimal_constant(
    local: Decomposition, data: Dataset, label: str
) -> tuple[Const, float, int]:
    """Best constant stand-in for a local subprogram.

    Candidates are the distinct values the local takes on analysis rows,
    plus 0 and 1 (false and true for booleans). Returns the constant
    whose substitution maximizes validation utility, breaking ties by
    observed frequency and then by value. Utility is scored by
    evaluating the local's context with the hole pinned, which is
    evaluation-equivalent to substituting the constant into the program.
    """
    meas = DecompositionMeasurer(local, data)
    observed, counts = np.unique(meas.sub_values, return_counts=True)
    frequency = {float(v): int(c) for v, c in zip(observed, counts)}
    candidates = sorted(set(frequency) | {0.0, 1.0})

    v = data.validation_table
    if v.shape[0] == 0:
        raise DatasetError("validation subset is empty; cannot score utility")
    labels = v[:, data.column_index(label)]
    ctx_eval = make_evaluator(local.context, tuple(data.columns) + (HOLE,))
    ext = np.empty((v.shape[0], v.shape[1] + 1), dtype=np.float64)
    ext[:, : v.shape[1]] = v

    is_bool = local.subprogram.type == "bool"
    best: tuple[float, int, float] | None = None
    best_value = 0.0
    for value in candidates:
        ext[:, -1] = value
        out = ctx_eval.values(ext)
        utility = float(np.mean(out == labels))
        key = (utility, frequency.get(value, 0), -value)
        if best is None or key > best:
            best = key
            best_value = value
    assert best is not None
    constant = Const(bool(best_value)) if is_bool else Const(best_value)
    return constant, best[0], best[1]


def simplify(expr: Expr) -> Expr:
    """Fold constant subtrees without changing per-row semantics.

    Substituting a constant for a local subprogram leaves dead weight
    behind — guards that always go one way, comparisons between
    constants — so repair folds it away to realize the size reduction
    the substitution promises. Folding is sound under the evaluation
    order, including partiality: a division that can fail is never
    folded away, untaken branches were never evaluated to begin with,
    and `and`/`or` operands after a constant short-circuit were
    unreachable.
    """
    kids = tuple(simplify(c) for c in expr.children())

    if isinstance(expr, (Const, Var)):
        return expr

    if isinstance(expr, IfThenElse):
        guard, then, orelse = kids
        if isinstance(guard, Const):
            return then if guard.value else orelse
        return IfThenElse(guard, then, orelse)

    if isinstance(expr, Bool):
        if expr.op == "not":
            (operand,) = kids
            if isinstance(operand, Const):
                return Const(not bool(operand.value))
            return Bool("not", kids)
        stop_value = expr.op == "or"  # the short-circuiting value
        kept: list[Expr] = []
        for operand in kids:
            if isinstance(operand, Const):
                if bool(operand.value) == stop_value:
                    kept.append(operand)
                    break  # later operands were never evaluated
                continue  # neutral constant: no value, no error
            kept.append(operand)
        if not kept:
            return Const(expr.op == "and")  # all operands were neutral
        if len(kept) == 1:
            return kept[0]
        return Bool(expr.op, tuple(kept))

    node = rebuild(expr, kids)
    if all(isinstance(k, Const) for k in kids):
        try:
            return Const(evaluate(node, {}))
        except EvaluationError:
            return node  # e.g. division by zero: keep the failing site
    return node


def _reformed(candidate: Expr, dec: Decomposition, local: Decomposition) -> Decomposition:
    """The original decomposition re-formed inside the repaired program."""
    if local.hole_positions == dec.hole_positions and local.kind == dec.kind:
        if dec.kind == CHAIN_SUBSET:
            chain_pos = dec.hole_positions[0][:-1]
            collapsed = chain_pos + (dec.hole_positions[0][-1],)
            return decomposition_from_holes(candidate, (collapsed,), OCCURRENCE)
        return decomposition_from_holes(candidate, dec.hole_positions, OCCURRENCE)
    return decomposition_from_holes(candidate, dec.hole_positions, dec.kind)


@dataclass(frozen=True)
class _Keeper:
    index: int
    program: Expr
    local: Decomposition
    constant: Const
    utility: float
    post_epsilon: float
    post_delta: float


def proxy_repair(
    program: Expr,
    witness: Witness,
    data: Dataset,
    cfg: AuditConfig,
    label: str,
) -> tuple[Expr, RepairStep]:
    """Neutralize one witness, maximizing utility among sound replacements."""
    dec = witness.decomposition
    pre_utility = utility_accuracy(program, data, label)
    n = data.analysis_table.shape[0]
    zi = discretize(data.column_values(cfg.protected), cfg.max_bins)

    potential = (program.node_count, program.non_constant_count)

    def score(idx: int, local: Decomposition) -> _Keeper | None:
        constant, utility, _freq = optimal_constant(local, data, label)
        candidate = substitute(constant, HOLE, local.context)
        folded = simplify(candidate)
        if (folded.node_count, folded.non_constant_count) >= potential:
            return None  # not a simplification; cannot enter the keep set
        # The keep-test re-forms the original decomposition at its
        # original positions, so it runs on the unfolded candidate;
        # folding preserves semantics, so the measures carry over.
        reformed = _reformed(candidate, dec, local)
        meas = DecompositionMeasurer(reformed, data)
        post_eps = association(discretize(meas.sub_values, cfg.max_bins), zi).d
        if n * n <= EXACT_PAIR_BUDGET:
            post_infl = meas.exact()
        else:
            seed = derive_seed(
                cfg.seed, "repair-influence", witness.id, str(idx)
            )
            post_infl = meas.sampled(cfg.alpha, cfg.beta, seed)
        if post_infl.iota <= cfg.delta or post_eps <= cfg.epsilon:
            return _Keeper(
                idx, folded, local, constant, utility, post_eps, post_infl.iota
            )
        return None

    locals_ = local_expressions(program, dec)
    if cfg.workers > 1 and len(locals_) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            scored = list(pool.map(score, range(len(locals_)), locals_))
    else:
        scored = [score(i, loc) for i, loc in enumerate(locals_)]
    keepers = [k for k in scored if k is not None]

    assert keepers, "replacing the subprogram itself always qualifies"
    best = max(keepers, key=lambda k: (k.utility, -k.index))
    repaired = best.program
    assert (repaired.node_count, repaired.non_constant_count) < potential
    step = RepairStep(
        witness_id=witness.id,
        local_holes=tuple(format_position(p) for p in best.local.hole_positions),
        constant=best.constant.value,
        pre_utility=pre_utility,
        post_utility=best.utility,
        post_epsilon=best.post_epsilon,
        post_delta=best.post_delta,
        program_digest=program_digest(repaired),
    )
    return repaired, step


@dataclass
class Checkpoint:
    """Everything needed to pick a suspended repair back up."""

    program: Expr
    config: AuditConfig
    label: str
    dataset_digest: str
    judgments: dict[str, Judgment]
    steps: list[RepairStep] = field(default_factory=list)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "version": CHECKPOINT_VERSION,
            "program": to_json_dict(self.program),
            "config": self.config.to_json_dict(),
            "label": self.label,
            "dataset_digest": self.dataset_digest,
            "judgments": {k: j.to_json_dict() for k, j in sorted(self.judgments.items())},
            "steps": [s.to_json_dict() for s in self.steps],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def from_json_dict(cls, d: dict[str, Any]) -> "Checkpoint":
        if not isinstance(d, dict) or d.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError("unsupported or missing checkpoint version")
        try:
            return cls(
                program=from_json_dict(d["program"]),
                config=AuditConfig.from_json_dict(d["config"]),
                label=str(d["label"]),
                dataset_digest=str(d["dataset_digest"]),
                judgments={
                    k: Judgment.from_json_dict(v) for k, v in d["judgments"].items()
                },
                steps=[RepairStep.from_json_dict(s) for s in d["steps"]],
            )
        except KeyError as exc:
            raise CheckpointError(f"checkpoint missing field {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"checkpoint {path} is not valid JSON: {exc}") from exc
        return cls.from_json_dict(data)


CLEAN = "clean"
SUSPENDED = "suspended"


@dataclass
class RepairOutcome:
    status: str
    program: Expr
    steps: list[RepairStep]
    judgments: dict[str, Judgment]
    witnesses: list[Witness]
    checkpoint: Checkpoint | None = None


def repair_loop(
    program: Expr,
    data: Dataset,
    cfg: AuditConfig,
    oracle,
    label: str,
    judgments: Mapping[str, Judgment] | None = None,
    steps: Sequence[RepairStep] | None = None,
) -> RepairOutcome:
    """Alternate detection, judgment, and repair until no violation remains.

    Witness identities include the program, so every repair step yields
    a fresh witness set and previously judged decompositions of the old
    program are re-presented if they persist in the new one. If the
    oracle cannot answer, the loop suspends with a checkpoint from which
    it can resume once judgments exist.
    """
    judged: dict[str, Judgment] = dict(judgments or {})
    done_steps: list[RepairStep] = list(steps or [])
    budget = 2 * program.node_count + 2

    for _ in range(budget):
        witnesses = proxy_detect(program, data, cfg)
        try:
            for w in witnesses:
                if w.id not in judged:
                    judged[w.id] = oracle.judge(w)
        except OracleUnavailable:
            checkpoint = Checkpoint(
                program=program,
                config=cfg,
                label=label,
                dataset_digest=data.digest,
                judgments=judged,
                steps=done_steps,
            )
            return RepairOutcome(SUSPENDED, program, done_steps, judged, witnesses, checkpoint)
        violations = [w for w in witnesses if not judged[w.id].appropriate]
        if not violations:
            return RepairOutcome(CLEAN, program, done_steps, judged, witnesses)
        program, step = proxy_repair(program, violations[0], data, cfg, label)
        done_steps.append(step)
    raise AssertionError("repair loop exceeded the node-count bound")


def resume_repair(
    checkpoint: Checkpoint, data: Dataset, oracle
) -> RepairOutcome:
    """Continue a suspended repair; the dataset must be the one checkpointed."""
    if data.digest != checkpoint.dataset_digest:
        raise CheckpointError(
            "dataset does not match the checkpoint; resume needs the original data"
        )
    return repair_loop(
        checkpoint.program,
        data,
        checkpoint.config,
        oracle,
        checkpoint.label,
        judgments=checkpoint.judgments,
        steps=checkpoint.steps,
    )
