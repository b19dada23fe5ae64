"""Proxy detection: measure every decomposition, keep the flagged ones.

A decomposition is flagged as a proxy witness when its subprogram's
association with the protected column reaches ``epsilon`` and its
influence on the program output reaches ``delta`` (both inclusive).
Influence can be measured exactly or from sampled row pairs; in sampled
mode, results within ``beta`` of the threshold are re-measured exactly
when the dataset is small enough to afford it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .dataset import Dataset
from .decomp import (
    Decomposition,
    EnumerationCaps,
    enumerate_decompositions,
)
from .errors import ConfigError, DatasetError
from .expr import Expr, format_position, free_vars, program_digest, to_json_dict
from .measures import (
    EXACT,
    SAMPLED,
    AssociationResult,
    DecompositionMeasurer,
    InfluenceResult,
    association,
    discretize,
)
from .util import canonical_json, derive_seed, sha256_hex

AUTO = "auto"

#: Largest row-pair count for which exact influence is considered affordable.
EXACT_PAIR_BUDGET = 1_000_000


@dataclass(frozen=True)
class AuditConfig:
    protected: str
    epsilon: float
    delta: float
    seed: int = 0
    influence: str = AUTO
    alpha: float = 0.05
    beta: float = 0.05
    max_bins: int = 32
    workers: int = 0
    allow_explicit_use: bool = False
    permutations: int = 0
    caps: EnumerationCaps = field(default_factory=EnumerationCaps)

    def __post_init__(self) -> None:
        if not self.protected:
            raise ConfigError("protected column name must be non-empty")
        for name in ("epsilon", "delta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if self.influence not in (AUTO, EXACT, SAMPLED):
            raise ConfigError(
                f"influence mode must be auto, exact, or sampled, got {self.influence!r}"
            )
        if self.max_bins < 1:
            raise ConfigError("max_bins must be positive")
        if self.workers < 0:
            raise ConfigError("workers must be non-negative")
        if self.permutations < 0:
            raise ConfigError("permutations must be non-negative")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "protected": self.protected,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "seed": self.seed,
            "influence": self.influence,
            "alpha": self.alpha,
            "beta": self.beta,
            "max_bins": self.max_bins,
            "workers": self.workers,
            "allow_explicit_use": self.allow_explicit_use,
            "permutations": self.permutations,
            "caps": {
                "max_occurrences": self.caps.max_occurrences,
                "max_chain": self.caps.max_chain,
            },
        }

    @classmethod
    def from_json_dict(cls, d: dict[str, Any]) -> "AuditConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be an object")
        caps_d = d.get("caps", {})
        caps = EnumerationCaps(
            max_occurrences=caps_d.get("max_occurrences", 12),
            max_chain=caps_d.get("max_chain", 8),
        )
        known = {
            "protected", "epsilon", "delta", "seed", "influence", "alpha",
            "beta", "max_bins", "workers", "allow_explicit_use", "permutations",
        }
        unknown = set(d) - known - {"caps"}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(caps=caps, **{k: d[k] for k in known if k in d})
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from exc


@dataclass(frozen=True)
class MeasuredDecomposition:
    decomposition: Decomposition
    association: AssociationResult
    influence: InfluenceResult
    influence_seed: int | None


@dataclass(frozen=True)
class Witness:
    id: str
    decomposition: Decomposition
    epsilon_hat: float
    delta_hat: float
    subprogram_text: str
    size: int
    holes: tuple[str, ...]
    kind: str
    association: AssociationResult
    influence: InfluenceResult
    influence_seed: int | None

    def to_json_dict(self) -> dict[str, Any]:
        a, i = self.association, self.influence
        return {
            "id": self.id,
            "subprogram": self.subprogram_text,
            "size": self.size,
            "holes": list(self.holes),
            "kind": self.kind,
            "epsilon_hat": self.epsilon_hat,
            "delta_hat": self.delta_hat,
            "association": {
                "d": a.d,
                "h_x_given_z": a.h_x_given_z,
                "h_z_given_x": a.h_z_given_x,
                "h_joint": a.h_joint,
                "x_levels": a.x_levels,
                "z_levels": a.z_levels,
                "p_value": a.p_value,
            },
            "influence": {
                "iota": i.iota,
                "mode": i.mode,
                "n_pairs": i.n_pairs,
                "reach_rate": i.reach_rate,
                "alpha": i.alpha,
                "beta": i.beta,
                "seed": self.influence_seed,
            },
        }


def decomposition_id(dec: Decomposition) -> str:
    return canonical_json(
        {"holes": [format_position(p) for p in dec.hole_positions], "kind": dec.kind}
    )


def witness_id(dec: Decomposition) -> str:
    payload = canonical_json(
        {
            "program": to_json_dict(dec.program),
            "holes": [format_position(p) for p in dec.hole_positions],
            "kind": dec.kind,
        }
    )
    return sha256_hex(payload)[:16]


def check_audit_inputs(program: Expr, data: Dataset, cfg: AuditConfig) -> None:
    """Validate that the model, dataset, and config fit together."""
    data.column_index(cfg.protected)
    used = free_vars(program)
    missing = sorted(used - set(data.columns))
    if missing:
        raise DatasetError(f"model reads columns absent from the dataset: {missing}")
    if cfg.protected in used and not cfg.allow_explicit_use:
        raise ConfigError(
            f"model reads the protected column {cfg.protected!r} directly; "
            "re-run with allow_explicit_use to audit it anyway"
        )


def _resolve_mode(cfg: AuditConfig, n_analysis: int) -> str:
    if cfg.influence == AUTO:
        return EXACT if n_analysis * n_analysis <= EXACT_PAIR_BUDGET else SAMPLED
    return cfg.influence


def measure_decompositions(
    program: Expr, data: Dataset, cfg: AuditConfig
) -> tuple[list[MeasuredDecomposition], bool]:
    """Measure association and influence for every candidate decomposition.

    Results come back in enumeration order and are deterministic for a
    given (program, dataset, config) regardless of worker count: each
    decomposition's sampling seed is derived from the master seed and
    the decomposition identity, never from scheduling.
    """
    check_audit_inputs(program, data, cfg)
    decs = enumerate_decompositions(program, cfg.caps)
    n = data.analysis_table.shape[0]
    mode = _resolve_mode(cfg, n)
    zi = discretize(data.column_values(cfg.protected), cfg.max_bins)

    def one(dec: Decomposition) -> MeasuredDecomposition:
        dec_id = decomposition_id(dec)
        meas = DecompositionMeasurer(dec, data)
        xs = discretize(meas.sub_values, cfg.max_bins)
        assoc = association(
            xs,
            zi,
            permutations=cfg.permutations,
            seed=derive_seed(cfg.seed, "association-permutation", dec_id),
        )
        seed: int | None = None
        if mode == EXACT:
            infl = meas.exact()
        else:
            seed = derive_seed(cfg.seed, "influence-pairs", dec_id)
            infl = meas.sampled(cfg.alpha, cfg.beta, seed)
            borderline = abs(infl.iota - cfg.delta) <= cfg.beta
            if borderline and n * n <= EXACT_PAIR_BUDGET:
                infl = meas.exact()
                seed = None
        return MeasuredDecomposition(dec, assoc, infl, seed)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            measured = list(pool.map(one, decs))
    else:
        measured = [one(dec) for dec in decs]
    return measured, decs.truncated


def witnesses_from_measured(
    measured: Iterable[MeasuredDecomposition], cfg: AuditConfig
) -> list[Witness]:
    """Threshold measured decompositions into a ranked witness list."""
    out = []
    for m in measured:
        if m.association.d >= cfg.epsilon and m.influence.iota >= cfg.delta:
            dec = m.decomposition
            out.append(
                Witness(
                    id=witness_id(dec),
                    decomposition=dec,
                    epsilon_hat=m.association.d,
                    delta_hat=m.influence.iota,
                    subprogram_text=repr(dec.subprogram),
                    size=dec.subprogram.node_count,
                    holes=tuple(format_position(p) for p in dec.hole_positions),
                    kind=dec.kind,
                    association=m.association,
                    influence=m.influence,
                    influence_seed=m.influence_seed,
                )
            )
    out.sort(key=lambda w: (-w.delta_hat, -w.epsilon_hat, w.decomposition.hole_positions))
    return out


def proxy_detect(program: Expr, data: Dataset, cfg: AuditConfig) -> list[Witness]:
    """Detect (epsilon, delta)-proxy use; returns witnesses, strongest first."""
    measured, _ = measure_decompositions(program, data, cfg)
    return witnesses_from_measured(measured, cfg)


def witness_report(
    witnesses: Sequence[Witness], program: Expr, data: Dataset, cfg: AuditConfig
) -> dict[str, Any]:
    """Self-describing JSON document for a detection run."""
    return {
        "config": cfg.to_json_dict(),
        "dataset_digest": data.digest,
        "program_digest": program_digest(program),
        "witnesses": [w.to_json_dict() for w in witnesses],
    }


@dataclass(frozen=True)
class ScatterRow:
    node_path: str
    size: int
    epsilon: float
    delta: float
    parent_path: str
    phase: str


def scatter_rows(
    measured: Iterable[MeasuredDecomposition], phase: str
) -> list[ScatterRow]:
    return [
        ScatterRow(
            node_path=m.decomposition.node_path,
            size=m.decomposition.subprogram.node_count,
            epsilon=m.association.d,
            delta=m.influence.iota,
            parent_path=m.decomposition.parent_path,
            phase=phase,
        )
        for m in measured
    ]


SCATTER_HEADER = "node_path\tsize\tepsilon\tdelta\tparent_path\tphase"


def scatter_tsv(rows: Iterable[ScatterRow]) -> str:
    """Render scatter rows as a TSV document (one line per decomposition)."""
    lines = [SCATTER_HEADER]
    for r in rows:
        lines.append(
            f"{r.node_path}\t{r.size}\t{r.epsilon!r}\t{r.delta!r}\t{r.parent_path}\t{r.phase}"
        )
    return "\n".join(lines) + "\n"


def emit_scatter(program: Expr, data: Dataset, cfg: AuditConfig, phase: str = "initial") -> str:
    """Measure every decomposition and render the scatter TSV in one go."""
    measured, _ = measure_decompositions(program, data, cfg)
    return scatter_tsv(scatter_rows(measured, phase))
