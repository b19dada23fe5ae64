"""Normative judgment sources for detected witnesses.

Detection is purely statistical; whether a flagged proxy is acceptable
(a business necessity) or a violation is a judgment call. This module
models that call: a ``Judgment`` records the verdict for one witness,
and oracles produce judgments from a policy file, an interactive
prompt, or a pre-recorded map (the HTTP review flow). An oracle that
cannot answer raises ``OracleUnavailable`` so the caller can suspend
and resume later.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, IO, Mapping

from .detect import Witness
from .errors import ConfigError, OracleUnavailable, PolicyError
from .expr import free_vars
from .util import canonical_json

_MATCH_FIELDS = (
    "epsilon_min",
    "epsilon_max",
    "delta_min",
    "delta_max",
    "mentions_any",
    "size_max",
)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class Judgment:
    witness_id: str
    appropriate: bool
    source: str
    note: str = ""
    timestamp: str = ""

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "witness_id": self.witness_id,
            "appropriate": self.appropriate,
            "source": self.source,
            "note": self.note,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json_dict(cls, d: dict[str, Any]) -> "Judgment":
        try:
            return cls(
                witness_id=str(d["witness_id"]),
                appropriate=bool(d["appropriate"]),
                source=str(d.get("source", "recorded")),
                note=str(d.get("note", "")),
                timestamp=str(d.get("timestamp", "")),
            )
        except KeyError as exc:
            raise PolicyError(f"judgment record missing field {exc}") from exc


@dataclass(frozen=True)
class RuleMatch:
    epsilon_min: float | None = None
    epsilon_max: float | None = None
    delta_min: float | None = None
    delta_max: float | None = None
    mentions_any: tuple[str, ...] | None = None
    size_max: int | None = None

    def matches(self, witness: Witness) -> bool:
        if self.epsilon_min is not None and witness.epsilon_hat < self.epsilon_min:
            return False
        if self.epsilon_max is not None and witness.epsilon_hat > self.epsilon_max:
            return False
        if self.delta_min is not None and witness.delta_hat < self.delta_min:
            return False
        if self.delta_max is not None and witness.delta_hat > self.delta_max:
            return False
        if self.size_max is not None and witness.size > self.size_max:
            return False
        if self.mentions_any is not None:
            mentioned = free_vars(witness.decomposition.subprogram)
            if not mentioned.intersection(self.mentions_any):
                return False
        return True


@dataclass(frozen=True)
class PolicyRule:
    match: RuleMatch
    appropriate: bool
    note: str = ""


@dataclass(frozen=True)
class Policy:
    rules: tuple[PolicyRule, ...]
    default: bool

    def decide(self, witness: Witness) -> tuple[bool, str]:
        """First matching rule wins; otherwise the policy default applies."""
        for i, rule in enumerate(self.rules):
            if rule.match.matches(witness):
                return rule.appropriate, rule.note or f"rule {i}"
        return self.default, "default"


def _parse_match(d: Any, where: str) -> RuleMatch:
    if not isinstance(d, dict):
        raise PolicyError(f"{where}: match must be an object")
    unknown = set(d) - set(_MATCH_FIELDS)
    if unknown:
        raise PolicyError(f"{where}: unknown match fields {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for name in ("epsilon_min", "epsilon_max", "delta_min", "delta_max"):
        if name in d:
            v = d[name]
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise PolicyError(f"{where}: {name} must be a number")
            kwargs[name] = float(v)
    if "size_max" in d:
        v = d["size_max"]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise PolicyError(f"{where}: size_max must be a positive integer")
        kwargs["size_max"] = v
    if "mentions_any" in d:
        v = d["mentions_any"]
        if not isinstance(v, list) or not all(isinstance(s, str) and s for s in v):
            raise PolicyError(f"{where}: mentions_any must be a list of feature names")
        kwargs["mentions_any"] = tuple(v)
    return RuleMatch(**kwargs)


def parse_policy(text: str) -> Policy:
    """Parse a policy document; malformed structure raises PolicyError."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolicyError(f"policy is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise PolicyError("policy must be an object")
    unknown = set(data) - {"rules", "default"}
    if unknown:
        raise PolicyError(f"unknown policy fields {sorted(unknown)}")
    if "default" not in data or not isinstance(data["default"], bool):
        raise PolicyError("policy needs a boolean 'default'")
    rules_raw = data.get("rules", [])
    if not isinstance(rules_raw, list):
        raise PolicyError("'rules' must be an array")
    rules = []
    for i, rd in enumerate(rules_raw):
        where = f"rule {i}"
        if not isinstance(rd, dict):
            raise PolicyError(f"{where}: must be an object")
        unknown = set(rd) - {"match", "appropriate", "note"}
        if unknown:
            raise PolicyError(f"{where}: unknown fields {sorted(unknown)}")
        if "appropriate" not in rd or not isinstance(rd["appropriate"], bool):
            raise PolicyError(f"{where}: needs a boolean 'appropriate'")
        note = rd.get("note", "")
        if not isinstance(note, str):
            raise PolicyError(f"{where}: note must be a string")
        rules.append(
            PolicyRule(
                match=_parse_match(rd.get("match", {}), where),
                appropriate=rd["appropriate"],
                note=note,
            )
        )
    return Policy(rules=tuple(rules), default=data["default"])


def print_policy(policy: Policy) -> str:
    """Canonical serialization; parse(print(p)) == p."""
    rules = []
    for rule in policy.rules:
        match: dict[str, Any] = {}
        m = rule.match
        for name in ("epsilon_min", "epsilon_max", "delta_min", "delta_max", "size_max"):
            v = getattr(m, name)
            if v is not None:
                match[name] = v
        if m.mentions_any is not None:
            match["mentions_any"] = list(m.mentions_any)
        rules.append({"match": match, "appropriate": rule.appropriate, "note": rule.note})
    return canonical_json({"rules": rules, "default": policy.default})


class PolicyOracle:
    """Judges witnesses mechanically from a policy document."""

    source = "policy"

    def __init__(self, policy: Policy):
        self.policy = policy

    def judge(self, witness: Witness) -> Judgment:
        appropriate, note = self.policy.decide(witness)
        return Judgment(witness.id, appropriate, self.source, note, _now())


class InteractiveOracle:
    """Asks a human on the terminal; end-of-input suspends the audit."""

    source = "interactive"

    def __init__(self, stdin: IO[str] | None = None, stdout: IO[str] | None = None):
        self._in = stdin if stdin is not None else sys.stdin
        self._out = stdout if stdout is not None else sys.stdout

    def judge(self, witness: Witness) -> Judgment:
        self._out.write(
            f"witness {witness.id}: {witness.subprogram_text}\n"
            f"  association={witness.epsilon_hat:.4f} influence={witness.delta_hat:.4f} "
            f"size={witness.size} holes={','.join(witness.holes) or '(root)'}\n"
        )
        while True:
            self._out.write("  appropriate use? [y/n] ")
            self._out.flush()
            line = self._in.readline()
            if line == "":
                raise OracleUnavailable("interactive judge ended input")
            answer = line.strip().lower()
            if answer in ("y", "yes"):
                return Judgment(witness.id, True, self.source, "", _now())
            if answer in ("n", "no"):
                return Judgment(witness.id, False, self.source, "", _now())
            self._out.write("  please answer y or n\n")


class RecordedOracle:
    """Replays judgments collected elsewhere (checkpoints, the review UI)."""

    source = "recorded"

    def __init__(self, judgments: Mapping[str, Judgment] | None = None):
        self._judgments = dict(judgments or {})

    def add(self, judgment: Judgment) -> None:
        self._judgments[judgment.witness_id] = judgment

    def judge(self, witness: Witness) -> Judgment:
        try:
            return self._judgments[witness.id]
        except KeyError:
            raise OracleUnavailable(
                f"no recorded judgment for witness {witness.id}"
            ) from None


def make_oracle(spec: str, stdin: IO[str] | None = None, stdout: IO[str] | None = None):
    """Build an oracle from a CLI-style spec: ``policy:FILE`` or ``interactive``."""
    if spec == "interactive":
        return InteractiveOracle(stdin, stdout)
    if spec.startswith("policy:"):
        path = spec[len("policy:"):]
        if not path:
            raise ConfigError("policy oracle needs a file: policy:FILE")
        try:
            text = open(path, encoding="utf-8").read()
        except OSError as exc:
            raise ConfigError(f"cannot read policy file {path}: {exc}") from exc
        return PolicyOracle(parse_policy(text))
    raise ConfigError(f"unknown oracle spec {spec!r}; use policy:FILE or interactive")
