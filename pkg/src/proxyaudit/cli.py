"""Command-line front door: detect, repair, report, and serve.

Exit codes form the scriptable contract:

* 0 — run completed, no proxy-use witnesses (detect) or repair finished.
* 1 — usage error (bad flags, missing required arguments).
* 2 — input error (unreadable model/data/policy, corrupted JSON).
* 3 — detection found witnesses (grep-able audit signal).
* 4 — repair suspended awaiting judgments; a checkpoint path is printed.

Thresholds are normative choices, so ``--epsilon`` and ``--delta`` have
no defaults. The seed falls back to the ``PROXY_AUDIT_SEED`` environment
variable, then to 0. All output files are byte-deterministic for fixed
inputs and seed; wall-clock timestamps appear only in the run manifest.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from .dataset import Dataset, load_dataset
from .detect import (
    AuditConfig,
    ScatterRow,
    check_audit_inputs,
    measure_decompositions,
    scatter_rows,
    scatter_tsv,
    witness_report,
    witnesses_from_measured,
)
from .errors import ProxyAuditError
from .expr import Expr, loads, program_digest, to_json_dict
from .measures import utility_accuracy
from .oracle import make_oracle
from .repair import (
    CLEAN,
    SELF_LABEL,
    SUSPENDED,
    Checkpoint,
    RepairOutcome,
    repair_loop,
    self_label,
    steps_jsonl,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_WITNESSES = 3
EXIT_SUSPENDED = 4


class _UsageError(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse subclass that exits 1 on usage errors instead of 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(EXIT_USAGE)


class _InputError(Exception):
    """Wraps any bad-input condition destined for exit code 2."""


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("PROXY_AUDIT_SEED", "").strip()
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise _InputError(f"PROXY_AUDIT_SEED is not an integer: {env!r}") from exc
    return 0


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _InputError(f"cannot read {what} {path!r}: {exc}") from exc


def _load_model(path: str) -> Expr:
    text = _read_text(path, "model file")
    try:
        return loads(text)
    except ProxyAuditError as exc:
        raise _InputError(f"model file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _InputError(f"model file {path!r} is not valid JSON: {exc}") from exc


def _load_data(path: str, seed: int) -> Dataset:
    try:
        return load_dataset(path, seed=seed)
    except OSError as exc:
        raise _InputError(f"cannot read data file {path!r}: {exc}") from exc
    except ProxyAuditError as exc:
        raise _InputError(str(exc)) from exc


def _build_config(args: argparse.Namespace, seed: int) -> AuditConfig:
    try:
        return AuditConfig(
            protected=args.protected,
            epsilon=args.epsilon,
            delta=args.delta,
            seed=seed,
            influence=args.influence,
            alpha=args.alpha,
            beta=args.beta,
            max_bins=args.max_bins,
            workers=args.workers,
            allow_explicit_use=args.allow_explicit_use,
        )
    except ProxyAuditError as exc:
        raise _InputError(str(exc)) from exc


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _json_text(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write_manifest(
    out_dir: Path,
    command: str,
    cfg: AuditConfig,
    inputs: dict[str, str],
    outputs: dict[str, str],
    started: float,
    started_at: str,
    label: str | None = None,
) -> Path:
    manifest = {
        "command": command,
        "config": cfg.to_json_dict(),
        "inputs": inputs,
        "outputs": outputs,
        "seed": cfg.seed,
        "started_at": started_at,
        "wall_clock_seconds": round(time.monotonic() - started, 6),
    }
    if label is not None:
        manifest["label"] = label
    path = out_dir / "manifest.json"
    _write(path, _json_text(manifest))
    return path


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _prepare_label(data: Dataset, program: Expr, label: str | None) -> tuple[Dataset, str]:
    if label is None:
        return self_label(data, program), SELF_LABEL
    if label not in data.columns:
        raise _InputError(f"label column {label!r} is not in the dataset")
    return data, label


def _both_phase_scatter(
    original: Expr, final: Expr, data: Dataset, cfg: AuditConfig
) -> str:
    measured, _ = measure_decompositions(original, data, cfg)
    rows: list[ScatterRow] = scatter_rows(measured, "initial")
    measured_after, _ = measure_decompositions(final, data, cfg)
    rows.extend(scatter_rows(measured_after, "repaired"))
    return scatter_tsv(rows)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="model program JSON file")
    p.add_argument("--data", required=True, help="CSV dataset")
    p.add_argument("--protected", required=True, help="protected column name")
    p.add_argument(
        "--epsilon", required=True, type=float, help="association threshold in [0, 1]"
    )
    p.add_argument(
        "--delta", required=True, type=float, help="influence threshold in [0, 1]"
    )
    p.add_argument(
        "--seed",
        type=int,
        default=None,
        help="RNG seed (default: $PROXY_AUDIT_SEED, then 0)",
    )
    p.add_argument(
        "--influence",
        choices=["auto", "exact", "sampled"],
        default="auto",
        help="influence estimator (auto picks exact when affordable)",
    )
    p.add_argument("--alpha", type=float, default=0.05, help="sampling error probability")
    p.add_argument("--beta", type=float, default=0.05, help="sampling error magnitude")
    p.add_argument("--max-bins", type=int, default=32, help="discretization bin cap")
    p.add_argument("--workers", type=int, default=0, help="parallel measurement threads")
    p.add_argument(
        "--allow-explicit-use",
        action="store_true",
        help="permit the protected column as a model input",
    )
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="proxyaudit",
        description="Audit expression programs for proxy use of a protected attribute.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_detect = sub.add_parser("detect", help="find proxy-use witnesses")
    _add_common_flags(p_detect)

    p_repair = sub.add_parser("repair", help="repair judged-inappropriate witnesses")
    _add_common_flags(p_repair)
    p_repair.add_argument(
        "--oracle",
        required=True,
        help="judgment source: policy:FILE, interactive, or serve",
    )
    p_repair.add_argument(
        "--label",
        default=None,
        help="utility label column (default: the model's own outputs)",
    )
    p_repair.add_argument(
        "--resume", default=None, help="resume from a repair checkpoint file"
    )
    p_repair.add_argument(
        "--port", type=int, default=8321, help="port for --oracle serve"
    )

    p_report = sub.add_parser("report", help="summarize a witness report")
    p_report.add_argument("--witnesses", required=True, help="witnesses.json from a run")
    p_report.add_argument("--steps", default=None, help="steps.jsonl from a repair run")

    p_serve = sub.add_parser("serve", help="run the judgment/review HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1", help="bind address")
    p_serve.add_argument("--port", type=int, default=8321, help="bind port")
    p_serve.add_argument(
        "--state-dir", default=None, help="directory for session checkpoints"
    )
    p_serve.add_argument(
        "--ui", default=None, help="directory of static review-UI files to serve"
    )
    return parser


def cmd_detect(args: argparse.Namespace) -> int:
    started = time.monotonic()
    started_at = _utc_now()
    seed = _resolve_seed(args.seed)
    program = _load_model(args.model)
    data = _load_data(args.data, seed)
    cfg = _build_config(args, seed)
    try:
        check_audit_inputs(program, data, cfg)
    except ProxyAuditError as exc:
        raise _InputError(str(exc)) from exc

    measured, _ = measure_decompositions(program, data, cfg)
    witnesses = witnesses_from_measured(measured, cfg)
    out_dir = Path(args.out)

    report = witness_report(witnesses, program, data, cfg)
    _write(out_dir / "witnesses.json", _json_text(report))
    _write(out_dir / "scatter.tsv", scatter_tsv(scatter_rows(measured, "initial")))
    outputs = {
        "witnesses": str(out_dir / "witnesses.json"),
        "scatter": str(out_dir / "scatter.tsv"),
    }
    inputs = {
        "model": program_digest(program),
        "data": data.digest,
    }
    _write_manifest(out_dir, "detect", cfg, inputs, outputs, started, started_at)

    if witnesses:
        print(
            f"{len(witnesses)} proxy-use witness(es) at "
            f"(epsilon={cfg.epsilon}, delta={cfg.delta}); see {outputs['witnesses']}"
        )
        return EXIT_WITNESSES
    print(f"no proxy uses detected at (epsilon={cfg.epsilon}, delta={cfg.delta})")
    return EXIT_OK


def _run_serve_oracle(
    program: Expr,
    data: Dataset,
    cfg: AuditConfig,
    label: str,
    args: argparse.Namespace,
    judgments=None,
    steps=None,
) -> RepairOutcome:
    from .service import run_blocking_session

    return run_blocking_session(
        program,
        data,
        cfg,
        label,
        host="127.0.0.1",
        port=args.port,
        judgments=judgments,
        steps=steps,
    )


def cmd_repair(args: argparse.Namespace) -> int:
    started = time.monotonic()
    started_at = _utc_now()
    seed = _resolve_seed(args.seed)
    program = _load_model(args.model)
    data = _load_data(args.data, seed)
    cfg = _build_config(args, seed)
    try:
        check_audit_inputs(program, data, cfg)
    except ProxyAuditError as exc:
        raise _InputError(str(exc)) from exc

    data, label = _prepare_label(data, program, args.label)
    out_dir = Path(args.out)

    prior_judgments = None
    prior_steps = None
    if args.resume:
        try:
            checkpoint = Checkpoint.load(args.resume)
        except ProxyAuditError as exc:
            raise _InputError(str(exc)) from exc
        if checkpoint.dataset_digest != data.digest:
            raise _InputError(
                "checkpoint was made against different data; resume needs the original dataset"
            )
        program = checkpoint.program
        cfg = checkpoint.config
        label = checkpoint.label
        prior_judgments = checkpoint.judgments
        prior_steps = checkpoint.steps

    if args.oracle == "serve":
        outcome = _run_serve_oracle(
            program, data, cfg, label, args, judgments=prior_judgments, steps=prior_steps
        )
    else:
        try:
            oracle = make_oracle(args.oracle)
        except ProxyAuditError as exc:
            raise _InputError(str(exc)) from exc
        outcome = repair_loop(
            program,
            data,
            cfg,
            oracle,
            label,
            judgments=prior_judgments,
            steps=prior_steps,
        )

    inputs = {"model": program_digest(program), "data": data.digest}
    outputs: dict[str, str] = {}

    if outcome.status == SUSPENDED:
        assert outcome.checkpoint is not None
        ckpt_path = out_dir / "checkpoint.json"
        _write(ckpt_path, _json_text(outcome.checkpoint.to_json_dict()))
        outputs["checkpoint"] = str(ckpt_path)
        _write_manifest(out_dir, "repair", cfg, inputs, outputs, started, started_at, label)
        print(f"repair suspended awaiting judgments; checkpoint: {ckpt_path}")
        return EXIT_SUSPENDED

    assert outcome.status == CLEAN
    repaired_path = out_dir / "repaired_model.json"
    _write(repaired_path, _json_text(to_json_dict(outcome.program)))
    steps_path = out_dir / "steps.jsonl"
    _write(steps_path, steps_jsonl(outcome.steps))
    scatter_path = out_dir / "scatter.tsv"
    _write(scatter_path, _both_phase_scatter(program, outcome.program, data, cfg))
    report = witness_report(outcome.witnesses, outcome.program, data, cfg)
    witnesses_path = out_dir / "witnesses.json"
    _write(witnesses_path, _json_text(report))
    outputs.update(
        {
            "repaired_model": str(repaired_path),
            "steps": str(steps_path),
            "scatter": str(scatter_path),
            "witnesses": str(witnesses_path),
        }
    )
    _write_manifest(out_dir, "repair", cfg, inputs, outputs, started, started_at, label)

    pre = utility_accuracy(program, data, label)
    post = utility_accuracy(outcome.program, data, label)
    print(
        f"repair finished in {len(outcome.steps)} step(s); "
        f"utility {pre:.4f} -> {post:.4f}; repaired model: {repaired_path}"
    )
    return EXIT_OK


def _load_json_input(path: str, what: str) -> Any:
    text = _read_text(path, what)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise _InputError(f"{what} {path!r} is not valid JSON: {exc}") from exc


def cmd_report(args: argparse.Namespace) -> int:
    doc = _load_json_input(args.witnesses, "witness report")
    if not isinstance(doc, dict) or "witnesses" not in doc or "config" not in doc:
        raise _InputError(f"witness report {args.witnesses!r} is missing required fields")
    cfg = doc["config"]
    witnesses = doc["witnesses"]
    eps, delta = cfg.get("epsilon"), cfg.get("delta")

    lines = [
        "proxy-use audit report",
        f"  protected column : {cfg.get('protected')}",
        f"  thresholds       : epsilon >= {eps}, delta >= {delta}",
        f"  program digest   : {doc.get('program_digest', '')[:16]}",
        f"  dataset digest   : {doc.get('dataset_digest', '')[:16]}",
        "",
    ]
    if not witnesses:
        lines.append(f"no proxy uses detected at (epsilon={eps}, delta={delta})")
    else:
        lines.append(f"{len(witnesses)} witness(es), strongest influence first:")
        ranked = sorted(
            witnesses, key=lambda w: w.get("influence", {}).get("iota", 0.0), reverse=True
        )
        for i, w in enumerate(ranked, 1):
            assoc = w.get("association", {}).get("d")
            infl = w.get("influence", {}).get("iota")
            lines.append(
                f"  {i}. {w.get('subprogram', '?')}  "
                f"(epsilon_hat={assoc}, delta_hat={infl}, holes={','.join(w.get('holes', []))})"
            )

    if args.steps:
        text = _read_text(args.steps, "step log")
        steps = []
        for ln, raw in enumerate(text.splitlines(), 1):
            if not raw.strip():
                continue
            try:
                steps.append(json.loads(raw))
            except json.JSONDecodeError as exc:
                raise _InputError(f"step log line {ln} is not valid JSON: {exc}") from exc
        if steps:
            pre = steps[0].get("pre_utility")
            post = steps[-1].get("post_utility")
            lines.append("")
            lines.append(f"repair: {len(steps)} step(s), utility {pre} -> {post}")
            for s in steps:
                lines.append(
                    f"  replaced {','.join(s.get('local_holes', []))} "
                    f"with {s.get('constant')} "
                    f"(post epsilon_hat={s.get('post_epsilon')}, "
                    f"delta_hat={s.get('post_delta')})"
                )
    print("\n".join(lines))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import serve_forever

    serve_forever(
        host=args.host,
        port=args.port,
        state_dir=args.state_dir,
        ui_dir=args.ui,
    )
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        return int(exc.code or EXIT_USAGE)

    handlers = {
        "detect": cmd_detect,
        "repair": cmd_repair,
        "report": cmd_report,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except _InputError as exc:
        print(f"proxyaudit: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ProxyAuditError as exc:
        print(f"proxyaudit: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"proxyaudit: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
