"""Local HTTP service that lets a human auditor drive repair sessions.

A session wraps one model + dataset + config. The service detects
proxy-use witnesses, parks them as *pending*, and waits for judgments
posted over HTTP. Once every pending witness is judged, it runs exactly
one repair step (targeting the strongest judged-inappropriate witness),
re-detects, and presents the next batch. Witness identity includes the
program, so witnesses that survive a repair step come back as fresh
witnesses to be judged again.

State machine per session::

    awaiting-judgment -> repairing -> awaiting-judgment | done

Sessions persist to checkpoint files on every transition, so a
restarted service resumes where it left off. Replaying the same
judgment sequence against a fresh session produces the identical final
program digest.
"""

from __future__ import annotations

import json
import mimetypes
import re
import tempfile
import threading
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Mapping, Sequence

from .dataset import Dataset, load_dataset
from .detect import (
    AuditConfig,
    MeasuredDecomposition,
    ScatterRow,
    Witness,
    check_audit_inputs,
    measure_decompositions,
    scatter_rows,
    witnesses_from_measured,
)
from .errors import ProxyAuditError
from .expr import Expr, from_json_dict, program_digest, to_json_dict
from .oracle import Judgment
from .repair import (
    CLEAN,
    SELF_LABEL,
    SUSPENDED,
    Checkpoint,
    RepairOutcome,
    RepairStep,
    proxy_repair,
    self_label,
)

AWAITING = "awaiting-judgment"
REPAIRING = "repairing"
DONE = "done"

_SESSION_RE = re.compile(r"^/api/sessions/([0-9a-f]+)(/(witnesses|judgments|program|steps))?$")


class ServiceError(Exception):
    """HTTP-mapped error carrying a status code."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


@dataclass
class Session:
    """One judgment-gated repair session; mutations serialize on `lock`."""

    id: str
    initial_program: Expr
    program: Expr
    config: AuditConfig
    data: Dataset
    label: str
    state_dir: Path
    data_path: Path
    judgments: dict[str, Judgment] = field(default_factory=dict)
    steps: list[RepairStep] = field(default_factory=list)
    pending: list[Witness] = field(default_factory=list)
    current_witnesses: list[Witness] = field(default_factory=list)
    status: str = AWAITING
    initial_rows: list[ScatterRow] = field(default_factory=list)
    current_rows: list[ScatterRow] = field(default_factory=list)
    lock: threading.Condition = field(default_factory=threading.Condition)

    # -- lifecycle -----------------------------------------------------

    @classmethod
    def create(
        cls,
        program: Expr,
        data: Dataset,
        config: AuditConfig,
        label: str,
        state_dir: Path,
        data_path: Path,
        judgments: Mapping[str, Judgment] | None = None,
        steps: Sequence[RepairStep] | None = None,
        session_id: str | None = None,
    ) -> "Session":
        session = cls(
            id=session_id or uuid.uuid4().hex[:12],
            initial_program=program,
            program=program,
            config=config,
            data=data,
            label=label,
            state_dir=state_dir,
            data_path=data_path,
            judgments=dict(judgments or {}),
            steps=list(steps or []),
        )
        session._detect(initial=True)
        if session.pending and all(w.id in session.judgments for w in session.pending):
            session._complete_batch()
        else:
            session.status = AWAITING if session.pending else DONE
        session._persist()
        return session

    def _measure(self, program: Expr) -> tuple[list[MeasuredDecomposition], list[Witness]]:
        measured, _ = measure_decompositions(program, self.data, self.config)
        return measured, witnesses_from_measured(measured, self.config)

    def _detect(self, initial: bool = False) -> None:
        measured, witnesses = self._measure(self.program)
        self.current_witnesses = witnesses
        self.pending = [w for w in witnesses if w.id not in self.judgments]
        if initial:
            self.initial_rows = scatter_rows(measured, "initial")
            self.current_rows = []
        else:
            self.current_rows = scatter_rows(measured, "repaired")

    # -- mutations (call with lock held) --------------------------------

    def record_judgment(self, witness_id: str, appropriate: bool, note: str | None) -> Judgment:
        if witness_id in self.judgments:
            raise ServiceError(409, f"witness {witness_id!r} already judged")
        if witness_id not in {w.id for w in self.pending}:
            raise ServiceError(404, f"no pending witness {witness_id!r}")
        judgment = Judgment(
            witness_id=witness_id,
            appropriate=appropriate,
            source="remote",
            note=note or "",
        )
        self.judgments[witness_id] = judgment
        self._persist()
        if all(w.id in self.judgments for w in self.pending):
            self._complete_batch()
        return judgment

    def _complete_batch(self) -> None:
        """All pending witnesses are judged: run one repair step, re-detect."""
        self.status = REPAIRING
        self._persist()
        violations = [w for w in self.pending if not self.judgments[w.id].appropriate]
        if violations:
            self.program, step = proxy_repair(
                self.program, violations[0], self.data, self.config, self.label
            )
            self.steps.append(step)
            self._detect()
            self.status = AWAITING if self.pending else DONE
        else:
            self.pending = []
            self.status = DONE
        self._persist()
        with self.lock:
            self.lock.notify_all()

    # -- persistence -----------------------------------------------------

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            program=self.program,
            config=self.config,
            label=self.label,
            dataset_digest=self.data.digest,
            judgments=self.judgments,
            steps=self.steps,
        )

    def _persist(self) -> None:
        doc = {
            "session_id": self.id,
            "status": self.status,
            "initial_program": to_json_dict(self.initial_program),
            "data_path": str(self.data_path),
            "checkpoint": self.checkpoint().to_json_dict(),
        }
        path = self.state_dir / f"{self.id}.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        tmp.replace(path)

    @classmethod
    def restore(cls, path: Path, state_dir: Path) -> "Session":
        doc = json.loads(path.read_text(encoding="utf-8"))
        checkpoint = Checkpoint.from_json_dict(doc["checkpoint"])
        data_path = Path(doc["data_path"])
        data = load_dataset(data_path, seed=checkpoint.config.seed)
        if data.digest != checkpoint.dataset_digest:
            raise ProxyAuditError(
                f"session {doc['session_id']}: dataset at {data_path} changed since checkpoint"
            )
        return cls.create(
            program=checkpoint.program,
            data=data,
            config=checkpoint.config,
            label=checkpoint.label,
            state_dir=state_dir,
            data_path=data_path,
            judgments=checkpoint.judgments,
            steps=checkpoint.steps,
            session_id=doc["session_id"],
        )

    # -- snapshots (read under lock) ---------------------------------------

    def status_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "status": self.status,
            "config": self.config.to_json_dict(),
            "label": self.label,
            "pending": len(self.pending),
            "judged": len(self.judgments),
            "steps": len(self.steps),
            "program_digest": program_digest(self.program),
        }

    def witnesses_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "status": self.status,
            "epsilon": self.config.epsilon,
            "delta": self.config.delta,
            "witnesses": [w.to_json_dict() for w in self.pending],
        }

    def program_doc(self) -> dict[str, Any]:
        rows = list(self.initial_rows)
        if self.steps:
            rows.extend(self.current_rows)
        return {
            "id": self.id,
            "status": self.status,
            "program": to_json_dict(self.program),
            "program_text": repr(self.program),
            "program_digest": program_digest(self.program),
            "epsilon": self.config.epsilon,
            "delta": self.config.delta,
            "scatter": [
                {
                    "node_path": r.node_path,
                    "size": r.size,
                    "epsilon": r.epsilon,
                    "delta": r.delta,
                    "parent_path": r.parent_path,
                    "phase": r.phase,
                }
                for r in rows
            ],
        }

    def steps_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "status": self.status,
            "steps": [s.to_json_dict() for s in self.steps],
            "judgments": [
                j.to_json_dict() for _, j in sorted(self.judgments.items())
            ],
        }


class SessionStore:
    """Thread-safe registry of sessions, persisted under one directory."""

    def __init__(self, state_dir: str | Path | None = None):
        self.state_dir = Path(state_dir) if state_dir else Path(tempfile.mkdtemp(prefix="proxyaudit-"))
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}

    def load_existing(self) -> list[str]:
        """Restore sessions persisted by a previous service process."""
        restored = []
        for path in sorted(self.state_dir.glob("*.json")):
            if path.name.endswith(".data.csv"):
                continue
            try:
                session = Session.restore(path, self.state_dir)
            except (ProxyAuditError, KeyError, json.JSONDecodeError, OSError):
                continue
            with self._lock:
                self._sessions[session.id] = session
            restored.append(session.id)
        return restored

    def create_from_request(self, body: dict[str, Any]) -> Session:
        if not isinstance(body, dict):
            raise ServiceError(422, "body must be a JSON object")
        for key in ("model", "config"):
            if key not in body:
                raise ServiceError(422, f"missing field {key!r}")
        try:
            program = from_json_dict(body["model"])
            config = AuditConfig.from_json_dict(body["config"])
        except ProxyAuditError as exc:
            raise ServiceError(422, str(exc)) from exc

        session_id = uuid.uuid4().hex[:12]
        data_path = self.state_dir / f"{session_id}.data.csv"
        if "data_csv" in body:
            if not isinstance(body["data_csv"], str):
                raise ServiceError(422, "data_csv must be a string")
            data_path.write_text(body["data_csv"], encoding="utf-8")
        elif "data_path" in body:
            src = Path(str(body["data_path"]))
            try:
                data_path.write_text(src.read_text(encoding="utf-8"), encoding="utf-8")
            except OSError as exc:
                raise ServiceError(422, f"cannot read data_path: {exc}") from exc
        else:
            raise ServiceError(422, "missing field 'data_csv' or 'data_path'")

        try:
            data = load_dataset(data_path, seed=config.seed)
            check_audit_inputs(program, data, config)
        except ProxyAuditError as exc:
            raise ServiceError(422, str(exc)) from exc

        label = body.get("label")
        if label is not None and label not in data.columns:
            raise ServiceError(422, f"label column {label!r} is not in the dataset")
        if label is None:
            data = self_label(data, program)
            label = SELF_LABEL
            # Re-persist so a restored session reloads the labeled table
            # and the checkpoint digest verifies.
            _write_dataset_csv(data, data_path)
            data = load_dataset(data_path, seed=config.seed)

        session = Session.create(
            program=program,
            data=data,
            config=config,
            label=label,
            state_dir=self.state_dir,
            data_path=data_path,
            session_id=session_id,
        )
        with self._lock:
            self._sessions[session.id] = session
        return session

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ServiceError(404, f"no session {session_id!r}")
        return session

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._sessions)

    def listing(self) -> list[dict[str, Any]]:
        with self._lock:
            sessions = [self._sessions[sid] for sid in sorted(self._sessions)]
        docs = []
        for session in sessions:
            with session.lock:
                docs.append(session.status_doc())
        return docs


def _json_bytes(doc: Any) -> bytes:
    return (json.dumps(doc, sort_keys=True) + "\n").encode("utf-8")


class _Handler(BaseHTTPRequestHandler):
    server_version = "proxyaudit"
    protocol_version = "HTTP/1.1"
    store: SessionStore
    ui_dir: Path | None = None

    # -- plumbing ------------------------------------------------------

    def log_message(self, fmt: str, *args: Any) -> None:  # quiet by default
        pass

    def _cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _reply(self, status: int, doc: Any) -> None:
        payload = _json_bytes(doc)
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self._cors()
        self.end_headers()
        self.wfile.write(payload)

    def _fail(self, status: int, message: str) -> None:
        self._reply(status, {"error": message})

    def _drain(self) -> bytes:
        """Consume the request body so keep-alive connections stay aligned
        on request boundaries even when the request is rejected."""
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError as exc:
            # Cannot tell where this request ends; stop reusing the socket.
            self.close_connection = True
            raise ServiceError(422, "bad Content-Length") from exc
        return self.rfile.read(length) if length else b""

    def _read_body(self) -> dict[str, Any]:
        raw = self._drain()
        ctype = self.headers.get("Content-Type", "application/json")
        if "json" not in ctype:
            raise ServiceError(422, f"expected application/json body, got {ctype!r}")
        if not raw:
            raise ServiceError(422, "empty request body")
        try:
            body = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ServiceError(422, f"malformed JSON body: {exc}") from exc
        if not isinstance(body, dict):
            raise ServiceError(422, "body must be a JSON object")
        return body

    # -- routes ----------------------------------------------------------

    def do_OPTIONS(self) -> None:
        self.send_response(204)
        self._cors()
        self.end_headers()

    def do_GET(self) -> None:
        try:
            if self.path == "/api/sessions":
                self._reply(200, {"sessions": self.store.listing()})
                return
            m = _SESSION_RE.match(self.path)
            if m:
                session = self.store.get(m.group(1))
                view = m.group(3)
                with session.lock:
                    if view is None:
                        doc = session.status_doc()
                    elif view == "witnesses":
                        doc = session.witnesses_doc()
                    elif view == "program":
                        doc = session.program_doc()
                    elif view == "steps":
                        doc = session.steps_doc()
                    else:  # pragma: no cover - regex precludes
                        raise ServiceError(404, "no such endpoint")
                self._reply(200, doc)
                return
            if self.path.startswith("/api/"):
                raise ServiceError(404, "no such endpoint")
            self._serve_static()
        except ServiceError as exc:
            self._fail(exc.status, str(exc))
        except BrokenPipeError:
            pass

    def do_POST(self) -> None:
        try:
            if self.path == "/api/sessions":
                body = self._read_body()
                session = self.store.create_from_request(body)
                with session.lock:
                    doc = session.status_doc()
                self._reply(201, doc)
                return
            m = _SESSION_RE.match(self.path)
            if m and m.group(3) == "judgments":
                body = self._read_body()  # before any 404: keeps the socket aligned
                session = self.store.get(m.group(1))
                witness_id = body.get("witness_id")
                appropriate = body.get("appropriate")
                note = body.get("note")
                if not isinstance(witness_id, str) or not isinstance(appropriate, bool):
                    raise ServiceError(
                        422, "body must contain witness_id (string) and appropriate (bool)"
                    )
                if note is not None and not isinstance(note, str):
                    raise ServiceError(422, "note must be a string")
                with session.lock:
                    judgment = session.record_judgment(witness_id, appropriate, note)
                    doc = {
                        "recorded": judgment.to_json_dict(),
                        "status": session.status,
                        "pending": len(session.pending),
                    }
                self._reply(200, doc)
                return
            self._drain()  # unmatched route: body still owed on the socket
            raise ServiceError(404, "no such endpoint")
        except ServiceError as exc:
            self._fail(exc.status, str(exc))
        except ProxyAuditError as exc:
            self._fail(422, str(exc))
        except BrokenPipeError:
            pass

    # -- static UI -------------------------------------------------------

    def _serve_static(self) -> None:
        if self.ui_dir is None:
            raise ServiceError(404, "no UI bundled; API lives under /api/")
        rel = self.path.split("?", 1)[0].lstrip("/") or "index.html"
        target = (self.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            target = self.ui_dir / "index.html"
            if not target.is_file():
                raise ServiceError(404, "not found")
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        payload = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(payload)))
        self._cors()
        self.end_headers()
        self.wfile.write(payload)


def make_server(
    host: str = "127.0.0.1",
    port: int = 8321,
    state_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
    store: SessionStore | None = None,
) -> tuple[ThreadingHTTPServer, SessionStore]:
    store = store or SessionStore(state_dir)

    class Handler(_Handler):
        pass

    Handler.store = store
    Handler.ui_dir = Path(ui_dir).resolve() if ui_dir else None
    server = ThreadingHTTPServer((host, port), Handler)
    return server, store


def serve_forever(
    host: str = "127.0.0.1",
    port: int = 8321,
    state_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
) -> None:
    """Run the service until interrupted; restores persisted sessions."""
    server, store = make_server(host, port, state_dir, ui_dir)
    restored = store.load_existing()
    if restored:
        print(f"restored {len(restored)} session(s): {', '.join(restored)}")
    print(f"proxyaudit service listening on http://{host}:{server.server_address[1]}/")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def run_blocking_session(
    program: Expr,
    data: Dataset,
    cfg: AuditConfig,
    label: str,
    host: str = "127.0.0.1",
    port: int = 8321,
    judgments: Mapping[str, Judgment] | None = None,
    steps: Sequence[RepairStep] | None = None,
) -> RepairOutcome:
    """Serve one session and block until it is judged to completion.

    Used by ``proxyaudit repair --oracle serve``. Interrupting the wait
    suspends the session with a checkpoint instead of losing work.
    """
    store = SessionStore(None)
    data_path = store.state_dir / "session.data.csv"
    _write_dataset_csv(data, data_path)
    session = Session.create(
        program=program,
        data=data,
        config=cfg,
        label=label,
        state_dir=store.state_dir,
        data_path=data_path,
        judgments=judgments,
        steps=steps,
    )
    store.add(session)
    server, _ = make_server(host, port, store=store)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    print(
        f"judgment session {session.id} at http://{host}:{server.server_address[1]}/ "
        f"(POST /api/sessions/{session.id}/judgments)"
    )
    try:
        with session.lock:
            while session.status != DONE:
                session.lock.wait(timeout=0.5)
        return RepairOutcome(
            CLEAN,
            session.program,
            session.steps,
            session.judgments,
            session.current_witnesses,
        )
    except KeyboardInterrupt:
        return RepairOutcome(
            SUSPENDED,
            session.program,
            session.steps,
            session.judgments,
            session.pending,
            checkpoint=session.checkpoint(),
        )
    finally:
        server.shutdown()
        server.server_close()


def _write_dataset_csv(data: Dataset, path: Path) -> None:
    """Materialize a dataset back to CSV (codes decoded to their labels)."""
    lines = [",".join(data.columns)]
    for row in data.table:
        cells = []
        for name, value in zip(data.columns, row):
            if name in data.codebook:
                cells.append(data.decode(name, value))
            else:
                cells.append(repr(float(value)))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
