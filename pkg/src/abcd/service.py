"""HTTP session service for human-in-the-loop experimentation.

Each session holds a belief state initialised from human-supplied
observational samples. The service recommends the next intervention, accepts
measured outcomes (which need not follow the recommendation), and exposes the
posterior, edge marginals, and GP fit curves for visualisation.

Sessions persist as append-only JSON-lines event logs; state is rebuilt by
replaying them, which doubles as an audit trail. Writes to one session are
serialised; distinct sessions are fully independent.
"""

from __future__ import annotations

import json
import logging
import math
import re
import threading
import urllib.parse
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import __version__
from .belief import (
    BeliefError,
    BeliefState,
    InterventionSpec,
    Sample,
    edge_marginals,
    initialize,
    update,
)
from .config import ConfigError, design_from_json, prior_from_json, prior_to_json, root_model_from_json
from .design import DesignError, optimize_intervention, utility
from .seeds import substream_seed

log = logging.getLogger(__name__)

N_MIN = 5
DEFAULT_RECOMMEND_BUDGET = 30.0
CONVERGED_THRESHOLD = 1.0 - 1e-9


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, field: str | None = None):
        self.status = status
        self.code = code
        self.message = message
        self.field = field
        super().__init__(message)

    def body(self) -> dict:
        err = {"code": self.code, "message": self.message}
        if self.field is not None:
            err["field"] = self.field
        return {"error": err}


class Session:
    def __init__(self, sid: str, belief: BeliefState, config_json: dict):
        self.sid = sid
        self.belief = belief
        self.config_json = config_json
        self.history: list[dict] = []
        self.revision = 0
        self.pending: dict | None = None
        self.recommend_counter = 0
        self.lock = threading.Lock()
        self.recommend_running = False

    def entropy(self) -> float:
        return float(-utility(self.belief.log_posterior))


def _posterior_view(belief: BeliefState) -> list[dict]:
    probs = belief.posterior_probs()
    return [
        {"graph": g.to_json(), "p": float(p)} for g, p in zip(belief.universe, probs)
    ]


class SessionService:
    """Framework-free core; the HTTP handler is a thin shim over it."""

    def __init__(
        self,
        state_dir: str | Path | None = None,
        recommend_time_budget: float = DEFAULT_RECOMMEND_BUDGET,
    ):
        self.state_dir = Path(state_dir) if state_dir is not None else None
        self.recommend_time_budget = recommend_time_budget
        self.sessions: dict[str, Session] = {}
        self.idempotency: dict[str, str] = {}
        self._store_lock = threading.Lock()
        if self.state_dir is not None:
            self.state_dir.mkdir(parents=True, exist_ok=True)
            self._load_state()

    # ---------- persistence ----------

    def _events_path(self, sid: str) -> Path:
        return self.state_dir / f"session-{sid}.jsonl"

    def _append_event(self, sid: str, event: dict) -> None:
        if self.state_dir is None:
            return
        with open(self._events_path(sid), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")

    def _load_state(self) -> None:
        idem_path = self.state_dir / "idempotency.json"
        if idem_path.exists():
            self.idempotency = json.loads(idem_path.read_text(encoding="utf-8"))
        for path in sorted(self.state_dir.glob("session-*.jsonl")):
            sid = path.stem.removeprefix("session-")
            try:
                self._replay_session(sid, path)
            except Exception:
                log.exception("failed to restore session %s", sid)

    def _replay_session(self, sid: str, path: Path) -> None:
        session: Session | None = None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                if event["event"] == "created":
                    session = self._build_session(sid, event["body"])
                elif event["event"] == "recommended" and session is not None:
                    session.pending = event["recommendation"]
                    session.recommend_counter = event["counter"]
                elif event["event"] == "observed" and session is not None:
                    sample = Sample.from_json(event["sample"])
                    session.belief = update(session.belief, sample)
                    session.revision += 1
                    session.pending = None
                    session.history.append(event["record"])
        if session is not None:
            self.sessions[sid] = session

    def _save_idempotency(self) -> None:
        if self.state_dir is None:
            return
        path = self.state_dir / "idempotency.json"
        path.write_text(json.dumps(self.idempotency), encoding="utf-8")

    # ---------- session construction ----------

    def _build_session(self, sid: str, body: dict) -> Session:
        d = body.get("d")
        if not isinstance(d, int) or not 1 <= d <= 5:
            raise ApiError(422, "invalid_field", f"d must be an integer in [1, 5], got {d!r}", "d")
        rows = body.get("observations")
        if not isinstance(rows, list):
            raise ApiError(422, "invalid_field", "observations must be a list of rows", "observations")
        if len(rows) < N_MIN:
            raise ApiError(
                422,
                "too_few_samples",
                f"need at least n_min={N_MIN} observational samples, got {len(rows)}",
                "observations",
            )
        obs: list[Sample] = []
        for k, row in enumerate(rows):
            if isinstance(row, dict):
                row = row.get("values")
            if not isinstance(row, list) or len(row) != d:
                raise ApiError(
                    422, "invalid_field",
                    f"observation {k} must be a list of {d} numbers", "observations",
                )
            try:
                obs.append(Sample(values=tuple(float(v) for v in row)))
            except (TypeError, ValueError, BeliefError) as exc:
                raise ApiError(422, "invalid_field", f"observation {k}: {exc}", "observations")
        try:
            prior = prior_from_json(body.get("prior"))
            root_model = root_model_from_json(body.get("root_model"))
            seed = int(body.get("seed", 0))
            design = design_from_json(body.get("design"), seed=seed)
        except (ConfigError, TypeError, ValueError) as exc:
            raise ApiError(422, "invalid_field", str(exc), getattr(exc, "field", None))
        try:
            belief = initialize(obs, d=d, prior=prior, root_model=root_model, seed=seed)
        except BeliefError as exc:
            raise ApiError(422, "invalid_field", str(exc), "observations")
        config_json = {
            "d": d,
            "observations": [list(s.values) for s in obs],
            "prior": prior_to_json(prior),
            "design": body.get("design") or {},
            "root_model": body.get("root_model") or {},
            "seed": seed,
        }
        return Session(sid, belief, config_json)

    # ---------- endpoints ----------

    def health(self) -> tuple[int, dict]:
        return 200, {"status": "ok", "version": __version__}

    def create_session(self, body: dict) -> tuple[int, dict]:
        if not isinstance(body, dict):
            raise ApiError(422, "invalid_body", "request body must be a JSON object")
        key = body.get("idempotency_key")
        with self._store_lock:
            if key is not None and key in self.idempotency:
                sid = self.idempotency[key]
                session = self.sessions.get(sid)
                if session is not None:
                    return 200, self._state_view(session)
        sid = uuid.uuid4().hex
        session = self._build_session(sid, body)
        with self._store_lock:
            if key is not None and key in self.idempotency:
                existing = self.sessions.get(self.idempotency[key])
                if existing is not None:
                    return 200, self._state_view(existing)
            self.sessions[sid] = session
            if key is not None:
                self.idempotency[key] = sid
                self._save_idempotency()
        self._append_event(sid, {"event": "created", "body": session.config_json})
        return 201, self._state_view(session)

    def _get(self, sid: str) -> Session:
        session = self.sessions.get(sid)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session with id {sid!r}")
        return session

    def _state_view(self, session: Session) -> dict:
        belief = session.belief
        return {
            "session_id": session.sid,
            "revision": session.revision,
            "d": belief.d,
            "posterior": _posterior_view(belief),
            "edge_marginals": edge_marginals(belief).tolist(),
            "entropy": session.entropy(),
            "entropy_history": [rec["entropy"] for rec in session.history],
            "history": list(session.history),
            "pending_recommendation": session.pending,
            "n_observations": len(belief.data),
            "config": session.config_json,
        }

    def get_state(self, sid: str) -> tuple[int, dict]:
        return 200, self._state_view(self._get(sid))

    def recommend(self, sid: str) -> tuple[int, dict]:
        session = self._get(sid)
        with session.lock:
            if session.recommend_running:
                raise ApiError(409, "recommendation_running",
                               "a recommendation is already being computed for this session")
            session.recommend_running = True
            belief = session.belief  # immutable snapshot; safe to read unlocked
            revision_at_start = session.revision
            counter = session.recommend_counter
            session.recommend_counter += 1
        try:
            design = design_from_json(
                session.config_json.get("design"),
                seed=substream_seed(int(session.config_json.get("seed", 0)), "recommend", counter),
            )
            result = optimize_intervention(belief, design, time_budget=self.recommend_time_budget)
            recommendation = {
                "target": result.target,
                "value": result.value,
                "eig": result.eig,
                "diagnostics": result.diagnostics_json(),
                "budget_exhausted": result.budget_exhausted,
                "belief_converged": bool(
                    float(np.max(belief.posterior_probs())) >= CONVERGED_THRESHOLD
                    or result.eig == 0.0
                ),
            }
        except DesignError as exc:
            raise ApiError(422, "design_error", str(exc))
        finally:
            with session.lock:
                session.recommend_running = False
        # only install as pending if no observation landed meanwhile; a stale
        # recommendation must not resurrect after observe cleared it
        with session.lock:
            committed = session.revision == revision_at_start
            if committed:
                session.pending = recommendation
        if committed:
            self._append_event(sid, {"event": "recommended", "recommendation": recommendation,
                                     "counter": counter + 1})
        return 200, {"session_id": sid, "revision": revision_at_start, **recommendation}

    def observe(self, sid: str, body: dict) -> tuple[int, dict]:
        session = self._get(sid)
        if not isinstance(body, dict):
            raise ApiError(422, "invalid_body", "request body must be a JSON object")
        values = body.get("values")
        d = session.belief.d
        if not isinstance(values, list) or len(values) != d:
            raise ApiError(422, "invalid_field", f"values must be a list of {d} numbers", "values")
        try:
            vals = [float(v) for v in values]
        except (TypeError, ValueError):
            raise ApiError(422, "invalid_field", "values must be numeric", "values")
        if not all(math.isfinite(v) for v in vals):
            raise ApiError(422, "invalid_field", "values must be finite", "values")
        iv_obj = body.get("intervention")
        if iv_obj is None:
            spec = InterventionSpec()
        else:
            try:
                target = int(iv_obj["target"])
                value = float(iv_obj["value"])
            except (KeyError, TypeError, ValueError):
                raise ApiError(422, "invalid_field",
                               "intervention must be {\"target\": int, \"value\": number}",
                               "intervention")
            if not 0 <= target < d:
                raise ApiError(422, "invalid_field",
                               f"intervention target {target} out of range for d={d}", "intervention")
            if vals[target] != value:
                raise ApiError(
                    422, "clamping_mismatch",
                    f"values[{target}] = {vals[target]!r} does not equal the intervention value {value!r}",
                    "values",
                )
            spec = InterventionSpec(target=target, value=value)
        sample = Sample(values=tuple(vals), intervention=spec)
        with session.lock:
            recommendation = session.pending
            session.belief = update(session.belief, sample)
            session.revision += 1
            session.pending = None
            record = {
                "t": len(session.history),
                "intervention": spec.to_json(),
                "values": list(sample.values),
                "recommendation": recommendation,
                "posterior": [float(p) for p in session.belief.posterior_probs()],
                "entropy": session.entropy(),
            }
            session.history.append(record)
            revision = session.revision
        self._append_event(
            sid, {"event": "observed", "sample": sample.to_json(), "record": record,
                  "revision": revision}
        )
        belief = session.belief
        return 200, {
            "session_id": sid,
            "revision": revision,
            "posterior": _posterior_view(belief),
            "edge_marginals": edge_marginals(belief).tolist(),
            "entropy": record["entropy"],
            "record": record,
        }

    def predict_curve(self, sid: str, params: dict) -> tuple[int, dict]:
        session = self._get(sid)
        belief = session.belief
        try:
            graph_idx = int(params["graph"])
            node = int(params["node"])
        except (KeyError, TypeError, ValueError):
            raise ApiError(422, "invalid_field", "graph and node must be integers", "graph")
        if not 0 <= graph_idx < len(belief.universe):
            raise ApiError(422, "invalid_field",
                           f"graph index {graph_idx} out of range", "graph")
        g = belief.universe[graph_idx]
        if not 0 <= node < belief.d:
            raise ApiError(422, "invalid_field", f"node {node} out of range", "node")
        parents = g.parent_sets[node]
        if len(parents) != 1:
            raise ApiError(
                422, "not_a_curve",
                f"node {node} has {len(parents)} parents in graph {graph_idx}; "
                "curves are only defined for single-parent nodes",
                "node",
            )
        parent = parents[0]
        try:
            lo = float(params.get("lo", belief.centering[parent] - 3.0))
            hi = float(params.get("hi", belief.centering[parent] + 3.0))
            points = int(params.get("points", 200))
        except (TypeError, ValueError):
            raise ApiError(422, "invalid_field", "lo/hi/points must be numeric", "lo")
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise ApiError(422, "invalid_field", f"bad range [{lo}, {hi}]", "lo")
        points = min(max(points, 2), 2000)
        cache = belief.caches[(node, parents)]
        grid = np.linspace(lo, hi, points)
        X = (grid - belief.centering[parent]).reshape(-1, 1)
        means, var_f = cache.snapshot.predict_batch(X)
        band = 2.0 * np.sqrt(var_f + cache.snapshot.hyperparams.noise_variance)
        return 200, {
            "session_id": sid,
            "revision": session.revision,
            "graph": g.to_json(),
            "node": node,
            "parent": parent,
            "grid": grid.tolist(),
            "mean": (means + belief.centering[node]).tolist(),
            "band": band.tolist(),
        }


# ---------- HTTP plumbing ----------

_ROUTES = [
    ("GET", re.compile(r"^/(?:v1/)?healthz$"), "health"),
    ("POST", re.compile(r"^/v1/sessions$"), "create"),
    ("GET", re.compile(r"^/v1/sessions/(?P<sid>[0-9a-f]+)$"), "state"),
    ("POST", re.compile(r"^/v1/sessions/(?P<sid>[0-9a-f]+)/recommend$"), "recommend"),
    ("POST", re.compile(r"^/v1/sessions/(?P<sid>[0-9a-f]+)/observe$"), "observe"),
    ("GET", re.compile(r"^/v1/sessions/(?P<sid>[0-9a-f]+)/curve$"), "curve"),
]


def _make_handler(service: SessionService, static_dir: Path | None = None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # noqa: N802
            log.debug("%s - %s", self.address_string(), fmt % args)

        def _send_json(self, status: int, body: dict) -> None:
            payload = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(payload)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            if not raw:
                return {}
            try:
                return json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise ApiError(400, "invalid_json", f"request body is not valid JSON: {exc}")

        def _dispatch(self, method: str) -> None:
            parsed = urllib.parse.urlparse(self.path)
            try:
                for verb, pattern, name in _ROUTES:
                    match = pattern.match(parsed.path)
                    if not match:
                        continue
                    if verb != method:
                        raise ApiError(405, "method_not_allowed",
                                       f"{method} not allowed on {parsed.path}")
                    sid = match.groupdict().get("sid")
                    if name == "health":
                        status, body = service.health()
                    elif name == "create":
                        status, body = service.create_session(self._read_body())
                    elif name == "state":
                        status, body = service.get_state(sid)
                    elif name == "recommend":
                        self._read_body()
                        status, body = service.recommend(sid)
                    elif name == "observe":
                        status, body = service.observe(sid, self._read_body())
                    else:
                        params = {k: v[0] for k, v in urllib.parse.parse_qs(parsed.query).items()}
                        status, body = service.predict_curve(sid, params)
                    self._send_json(status, body)
                    return
                if static_dir is not None and method == "GET":
                    if self._send_static(parsed.path):
                        return
                raise ApiError(404, "not_found", f"no route for {parsed.path}")
            except ApiError as exc:
                self._send_json(exc.status, exc.body())
            except Exception as exc:  # noqa: BLE001
                log.exception("internal error")
                self._send_json(500, {"error": {"code": "internal", "message": str(exc)}})

        def _send_static(self, path: str) -> bool:
            rel = "index.html" if path in ("/", "") else path.lstrip("/")
            target = (static_dir / rel).resolve()
            if not str(target).startswith(str(static_dir.resolve())) or not target.is_file():
                return False
            ctype = {
                ".html": "text/html", ".js": "application/javascript",
                ".css": "text/css", ".map": "application/json",
            }.get(target.suffix, "application/octet-stream")
            payload = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)
            return True

        def do_GET(self):  # noqa: N802
            self._dispatch("GET")

        def do_POST(self):  # noqa: N802
            self._dispatch("POST")

    return Handler


def make_server(
    port: int,
    state_dir: str | Path | None = None,
    recommend_time_budget: float = DEFAULT_RECOMMEND_BUDGET,
    static_dir: str | Path | None = None,
) -> tuple[ThreadingHTTPServer, SessionService]:
    service = SessionService(state_dir=state_dir, recommend_time_budget=recommend_time_budget)
    static = Path(static_dir) if static_dir is not None else None
    server = ThreadingHTTPServer(("127.0.0.1", port), _make_handler(service, static))
    return server, service
