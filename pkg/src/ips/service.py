"""Survey ingestion, training orchestration, and live localization service.

Persistence is a plain directory per session (samples.jsonl, sparse_map.json,
radiomap.json, report.json): no database, everything diffable. Sample batches
append atomically (one write of the whole batch, all or none) and the
recorded count is always recomputable from the JSONL store. Trained radio
maps are immutable snapshots, so localization and streaming never contend
with ingestion.
"""

from __future__ import annotations

import asyncio
import json
import os
import threading
import time
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response, StreamingResponse

from . import empirical, gpr, model
from .localize import (
    AccuracyRecord,
    Observation,
    estimate_to_json,
    evaluate,
    localize,
    summary_to_json,
)
from .errors import (
    EmptyInput,
    InsufficientOverlap,
    InvalidArea,
    IpsError,
    NotTrained,
    SessionNotFound,
    TrainingFailed,
    ValidationFailed,
    WrongState,
)

SAMPLES_FILE = "samples.jsonl"
SESSION_FILE = "session.json"
SPARSE_FILE = "sparse_map.json"
RADIOMAP_FILE = "radiomap.json"
REPORT_FILE = "report.json"

SUBSCRIBER_QUEUE_SIZE = 256


class SessionState(Enum):
    COLLECTING = "Collecting"
    TRAINING = "Training"
    TRAINED = "Trained"
    FAILED = "Failed"


@dataclass
class Session:
    session_id: str
    area: model.SurveyArea
    state: SessionState
    created_at: datetime
    trained_at: Optional[datetime] = None
    sample_count: int = 0
    radiomap: Optional[gpr.DenseRadioMap] = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def meta_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "area": self.area.to_json(),
            "state": self.state.value,
            "created_at": self.created_at.isoformat().replace("+00:00", "Z"),
            "trained_at": (
                self.trained_at.isoformat().replace("+00:00", "Z")
                if self.trained_at
                else None
            ),
            "sample_count": self.sample_count,
        }


def _count_complete_lines(path: Path) -> int:
    if not path.exists():
        return 0
    count = 0
    with open(path, "rb") as f:
        for line in f:
            if line.endswith(b"\n"):
                count += 1
    return count


def _write_json_atomic(path: Path, obj: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(obj, f, separators=(",", ":"))
        f.write("\n")
    os.replace(tmp, path)


class SessionStore:
    """Directory-backed session registry; safe for concurrent use."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()
        self._load_existing()

    def _load_existing(self) -> None:
        for meta_path in sorted(self.root.glob(f"*/{SESSION_FILE}")):
            with open(meta_path, "r", encoding="utf-8") as f:
                meta = json.load(f)
            state = SessionState(meta["state"])
            if state == SessionState.TRAINING:
                state = SessionState.FAILED  # crashed mid-train
            session = Session(
                session_id=meta["session_id"],
                area=model.SurveyArea.from_json(meta["area"]),
                state=state,
                created_at=datetime.fromisoformat(
                    meta["created_at"].replace("Z", "+00:00")
                ),
                trained_at=(
                    datetime.fromisoformat(meta["trained_at"].replace("Z", "+00:00"))
                    if meta.get("trained_at")
                    else None
                ),
            )
            session.sample_count = _count_complete_lines(
                self.dir_of(session.session_id) / SAMPLES_FILE
            )
            if state == SessionState.TRAINED:
                radiomap_path = self.dir_of(session.session_id) / RADIOMAP_FILE
                if radiomap_path.exists():
                    with open(radiomap_path, "r", encoding="utf-8") as f:
                        session.radiomap = gpr.dense_map_from_json(json.load(f))
                else:
                    session.state = SessionState.FAILED
            self._sessions[session.session_id] = session

    def dir_of(self, session_id: str) -> Path:
        return self.root / session_id

    def persist_meta(self, session: Session) -> None:
        _write_json_atomic(self.dir_of(session.session_id) / SESSION_FILE, session.meta_json())

    def create(self, area: model.SurveyArea) -> Session:
        session = Session(
            session_id=uuid.uuid4().hex,
            area=area,
            state=SessionState.COLLECTING,
            created_at=datetime.now(timezone.utc),
        )
        with self._registry_lock:
            self._sessions[session.session_id] = session
        self.dir_of(session.session_id).mkdir(parents=True, exist_ok=True)
        self.persist_meta(session)
        return session

    def get(self, session_id: str) -> Session:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFound(f"no session {session_id!r}")
        return session

    def ingest(self, session_id: str, samples: list[model.FingerprintSample]) -> int:
        session = self.get(session_id)
        with session.lock:
            if session.state != SessionState.COLLECTING:
                raise WrongState(
                    f"session is {session.state.value}, ingestion needs Collecting"
                )
            for i, sample in enumerate(samples):
                try:
                    model.validate_sample(sample, session.area)
                except IpsError as exc:
                    raise ValidationFailed(f"sample {i}: {exc}") from exc
            blob = b"".join(model.sample_to_line(s) for s in samples)
            path = self.dir_of(session_id) / SAMPLES_FILE
            fd = os.open(path, os.O_APPEND | os.O_CREAT | os.O_WRONLY, 0o644)
            try:
                view = memoryview(blob)
                while view:
                    written = os.write(fd, view)
                    view = view[written:]
            finally:
                os.close(fd)
            session.sample_count += len(samples)
            self.persist_meta(session)
            return len(samples)

    def train(
        self,
        session_id: str,
        spacing: float = 1.0,
        hyper_policy: gpr.HyperPolicy = "fixed",
        min_presence: float = empirical.MIN_PRESENCE,
    ) -> dict:
        session = self.get(session_id)
        with session.lock:
            if session.state not in (SessionState.COLLECTING, SessionState.FAILED):
                raise WrongState(
                    f"session is {session.state.value}, training needs Collecting or Failed"
                )
            # only Collecting->Training->{Trained,Failed} transitions are legal,
            # so the job enters Training before any failure can be recorded
            session.state = SessionState.TRAINING
            self.persist_meta(session)

        session_dir = self.dir_of(session_id)
        started = time.perf_counter()
        try:
            if session.sample_count < 1:
                raise TrainingFailed("EmptyInput: session has no samples")
            with open(session_dir / SAMPLES_FILE, "rb") as f:
                samples = model.read_jsonl(f)
            sparse = empirical.fit_distributions(samples, session.area, min_presence)
            dense = gpr.densify(sparse, spacing, hyper_policy)
            if not dense.surfaces:
                raise TrainingFailed("every surface was skipped (too few cells)")
            _write_json_atomic(session_dir / SPARSE_FILE, empirical.sparse_map_to_json(sparse))
            _write_json_atomic(session_dir / RADIOMAP_FILE, gpr.dense_map_to_json(dense))
        except Exception as exc:
            with session.lock:
                session.state = SessionState.FAILED
                self.persist_meta(session)
            for name in (SPARSE_FILE, RADIOMAP_FILE):
                try:
                    os.unlink(session_dir / name)
                except FileNotFoundError:
                    pass
            report = {"status": "failed", "error": type(exc).__name__, "detail": str(exc)}
            _write_json_atomic(session_dir / REPORT_FILE, report)
            if isinstance(exc, TrainingFailed):
                raise
            raise TrainingFailed(f"{type(exc).__name__}: {exc}") from exc

        elapsed = time.perf_counter() - started
        report = {
            "status": "trained",
            "sample_count": session.sample_count,
            "spacing": spacing,
            "hyper_policy": hyper_policy,
            "min_presence": min_presence,
            "grid": {"nx": dense.nx, "ny": dense.ny},
            "surfaces": [
                {
                    "heading": heading.name,
                    "bssid": ap.bssid,
                    "band": ap.band.value,
                    "hyperparams": surface.hyperparams.to_json(),
                }
                for (heading, ap), surface in sorted(
                    dense.surfaces.items(), key=lambda kv: (kv[0][0].degrees, kv[0][1].key())
                )
            ],
            "skipped": [
                {"heading": heading.name, "bssid": ap.bssid, "band": ap.band.value}
                for heading, ap in dense.skipped
            ],
            "wall_clock_s": elapsed,
        }
        _write_json_atomic(session_dir / REPORT_FILE, report)
        with session.lock:
            session.radiomap = dense
            session.state = SessionState.TRAINED
            session.trained_at = datetime.now(timezone.utc)
            self.persist_meta(session)
        return report

    def trained_map(self, session_id: str) -> gpr.DenseRadioMap:
        session = self.get(session_id)
        if session.state != SessionState.TRAINED or session.radiomap is None:
            raise NotTrained(f"session is {session.state.value}")
        return session.radiomap


class EventHub:
    """Per-session fan-out of estimate/accuracy events to SSE subscribers.

    Slow clients are disconnected (their queue overflows) rather than
    back-pressuring the localizer.
    """

    def __init__(self):
        self._subscribers: dict[str, set[asyncio.Queue]] = {}
        self._lock = threading.Lock()
        self.loop: Optional[asyncio.AbstractEventLoop] = None

    def subscribe(self, session_id: str) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue(maxsize=SUBSCRIBER_QUEUE_SIZE)
        with self._lock:
            self._subscribers.setdefault(session_id, set()).add(queue)
        return queue

    def unsubscribe(self, session_id: str, queue: asyncio.Queue) -> None:
        with self._lock:
            self._subscribers.get(session_id, set()).discard(queue)

    def publish(self, session_id: str, event: dict) -> None:
        if self.loop is None:
            return
        data = json.dumps(event, separators=(",", ":"))
        with self._lock:
            queues = list(self._subscribers.get(session_id, ()))
        for queue in queues:
            self.loop.call_soon_threadsafe(self._offer, session_id, queue, data)

    def _offer(self, session_id: str, queue: asyncio.Queue, data: str) -> None:
        # runs on the event loop thread, so no races with the consumer
        try:
            queue.put_nowait(data)
        except asyncio.QueueFull:
            self.unsubscribe(session_id, queue)
            try:
                queue.get_nowait()  # make room for the poison pill
            except asyncio.QueueEmpty:
                pass
            try:
                queue.put_nowait(None)
            except asyncio.QueueFull:
                pass


# -- request parsing ----------------------------------------------------------

def parse_observation(obj: object) -> Observation:
    if not isinstance(obj, dict):
        raise ValidationFailed("observation must be a JSON object")
    allowed = {"t", "heading_deg", "readings"}
    unknown = obj.keys() - allowed
    if unknown:
        raise ValidationFailed(f"observation: unknown key {sorted(unknown)[0]!r}")
    if "readings" not in obj or "t" not in obj:
        raise ValidationFailed("observation needs t and readings")
    heading = None
    if obj.get("heading_deg") is not None:
        if obj["heading_deg"] not in (0, 90, 180, 270):
            raise ValidationFailed("heading_deg must be one of 0/90/180/270")
        heading = model.Heading.from_degrees(obj["heading_deg"])
    try:
        readings = model.readings_from_json(obj["readings"])
        timestamp = model.parse_timestamp(obj["t"])
    except (ValueError, TypeError) as exc:
        raise ValidationFailed(f"observation: {exc}") from exc
    for ap, rssi in readings.items():
        if not (model.RSSI_MIN <= rssi <= model.RSSI_MAX):
            raise ValidationFailed(f"observation: rssi {rssi} out of range for {ap.bssid}")
    return Observation(readings=readings, timestamp=timestamp, heading_hint=heading)


def record_to_json(record: AccuracyRecord) -> dict:
    est = record.estimate
    return {
        "gt_x": record.ground_truth[0],
        "gt_y": record.ground_truth[1],
        "est_x": est.x,
        "est_y": est.y,
        "heading_est": est.heading_est.name,
        "error_m": record.error_m,
        "matched_aps": est.matched_ap_count,
    }


# -- application ---------------------------------------------------------------

_ERROR_STATUS = {
    SessionNotFound: 404,
    WrongState: 409,
    NotTrained: 409,
    ValidationFailed: 400,
    InvalidArea: 400,
    InsufficientOverlap: 400,
    EmptyInput: 400,
    TrainingFailed: 500,
}


def create_app(data_dir: str | Path) -> FastAPI:
    store = SessionStore(data_dir)
    hub = EventHub()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        hub.loop = asyncio.get_running_loop()
        yield

    app = FastAPI(title="ips", version="0.1.0", lifespan=lifespan)
    app.state.store = store
    app.state.hub = hub
    # single-operator local tool; the browser console runs on another origin
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(IpsError)
    async def _domain_error(request: Request, exc: IpsError):
        status = _ERROR_STATUS.get(type(exc), 500)
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.exception_handler(RequestValidationError)
    async def _body_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": "ValidationFailed", "detail": str(exc.errors()[:1])},
        )

    @app.post("/api/v1/sessions")
    def create_session(payload: dict = Body(...)):
        if "area" not in payload:
            raise ValidationFailed("missing area")
        area = model.SurveyArea.from_json(payload["area"])
        session = store.create(area)
        return {"session_id": session.session_id}

    @app.get("/api/v1/sessions/{session_id}")
    def session_info(session_id: str):
        session = store.get(session_id)
        return session.meta_json()

    @app.post("/api/v1/sessions/{session_id}/samples")
    def ingest_samples(session_id: str, payload: dict = Body(...)):
        records = payload.get("samples")
        if not isinstance(records, list) or not records:
            raise ValidationFailed("samples must be a non-empty array")
        samples = []
        for i, record in enumerate(records):
            try:
                samples.append(model.record_to_sample(record))
            except ValueError as exc:
                raise ValidationFailed(f"sample {i}: {exc}") from exc
        accepted = store.ingest(session_id, samples)
        return {"accepted": accepted}

    @app.post("/api/v1/sessions/{session_id}/train")
    def train(session_id: str, payload: dict = Body(default={})):
        spacing = float(payload.get("spacing", 1.0))
        hyper_policy = payload.get("hyper_policy", "fixed")
        min_presence = float(payload.get("min_presence", empirical.MIN_PRESENCE))
        if hyper_policy not in ("fixed", "grid-search"):
            raise ValidationFailed("hyper_policy must be fixed or grid-search")
        if not spacing > 0:
            raise ValidationFailed("spacing must be > 0")
        if not (0.0 <= min_presence <= 1.0):
            raise ValidationFailed("min_presence must be in [0, 1]")
        return store.train(
            session_id, spacing=spacing, hyper_policy=hyper_policy, min_presence=min_presence
        )

    @app.get("/api/v1/sessions/{session_id}/radiomap")
    def radiomap(session_id: str):
        store.trained_map(session_id)  # state check
        path = store.dir_of(session_id) / RADIOMAP_FILE
        return Response(content=path.read_bytes(), media_type="application/json")

    @app.post("/api/v1/sessions/{session_id}/localize")
    def localize_endpoint(session_id: str, payload: dict = Body(...)):
        radio_map = store.trained_map(session_id)
        obs = parse_observation(payload.get("observation"))
        estimate = localize(obs, radio_map)
        body = estimate_to_json(estimate)
        hub.publish(session_id, {"type": "estimate", "payload": body})
        return body

    @app.post("/api/v1/sessions/{session_id}/eval")
    def eval_endpoint(session_id: str, payload: dict = Body(...)):
        radio_map = store.trained_map(session_id)
        entries = payload.get("observations_with_truth")
        if not isinstance(entries, list) or not entries:
            raise ValidationFailed("observations_with_truth must be a non-empty array")
        pairs = []
        for i, entry in enumerate(entries):
            if not isinstance(entry, dict) or "observation" not in entry or "truth" not in entry:
                raise ValidationFailed(f"entry {i}: needs observation and truth")
            truth = entry["truth"]
            if not isinstance(truth, dict) or "x" not in truth or "y" not in truth:
                raise ValidationFailed(f"entry {i}: truth needs x and y")
            obs = parse_observation(entry["observation"])
            pairs.append((obs, (float(truth["x"]), float(truth["y"]))))
        records, summary = evaluate(pairs, radio_map)
        records_json = [record_to_json(r) for r in records]
        for record in records_json:
            hub.publish(session_id, {"type": "accuracy", "payload": record})
        return {"summary": summary_to_json(summary), "records": records_json}

    @app.get("/api/v1/sessions/{session_id}/stream")
    async def stream(session_id: str):
        store.trained_map(session_id)  # NotTrained -> 409 before the stream opens
        queue = hub.subscribe(session_id)

        async def gen():
            try:
                yield "retry: 1000\n\n"
                while True:
                    try:
                        data = await asyncio.wait_for(queue.get(), timeout=15.0)
                    except asyncio.TimeoutError:
                        yield ": keepalive\n\n"
                        continue
                    if data is None:  # dropped as a slow client
                        return
                    yield f"data: {data}\n\n"
            finally:
                hub.unsubscribe(session_id, queue)

        return StreamingResponse(gen(), media_type="text/event-stream")

    return app
