"""Incident-session HTTP service binding the pipeline end to end:
transcript lines in; classifications, patch-form updates, standing
orders, reminders and the confirmed ePCR out.

Every mutating call appends exactly one record to the session's NDJSON
input log; session state (timeline included) is a deterministic replay
of that log, which is what makes the confirmed ePCR byte-stable.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timedelta
from functools import lru_cache
from importlib import resources
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse

from . import classify as classify_mod
from . import lookup as lookup_mod
from . import nn_core, orders, reminders
from .nlu_extract import (PatchForm, default_lexicons, extract_fields,
                          load_lexicons, split_sentences)
from .report_metrics import IncidentTimeline, TimelineEvent, generate_epcr

SIMULATED_CLOCK_BASE = datetime(2019, 1, 1, 1, 1, 1)
DATA_DIR_ENV = "PATCHLINE_DATA_DIR"

CLASSIFIER_SEED = 7
CLASSIFIER_EPOCHS = 500
CLASSIFIER_LR = 0.5
ORDERS_EPOCHS = 400
ORDERS_LR = 0.5


class ApiError(Exception):
    def __init__(self, code: str, message: str, fields: dict | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.fields = fields or {}

    @property
    def status(self) -> int:
        return {"bad_request": 400, "not_found": 404,
                "insufficient_information": 422, "conflict": 409}[self.code]

    def to_json(self) -> dict:
        doc = {"code": self.code, "message": self.message}
        if self.fields:
            doc["fields"] = self.fields
        return doc


def fixtures_dir() -> Path:
    return Path(str(resources.files("patchline") / "fixtures"))


def data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, str(fixtures_dir())))


def resolve_fixture(name: str) -> Path:
    """Dropping a same-named file into PATCHLINE_DATA_DIR overrides the
    bundled fixture; otherwise the packaged copy is used."""
    override = data_dir() / name
    if override.is_file():
        return override
    return fixtures_dir() / name


@dataclass
class Pipeline:
    classifier: classify_mod.CnnParams
    order_model: orders.OrderModel
    dosing_rules: list
    din_registry: dict
    erg_registry: dict
    lexicons: object

    def rules_by_drug(self) -> dict:
        return {r.drug: r for r in self.dosing_rules}


_LEXICON_FILES = ("med_lexicon.tsv", "condition_lexicon.tsv",
                  "lemma_rules.json", "comment_stopwords.txt")


@lru_cache(maxsize=1)
def build_pipeline() -> Pipeline:
    """Train the desk-scale models from the fixtures (cached per process;
    training is seeded so results are reproducible). The data dir is read
    once; changing PATCHLINE_DATA_DIR later needs a new process."""
    corpus = classify_mod.LabeledCorpus.load_ndjson(
        resolve_fixture("classifier_corpus.ndjson"))
    classifier, _ = classify_mod.train_classifier(
        corpus, classify_mod.CnnConfig(seed=CLASSIFIER_SEED),
        nn_core.TrainConfig(learning_rate=CLASSIFIER_LR, epochs=CLASSIFIER_EPOCHS,
                            seed=CLASSIFIER_SEED))
    records = orders.load_records_csv(resolve_fixture("orders_records.csv"))
    order_model = orders.train_orders(
        records, nn_core.TrainConfig(learning_rate=ORDERS_LR, epochs=ORDERS_EPOCHS))
    if all((data_dir() / name).is_file() for name in _LEXICON_FILES):
        lexicons = load_lexicons(data_dir())
    else:
        lexicons = default_lexicons()
    return Pipeline(
        classifier=classifier,
        order_model=order_model,
        dosing_rules=reminders.load_dosing_rules(resolve_fixture("dosing_rules.csv")),
        din_registry=lookup_mod.load_din_csv(resolve_fixture("din.csv")),
        erg_registry=lookup_mod.load_erg_csv(resolve_fixture("erg.csv")),
        lexicons=lexicons,
    )


class Session:
    def __init__(self, session_id: str, pipeline: Pipeline, simulated_clock: bool):
        self.id = session_id
        self.pipeline = pipeline
        self.simulated_clock = simulated_clock
        self.dispatch: orders.DispatchInfo | None = None
        self.form = PatchForm()
        self.timeline = IncidentTimeline()
        self.schedule = reminders.MedicationSchedule(pipeline.dosing_rules)
        self.recommendation: orders.Recommendation | None = None
        self.comment_context = ""
        self.confirmed = False
        self.epcr = None
        self.last_time = 0.0
        self.feed: list = []
        self.lock = threading.Lock()
        self.feed_changed = threading.Condition(self.lock)

    # -- clock ---------------------------------------------------------
    def clock_at(self, time_seconds: float):
        if self.simulated_clock:
            stamp = SIMULATED_CLOCK_BASE + timedelta(seconds=time_seconds)
            return lambda: stamp
        return datetime.now

    # -- feed ----------------------------------------------------------
    def _push(self, kind: str, time_seconds: float, payload: dict) -> None:
        self.feed.append({"seq": len(self.feed), "time": time_seconds,
                          "kind": kind, "payload": payload})
        self.feed_changed.notify_all()

    def _record(self, event: TimelineEvent) -> None:
        self.timeline.append(event)
        self._push(event.kind, event.time, event.payload)

    # -- mutations (called with the lock held) --------------------------
    def apply_dispatch(self, body: dict) -> dict:
        time_seconds = float(body.get("time", 0.0))
        self.dispatch = orders.DispatchInfo.from_dict(body)
        self.comment_context = self.dispatch.comment or ""
        self.last_time = time_seconds
        self._record(TimelineEvent(time_seconds, "dispatch", self.dispatch.to_dict()))
        response = {"id": self.id}
        try:
            rec = orders.recommend(self.pipeline.order_model, self.dispatch,
                                   self.clock_at(time_seconds))
        except orders.InsufficientInformation:
            rec = None
        if rec is not None:
            self.recommendation = rec
            self._record(TimelineEvent(time_seconds, "standing_order", rec.to_json()))
            response["recommendation"] = rec.to_json()
        return response

    def apply_transcript(self, body: dict) -> dict:
        self._check_open()
        line = body.get("line")
        if not isinstance(line, str) or not line.strip():
            raise ApiError("bad_request", "transcript body needs a non-empty 'line'")
        time_seconds = float(body.get("time", self.last_time))
        if time_seconds < self.last_time:
            raise ApiError("conflict",
                           f"time {time_seconds} precedes last event at {self.last_time}")
        self.last_time = time_seconds

        classifications = []
        for sentence in split_sentences(line):
            label, _ = classify_mod.classify(sentence, self.pipeline.classifier)
            classifications.append({"sentence": sentence, "label": label})
        delta = self.form.merge_first_wins(
            extract_fields(line, self.pipeline.lexicons))
        self._record(TimelineEvent(time_seconds, "transcript_line",
                                   {"line": line, "classification": classifications}))

        new_reminders = []
        if "treatment" in delta:
            for reminder in self._apply_treatment(delta["treatment"], time_seconds):
                new_reminders.append(reminder.to_dict())

        response = {
            "classification": classifications,
            "patch_form_delta": delta,
            "new_reminders": new_reminders,
        }
        update = self._refresh_recommendation(line, time_seconds)
        if update is not None:
            response["recommendation_update"] = update
        return response

    def _apply_treatment(self, treatment_value: str, time_seconds: float):
        """Treatment mentions become administration events when a dosing
        rule covers the drug; each may schedule the next-dose reminder."""
        rules = self.pipeline.rules_by_drug()
        scheduled = []
        for part in treatment_value.split(","):
            drug = part.strip()
            rule = rules.get(drug)
            if rule is None:
                continue
            event = reminders.AdministrationEvent(
                rule.drug, rule.dose_amount, rule.dose_unit, rule.route, time_seconds)
            self._record(TimelineEvent(time_seconds, "administration", {
                "drug": event.drug, "dose_amount": event.dose_amount,
                "dose_unit": event.dose_unit, "route": event.route,
            }))
            reminder = self.schedule.record_administration(event)
            if reminder is not None:
                scheduled.append(reminder)
        return scheduled

    def _refresh_recommendation(self, line: str, time_seconds: float):
        """Dispatch comments grow with the call; the standing order is
        corrected automatically when the evidence moves the argmax."""
        if self.dispatch is None or not self.dispatch.problem_nature_type:
            return None
        self.comment_context = (self.comment_context + " " + line).strip()
        updated = orders.DispatchInfo(
            self.dispatch.problem_nature_type, self.dispatch.problem_nature,
            self.dispatch.gender, self.comment_context)
        clock = self.clock_at(time_seconds)
        if self.recommendation is None:
            rec = orders.recommend(self.pipeline.order_model, updated, clock)
            changed = True
        else:
            rec, changed = orders.update_recommendation(
                self.pipeline.order_model, self.recommendation, updated, clock)
        if not changed:
            return None
        self.recommendation = rec
        self._record(TimelineEvent(time_seconds, "standing_order", rec.to_json()))
        return rec.to_json()

    def apply_reminder_poll(self, body: dict) -> dict:
        self._check_open()
        now = float(body["now"])
        if now < self.last_time:
            raise ApiError("conflict",
                           f"now {now} precedes last event at {self.last_time}")
        self.last_time = now
        due = self.schedule.due_reminders(now)
        for reminder in due:
            self._record(TimelineEvent(now, "reminder_fired", reminder.to_dict()))
        return {
            "due": [r.to_dict() for r in due],
            "reminders": [r.to_dict() for r in self.schedule.reminders],
        }

    def apply_reminder_ack(self, body: dict) -> dict:
        self._check_open()
        rid = body["reminder_id"]
        try:
            reminder = self.schedule.acknowledge(rid)
        except KeyError:
            raise ApiError("not_found", f"no reminder {rid!r}")
        self._record(TimelineEvent(self.last_time, "reminder_acknowledged",
                                   {"id": rid}))
        return {"reminder": reminder.to_dict()}

    def apply_confirm(self, body: dict) -> dict:
        if self.confirmed:
            raise ApiError("conflict", "session already confirmed")
        try:
            form = PatchForm.from_dict(body.get("fields", {}))
        except (TypeError, ValueError) as exc:
            raise ApiError("bad_request", str(exc))
        errors = form.validate()
        if errors:
            raise ApiError("bad_request", "patch form invariants violated", errors)
        self._record(TimelineEvent(self.last_time, "epcr_confirmed", {}))
        self.confirmed = True
        self.form = form
        self.epcr = generate_epcr(self.timeline, form)
        return {"epcr": self.epcr.text, "sidecar": self.epcr.sidecar}

    def _check_open(self) -> None:
        if self.confirmed:
            raise ApiError("conflict", "session is confirmed and frozen")

    # -- reads ----------------------------------------------------------
    def summary(self) -> dict:
        doc = {
            "id": self.id,
            "confirmed": self.confirmed,
            "patch_form": self.form.to_dict(),
            "last_time": self.last_time,
        }
        if self.dispatch is not None:
            doc["dispatch"] = self.dispatch.to_dict()
        if self.recommendation is not None:
            doc["recommendation"] = self.recommendation.to_json()
        return doc


MUTATIONS = {
    "dispatch": Session.apply_dispatch,
    "transcript": Session.apply_transcript,
    "reminders_poll": Session.apply_reminder_poll,
    "reminder_ack": Session.apply_reminder_ack,
    "confirm": Session.apply_confirm,
}


class SessionStore:
    """Holds live sessions and their append-only input logs."""

    def __init__(self, simulated_clock: bool = True, log_dir: Path | None = None):
        self.simulated_clock = simulated_clock
        self.log_dir = Path(log_dir) if log_dir is not None else None
        self.sessions: dict = {}
        self._lock = threading.Lock()

    def create(self) -> Session:
        session = Session(uuid.uuid4().hex[:12], build_pipeline(), self.simulated_clock)
        with self._lock:
            self.sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise ApiError("not_found", f"no session {session_id!r}")
        return session

    def mutate(self, session: Session, op: str, body: dict) -> dict:
        """Apply one input record: log it, then update state atomically."""
        with session.lock:
            result = MUTATIONS[op](session, body)
            self._append_log(session, op, body)
            return result

    def _append_log(self, session: Session, op: str, body: dict) -> None:
        if self.log_dir is None:
            return
        self.log_dir.mkdir(parents=True, exist_ok=True)
        with open(self.log_dir / f"{session.id}.ndjson", "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"op": op, "body": body}, sort_keys=True) + "\n")

    def replay(self, records) -> Session:
        """Rebuild a fresh session purely from logged input records."""
        session = Session("replay", build_pipeline(), self.simulated_clock)
        for record in records:
            with session.lock:
                MUTATIONS[record["op"]](session, record["body"])
        return session

    def replay_log(self, path) -> Session:
        with open(path, encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
        return self.replay(records)


# ----------------------------------------------------------------- HTTP app

def create_app(simulated_clock: bool = True, log_dir=None):
    if log_dir is None:
        log_dir = data_dir() / "sessions"
    store = SessionStore(simulated_clock=simulated_clock, log_dir=Path(log_dir))
    app = FastAPI(title="patchline", version="0.1.0")
    app.state.store = store

    @app.exception_handler(ApiError)
    async def api_error_handler(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.to_json())

    @app.exception_handler(RequestValidationError)
    async def request_validation_handler(_request: Request, exc: RequestValidationError):
        # keep framework validation failures in the same machine-readable shape
        first = exc.errors()[0] if exc.errors() else {}
        where = ".".join(str(part) for part in first.get("loc", ()))
        return JSONResponse(status_code=400, content={
            "code": "bad_request",
            "message": f"invalid request: {where}: {first.get('msg', 'validation failed')}",
        })

    async def read_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise ApiError("bad_request", "body must be a JSON object")
        if not isinstance(body, dict) or not body:
            raise ApiError("bad_request", "body must be a non-empty JSON object")
        return body

    @app.get("/health")
    async def health():
        return {"status": "ok", "simulated_clock": store.simulated_clock}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await read_body(request)
        session = store.create()
        return store.mutate(session, "dispatch", body)

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return session.summary()

    @app.post("/sessions/{session_id}/transcript")
    async def post_transcript(session_id: str, request: Request):
        body = await read_body(request)
        return store.mutate(store.get(session_id), "transcript", body)

    @app.get("/sessions/{session_id}/patch-form")
    async def get_patch_form(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return session.form.to_dict()

    @app.get("/sessions/{session_id}/reminders")
    async def get_reminders(session_id: str, now: float):
        return store.mutate(store.get(session_id), "reminders_poll", {"now": now})

    @app.post("/sessions/{session_id}/reminders/{reminder_id}/ack")
    async def ack_reminder(session_id: str, reminder_id: str):
        return store.mutate(store.get(session_id), "reminder_ack",
                            {"reminder_id": reminder_id})

    @app.post("/sessions/{session_id}/ocr")
    async def post_ocr(session_id: str, request: Request):
        body = await read_body(request)
        session = store.get(session_id)
        match = lookup_mod.match_ocr_text(session.pipeline.din_registry,
                                          body.get("text", ""))
        doc = {"rescored_text": match.rescored_text}
        if match.entry is not None:
            doc["entry"] = match.entry.to_dict()
            doc["raw_metrics"] = match.raw_metrics.__dict__
            doc["rescored_metrics"] = match.rescored_metrics.__dict__
        return doc

    @app.post("/sessions/{session_id}/placard")
    async def post_placard(session_id: str, request: Request):
        body = await read_body(request)
        session = store.get(session_id)
        try:
            entry = lookup_mod.erg_lookup(session.pipeline.erg_registry,
                                          body.get("number", ""))
        except lookup_mod.LookupFormatError as exc:
            raise ApiError("bad_request", str(exc))
        if entry is None:
            raise ApiError("not_found", f"placard {body.get('number')!r} not in guidebook")
        with session.lock:
            # transient safety warning on the push channel only
            session._push("warning", session.last_time,
                          {"source": "placard", **entry.to_dict()})
        return entry.to_dict()

    @app.post("/sessions/{session_id}/epcr/confirm")
    async def confirm_epcr(session_id: str, request: Request):
        body = await read_body(request)
        return store.mutate(store.get(session_id), "confirm", body)

    @app.get("/sessions/{session_id}/events")
    async def poll_events(session_id: str, since: int = 0, timeout: float = 0.0):
        session = store.get(session_id)
        with session.lock:
            if timeout > 0 and len(session.feed) <= since:
                session.feed_changed.wait(timeout)
            events = session.feed[since:]
            return {"events": events, "next": len(session.feed)}

    @app.get("/sessions/{session_id}/events/stream")
    async def stream_events(session_id: str, since: int = 0):
        session = store.get(session_id)

        def generate():
            cursor = since
            while True:
                with session.lock:
                    if len(session.feed) <= cursor:
                        done = session.confirmed
                        if done:
                            break
                        session.feed_changed.wait(1.0)
                    batch = session.feed[cursor:]
                for event in batch:
                    cursor = event["seq"] + 1
                    yield f"id: {event['seq']}\ndata: {json.dumps(event, sort_keys=True)}\n\n"

        return StreamingResponse(generate(), media_type="text/event-stream")

    return app


def serve(host: str = "127.0.0.1", port: int = 8099,
          simulated_clock: bool = False, log_dir=None) -> None:
    import uvicorn

    app = create_app(simulated_clock=simulated_clock, log_dir=log_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
