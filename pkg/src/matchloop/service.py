"""HTTP session service: the review loop over JSON.

A session wraps one scheduler run.  The service serves the currently open
question batch, accepts answers (all-or-nothing), and reports clusters,
golden records and the metric series.  In oracle mode the simulated
reviewer can drive iterations through the auto-step endpoint; in human
mode a client answers every question, seed rules included.

Sessions snapshot to JSON after creation and after every committed
iteration, and snapshots found at startup are loaded back.  A restored
session continues exactly as the live one would have: the matcher model is
retrained from the persisted labels (retraining is deterministic in the
label-store version), the random stream is part of the snapshot, and
benefits are recomputed from state, which every commit forces anyway.
"""

from __future__ import annotations

import itertools
import json
import threading
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .costs import CostModel
from .data import Dataset, Record, load_dataset, load_truth
from .engine import (EngineConfig, LabelStore, check_partition,
                     full_recompute)
from .oracle import Answer, SimulatedOracle
from .questions import (AskedRegistry, ClusterHierarchy, ClusterQuestion,
                        TrainingRuleQuestion, TransformationQuestion)
from .scheduler import (ColdStartError, QualityReport, SchedulerConfig,
                        Session)
from .transforms import affected_cells


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# --------------------------------------------------------------------------
# Request bodies
# --------------------------------------------------------------------------

class SessionRequest(BaseModel):
    dataset: str
    truth_memberships: str | None = None
    truth_goldens: str | None = None
    mode: str = "oracle"
    strategy: str = "global_k_corr_b"
    budget: float = 1000.0
    seed: int = 0
    k: int = 10
    b: int | None = None
    key_attribute: str | None = None
    code_attribute: str | None = None
    approval_threshold: float = 0.9
    noise_rate: float = 0.0
    engine: dict = {}


class AnswerItem(BaseModel):
    question_id: str
    verdict: str
    sub_clusters: list[list[str]] = []


class AnswersRequest(BaseModel):
    answers: list[AnswerItem]


class AutoStepRequest(BaseModel):
    iterations: int = 1
    until_done: bool = False


# --------------------------------------------------------------------------
# Payloads
# --------------------------------------------------------------------------

def _record_payload(dataset: Dataset, record_id: str) -> dict:
    record = dataset.record(record_id)
    return {"record_id": record.record_id, "source_id": record.source_id,
            "values": dict(zip(dataset.schema, record.values))}


def question_payload(question, dataset: Dataset, cost: float) -> dict:
    """What a reviewer (or the console) needs to answer one question."""
    payload = {
        "question_id": repr(question.key()),
        "kind": question.kind,
        "cost": cost,
        "description": question.describe(),
    }
    if isinstance(question, TrainingRuleQuestion):
        p = question.predicate
        payload["rule"] = {"attribute": p.attribute, "function": p.function,
                           "threshold": p.threshold, "direction": p.direction,
                           "confidence": question.confidence}
        payload["covered_pairs"] = [list(pair) for pair in question.coverage]
        payload["samples"] = [
            {"a": _record_payload(dataset, a), "b": _record_payload(dataset, b)}
            for a, b in question.samples
        ]
    elif isinstance(question, ClusterQuestion):
        payload["records"] = [_record_payload(dataset, r)
                              for r in sorted(question.records)]
        payload["pairs"] = [{"a": a, "b": b, "probability": prob}
                            for (a, b), prob in question.pair_probabilities]
    elif isinstance(question, TransformationQuestion):
        rule = question.rule
        payload["rule"] = {"attribute": rule.attribute, "kind": rule.kind,
                           "source": rule.source, "target": rule.target,
                           "frequency": rule.frequency}
        payload["affected"] = [
            {"record_id": rid, "attribute": attr,
             "before": dataset.value(rid, attr), "after": after}
            for rid, attr, after in affected_cells(dataset, rule)
        ]
        payload["sample_records"] = list(question.sample_records)
    return payload


def report_payload(report: QualityReport) -> dict:
    return {"iteration": report.iteration, "spent_cost": report.spent_cost,
            "questions_asked": report.questions_asked,
            "gr_accuracy": report.gr_accuracy,
            "cluster_f1": report.cluster_f1}


# --------------------------------------------------------------------------
# Session runtime and persistence
# --------------------------------------------------------------------------

def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


class SessionRuntime:
    """A live session plus the bookkeeping the HTTP layer needs."""

    def __init__(self, session_id: str, session: Session, request: SessionRequest,
                 oracle: SimulatedOracle | None, snapshot_path: Path | None):
        self.session_id = session_id
        self.session = session
        self.request = request
        self.oracle = oracle
        self.snapshot_path = snapshot_path
        self.lock = threading.Lock()
        self.created = _now()
        self.updated = self.created
        self.asked_summary: list[dict] = []
        self._done_snapshotted = False

    # -- driving -----------------------------------------------------------

    def open_questions(self):
        try:
            batch = self.session.open_iteration()
        except ColdStartError as exc:
            raise ServiceError(409, "cold_start_failed", str(exc)) from exc
        if batch is None and not self._done_snapshotted:
            # Finding the session finished is itself worth persisting;
            # otherwise a restore would rediscover it off by one iteration.
            self._done_snapshotted = True
            self.updated = _now()
            self.save_snapshot()
        return batch

    def record_asked(self, batch, answers) -> None:
        for scored, answer in zip(batch, answers):
            self.asked_summary.append({
                "iteration": self.session.iteration
                if self.session.phase == "loop" else 0,
                "kind": scored.question.kind,
                "question_id": repr(scored.question.key()),
                "description": scored.question.describe(),
                "cost": scored.cost,
                "answer": answer.to_json(),
            })

    def commit(self, batch, answers):
        report = self.session.commit(answers)
        self.record_asked(batch, answers)
        self.updated = _now()
        if report is not None:
            self.save_snapshot()
        return report

    def auto_answers(self, batch) -> list[Answer]:
        if self.oracle is None:
            raise ServiceError(409, "wrong_mode",
                               "auto-step requires an oracle-mode session")
        return [self.oracle.answer(s.question, self.session.state.dataset)
                for s in batch]

    # -- persistence -------------------------------------------------------

    def save_snapshot(self) -> None:
        if self.snapshot_path is None:
            return
        session = self.session
        state = session.state
        snap = {
            "session_id": self.session_id,
            "created": self.created,
            "updated": self.updated,
            "request": self.request.model_dump(),
            "schema": list(state.dataset.schema),
            "records": [{"record_id": r.record_id, "source_id": r.source_id,
                         "values": list(r.values)} for r in state.dataset],
            "revision": state.dataset.revision,
            "store": {
                "labels": [[a, b, label]
                           for (a, b), label in sorted(state.store.labels.items())],
                "pinned": [[a, b, label]
                           for (a, b), label in sorted(state.store.pinned.items())],
                "version": state.store.version,
                "conflicts": state.store.conflicts,
            },
            "trained_version": state.trained_version,
            "model_version": state.matcher.model_version,
            "asked_keys": [list(k) if isinstance(k, tuple) else k
                           for k in state.asked.snapshot()],
            "asked_summary": self.asked_summary,
            "hierarchies": [{"cluster": sorted(c), "tree": h.to_json()}
                            for c, h in sorted(state.hierarchies.items(),
                                               key=lambda kv: min(kv[0]))],
            "reports": [report_payload(r) for r in session.reports],
            "split_counts": {repr(tau): n
                             for tau, n in session.split_model.counts.items()},
            "rng_state": session.rng.bit_generator.state,
            "spent": session.spent,
            "iteration": session.iteration,
            "n_asked": session.n_asked,
            "phase": session.phase,
            "stop_reason": session.stop_reason,
            "k": session.k,
            "greedy_realized": session._greedy_realized,
            "greedy_choice": session._greedy_choice,
            "emec_phase": session._emec_phase,
        }
        tmp = self.snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(snap), encoding="utf-8")
        tmp.replace(self.snapshot_path)

    @classmethod
    def load_snapshot(cls, path: Path) -> "SessionRuntime":
        snap = json.loads(path.read_text(encoding="utf-8"))
        request = SessionRequest(**snap["request"])
        schema = tuple(snap["schema"])
        dataset = Dataset(schema, tuple(
            Record(r["record_id"], r["source_id"], tuple(r["values"]))
            for r in snap["records"]), revision=snap["revision"])
        engine_config, sched_config, oracle, truth = _build_configs(
            request, schema)
        session = Session(dataset, engine_config, sched_config,
                          answer_source=oracle, truth=truth)
        store = LabelStore()
        store.labels = {(a, b): label for a, b, label in snap["store"]["labels"]}
        store.pinned = {(a, b): label for a, b, label in snap["store"]["pinned"]}
        store.version = snap["store"]["version"]
        store.conflicts = snap["store"]["conflicts"]
        state = session.state
        state.store = store
        state.trained_version = snap["trained_version"]
        state.matcher.model_version = snap["model_version"]
        state.asked = AskedRegistry({_tuplify(k) for k in snap["asked_keys"]})
        state.hierarchies = {
            frozenset(h["cluster"]): ClusterHierarchy.from_json(h["tree"])
            for h in snap["hierarchies"]
        }
        session.state = full_recompute(state)
        session.reports = [QualityReport(**r) for r in snap["reports"]]
        session.split_model.counts = {float(tau): n
                                      for tau, n in snap["split_counts"].items()}
        session.split_model.total = sum(session.split_model.counts.values())
        session.rng.bit_generator.state = snap["rng_state"]
        session.spent = snap["spent"]
        session.iteration = snap["iteration"]
        session.n_asked = snap["n_asked"]
        session.stop_reason = snap["stop_reason"]
        session.k = snap["k"]
        session._phase = snap["phase"]
        session._greedy_realized = dict(snap["greedy_realized"])
        session._greedy_choice = snap["greedy_choice"]
        session._emec_phase = snap["emec_phase"]
        runtime = cls(snap["session_id"], session, request, oracle, path)
        runtime.created = snap["created"]
        runtime.updated = snap["updated"]
        runtime.asked_summary = snap["asked_summary"]
        runtime._done_snapshotted = bool(snap["stop_reason"])
        return runtime


def _build_configs(request: SessionRequest, schema: tuple[str, ...]):
    if request.mode not in ("oracle", "human"):
        raise ServiceError(400, "bad_config",
                           f"unknown mode: {request.mode!r}")
    have_truth = bool(request.truth_memberships and request.truth_goldens)
    if bool(request.truth_memberships) != bool(request.truth_goldens):
        raise ServiceError(400, "bad_config",
                           "truth_memberships and truth_goldens go together")
    if request.mode == "oracle" and not have_truth:
        raise ServiceError(400, "bad_config",
                           "oracle mode needs both truth files")
    try:
        engine_config = EngineConfig.for_schema(
            schema, key_attribute=request.key_attribute,
            code_attribute=request.code_attribute, seed=request.seed,
            **request.engine)
        sched_config = SchedulerConfig(
            strategy=request.strategy, budget=request.budget,
            k=request.k, b=request.b, seed=request.seed,
            costs=CostModel())
    except (TypeError, ValueError) as exc:
        raise ServiceError(400, "bad_config", str(exc)) from exc
    truth = oracle = None
    if have_truth:
        try:
            truth = load_truth(request.truth_memberships, request.truth_goldens)
        except OSError as exc:
            raise ServiceError(400, "bad_config", str(exc)) from exc
    if request.mode == "oracle":
        try:
            oracle = SimulatedOracle(truth, request.approval_threshold,
                                     request.noise_rate, request.seed)
        except ValueError as exc:
            raise ServiceError(400, "bad_config", str(exc)) from exc
    return engine_config, sched_config, oracle, truth


# --------------------------------------------------------------------------
# The application
# --------------------------------------------------------------------------

def create_app(snapshot_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="matchloop session service")
    sessions: dict[str, SessionRuntime] = {}
    snapshot_root = Path(snapshot_dir) if snapshot_dir else None

    if snapshot_root is not None and snapshot_root.is_dir():
        for path in sorted(snapshot_root.glob("*.json")):
            runtime = SessionRuntime.load_snapshot(path)
            sessions[runtime.session_id] = runtime
    counter = itertools.count(len(sessions) + 1)

    @app.exception_handler(ServiceError)
    async def service_error(_: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def validation_error(_: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422,
                            content={"code": "bad_request", "message": str(exc)})

    def get_runtime(session_id: str) -> SessionRuntime:
        runtime = sessions.get(session_id)
        if runtime is None:
            raise ServiceError(404, "not_found",
                               f"no session {session_id!r}")
        return runtime

    def questions_body(runtime: SessionRuntime, batch) -> dict:
        session = runtime.session
        return {
            "session_id": runtime.session_id,
            "phase": session.phase,
            "iteration": session.iteration,
            "done": batch is None,
            "stop_reason": session.stop_reason,
            "spent": session.spent,
            "budget": session.config.budget,
            "questions": [] if batch is None else [
                question_payload(s.question, session.state.dataset, s.cost)
                for s in batch
            ],
        }

    @app.post("/sessions", status_code=201)
    def create_session(request: SessionRequest):
        try:
            dataset = load_dataset(request.dataset)
        except OSError as exc:
            raise ServiceError(400, "bad_config", str(exc)) from exc
        engine_config, sched_config, oracle, truth = _build_configs(
            request, dataset.schema)
        session = Session(dataset, engine_config, sched_config,
                          answer_source=oracle, truth=truth)
        session_id = f"s{next(counter):04d}"
        snapshot_path = (snapshot_root / f"{session_id}.json"
                         if snapshot_root else None)
        runtime = SessionRuntime(session_id, session, request, oracle,
                                 snapshot_path)
        if oracle is not None:
            # Drive the seed rules immediately; the first loop iteration is
            # left open for questions/auto-step.
            while session.phase == "seed":
                try:
                    batch = session.open_iteration()
                except ColdStartError as exc:
                    raise ServiceError(400, "cold_start_failed",
                                       str(exc)) from exc
                if batch is None or session.phase != "seed":
                    break
                runtime.commit(batch, runtime.auto_answers(batch))
        sessions[session_id] = runtime
        runtime.save_snapshot()
        return {"session_id": session_id, "mode": request.mode,
                "phase": session.phase,
                "metrics_available": truth is not None,
                "budget": sched_config.budget}

    @app.get("/sessions/{session_id}/questions")
    def next_questions(session_id: str):
        runtime = get_runtime(session_id)
        with runtime.lock:
            batch = runtime.open_questions()
            return questions_body(runtime, batch)

    @app.post("/sessions/{session_id}/answers")
    def submit_answers(session_id: str, body: AnswersRequest):
        runtime = get_runtime(session_id)
        with runtime.lock:
            batch = runtime.open_questions()
            if batch is None:
                raise ServiceError(409, "session_done",
                                   "the session has finished")
            answers = _validated_answers(batch, body.answers)
            report = runtime.commit(batch, answers)
            session = runtime.session
            return {
                "report": None if report is None else report_payload(report),
                "phase": session.phase,
                "spent": session.spent,
                "budget": session.config.budget,
            }

    @app.post("/sessions/{session_id}/auto-step")
    def auto_step(session_id: str, body: AutoStepRequest | None = None):
        body = body or AutoStepRequest()
        if body.iterations < 1:
            raise ServiceError(400, "bad_request",
                               "iterations must be at least 1")
        runtime = get_runtime(session_id)
        reports = []
        with runtime.lock:
            session = runtime.session
            steps = 10 ** 9 if body.until_done else body.iterations
            for _ in range(steps):
                batch = runtime.open_questions()
                if batch is None:
                    break
                answers = runtime.auto_answers(batch)
                report = runtime.commit(batch, answers)
                if report is not None:
                    reports.append(report_payload(report))
            return {"reports": reports, "done": session.done,
                    "phase": session.phase, "spent": session.spent,
                    "stop_reason": session.stop_reason}

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        runtime = get_runtime(session_id)
        with runtime.lock:
            session = runtime.session
            state = session.state
            goldens = sorted(state.goldens.by_cluster.items(),
                             key=lambda kv: min(kv[0]))
            rules = {"training": [], "transformation": [], "cluster": []}
            for entry in runtime.asked_summary:
                rules[entry["kind"]].append(entry)
            return {
                "session_id": runtime.session_id,
                "mode": runtime.request.mode,
                "strategy": session.config.strategy,
                "created": runtime.created,
                "updated": runtime.updated,
                "phase": session.phase,
                "iteration": session.iteration,
                "done": session.done,
                "stop_reason": session.stop_reason,
                "questions_asked": session.n_asked,
                "budget": {"total": session.config.budget,
                           "spent": session.spent,
                           "remaining": session.config.budget - session.spent},
                "metrics_available": session.truth is not None,
                "metrics": [report_payload(r) for r in session.reports],
                "clusters": [sorted(c) for c in state.clusters],
                "golden_records": [
                    {"records": sorted(cluster),
                     "values": dict(zip(state.dataset.schema, values))}
                    for cluster, values in goldens
                ],
                "rules": rules,
            }

    return app


def _validated_answers(batch, items: list[AnswerItem]) -> list[Answer]:
    """Check the answer set against the open batch; any problem rejects the
    whole submission before the session is touched."""
    expected = [repr(s.question.key()) for s in batch]
    got = [item.question_id for item in items]
    if sorted(got) != sorted(expected):
        raise ServiceError(409, "answer_mismatch",
                           "answers must cover exactly the asked questions")
    by_id = {item.question_id: item for item in items}
    answers = []
    for scored, qid in zip(batch, expected):
        item = by_id[qid]
        if item.verdict not in ("yes", "no"):
            raise ServiceError(400, "bad_answer",
                               f"verdict must be yes or no, got {item.verdict!r}")
        is_cluster = isinstance(scored.question, ClusterQuestion)
        if item.sub_clusters and (not is_cluster or item.verdict == "yes"):
            raise ServiceError(400, "bad_answer",
                               "sub_clusters only belong to a cluster 'no'")
        parts = tuple(frozenset(c) for c in item.sub_clusters)
        if is_cluster and item.verdict == "no":
            try:
                check_partition(scored.question.records, parts)
            except ValueError as exc:
                raise ServiceError(400, "bad_partition", str(exc)) from exc
        answers.append(Answer(item.verdict, parts))
    return answers
