"""Session lifecycle: create, collect annotations, finalize.

This is the glue between the HTTP layer and the pipeline modules. A session
is created from file-based artifacts plus a task description, runs through
candidate selection at creation time, and finalizes (classifier training and
evaluation) either immediately (oracle) or once human annotations cover the
whole pending queue.

Human-mode finalization does not trust anything in memory: the task split is
rebuilt deterministically from the persisted request, so a service restart
between submissions loses nothing.
"""

from __future__ import annotations

import time
from pathlib import Path
from typing import Sequence

from ..errors import (
    ConflictError,
    DataError,
    NotFoundError,
    ParameterError,
    SessionStateError,
)
from ..extractor import ExtractorConfig, load_extractor
from ..fsner import ClassifierHyper, evaluate, train_classifier
from ..loop import (
    AnnotationRecord,
    SessionComponents,
    SessionConfig,
    augmented_training_set,
    run_session,
)
from ..ontology import Ontology, load_ontology
from ..sir import RetrieverModel, load_retriever
from ..synth import (
    Instance,
    TaskSpec,
    TaskSplit,
    attach_frequencies,
    gen_task,
    load_corpus,
    load_task,
)
from .store import SessionStore

AWAITING = "awaiting_annotation"
COMPLETE = "complete"
FAILED = "failed"


class SessionManager:
    def __init__(self, store: SessionStore):
        self.store = store
        self._cache: dict = {}

    # -- artifact loading, cached on (path, mtime) ---------------------------

    def _cached(self, kind: str, path: Path, loader):
        try:
            stamp = path.stat().st_mtime_ns
        except FileNotFoundError:
            raise NotFoundError(f"{kind} file not found: {path}") from None
        key = (kind, str(path), stamp)
        if key not in self._cache:
            self._cache[key] = loader(path)
        return self._cache[key]

    def _ontology(self, path: str) -> Ontology:
        return self._cached("ontology", Path(path), load_ontology)

    def _corpus(self, path: str) -> list[Instance]:
        return self._cached("corpus", Path(path), load_corpus)

    def _retriever(self, path: str) -> RetrieverModel:
        return self._cached("retriever", Path(path), load_retriever)

    def _ontology_with_freqs(self, ontology_path: str, corpus_path: str) -> Ontology:
        ontology = self._ontology(ontology_path)
        corpus = self._corpus(corpus_path)
        key = ("freqs", ontology_path, corpus_path, id(ontology), id(corpus))
        if key not in self._cache:
            self._cache[key] = attach_frequencies(ontology, corpus)
        return self._cache[key]

    # -- request handling ------------------------------------------------------

    @staticmethod
    def _validate_request(request: dict) -> list[str]:
        problems = []
        for field in ("ontology", "corpus", "retriever", "task"):
            if field not in request:
                problems.append(f"missing field: {field}")
        if "budget" not in request:
            problems.append("missing field: budget")
        elif not isinstance(request["budget"], int) or request["budget"] < 0:
            problems.append("budget must be a non-negative integer")
        annotator = request.get("annotator", "oracle")
        if annotator not in ("oracle", "human"):
            problems.append("annotator must be 'oracle' or 'human'")
        task = request.get("task")
        if isinstance(task, dict):
            if "file" not in task:
                for field in ("target", "illustrative_source", "k"):
                    if field not in task:
                        problems.append(f"missing task field: {field}")
        elif task is not None:
            problems.append("task must be an object")
        return problems

    def _build_split(self, request: dict, ontology: Ontology, corpus: Sequence[Instance]) -> TaskSplit:
        task = request["task"]
        if "file" in task:
            path = Path(task["file"])
            if not path.is_file():
                raise NotFoundError(f"task file not found: {path}")
            return load_task(path, corpus)
        spec = TaskSpec(
            target_concepts=frozenset(task["target"]),
            illustrative_source=task["illustrative_source"],
            k=int(task["k"]),
            skew=float(task.get("skew", 1.0)),
        )
        return gen_task(
            corpus,
            ontology,
            spec,
            float(task.get("pool_fraction", 0.5)),
            int(task.get("seed", 0)),
        )

    def _components(self, request: dict, ontology: Ontology) -> SessionComponents:
        retriever = self._retriever(request["retriever"])
        ex = request.get("extractor", {}) or {}
        model = None
        if ex.get("backend") == "learned":
            if "model" not in ex:
                raise ParameterError("learned extractor backend requires extractor.model")
            model = self._cached("extractor-model", Path(ex["model"]), load_extractor)
        extractor = ExtractorConfig(
            backend=ex.get("backend", "oracle"),
            p_drop=float(ex.get("p_drop", 0.0)),
            p_spur=float(ex.get("p_spur", 0.0)),
            seed=int(request.get("seed", 0)),
            model=model,
        )
        return SessionComponents(ontology=ontology, retriever=retriever, extractor=extractor)

    # -- lifecycle ----------------------------------------------------------------

    def create_session(self, request: dict) -> dict:
        problems = self._validate_request(request)
        if problems:
            raise ParameterError("invalid session request: " + "; ".join(problems))

        ontology = self._ontology_with_freqs(request["ontology"], request["corpus"])
        corpus = self._corpus(request["corpus"])
        split = self._build_split(request, ontology, corpus)
        components = self._components(request, ontology)
        config = SessionConfig(
            budget=int(request["budget"]),
            annotator=request.get("annotator", "oracle"),
            tau=float(request.get("tau", 0.5)),
            m_cap=int(request.get("m_cap", 8)),
            seed=int(request.get("seed", 0)),
        )
        outcome = run_session(split, config, components)

        session_id = self.store.new_session_id()
        by_id = {inst.id: inst for inst in split.pool}
        pending = [
            {
                "id": iid,
                "tokens": by_id[iid].tokens,
                "mentions": [
                    {"key": m.key(iid), "span": [m.span[0], m.span[1]]}
                    for m in by_id[iid].mentions
                ],
            }
            for iid in outcome.pending
        ]
        state = {
            "session_id": session_id,
            "status": AWAITING,
            "annotator": config.annotator,
            "budget": config.budget,
            "target": list(split.target_concepts),
            "request": request,
            "selected": outcome.selected,
            "pending": pending,
            "collected": [],
            "error": None,
        }
        self.store.write_trace(session_id, outcome.trace)

        if config.annotator == "oracle":
            state["collected"] = [_record_to_dict(rec) for rec in outcome.records]
            self._finalize(session_id, state, split, outcome.records)
        else:
            self.store.write_state(session_id, state)
        return self.store.read_state(session_id)

    def list_sessions(self) -> list[dict]:
        out = []
        for sid in self.store.list_sessions():
            state = self.store.read_state(sid)
            out.append(
                {
                    "session_id": state["session_id"],
                    "status": state["status"],
                    "annotator": state["annotator"],
                    "budget": state["budget"],
                    "target": state["target"],
                    "pending_count": len(state["pending"]),
                }
            )
        return out

    def get_state(self, session_id: str) -> dict:
        return self.store.read_state(session_id)

    def get_result(self, session_id: str) -> dict:
        state = self.store.read_state(session_id)
        if state["status"] != COMPLETE:
            raise SessionStateError(
                f"session {session_id} is {state['status']}, no result yet"
            )
        return self.store.read_result(session_id)

    def submit_annotations(
        self, session_id: str, records: Sequence[dict], annotator: str | None = None
    ) -> dict:
        with self.store.lock_for(session_id):
            state = self.store.read_state(session_id)
            if state["status"] != AWAITING:
                raise SessionStateError(
                    f"session {session_id} is {state['status']} and accepts no annotations"
                )

            pending_by_id = {p["id"]: p for p in state["pending"]}
            collected_ids = {c["instance_id"] for c in state["collected"]}
            seen_in_batch: set[str] = set()
            validated: list[dict] = []
            for rec in records:
                iid = rec.get("instance_id")
                decisions = rec.get("decisions")
                if not isinstance(iid, str) or not isinstance(decisions, dict):
                    raise ParameterError(
                        "each record needs an instance_id and a decisions object"
                    )
                if iid in collected_ids or iid in seen_in_batch:
                    raise ConflictError(f"instance {iid} is already annotated")
                if iid not in pending_by_id:
                    raise ParameterError(
                        f"instance {iid} is not in this session's pending queue"
                    )
                expected = {m["key"] for m in pending_by_id[iid]["mentions"]}
                got = set(decisions)
                unknown = sorted(got - expected)
                missing = sorted(expected - got)
                if unknown:
                    raise ParameterError(f"unknown mention keys: {unknown}")
                if missing:
                    raise ParameterError(
                        f"decisions must cover every mention; missing: {missing}"
                    )
                seen_in_batch.add(iid)
                validated.append(
                    {
                        "instance_id": iid,
                        "decisions": {k: bool(decisions[k]) for k in sorted(decisions)},
                        "annotator": rec.get("annotator") or annotator or "human",
                        "timestamp": time.time(),
                    }
                )

            state["collected"].extend(validated)
            done = {v["instance_id"] for v in validated}
            state["pending"] = [p for p in state["pending"] if p["id"] not in done]

            if state["pending"]:
                self.store.write_state(session_id, state)
            else:
                request = state["request"]
                ontology = self._ontology_with_freqs(request["ontology"], request["corpus"])
                corpus = self._corpus(request["corpus"])
                split = self._build_split(request, ontology, corpus)
                by_instance = {c["instance_id"]: c for c in state["collected"]}
                ordered = [
                    _record_from_dict(by_instance[iid])
                    for iid in state["selected"]
                    if iid in by_instance
                ]
                state["collected"] = [_record_to_dict(r) for r in ordered]
                self._finalize(session_id, state, split, ordered)
            return self.store.read_state(session_id)

    # -- finalization ---------------------------------------------------------------

    def _finalize(
        self,
        session_id: str,
        state: dict,
        split: TaskSplit,
        records: Sequence[AnnotationRecord],
    ) -> None:
        try:
            labeled = augmented_training_set(split, records)
            clf = train_classifier(labeled, ClassifierHyper())
            test = [
                (m.feature, split.labels[m.key(inst.id)])
                for inst in split.test
                for m in inst.mentions
            ]
            if not test:
                raise DataError("task split has no test mentions")
            metrics = evaluate(clf, test)
            result = {
                "target": list(split.target_concepts),
                "selected": state["selected"],
                "records": [_record_to_dict(r) for r in records],
                "augmented_ids": [inst.id for inst in split.illustrative]
                + [r.instance_id for r in records],
                "evaluation": {
                    "micro_f1": metrics.micro_f1,
                    "precision": metrics.precision,
                    "recall": metrics.recall,
                    "tp": metrics.tp,
                    "fp": metrics.fp,
                    "fn": metrics.fn,
                },
                "trace": self.store.read_trace(session_id),
            }
        except Exception as exc:
            state["status"] = FAILED
            state["error"] = str(exc)
            self.store.write_state(session_id, state)
            raise
        self.store.write_result(session_id, result)
        state["status"] = COMPLETE
        state["pending"] = []
        self.store.write_state(session_id, state)


def _record_to_dict(rec: AnnotationRecord) -> dict:
    return {
        "instance_id": rec.instance_id,
        "decisions": {k: rec.decisions[k] for k in sorted(rec.decisions)},
        "annotator": rec.annotator,
        "timestamp": rec.timestamp,
    }


def _record_from_dict(rec: dict) -> AnnotationRecord:
    return AnnotationRecord(
        instance_id=rec["instance_id"],
        decisions={k: bool(v) for k, v in rec["decisions"].items()},
        annotator=rec["annotator"],
        timestamp=float(rec["timestamp"]),
    )
