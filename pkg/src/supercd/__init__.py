"""Active-learning pipeline for few-shot entity typing.

The package walks one loop: extract concepts from the few illustrative
mentions, find concepts the task shares, build "excluded | included"
superposition queries for the distinctions the shots cannot teach, retrieve
matching sentences from the unlabeled pool with a trained dense encoder,
spend a small annotation budget on them, and retrain the classifier on the
enlarged set.
"""

from . import extractor, fsner, interface, loop, ontology, sir, superposition, synth
from .errors import (
    ConflictError,
    DataError,
    EncodingError,
    InsufficientConceptsError,
    NotFoundError,
    NumericError,
    OntologyValidationError,
    ParameterError,
    SessionStateError,
    ShapeMismatchError,
    SupercdError,
    UnknownConceptError,
)
from .extractor import CommonConceptSet, ExtractorConfig, common_concepts, extract
from .fsner import BenchmarkConfig, BenchmarkReport, run_benchmark
from .loop import SessionConfig, SessionComponents, run_session, select_candidates
from .ontology import Concept, Ontology, SuperpositionQuery, load_ontology, save_ontology
from .sir import RetrieverModel, build_dataset, init_model, retrieve, train
from .superposition import build_queries, build_sets, order_queries, serialize_query
from .synth import TaskSpec, gen_corpus, gen_ontology, gen_task

__version__ = "0.1.0"

__all__ = [
    "extractor",
    "fsner",
    "interface",
    "loop",
    "ontology",
    "sir",
    "superposition",
    "synth",
    "ConflictError",
    "DataError",
    "EncodingError",
    "InsufficientConceptsError",
    "NotFoundError",
    "NumericError",
    "OntologyValidationError",
    "ParameterError",
    "SessionStateError",
    "ShapeMismatchError",
    "SupercdError",
    "UnknownConceptError",
    "CommonConceptSet",
    "ExtractorConfig",
    "common_concepts",
    "extract",
    "BenchmarkConfig",
    "BenchmarkReport",
    "run_benchmark",
    "SessionConfig",
    "SessionComponents",
    "run_session",
    "select_candidates",
    "Concept",
    "Ontology",
    "SuperpositionQuery",
    "load_ontology",
    "save_ontology",
    "RetrieverModel",
    "build_dataset",
    "init_model",
    "retrieve",
    "train",
    "build_queries",
    "build_sets",
    "order_queries",
    "serialize_query",
    "TaskSpec",
    "gen_corpus",
    "gen_ontology",
    "gen_task",
    "__version__",
]
