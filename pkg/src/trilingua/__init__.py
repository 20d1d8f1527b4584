"""Batch pipeline for multilingual dialogue summarization and question answering.

Source-language dialogues are translated to English, task outputs are produced
by a prompted generative backend, and results are translated back to the
source language. The package also ships deterministic mock backends and the
evaluation harness (token F1, embedding F1, win-rate reports) used to score
such systems.
"""

from trilingua.corpus import (
    DialogueRecord,
    Diagnostic,
    LANGUAGES,
    PipelineResult,
    TASKS,
    TaskOutput,
    Turn,
    load_corpus,
    load_results,
    write_corpus,
    write_results,
)
from trilingua.pipeline import PipelineConfig, run_corpus, run_record

__version__ = "0.1.0"

__all__ = [
    "DialogueRecord",
    "Diagnostic",
    "LANGUAGES",
    "PipelineConfig",
    "PipelineResult",
    "TASKS",
    "TaskOutput",
    "Turn",
    "load_corpus",
    "load_results",
    "run_corpus",
    "run_record",
    "write_corpus",
    "write_results",
]
