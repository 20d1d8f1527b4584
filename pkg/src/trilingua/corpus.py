"""Dialogue corpus data model and line-delimited JSON persistence."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

logger = logging.getLogger(__name__)

LANGUAGES = ("en", "hi", "mr", "kn", "gu", "te", "ta", "bn", "as")

LANGUAGE_NAMES = {
    "en": "English",
    "hi": "Hindi",
    "mr": "Marathi",
    "kn": "Kannada",
    "gu": "Gujarati",
    "te": "Telugu",
    "ta": "Tamil",
    "bn": "Bangla",
    "as": "Assamese",
}

TASKS = ("qna", "summary_text", "summary_knv")


class CorpusError(ValueError):
    """A corpus file failed validation. Carries the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"{message} at line {line_no}"
        super().__init__(message)


@dataclass(frozen=True)
class Turn:
    """One dialogue turn: a speaker label and what they said."""

    speaker: str
    utterance: str


@dataclass(frozen=True)
class DialogueRecord:
    """One source-language dialogue plus its task assignments.

    ``questions`` is non-empty exactly when ``tasks`` contains ``qna``.
    """

    id: str
    lang: str
    turns: tuple[Turn, ...]
    tasks: tuple[str, ...]
    questions: tuple[str, ...] = ()


@dataclass
class Diagnostic:
    """A non-fatal observation attached to a pipeline result."""

    stage: str
    code: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"stage": self.stage, "code": self.code, "message": self.message}


@dataclass
class TaskOutput:
    """Per-task pipeline output; ``final`` is None when reverse translation failed."""

    english_intermediate: str
    final: str | None

    def to_dict(self) -> dict[str, Any]:
        return {"english_intermediate": self.english_intermediate, "final": self.final}


@dataclass
class PipelineResult:
    """Outputs for one record: per-task texts plus diagnostics.

    Stage traces are kept in memory for inspection but never serialized,
    so result files stay byte-deterministic across runs.
    """

    id: str
    lang: str
    outputs: dict[str, TaskOutput] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    truncated: bool = False
    traces: list = field(default_factory=list, compare=False, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "lang": self.lang,
            "outputs": {task: out.to_dict() for task, out in self.outputs.items()},
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "PipelineResult":
        return cls(
            id=obj["id"],
            lang=obj["lang"],
            outputs={
                task: TaskOutput(out["english_intermediate"], out["final"])
                for task, out in obj.get("outputs", {}).items()
            },
            diagnostics=[
                Diagnostic(d["stage"], d["code"], d["message"])
                for d in obj.get("diagnostics", [])
            ],
            truncated=obj.get("truncated", False),
        )


def _canonical_tasks(tasks: list[str], line_no: int) -> tuple[str, ...]:
    if not isinstance(tasks, list) or not tasks:
        raise CorpusError("field 'tasks' must be a non-empty list", line_no)
    seen = []
    for task in tasks:
        if task not in TASKS:
            raise CorpusError(f"unknown task {task!r}", line_no)
        if task in seen:
            raise CorpusError(f"duplicate task {task!r}", line_no)
        seen.append(task)
    return tuple(t for t in TASKS if t in seen)


def _parse_record(obj: Any, line_no: int) -> DialogueRecord:
    if not isinstance(obj, dict):
        raise CorpusError("each line must be a JSON object", line_no)

    for name in ("id", "lang", "turns", "tasks"):
        if name not in obj:
            raise CorpusError(f"missing field {name!r}", line_no)

    rec_id = obj["id"]
    if not isinstance(rec_id, str) or not rec_id:
        raise CorpusError("field 'id' must be a non-empty string", line_no)

    lang = obj["lang"]
    if lang not in LANGUAGES:
        raise CorpusError(f"unknown language code {lang!r}", line_no)

    raw_turns = obj["turns"]
    if not isinstance(raw_turns, list) or not raw_turns:
        raise CorpusError("field 'turns' must be a non-empty list", line_no)
    turns = []
    for i, raw in enumerate(raw_turns):
        if not isinstance(raw, dict) or "speaker" not in raw or "utterance" not in raw:
            raise CorpusError(f"turn {i} must have 'speaker' and 'utterance'", line_no)
        speaker, utterance = raw["speaker"], raw["utterance"]
        if not isinstance(speaker, str) or not speaker.strip():
            raise CorpusError(f"turn {i} has an empty speaker label", line_no)
        if "\n" in speaker or "\r" in speaker:
            raise CorpusError(f"turn {i} speaker label contains a newline", line_no)
        if not isinstance(utterance, str):
            raise CorpusError(f"turn {i} utterance must be a string", line_no)
        if not utterance.strip():
            logger.warning(
                "empty utterance at line %d (id=%s, turn %d)", line_no, rec_id, i
            )
        turns.append(Turn(speaker=speaker, utterance=utterance))

    tasks = _canonical_tasks(obj["tasks"], line_no)

    raw_questions = obj.get("questions", [])
    if raw_questions is None:
        raw_questions = []
    if not isinstance(raw_questions, list) or any(
        not isinstance(q, str) for q in raw_questions
    ):
        raise CorpusError("field 'questions' must be a list of strings", line_no)
    if "qna" in tasks and not raw_questions:
        raise CorpusError("task 'qna' requested but no questions given", line_no)
    if "qna" not in tasks and raw_questions:
        raise CorpusError("questions given but task 'qna' not requested", line_no)

    return DialogueRecord(
        id=rec_id,
        lang=lang,
        turns=tuple(turns),
        tasks=tasks,
        questions=tuple(raw_questions),
    )


def load_corpus(path: str | Path) -> list[DialogueRecord]:
    """Read a JSONL corpus, fail-fast on the first invalid line.

    Returns records in file order. Raises :class:`CorpusError` with the
    line number for any malformed line, unknown language code, duplicate id,
    or a qna task without questions.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")

    records: list[DialogueRecord] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON ({exc.msg})", line_no) from exc
            record = _parse_record(obj, line_no)
            if record.id in seen_ids:
                raise CorpusError(f"duplicate id {record.id!r}", line_no)
            seen_ids.add(record.id)
            records.append(record)
    return records


def record_to_dict(record: DialogueRecord) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "id": record.id,
        "lang": record.lang,
        "turns": [{"speaker": t.speaker, "utterance": t.utterance} for t in record.turns],
        "tasks": list(record.tasks),
    }
    if record.questions:
        obj["questions"] = list(record.questions)
    return obj


def write_corpus(path: str | Path, records: list[DialogueRecord]) -> None:
    """Write records as JSONL, one per line, in list order."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False))
            fh.write("\n")


def write_results(path: str | Path, results: list[PipelineResult]) -> None:
    """Write pipeline results as JSONL, one per line, in list order."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as fh:
            for result in results:
                fh.write(result_to_line(result))
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"failed to write results to {path}: {exc}") from exc


def result_to_line(result: PipelineResult) -> str:
    """Serialize one result to its canonical single-line JSON form."""
    return json.dumps(result.to_dict(), ensure_ascii=False, separators=(",", ":"))


def load_results(path: str | Path) -> list[PipelineResult]:
    """Read a JSONL results file written by :func:`write_results` (or appended
    by the pipeline checkpointer)."""
    path = Path(path)
    results: list[PipelineResult] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON in results ({exc.msg})", line_no) from exc
            results.append(PipelineResult.from_dict(obj))
    return results
