"""Three-stage record pipeline and checkpointed corpus runs.

Stage 1 translates the rendered dialogue (and any questions, in the same
batch) to English; stage 2 builds a prompt and generates per task; stage 3
cleans artifacts and translates back to the source language sentence by
sentence, structure-aware for key-value summaries. English records bypass
both translation stages without a single backend call.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from trilingua import client
from trilingua.client import BackendEndpoint, BackendError, DecodingPolicy, ROLES
from trilingua.corpus import (
    Diagnostic,
    DialogueRecord,
    PipelineResult,
    TaskOutput,
    load_corpus,
    result_to_line,
)
from trilingua.postprocess import (
    ArtifactRules,
    DEFAULT_RULES,
    KnVDoc,
    clean_artifacts,
    parse_knv,
    serialize_knv,
)
from trilingua.preprocess import (
    DEFAULT_TAG_MAP,
    StageBudget,
    TagMap,
    apply_language_tag,
    flatten_text,
    render_dialogue,
    truncate_to_budget,
)
from trilingua.prompts import PromptTemplate, build_prompt, load_templates

logger = logging.getLogger(__name__)

STAGES = ("forward_translate", "generate", "reverse_translate")


class PipelineError(RuntimeError):
    """Pipeline-level misconfiguration or an unusable checkpoint file."""


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs: endpoints, budgets, tags, parallelism, paths."""

    endpoints: Mapping[str, BackendEndpoint] = field(default_factory=dict)
    budget: StageBudget = StageBudget()
    tag_map: TagMap = DEFAULT_TAG_MAP
    rules: ArtifactRules = DEFAULT_RULES
    parallelism: int = 4
    checkpoint_path: str | None = None
    template_path: str | None = None

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        for role, endpoint in self.endpoints.items():
            if role not in ROLES:
                raise ValueError(f"unknown endpoint role {role!r}")
            if endpoint.role != role:
                raise ValueError(
                    f"endpoint under key {role!r} declares role {endpoint.role!r}"
                )

    def endpoint_for(self, role: str) -> BackendEndpoint:
        try:
            return self.endpoints[role]
        except KeyError:
            raise PipelineError(f"no endpoint configured for role {role!r}") from None


@dataclass(frozen=True)
class StageTrace:
    """One stage's execution footprint; kept in memory, never serialized."""

    stage: str
    input_chars: int
    output_chars: int
    duration_s: float
    truncated: bool = False
    bypass: bool = False
    task: str | None = None


@dataclass(frozen=True)
class RunSummary:
    """Corpus run outcome counts; the three buckets partition the corpus."""

    processed: int
    skipped: int
    failed: int

    def to_dict(self) -> dict[str, int]:
        return {"processed": self.processed, "skipped": self.skipped, "failed": self.failed}


_ABBREVIATIONS = frozenset(
    {
        "dr.", "mr.", "mrs.", "ms.", "prof.", "st.",
        "e.g.", "i.e.", "etc.", "vs.", "cf.", "no.", "fig.",
    }
)
_SENTENCE_END = re.compile(r"[.!?]+(?=\s|$)")


def _split_line(line: str) -> list[str]:
    parts: list[str] = []
    start = 0
    for match in _SENTENCE_END.finditer(line):
        end = match.end()
        word_start = line.rfind(" ", start, end) + 1
        if line[word_start:end].casefold() in _ABBREVIATIONS:
            continue
        piece = line[start:end].strip()
        if piece:
            parts.append(piece)
        start = end
    tail = line[start:].strip()
    if tail:
        parts.append(tail)
    return parts


def sentence_split(english_text: str) -> list[str]:
    """Split on sentence-final ``.``/``!``/``?`` plus whitespace or line end.

    Punctuation stays with its sentence; newlines always split; a guard list
    of common abbreviations ("Dr.", "e.g.", ...) suppresses false splits.
    Joining the result with single spaces reconstructs a normalized form of
    the input.
    """
    sentences: list[str] = []
    for line in english_text.split("\n"):
        sentences.extend(_split_line(line))
    return sentences


def _forward_stage(
    record: DialogueRecord, config: PipelineConfig, result: PipelineResult
) -> tuple[str, list[str]]:
    """Render, truncate, tag, and translate the dialogue plus questions."""
    started = time.perf_counter()
    rendered = render_dialogue(record)
    cut = truncate_to_budget(rendered, config.budget.translation_input_max, keep="head")
    if cut.truncated:
        result.truncated = True
        result.diagnostics.append(
            Diagnostic(
                "forward_translate",
                "truncated",
                f"dialogue cut to <={config.budget.translation_input_max} approx tokens"
                " at a turn boundary",
            )
        )
        if cut.turn_split:
            result.diagnostics.append(
                Diagnostic(
                    "forward_translate",
                    "turn_split",
                    "a single turn exceeded the budget and was cut mid-turn",
                )
            )
    dialogue = cut.rendered.text
    questions = [flatten_text(q) for q in record.questions]
    inputs = [dialogue, *questions]

    if record.lang == "en":
        result.traces.append(
            StageTrace(
                stage="forward_translate",
                input_chars=sum(map(len, inputs)),
                output_chars=sum(map(len, inputs)),
                duration_s=time.perf_counter() - started,
                truncated=cut.truncated,
                bypass=True,
            )
        )
        return dialogue, questions

    tagged = [
        apply_language_tag(text, record.lang, "en", config.tag_map) for text in inputs
    ]
    policy = DecodingPolicy(max_new_tokens=config.budget.translation_output_max)
    translated = client.translate(
        config.endpoint_for("translate_fwd"), tagged, record.lang, "en", policy
    )
    result.traces.append(
        StageTrace(
            stage="forward_translate",
            input_chars=sum(map(len, tagged)),
            output_chars=sum(map(len, translated)),
            duration_s=time.perf_counter() - started,
            truncated=cut.truncated,
        )
    )
    return translated[0], translated[1:]


def _generate_stage(
    record: DialogueRecord,
    config: PipelineConfig,
    result: PipelineResult,
    templates: dict[str, PromptTemplate],
    english_dialogue: str,
    english_questions: list[str],
) -> dict[str, str]:
    """Build a prompt and generate per requested task; failures skip the task."""
    english_by_task: dict[str, str] = {}
    policy = DecodingPolicy(max_new_tokens=config.budget.generation_output_max)
    for task in record.tasks:
        started = time.perf_counter()
        try:
            if task == "qna":
                prompts = [
                    build_prompt("qna", english_dialogue, question=q, templates=templates)
                    for q in english_questions
                ]
                completions = [
                    client.generate(config.endpoint_for("generate"), p, policy)
                    for p in prompts
                ]
                english = "\n".join(completions)
                input_chars = sum(map(len, prompts))
            else:
                prompt = build_prompt(task, english_dialogue, templates=templates)
                english = client.generate(config.endpoint_for("generate"), prompt, policy)
                input_chars = len(prompt)
        except BackendError as exc:
            result.diagnostics.append(Diagnostic("generate", "backend_error", str(exc)))
            logger.warning("record %s task %s generation failed: %s", record.id, task, exc)
            continue
        if not english.strip():
            result.diagnostics.append(
                Diagnostic("generate", "empty_generation", f"task {task!r} returned empty text")
            )
        result.traces.append(
            StageTrace(
                stage="generate",
                input_chars=input_chars,
                output_chars=len(english),
                duration_s=time.perf_counter() - started,
                task=task,
            )
        )
        english_by_task[task] = english
    return english_by_task


def _reverse_knv(
    cleaned: str, record: DialogueRecord, config: PipelineConfig, result: PipelineResult
) -> str:
    """Structure-aware reverse translation: keys and values travel separately."""
    doc = parse_knv(cleaned)
    for diag in doc.diagnostics:
        result.diagnostics.append(
            Diagnostic("reverse_translate", f"knv_{diag.code}", diag.raw_line)
        )
    if not doc.pairs:
        return ""
    pieces = [piece for pair in doc.pairs for piece in pair]
    tagged = [
        apply_language_tag(piece, "en", record.lang, config.tag_map) for piece in pieces
    ]
    policy = DecodingPolicy(max_new_tokens=config.budget.translation_output_max)
    translated = client.translate(
        config.endpoint_for("translate_rev"), tagged, "en", record.lang, policy
    )
    out = KnVDoc(pairs=list(zip(translated[0::2], translated[1::2])))
    return serialize_knv(out)


def _reverse_stage(
    record: DialogueRecord,
    config: PipelineConfig,
    result: PipelineResult,
    english_by_task: dict[str, str],
) -> None:
    """Clean, sentence-split, reverse-translate, and record per-task outputs."""
    started = time.perf_counter()
    input_chars = 0
    output_chars = 0
    bypass = record.lang == "en"
    policy = DecodingPolicy(max_new_tokens=config.budget.translation_output_max)

    for task, english in english_by_task.items():
        cleaned = clean_artifacts(english, "en", config.rules)
        input_chars += len(cleaned)
        if bypass:
            if task == "summary_knv":
                # parse for diagnostics only; the text itself passes through
                for diag in parse_knv(cleaned).diagnostics:
                    result.diagnostics.append(
                        Diagnostic("reverse_translate", f"knv_{diag.code}", diag.raw_line)
                    )
            result.outputs[task] = TaskOutput(english_intermediate=english, final=cleaned)
            output_chars += len(cleaned)
            continue
        try:
            if task == "summary_knv":
                final = _reverse_knv(cleaned, record, config, result)
            else:
                sentences = sentence_split(cleaned)
                if sentences:
                    tagged = [
                        apply_language_tag(s, "en", record.lang, config.tag_map)
                        for s in sentences
                    ]
                    translated = client.translate(
                        config.endpoint_for("translate_rev"),
                        tagged,
                        "en",
                        record.lang,
                        policy,
                    )
                    final = " ".join(translated)
                else:
                    final = ""
            final = clean_artifacts(final, record.lang, config.rules)
        except BackendError as exc:
            result.diagnostics.append(
                Diagnostic("reverse_translate", "backend_error", str(exc))
            )
            logger.warning(
                "record %s task %s reverse translation failed: %s", record.id, task, exc
            )
            result.outputs[task] = TaskOutput(english_intermediate=english, final=None)
            continue
        except ValueError as exc:
            # a translated key broke the key-value grammar (colon or empty)
            result.diagnostics.append(
                Diagnostic("reverse_translate", "knv_reserialize_failed", str(exc))
            )
            result.outputs[task] = TaskOutput(english_intermediate=english, final=None)
            continue
        result.outputs[task] = TaskOutput(english_intermediate=english, final=final)
        output_chars += len(final)

    result.traces.append(
        StageTrace(
            stage="reverse_translate",
            input_chars=input_chars,
            output_chars=output_chars,
            duration_s=time.perf_counter() - started,
            bypass=bypass,
        )
    )


def run_record(
    record: DialogueRecord,
    config: PipelineConfig,
    templates: dict[str, PromptTemplate] | None = None,
) -> PipelineResult:
    """Run one record through all three stages.

    Hard backend errors never raise: the affected tasks are absent (stage 2)
    or carry ``final=None`` (stage 3), with a diagnostic either way. A stage 1
    failure affects every task.
    """
    if templates is None:
        templates = load_templates(config.template_path)
    result = PipelineResult(id=record.id, lang=record.lang)
    try:
        english_dialogue, english_questions = _forward_stage(record, config, result)
    except BackendError as exc:
        result.diagnostics.append(
            Diagnostic("forward_translate", "backend_error", str(exc))
        )
        logger.warning("record %s forward translation failed: %s", record.id, exc)
        return result
    english_by_task = _generate_stage(
        record, config, result, templates, english_dialogue, english_questions
    )
    _reverse_stage(record, config, result, english_by_task)
    return result


def _is_failed(result: PipelineResult) -> bool:
    return any(
        d.code in ("backend_error", "knv_reserialize_failed") for d in result.diagnostics
    )


def _read_checkpoint(path: Path) -> dict[str, str]:
    """Map of record id to its serialized result line from a previous run.

    A malformed final line (interrupted append) is dropped with a warning;
    malformed earlier lines mean the file is corrupt and the run aborts.
    """
    done: dict[str, str] = {}
    lines = path.read_text(encoding="utf-8").split("\n")
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except ValueError:
            if i == len(lines) - 1:
                logger.warning("dropping partial final checkpoint line in %s", path)
                continue
            raise PipelineError(
                f"corrupt checkpoint {path}: invalid JSON at line {i + 1}"
            ) from None
        if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
            raise PipelineError(f"corrupt checkpoint {path}: line {i + 1} has no id")
        done[obj["id"]] = line
    return done


def run_corpus(
    corpus_path: str | Path,
    config: PipelineConfig,
    out_path: str | Path,
) -> RunSummary:
    """Process a corpus with at most ``config.parallelism`` records in flight.

    Every completed result is appended to the checkpoint immediately; on
    restart, ids already checkpointed are skipped. The final output file is
    written in corpus order regardless of completion order, so it is a pure
    function of inputs and backend behavior.
    """
    records = load_corpus(corpus_path)
    out_path = Path(out_path)
    checkpoint = Path(config.checkpoint_path or f"{out_path}.ckpt")

    done = _read_checkpoint(checkpoint) if checkpoint.exists() else {}
    pending = [r for r in records if r.id not in done]
    skipped = len(records) - len(pending)
    templates = load_templates(config.template_path)

    processed = 0
    failed = 0
    write_lock = threading.Lock()
    checkpoint.parent.mkdir(parents=True, exist_ok=True)
    with checkpoint.open("a", encoding="utf-8") as ckpt:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            futures = {
                pool.submit(run_record, record, config, templates): record
                for record in pending
            }
            for future in as_completed(futures):
                record = futures[future]
                try:
                    result = future.result()
                except Exception:
                    failed += 1
                    logger.exception("record %s raised", record.id)
                    continue
                line = result_to_line(result)
                with write_lock:
                    ckpt.write(line + "\n")
                    ckpt.flush()
                    done[result.id] = line
                if _is_failed(result):
                    failed += 1
                else:
                    processed += 1

    with out_path.open("w", encoding="utf-8") as out:
        for record in records:
            line = done.get(record.id)
            if line is not None:
                out.write(line + "\n")
    return RunSummary(processed=processed, skipped=skipped, failed=failed)
