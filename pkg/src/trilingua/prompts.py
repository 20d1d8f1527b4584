"""Task-specific instruction prompts prepended to the English dialogue."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from trilingua.corpus import TASKS

_HEADER = re.compile(r"^\[task:([a-z_]+)\]\s*$")
_SLOT = re.compile(r"\{(dialogue|question)\}")


class PromptError(ValueError):
    """Template or argument contract violation while building a prompt."""


@dataclass(frozen=True)
class PromptTemplate:
    """One task's template body; slots are ``{dialogue}`` and ``{question}``."""

    task: str
    body: str

    def slots(self) -> set[str]:
        return set(_SLOT.findall(self.body))


def parse_templates(text: str) -> dict[str, PromptTemplate]:
    """Parse a template file into one template per task.

    Sections are delimited by ``[task:<kind>]`` headers; lines before the
    first header (comments) are ignored.
    """
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in text.split("\n"):
        m = _HEADER.match(line)
        if m:
            kind = m.group(1)
            if kind not in TASKS:
                raise PromptError(f"unknown task kind in template header: {kind!r}")
            if kind in sections:
                raise PromptError(f"duplicate template section for task {kind!r}")
            current = sections.setdefault(kind, [])
            continue
        if current is not None:
            current.append(line)

    templates: dict[str, PromptTemplate] = {}
    for kind, lines in sections.items():
        body = "\n".join(lines).strip("\n")
        template = PromptTemplate(task=kind, body=body)
        slots = template.slots()
        if "dialogue" not in slots:
            raise PromptError(f"template for {kind!r} is missing the {{dialogue}} slot")
        if kind == "qna" and "question" not in slots:
            raise PromptError("template for 'qna' is missing the {question} slot")
        if kind != "qna" and "question" in slots:
            raise PromptError(f"template for {kind!r} must not use the {{question}} slot")
        templates[kind] = template

    missing = [kind for kind in TASKS if kind not in templates]
    if missing:
        raise PromptError(f"template file lacks sections for: {', '.join(missing)}")
    return templates


@lru_cache(maxsize=8)
def load_templates(path: str | Path | None = None) -> dict[str, PromptTemplate]:
    """Load templates from ``path``, or the packaged defaults when None."""
    if path is None:
        text = resources.files("trilingua").joinpath("templates/default.txt").read_text(
            encoding="utf-8"
        )
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_templates(text)


def build_prompt(
    task: str,
    english_dialogue: str,
    question: str | None = None,
    templates: dict[str, PromptTemplate] | None = None,
) -> str:
    """Render the prompt for one task: instruction, format contract, dialogue,
    and (for qna) the question last. Pure for a fixed template set."""
    if templates is None:
        templates = load_templates()
    if task not in templates:
        raise PromptError(f"no template for task {task!r}")
    if task == "qna":
        if not question:
            raise PromptError("question required for qna")
    elif question is not None:
        raise PromptError(f"question not allowed for {task}")

    values = {"dialogue": english_dialogue, "question": question or ""}
    # single pass over the template only, so payload text is never rescanned
    return _SLOT.sub(lambda m: values[m.group(1)], templates[task].body)
