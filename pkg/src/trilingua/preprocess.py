"""Text normalization, dialogue rendering, token budgeting, and language tags."""

from __future__ import annotations

import math
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

from trilingua.corpus import LANGUAGES, DialogueRecord

_SPACE_RUN = re.compile(r"[ \t]+")
_WORD_RUN = re.compile(r"\S+")


def _drop_char(ch: str) -> bool:
    if ch == "\n":
        return False
    cat = unicodedata.category(ch)
    # Cc = controls, Cf = format chars (zero-width space/joiners, BOM, ...)
    return cat in ("Cc", "Cf")


def normalize_text(raw: str) -> str:
    """Canonicalize text: NFC, LF line endings, collapsed spaces, no controls.

    Idempotent. Runs of spaces/tabs collapse to one space; every line is
    stripped; zero-width and control characters other than LF are removed.
    """
    text = raw.replace("\r\n", "\n").replace("\r", "\n")
    text = "".join(ch for ch in text if not _drop_char(ch))
    text = unicodedata.normalize("NFC", text)
    text = _SPACE_RUN.sub(" ", text)
    return "\n".join(line.strip() for line in text.split("\n"))


def flatten_text(raw: str) -> str:
    """Normalize and fold any newlines into single spaces (one-line form)."""
    normalized = normalize_text(raw)
    return " ".join(part for part in normalized.split("\n") if part)


def approx_token_count(text: str) -> int:
    """Deterministic client-side token estimate.

    Each maximal non-whitespace run counts 1, or ceil(len/4) when longer
    than 4 characters. Monotone non-decreasing under concatenation.
    """
    total = 0
    for run in text.split():
        total += 1 if len(run) <= 4 else math.ceil(len(run) / 4)
    return total


@dataclass(frozen=True)
class RenderedDialogue:
    """A dialogue rendered as one ``Speaker: utterance`` line per turn.

    ``turn_offsets`` are (start, end) character spans that partition ``text``
    in turn order; each span except the last includes its trailing newline.
    """

    text: str
    turn_offsets: tuple[tuple[int, int], ...]
    approx_tokens: int

    @property
    def turn_count(self) -> int:
        return len(self.turn_offsets)

    def turn_text(self, index: int) -> str:
        start, end = self.turn_offsets[index]
        return self.text[start:end]


def render_dialogue(record: DialogueRecord) -> RenderedDialogue:
    """Render a record with speaker attribution, one line per turn.

    Speaker labels pass through verbatim; utterances are normalized and
    flattened to a single line.
    """
    lines = [f"{turn.speaker}: {flatten_text(turn.utterance)}" for turn in record.turns]
    text = "\n".join(lines)
    offsets = []
    pos = 0
    for i, line in enumerate(lines):
        end = pos + len(line) + (1 if i < len(lines) - 1 else 0)
        offsets.append((pos, end))
        pos = end
    return RenderedDialogue(
        text=text, turn_offsets=tuple(offsets), approx_tokens=approx_token_count(text)
    )


def _rebuild(text: str) -> RenderedDialogue:
    lines = text.split("\n")
    offsets = []
    pos = 0
    for i, line in enumerate(lines):
        end = pos + len(line) + (1 if i < len(lines) - 1 else 0)
        offsets.append((pos, end))
        pos = end
    return RenderedDialogue(
        text=text, turn_offsets=tuple(offsets), approx_tokens=approx_token_count(text)
    )


class TruncationResult(NamedTuple):
    rendered: RenderedDialogue
    truncated: bool
    turn_split: bool


def _split_single_turn(line: str, budget: int, keep: str) -> str:
    """Cut one over-budget turn at a whitespace boundary under the budget."""
    runs = list(_WORD_RUN.finditer(line))
    if keep == "head":
        cut = None
        for m in runs:
            if approx_token_count(line[: m.end()]) <= budget:
                cut = m.end()
            else:
                break
        if cut is None:
            # even the first run exceeds the budget: hard character cut
            return line[: max(1, budget * 4)]
        return line[:cut]
    cut = None
    for m in reversed(runs):
        if approx_token_count(line[m.start() :]) <= budget:
            cut = m.start()
        else:
            break
    if cut is None:
        return line[-max(1, budget * 4) :]
    return line[cut:]


def truncate_to_budget(
    rendered: RenderedDialogue, budget: int, keep: str = "head"
) -> TruncationResult:
    """Truncate to the token budget at turn boundaries.

    Keeps the longest prefix (``keep="head"``) or suffix (``keep="tail"``) of
    whole turns whose approximate token count fits the budget. A single turn
    that alone exceeds the budget is cut mid-text at a whitespace boundary
    and flagged ``turn_split``. Under-budget input is returned unchanged.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    if keep not in ("head", "tail"):
        raise ValueError(f"keep must be 'head' or 'tail', got {keep!r}")
    if rendered.approx_tokens <= budget:
        return TruncationResult(rendered, False, False)

    lines = rendered.text.split("\n")
    if keep == "head":
        kept = 0
        while kept < len(lines) and approx_token_count("\n".join(lines[: kept + 1])) <= budget:
            kept += 1
        if kept == 0:
            piece = _split_single_turn(lines[0], budget, keep)
            return TruncationResult(_rebuild(piece), True, True)
        return TruncationResult(_rebuild("\n".join(lines[:kept])), True, False)

    kept = 0
    while kept < len(lines) and approx_token_count("\n".join(lines[len(lines) - kept - 1 :])) <= budget:
        kept += 1
    if kept == 0:
        piece = _split_single_turn(lines[-1], budget, keep)
        return TruncationResult(_rebuild(piece), True, True)
    return TruncationResult(_rebuild("\n".join(lines[len(lines) - kept :])), True, False)


@dataclass(frozen=True)
class StageBudget:
    """Per-stage token limits; defaults match the pipeline's operating limits."""

    translation_input_max: int = 2048
    translation_output_max: int = 2048
    generation_output_max: int = 3000

    def __post_init__(self) -> None:
        for name in (
            "translation_input_max",
            "translation_output_max",
            "generation_output_max",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def _identity_codes() -> dict[str, str]:
    return {lang: lang for lang in LANGUAGES}


@dataclass(frozen=True)
class TagMap:
    """How target-language control tags are spelled for the translator.

    ``angle`` style emits ``<2xx>`` tags; ``prefix_code`` emits the mapped
    backend code verbatim (e.g. script-qualified codes).
    """

    style: str = "angle"
    codes: Mapping[str, str] = field(default_factory=_identity_codes)

    def __post_init__(self) -> None:
        if self.style not in ("angle", "prefix_code"):
            raise ValueError(f"unknown tag style {self.style!r}")

    def tag_for(self, tgt: str) -> str:
        code = self.codes.get(tgt, tgt)
        if self.style == "angle":
            return f"<2{code}>"
        return code


DEFAULT_TAG_MAP = TagMap()


def apply_language_tag(
    text: str, src: str, tgt: str, tag_map: TagMap = DEFAULT_TAG_MAP
) -> str:
    """Prepend the target-language tag; the payload is kept byte-identical."""
    if src == tgt:
        raise ValueError(
            f"source and target language are both {src!r}; bypass translation instead"
        )
    return f"{tag_map.tag_for(tgt)} {text}"
