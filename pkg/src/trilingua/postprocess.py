"""Structured key-value summary parsing and output artifact cleanup."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_DANDA_DOT = re.compile(r"(?<![.\d])\.(?=\s|$)")


@dataclass(frozen=True)
class KnvDiagnostic:
    """One line the parser could not fold into a pair; no text is dropped."""

    line_no: int
    code: str
    raw_line: str


@dataclass
class KnVDoc:
    """An ordered key-value summary plus parse diagnostics.

    Keys keep their input order and case. Duplicate keys are allowed but
    flagged ``dup_key``.
    """

    pairs: list[tuple[str, str]] = field(default_factory=list)
    diagnostics: list[KnvDiagnostic] = field(default_factory=list)


def parse_knv(text: str) -> KnVDoc:
    """Parse ``Key: Value`` lines; total, every input line is accounted for.

    A pair line splits at its first colon (values may contain colons, keys
    may not). A colon-free line directly after a pair continues that pair's
    value. Blank lines end the current pair. Colon-free lines before the
    first pair are flagged ``preamble``; later detached ones ``orphan_line``.
    """
    doc = KnVDoc()
    open_pair: int | None = None
    seen_pair = False
    keys_seen: set[str] = set()

    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            open_pair = None
            continue
        if ":" in line:
            key, _, value = line.partition(":")
            key = key.strip()
            value = value.strip()
            if not key:
                doc.diagnostics.append(KnvDiagnostic(line_no, "empty_key", raw))
                open_pair = None
                continue
            if key in keys_seen:
                doc.diagnostics.append(KnvDiagnostic(line_no, "dup_key", raw))
            keys_seen.add(key)
            doc.pairs.append((key, value))
            open_pair = len(doc.pairs) - 1
            seen_pair = True
        elif open_pair is not None:
            key, value = doc.pairs[open_pair]
            doc.pairs[open_pair] = (key, f"{value} {line}".strip())
        else:
            code = "orphan_line" if seen_pair else "preamble"
            doc.diagnostics.append(KnvDiagnostic(line_no, code, raw))
    return doc


def serialize_knv(doc: KnVDoc) -> str:
    """One ``key: value`` line per pair, in order. Inverse of :func:`parse_knv`
    on diagnostic-free documents."""
    for key, _ in doc.pairs:
        if ":" in key:
            raise ValueError(f"key contains a colon: {key!r}")
        if not key:
            raise ValueError("empty key")
    return "\n".join(f"{key}: {value}" for key, value in doc.pairs)


@dataclass(frozen=True)
class ArtifactRules:
    """Configurable cleanup rules: which leading English discourse markers to
    strip, and which target languages get sentence-final danda punctuation."""

    strip_prefixes: tuple[str, ...] = ("Sure,", "Here is", "Answer:")
    danda_languages: tuple[str, ...] = ("hi", "mr", "bn", "as")
    danda: bool = True


DEFAULT_RULES = ArtifactRules()


def clean_artifacts(text: str, target: str, rules: ArtifactRules = DEFAULT_RULES) -> str:
    """Strip leading discourse markers and adjust sentence-final punctuation
    for the target language. Idempotent; text matching no rule is unchanged."""
    cleaned = text
    stripped = True
    while stripped:
        stripped = False
        lead = cleaned.lstrip()
        low = lead.lower()
        for prefix in rules.strip_prefixes:
            if low.startswith(prefix.lower()):
                cleaned = lead[len(prefix) :].lstrip()
                stripped = True
                break
    if rules.danda and target in rules.danda_languages:
        cleaned = _DANDA_DOT.sub("।", cleaned)
    return cleaned
