"""Scoring: token F1, embedding-based greedy-matching F1, win-rate reports."""

from __future__ import annotations

import json
import unicodedata
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from trilingua.corpus import LANGUAGE_NAMES, LANGUAGES, TASKS

OUTCOMES = ("win", "loss", "tie")

_EN_ARTICLES = frozenset({"a", "an", "the"})

TASK_LABELS = {
    "qna": "QnA",
    "summary_text": "Summary (Text)",
    "summary_knv": "Summary (KnV)",
}


def _strip_punct(piece: str) -> str:
    start, end = 0, len(piece)
    while start < end and unicodedata.category(piece[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(piece[end - 1]).startswith("P"):
        end -= 1
    return piece[start:end]


def metric_tokenize(text: str, language: str | None = None) -> list[str]:
    """Lowercase, strip surrounding punctuation per piece, drop empties.

    English articles (a, an, the) are dropped only when ``language == "en"``;
    no equivalent stop list exists for the other languages.
    """
    tokens = []
    for piece in text.split():
        piece = _strip_punct(piece).lower()
        if not piece:
            continue
        if language == "en" and piece in _EN_ARTICLES:
            continue
        tokens.append(piece)
    return tokens


def token_f1(pred: Sequence[str], gold: Sequence[str]) -> float:
    """Bag-of-tokens F1. Both empty -> 1.0; exactly one empty -> 0.0."""
    if not pred and not gold:
        return 1.0
    if not pred or not gold:
        return 0.0
    overlap = sum((Counter(pred) & Counter(gold)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred)
    recall = overlap / len(gold)
    return 2 * precision * recall / (precision + recall)


def greedy_embed_f1(
    cand_vectors: Sequence[Sequence[float]], ref_vectors: Sequence[Sequence[float]]
) -> tuple[float, float, float]:
    """Greedy maximum-cosine matching between per-token vectors.

    Precision averages, over candidate tokens, each token's best cosine match
    in the reference; recall mirrors it over reference tokens. Zero-norm
    vectors contribute similarity 0.
    """
    if not len(cand_vectors) or not len(ref_vectors):
        raise ValueError("vector lists must be non-empty")
    dims = {len(v) for v in cand_vectors} | {len(v) for v in ref_vectors}
    if len(dims) != 1:
        raise ValueError(f"inconsistent vector dimensions: {sorted(dims)}")

    cand = np.asarray(cand_vectors, dtype=float)
    ref = np.asarray(ref_vectors, dtype=float)
    cand = _normalize_rows(cand)
    ref = _normalize_rows(ref)
    sim = cand @ ref.T
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > 0, matrix / safe, 0.0)


def win_rate(wins: int, total: int) -> float:
    """Percentage of wins, rounded half-up to one decimal place."""
    if total <= 0:
        raise ValueError("total must be positive")
    if not 0 <= wins <= total:
        raise ValueError("wins must lie in [0, total]")
    rate = Decimal(100 * wins) / Decimal(total)
    return float(rate.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class Judgment:
    """One head-to-head pairwise outcome for a record/language/task cell."""

    record_id: str
    language: str
    task: str
    outcome: str


@dataclass(frozen=True)
class ScoreRow:
    """Automatic metrics for one language/task cell."""

    language: str
    task: str
    f1: float
    bert_f: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.f1 <= 1.0:
            raise ValueError(f"f1 out of range: {self.f1}")
        if not -1.0 <= self.bert_f <= 1.0:
            raise ValueError(f"bert_f out of range: {self.bert_f}")


def load_judgments(path: str | Path) -> list[Judgment]:
    """Read a JSONL judgments file, validating enums and cell uniqueness."""
    judgments: list[Judgment] = []
    seen: set[tuple[str, str, str]] = set()
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            language = obj["language"]
            task = obj["task"]
            outcome = obj["outcome"]
            if language not in LANGUAGES:
                raise ValueError(f"unknown language {language!r} at line {line_no}")
            if task not in TASKS:
                raise ValueError(f"unknown task {task!r} at line {line_no}")
            if outcome not in OUTCOMES:
                raise ValueError(f"unknown outcome {outcome!r} at line {line_no}")
            key = (obj["record_id"], language, task)
            if key in seen:
                raise ValueError(f"duplicate judgment for {key} at line {line_no}")
            seen.add(key)
            judgments.append(Judgment(obj["record_id"], language, task, outcome))
    return judgments


def load_scores(path: str | Path) -> list[ScoreRow]:
    """Read a JSONL scores file of per-cell F1 / embedding-F1 rows."""
    rows: list[ScoreRow] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj["language"] not in LANGUAGES:
                raise ValueError(f"unknown language {obj['language']!r}")
            if obj["task"] not in TASKS:
                raise ValueError(f"unknown task {obj['task']!r}")
            rows.append(
                ScoreRow(obj["language"], obj["task"], float(obj["f1"]), float(obj["bert_f"]))
            )
    return rows


def win_rate_cells(
    judgments: Iterable[Judgment], count_ties: bool = True
) -> dict[tuple[str, str], float]:
    """Aggregate judgments into per-(language, task) win-rate percentages.

    Ties count as non-wins; with ``count_ties=False`` they leave the
    denominator as well.
    """
    wins: Counter[tuple[str, str]] = Counter()
    totals: Counter[tuple[str, str]] = Counter()
    for j in judgments:
        key = (j.language, j.task)
        if j.outcome == "tie" and not count_ties:
            continue
        totals[key] += 1
        if j.outcome == "win":
            wins[key] += 1
    return {key: win_rate(wins[key], total) for key, total in totals.items() if total}


def _markdown_table(header: list[str], rows: list[list[str]]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join("---" for _ in header) + " |",
    ]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines)


def render_report(
    judgments: Sequence[Judgment],
    scores: Sequence[ScoreRow],
    count_ties: bool = True,
) -> str:
    """Render the win-rate and automatic-metric tables as Markdown.

    Rows are ordered by QnA win rate (table A) or QnA F1 (table B)
    descending, with an alphabetical fallback; missing cells print as an
    em dash.
    """
    cells = win_rate_cells(judgments, count_ties=count_ties)
    score_cells = {(s.language, s.task): s for s in scores}

    def language_order(metric: dict[tuple[str, str], float]) -> list[str]:
        langs = sorted({lang for lang, _ in metric}, key=lambda c: LANGUAGE_NAMES[c])
        return sorted(langs, key=lambda c: -metric.get((c, "qna"), float("-inf")))

    win_rows = []
    for lang in language_order(cells):
        row = [LANGUAGE_NAMES[lang]]
        for task in TASKS:
            rate = cells.get((lang, task))
            row.append("—" if rate is None else f"{rate:.1f}%")
        win_rows.append(row)

    score_rows = []
    f1_by_cell = {key: s.f1 for key, s in score_cells.items()}
    for lang in language_order(f1_by_cell):
        row = [LANGUAGE_NAMES[lang]]
        for task in TASKS:
            s = score_cells.get((lang, task))
            row.append("—" if s is None else f"{s.f1:.3f} / {s.bert_f:.3f}")
        score_rows.append(row)

    header = ["Language"] + [TASK_LABELS[t] for t in TASKS]
    parts = [
        "## Win rates",
        "",
        _markdown_table(header, win_rows),
        "",
        "## Automatic metrics (F1 / embedding F1)",
        "",
        _markdown_table(header, score_rows),
        "",
    ]
    return "\n".join(parts)


@dataclass(frozen=True)
class EvalRow:
    """Per-(record, task) scores; embed fields are None without an embedder."""

    record_id: str
    language: str
    task: str
    token_f1: float
    embed_p: float | None = None
    embed_r: float | None = None
    embed_f: float | None = None

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "language": self.language,
            "task": self.task,
            "token_f1": self.token_f1,
            "embed_p": self.embed_p,
            "embed_r": self.embed_r,
            "embed_f": self.embed_f,
        }


def load_gold(path: str | Path) -> dict[tuple[str, str], str]:
    """Read JSONL reference texts ({"id", "task", "text"}) keyed by (id, task)."""
    refs: dict[tuple[str, str], str] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            for name in ("id", "task", "text"):
                if not isinstance(obj.get(name), str):
                    raise ValueError(f"gold line {line_no}: field {name!r} must be a string")
            if obj["task"] not in TASKS:
                raise ValueError(f"gold line {line_no}: unknown task {obj['task']!r}")
            key = (obj["id"], obj["task"])
            if key in refs:
                raise ValueError(f"gold line {line_no}: duplicate entry for {key}")
            refs[key] = obj["text"]
    return refs


def _mean_or_none(values: list[float]) -> float | None:
    if not values:
        return None
    return round(sum(values) / len(values), 6)


def _aggregate(rows: Sequence[EvalRow], pick) -> dict[str, float | None]:
    out: dict[str, float | None] = {
        "overall": _mean_or_none([v for r in rows if (v := pick(r)) is not None])
    }
    for task in TASKS:
        out[task] = _mean_or_none(
            [v for r in rows if r.task == task and (v := pick(r)) is not None]
        )
    return out


def evaluate_results(
    results: Sequence,
    gold: dict[tuple[str, str], str],
    embed_fn=None,
) -> tuple[list[EvalRow], dict]:
    """Score pipeline results against reference texts.

    ``embed_fn`` maps a token list to one vector per token; when given, each
    row also carries greedy-matching embedding P/R/F. Degenerate token lists
    fall back to the token-F1 emptiness conventions. Returns the per-pair
    rows plus an aggregate summary with a stable key set.
    """
    rows: list[EvalRow] = []
    matched: set[tuple[str, str]] = set()
    missing_gold = 0
    for result in results:
        for task, output in result.outputs.items():
            key = (result.id, task)
            if key not in gold:
                missing_gold += 1
                continue
            matched.add(key)
            pred = metric_tokenize(output.final or "", result.lang)
            ref = metric_tokenize(gold[key], result.lang)
            f1 = token_f1(pred, ref)
            embed_p = embed_r = embed_f = None
            if embed_fn is not None:
                if pred and ref:
                    embed_p, embed_r, embed_f = greedy_embed_f1(embed_fn(pred), embed_fn(ref))
                else:
                    value = 1.0 if not pred and not ref else 0.0
                    embed_p = embed_r = embed_f = value
            rows.append(EvalRow(result.id, result.lang, task, f1, embed_p, embed_r, embed_f))
    summary = {
        "pairs": len(rows),
        "missing_gold": missing_gold,
        "missing_pred": len(gold) - len(matched),
        "token_f1": _aggregate(rows, lambda r: r.token_f1),
        "embed_f1": _aggregate(rows, lambda r: r.embed_f),
    }
    return rows, summary
