"""Corpus ingestion, validation, and results persistence."""

import json

import pytest

from trilingua.corpus import (
    CorpusError,
    DialogueRecord,
    PipelineResult,
    TaskOutput,
    Turn,
    load_corpus,
    load_results,
    record_to_dict,
    result_to_line,
    write_corpus,
    write_results,
)

GOOD_LINE = {
    "id": "r1",
    "lang": "hi",
    "turns": [
        {"speaker": "Doctor", "utterance": "नमस्ते"},
        {"speaker": "Patient", "utterance": "सिर दर्द है"},
    ],
    "tasks": ["summary_text", "qna"],
    "questions": ["क्या हुआ?"],
}


def write_lines(path, objs):
    path.write_text("".join(json.dumps(o, ensure_ascii=False) + "\n" for o in objs), "utf-8")


def test_load_good_corpus(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [GOOD_LINE])
    records = load_corpus(path)
    assert len(records) == 1
    record = records[0]
    assert record.id == "r1"
    assert record.lang == "hi"
    assert record.turns == (
        Turn("Doctor", "नमस्ते"),
        Turn("Patient", "सिर दर्द है"),
    )
    assert record.questions == ("क्या हुआ?",)


def test_tasks_canonical_order(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [GOOD_LINE])
    assert load_corpus(path)[0].tasks == ("qna", "summary_text")


def test_blank_lines_skipped(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("\n" + json.dumps(GOOD_LINE, ensure_ascii=False) + "\n\n", "utf-8")
    assert len(load_corpus(path)) == 1


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda o: o.pop("id"), "missing field 'id'"),
        (lambda o: o.update(id=""), "'id' must be a non-empty string"),
        (lambda o: o.update(lang="xx"), "unknown language code 'xx'"),
        (lambda o: o.update(turns=[]), "'turns' must be a non-empty list"),
        (lambda o: o["turns"][0].pop("speaker"), "turn 0 must have"),
        (lambda o: o["turns"][0].update(speaker="  "), "empty speaker"),
        (lambda o: o["turns"][0].update(speaker="a\nb"), "contains a newline"),
        (lambda o: o.update(tasks=[]), "'tasks' must be a non-empty list"),
        (lambda o: o.update(tasks=["qna", "qna"]), "duplicate task"),
        (lambda o: o.update(tasks=["poetry"]), "unknown task"),
        (lambda o: o.update(questions=[]), "no questions given"),
        (lambda o: o.update(tasks=["summary_text"]), "task 'qna' not requested"),
        (lambda o: o.update(questions="q"), "must be a list of strings"),
    ],
)
def test_invalid_records_fail_fast_with_line_number(tmp_path, mutate, fragment):
    obj = json.loads(json.dumps(GOOD_LINE))
    mutate(obj)
    path = tmp_path / "c.jsonl"
    write_lines(path, [GOOD_LINE | {"id": "other"}, obj])
    with pytest.raises(CorpusError, match="line 2"):
        load_corpus(path)
    with pytest.raises(CorpusError, match=fragment):
        load_corpus(path)


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "a"\n', "utf-8")
    with pytest.raises(CorpusError, match="invalid JSON.*line 1"):
        load_corpus(path)


def test_duplicate_id_rejected(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [GOOD_LINE, GOOD_LINE])
    with pytest.raises(CorpusError, match="duplicate id 'r1' at line 2"):
        load_corpus(path)


def test_missing_file():
    with pytest.raises(CorpusError, match="not found"):
        load_corpus("/nonexistent/corpus.jsonl")


def test_empty_utterance_warns_but_loads(tmp_path, caplog):
    obj = json.loads(json.dumps(GOOD_LINE))
    obj["turns"][0]["utterance"] = "   "
    path = tmp_path / "c.jsonl"
    write_lines(path, [obj])
    with caplog.at_level("WARNING"):
        records = load_corpus(path)
    assert len(records) == 1
    assert "empty utterance" in caplog.text


def test_corpus_roundtrip(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [GOOD_LINE])
    records = load_corpus(path)
    out = tmp_path / "copy.jsonl"
    write_corpus(out, records)
    assert load_corpus(out) == records


def test_record_to_dict_omits_empty_questions():
    record = DialogueRecord(
        id="x", lang="en", turns=(Turn("A", "hi"),), tasks=("summary_text",)
    )
    assert "questions" not in record_to_dict(record)


def make_result() -> PipelineResult:
    result = PipelineResult(id="r1", lang="hi")
    result.outputs["qna"] = TaskOutput("three days", "तीन दिन")
    result.outputs["summary_text"] = TaskOutput("a summary", None)
    result.truncated = True
    return result


def test_results_roundtrip(tmp_path):
    path = tmp_path / "r.jsonl"
    result = make_result()
    write_results(path, [result])
    loaded = load_results(path)
    assert loaded == [result]
    assert loaded[0].outputs["summary_text"].final is None


def test_result_line_is_compact_and_unicode():
    line = result_to_line(make_result())
    assert "\n" not in line
    assert ": " not in line.split('"a summary"')[0]
    assert "तीन दिन" in line


def test_results_serialization_skips_traces():
    result = make_result()
    result.traces.append(object())
    assert "traces" not in json.loads(result_to_line(result))


def test_write_results_oserror_names_path(tmp_path):
    with pytest.raises(OSError, match="no/such/dir"):
        write_results(tmp_path / "no" / "such" / "dir" / "r.jsonl", [make_result()])
