"""End-to-end: the batch pipeline drives live model backends over HTTP only."""

import json
import os
import re

import pytest
import requests

trilingua = pytest.importorskip(
    "trilingua", reason="the smoke test drives the pipeline package against the shim"
)

from trilingua.client import BackendEndpoint
from trilingua.corpus import record_to_dict, result_to_line
from trilingua.pipeline import PipelineConfig, run_corpus, run_record
from trilingua.postprocess import DEFAULT_RULES, KnVDoc, clean_artifacts, serialize_knv
from trilingua.preprocess import StageBudget

from trilingua_shim.config import ROLES, ShimConfig
from trilingua_shim.server import serve_models

_DEVANAGARI = re.compile(r"[ऀ-ॿ]")


def pipeline_config(base_url, **overrides):
    endpoints = {
        role: BackendEndpoint(role=role, base_url=base_url)
        for role in ("translate_fwd", "translate_rev", "generate", "embed")
    }
    budget = StageBudget(translation_output_max=64, generation_output_max=64)
    return PipelineConfig(endpoints=endpoints, budget=budget, **overrides)


def expected_finals(tiny_models):
    rev = tiny_models["reverse_outputs"]
    return {
        "qna": clean_artifacts(rev[0], "hi", DEFAULT_RULES),
        "summary_text": clean_artifacts(" ".join(rev[1:3]), "hi", DEFAULT_RULES),
        "summary_knv": clean_artifacts(
            serialize_knv(KnVDoc(pairs=[(rev[3], rev[4])])), "hi", DEFAULT_RULES
        ),
    }


class TestRunRecord:
    def test_all_tasks_complete_with_live_models(self, shim_server, tiny_models):
        config = pipeline_config(shim_server.base_url)
        result = run_record(tiny_models["record"], config)
        assert not result.diagnostics
        assert set(result.outputs) == {"qna", "summary_text", "summary_knv"}
        finals = expected_finals(tiny_models)
        for task, output in result.outputs.items():
            assert output.english_intermediate == tiny_models["completions"][task]
            assert output.final == finals[task]
            assert _DEVANAGARI.search(output.final)
            assert "<2" not in output.final

    def test_two_runs_are_byte_identical(self, shim_server, tiny_models):
        config = pipeline_config(shim_server.base_url)
        first = result_to_line(run_record(tiny_models["record"], config))
        second = result_to_line(run_record(tiny_models["record"], config))
        assert first.encode("utf-8") == second.encode("utf-8")


class TestRunCorpus:
    def test_checkpointed_run_and_resume(self, shim_server, tiny_models, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text(
            json.dumps(record_to_dict(tiny_models["record"]), ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        out = tmp_path / "results.jsonl"
        config = pipeline_config(shim_server.base_url, checkpoint_path=str(tmp_path / "run.ckpt"))

        summary = run_corpus(corpus, config, out)
        assert summary.to_dict() == {"processed": 1, "skipped": 0, "failed": 0}
        first = out.read_bytes()
        assert first

        resumed = run_corpus(corpus, config, out)
        assert resumed.to_dict() == {"processed": 0, "skipped": 1, "failed": 0}
        assert out.read_bytes() == first

        fresh_out = tmp_path / "fresh.jsonl"
        fresh_config = pipeline_config(
            shim_server.base_url, checkpoint_path=str(tmp_path / "fresh.ckpt")
        )
        run_corpus(corpus, fresh_config, fresh_out)
        assert fresh_out.read_bytes() == first


@pytest.mark.skipif(
    not os.environ.get("SHIM_REAL_MODELS"),
    reason="downloads the multi-GB default checkpoints; set SHIM_REAL_MODELS=1 to run",
)
def test_default_checkpoints_come_up_healthy():
    with serve_models(ShimConfig(), port=0) as server:
        data = requests.get(server.base_url + "/v1/health", timeout=30).json()
    assert data["status"] == "ok"
    assert set(data["models"]) == set(ROLES)
