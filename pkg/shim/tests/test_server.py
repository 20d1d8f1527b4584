import json
from concurrent.futures import ThreadPoolExecutor

import pytest
import requests

from trilingua_shim.config import ModelSpec, ShimConfig
from trilingua_shim.server import _OOM_ERRORS, ShimServer, serve_models


def post(server, path, payload):
    return requests.post(server.base_url + path, json=payload, timeout=30)


def get(server, path):
    return requests.get(server.base_url + path, timeout=30)


def translate_payload(texts, tgt):
    return {
        "src": "hi" if tgt == "en" else "en",
        "tgt": tgt,
        "texts": texts,
        "max_new_tokens": 64,
        "decoding": "greedy",
    }


@pytest.fixture(scope="module")
def embed_only(tiny_specs):
    with serve_models(ShimConfig(models={"embed": tiny_specs["embed"]}), port=0) as server:
        yield server


class TestHealth:
    def test_all_roles_report_as_shim(self, shim_server, tiny_models):
        resp = get(shim_server, "/v1/health")
        assert resp.status_code == 200
        assert resp.headers["Content-Type"] == "application/json"
        data = resp.json()
        assert data["status"] == "ok"
        assert data["role"] == "shim"
        assert data["models"] == tiny_models["dirs"]

    def test_single_role_reports_its_name(self, embed_only):
        data = get(embed_only, "/v1/health").json()
        assert data["status"] == "ok"
        assert data["role"] == "embed"
        assert list(data["models"]) == ["embed"]


class TestTranslateRoute:
    def test_english_target_uses_forward_model(self, shim_server, tiny_models):
        resp = post(shim_server, "/v1/translate", translate_payload(tiny_models["fwd_inputs"], "en"))
        assert resp.status_code == 200
        assert resp.json() == {
            "translations": [tiny_models["english_dialogue"], tiny_models["english_question"]]
        }
        assert get(shim_server, "/__shim__/last").json()["role"] == "translate_fwd"

    def test_other_target_uses_reverse_model(self, shim_server, tiny_models):
        resp = post(
            shim_server, "/v1/translate", translate_payload(tiny_models["reverse_inputs"], "hi")
        )
        assert resp.status_code == 200
        assert resp.json() == {"translations": tiny_models["reverse_outputs"]}
        assert get(shim_server, "/__shim__/last").json()["role"] == "translate_rev"

    def test_repeat_requests_are_deterministic(self, shim_server, tiny_models):
        payload = translate_payload(tiny_models["reverse_inputs"], "hi")
        first = post(shim_server, "/v1/translate", payload).content
        second = post(shim_server, "/v1/translate", payload).content
        assert first == second

    def test_concurrent_requests_all_succeed_identically(self, shim_server, tiny_models):
        payload = translate_payload([tiny_models["fwd_inputs"][1]], "en")

        def call(_):
            resp = post(shim_server, "/v1/translate", payload)
            return resp.status_code, resp.content

        with ThreadPoolExecutor(max_workers=8) as pool:
            results = list(pool.map(call, range(8)))
        assert len(set(results)) == 1
        assert results[0][0] == 200


class TestGenerate:
    def test_completion_matches_trained_target(self, shim_server, tiny_models):
        for task, prompt in tiny_models["prompts"].items():
            resp = post(
                shim_server,
                "/v1/generate",
                {"prompt": prompt, "max_new_tokens": 64, "decoding": "greedy"},
            )
            assert resp.status_code == 200
            assert resp.json() == {"completion": tiny_models["completions"][task]}

    def test_last_inference_records_the_rendered_prompt(self, shim_server, tiny_models):
        prompt = tiny_models["prompts"]["qna"]
        post(shim_server, "/v1/generate", {"prompt": prompt, "max_new_tokens": 64, "decoding": "greedy"})
        last = get(shim_server, "/__shim__/last").json()
        assert last["path"] == "/v1/generate"
        assert last["role"] == "generate"
        assert prompt in last["rendered_prompt"]
        assert isinstance(last["input_tokens"], int) and last["input_tokens"] > 0


class TestEmbed:
    def test_vectors_have_one_fixed_dimension(self, shim_server, tiny_models):
        resp = post(shim_server, "/v1/embed", {"tokens": ["headache", "तन", "दन"]})
        assert resp.status_code == 200
        vectors = resp.json()["vectors"]
        assert len(vectors) == 3
        assert {len(v) for v in vectors} == {tiny_models["embed_dim"]}
        assert all(isinstance(x, float) for v in vectors for x in v)


class TestRejections:
    def test_non_greedy_decoding(self, shim_server):
        resp = post(
            shim_server,
            "/v1/generate",
            {"prompt": "x", "max_new_tokens": 8, "decoding": "nucleus"},
        )
        assert resp.status_code == 400
        assert "greedy" in resp.json()["error"]

    @pytest.mark.parametrize(
        "path, payload",
        [
            ("/v1/translate", {"tgt": "en", "texts": ["x"], "max_new_tokens": 8, "decoding": "greedy"}),
            ("/v1/translate", {"src": "hi", "tgt": "en", "texts": "x", "max_new_tokens": 8, "decoding": "greedy"}),
            ("/v1/translate", {"src": "hi", "tgt": "en", "texts": [], "max_new_tokens": 8, "decoding": "greedy"}),
            ("/v1/translate", {"src": "hi", "tgt": "en", "texts": [1], "max_new_tokens": 8, "decoding": "greedy"}),
            ("/v1/translate", {"src": "hi", "tgt": "en", "texts": ["x"], "max_new_tokens": 0, "decoding": "greedy"}),
            ("/v1/translate", {"src": "hi", "tgt": "en", "texts": ["x"], "max_new_tokens": "8", "decoding": "greedy"}),
            ("/v1/translate", {"src": "hi", "tgt": "en", "texts": ["x"], "max_new_tokens": True, "decoding": "greedy"}),
            ("/v1/translate", {"src": "hi", "tgt": "en", "texts": ["x"], "max_new_tokens": 8}),
            ("/v1/generate", {"prompt": "", "max_new_tokens": 8, "decoding": "greedy"}),
            ("/v1/generate", {"max_new_tokens": 8, "decoding": "greedy"}),
            ("/v1/generate", {"prompt": "x", "decoding": "greedy"}),
            ("/v1/embed", {"tokens": []}),
            ("/v1/embed", {"tokens": ["x", 2]}),
            ("/v1/embed", {}),
        ],
    )
    def test_malformed_payloads(self, shim_server, path, payload):
        resp = post(shim_server, path, payload)
        assert resp.status_code == 400
        assert "error" in resp.json()

    def test_invalid_json_body(self, shim_server):
        resp = requests.post(
            shim_server.base_url + "/v1/embed",
            data=b"{not json",
            headers={"Content-Type": "application/json"},
            timeout=30,
        )
        assert resp.status_code == 400
        assert "valid JSON" in resp.json()["error"]

    def test_non_object_body(self, shim_server):
        resp = requests.post(
            shim_server.base_url + "/v1/embed",
            data=json.dumps(["x"]).encode(),
            headers={"Content-Type": "application/json"},
            timeout=30,
        )
        assert resp.status_code == 400

    def test_unknown_path(self, shim_server):
        assert post(shim_server, "/v2/translate", {}).status_code == 404
        assert get(shim_server, "/v1/models").status_code == 404

    def test_unserved_role_is_rejected(self, embed_only):
        resp = post(
            embed_only,
            "/v1/generate",
            {"prompt": "x", "max_new_tokens": 8, "decoding": "greedy"},
        )
        assert resp.status_code == 400
        assert "no model serves role" in resp.json()["error"]

    def test_no_inference_recorded_yet(self, tiny_specs):
        with serve_models(ShimConfig(models={"embed": tiny_specs["embed"]}), port=0) as fresh:
            resp = get(fresh, "/__shim__/last")
            assert resp.status_code == 404


class _Exploding:
    model_id = "exploding"

    def __init__(self, exc: BaseException):
        self.exc = exc

    def generate(self, prompt, max_new_tokens):
        raise self.exc


class TestInferenceFailures:
    def test_out_of_memory_maps_to_503(self):
        with ShimServer({"generate": _Exploding(_OOM_ERRORS[0]("boom"))}) as server:
            resp = post(server, "/v1/generate", {"prompt": "x", "max_new_tokens": 8, "decoding": "greedy"})
        assert resp.status_code == 503
        assert "out of memory" in resp.json()["error"]

    def test_other_inference_errors_map_to_500(self):
        with ShimServer({"generate": _Exploding(RuntimeError("matmul shape"))}) as server:
            resp = post(server, "/v1/generate", {"prompt": "x", "max_new_tokens": 8, "decoding": "greedy"})
        assert resp.status_code == 500
        assert "inference failed" in resp.json()["error"]
