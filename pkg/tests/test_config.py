"""Config file parsing: key schema, defaults, TOML/JSON equivalence."""

import json

import pytest

from trilingua.config import AppConfig, ConfigError, load_config, parse_config
from trilingua.preprocess import StageBudget

FULL = {
    "parallelism": 2,
    "checkpoint_path": "/tmp/run.ckpt",
    "endpoints": {
        "translate_fwd": {"base_url": "http://127.0.0.1:8001", "timeout": 5.0},
        "translate_rev": {"base_url": "http://127.0.0.1:8001"},
        "generate": {"base_url": "http://127.0.0.1:8002", "max_retries": 0, "batch_size": 4},
    },
    "budgets": {"translation_input_max": 1024},
    "tag_style": "prefix_code",
    "codes": {"hi": "hin_Deva"},
    "artifact_rules": {"strip_prefixes": ["Output:"], "danda": False},
    "mock": {
        "translator": "tag_prefix",
        "embed_dim": 8,
        "fault_plan": {"3": "close"},
        "fixed": {"abc": "xyz"},
    },
}


def write_toml(path, data=FULL):
    lines = [f"parallelism = {data['parallelism']}", f'checkpoint_path = "{data["checkpoint_path"]}"']
    for role, ep in data["endpoints"].items():
        lines.append(f'[endpoints."{role}"]')
        for key, value in ep.items():
            lines.append(f"{key} = {json.dumps(value)}")
    lines += ["[budgets]", "translation_input_max = 1024"]
    path.write_text("\n".join(lines) + "\n", "utf-8")


class TestParseConfig:
    def test_empty_config_gives_defaults(self):
        app = parse_config({})
        assert isinstance(app, AppConfig)
        assert app.pipeline.endpoints == {}
        assert app.pipeline.parallelism == 4
        assert app.pipeline.budget == StageBudget()
        assert app.pipeline.tag_map.style == "angle"
        assert app.mock is None

    def test_full_config(self):
        app = parse_config(FULL)
        pipeline = app.pipeline
        assert set(pipeline.endpoints) == {"translate_fwd", "translate_rev", "generate"}
        assert pipeline.endpoints["translate_fwd"].timeout == 5.0
        assert pipeline.endpoints["translate_rev"].timeout == 30.0  # default
        assert pipeline.endpoints["generate"].max_retries == 0
        assert pipeline.endpoints["generate"].batch_size == 4
        assert pipeline.budget.translation_input_max == 1024
        assert pipeline.budget.translation_output_max == StageBudget().translation_output_max
        assert pipeline.parallelism == 2
        assert pipeline.checkpoint_path == "/tmp/run.ckpt"
        assert pipeline.rules.strip_prefixes == ("Output:",)
        assert pipeline.rules.danda is False

    def test_tag_codes_merge_over_identity(self):
        app = parse_config({"codes": {"hi": "hin_Deva"}})
        assert app.pipeline.tag_map.codes["hi"] == "hin_Deva"
        assert app.pipeline.tag_map.codes["ta"] == "ta"

    def test_tag_style_applied(self):
        app = parse_config({"tag_style": "prefix_code", "codes": {"hi": "hin_Deva"}})
        assert app.pipeline.tag_map.tag_for("hi") == "hin_Deva"
        assert app.pipeline.tag_map.tag_for("ta") == "ta"

    def test_mock_section(self):
        mock = parse_config(FULL).mock
        assert mock.translator == "tag_prefix"
        assert mock.embed_dim == 8
        assert mock.fault_plan == {3: "close"}  # string keys coerced to int
        assert mock.fixed == {"abc": "xyz"}

    @pytest.mark.parametrize(
        "data, fragment",
        [
            ({"unknown_top": 1}, "unknown key"),
            ({"endpoints": {"bogus_role": {"base_url": "http://x"}}}, "unknown endpoint role"),
            ({"endpoints": {"generate": {"url": "http://x"}}}, "unknown key"),
            ({"endpoints": {"generate": {}}}, "base_url"),
            ({"endpoints": "nope"}, "table"),
            ({"budgets": {"translation_input_max": 0}}, "budgets"),
            ({"budgets": {"bogus": 1}}, "unknown key"),
            ({"codes": {"xx": "whatever"}}, "unknown language"),
            ({"tag_style": "shouty"}, "tag style"),
            ({"artifact_rules": {"danda_languages": ["xx"]}}, "unknown language"),
            ({"artifact_rules": {"extra": True}}, "unknown key"),
            ({"parallelism": 0}, "parallelism"),
            ({"checkpoint_path": 7}, "checkpoint_path"),
            ({"mock": {"translator": "nonsense"}}, "translator"),
            ({"mock": {"fault_plan": {"x": "error"}}}, "call index"),
            ({"mock": {"surprise": 1}}, "unknown key"),
        ],
    )
    def test_rejections(self, data, fragment):
        with pytest.raises(ConfigError, match=fragment):
            parse_config(data)

    def test_endpoint_role_field_matches_key(self):
        app = parse_config({"endpoints": {"embed": {"base_url": "http://127.0.0.1:1"}}})
        assert app.pipeline.endpoints["embed"].role == "embed"


class TestLoadConfig:
    def test_json_file(self, tmp_path):
        path = tmp_path / "conf.json"
        path.write_text(json.dumps(FULL), "utf-8")
        app = load_config(path)
        assert app.pipeline.parallelism == 2
        assert app.mock.fault_plan == {3: "close"}

    def test_toml_file(self, tmp_path):
        path = tmp_path / "conf.toml"
        write_toml(path)
        app = load_config(path)
        assert app.pipeline.parallelism == 2
        assert app.pipeline.endpoints["generate"].max_retries == 0
        assert app.pipeline.budget.translation_input_max == 1024

    def test_toml_and_json_agree(self, tmp_path):
        subset = {
            "parallelism": FULL["parallelism"],
            "checkpoint_path": FULL["checkpoint_path"],
            "endpoints": FULL["endpoints"],
            "budgets": FULL["budgets"],
        }
        toml_path = tmp_path / "conf.toml"
        write_toml(toml_path, subset)
        json_path = tmp_path / "conf.json"
        json_path.write_text(json.dumps(subset), "utf-8")
        assert load_config(toml_path) == load_config(json_path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.toml")

    def test_bad_toml(self, tmp_path):
        path = tmp_path / "conf.toml"
        path.write_text("parallelism = = 3\n", "utf-8")
        with pytest.raises(ConfigError, match="invalid TOML"):
            load_config(path)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "conf.json"
        path.write_text("{not json", "utf-8")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(path)

    def test_config_usable_end_to_end(self, tmp_path, identity_mock):
        from trilingua.corpus import DialogueRecord, Turn, write_corpus
        from trilingua.pipeline import run_corpus
        import dataclasses

        path = tmp_path / "conf.json"
        endpoints = {
            role: {"base_url": identity_mock.base_url}
            for role in ("translate_fwd", "translate_rev", "generate")
        }
        path.write_text(json.dumps({"endpoints": endpoints, "parallelism": 1}), "utf-8")
        app = load_config(path)

        corpus = tmp_path / "c.jsonl"
        write_corpus(
            corpus,
            [DialogueRecord(id="a", lang="hi", turns=(Turn("A", "hello."),), tasks=("qna",), questions=("why?",))],
        )
        config = dataclasses.replace(app.pipeline, checkpoint_path=str(tmp_path / "x.ckpt"))
        summary = run_corpus(corpus, config, tmp_path / "out.jsonl")
        assert summary.processed == 1
