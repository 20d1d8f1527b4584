"""Config file loading: endpoints, budgets, tags, and mock behavior.

Accepts TOML or JSON with the same key set. Unknown keys are rejected so a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib as _toml
except ImportError:  # Python < 3.11
    import tomli as _toml

from trilingua.client import ROLES, BackendEndpoint
from trilingua.corpus import LANGUAGES
from trilingua.mockserve import MockBehavior
from trilingua.pipeline import PipelineConfig
from trilingua.postprocess import DEFAULT_RULES, ArtifactRules
from trilingua.preprocess import StageBudget, TagMap

_TOP_LEVEL_KEYS = {
    "endpoints",
    "budgets",
    "parallelism",
    "checkpoint_path",
    "template_path",
    "tag_style",
    "codes",
    "artifact_rules",
    "mock",
}
_ENDPOINT_KEYS = {"base_url", "timeout", "max_retries", "batch_size"}
_BUDGET_KEYS = {"translation_input_max", "translation_output_max", "generation_output_max"}
_RULE_KEYS = {"strip_prefixes", "danda_languages", "danda"}
_MOCK_KEYS = {"translator", "dictionary", "generator", "fixed", "embed_dim", "role", "fault_plan", "delay"}


class ConfigError(ValueError):
    """The config file is unreadable or violates the key schema."""


@dataclass(frozen=True)
class AppConfig:
    """A parsed config file: the pipeline settings plus optional mock behavior."""

    pipeline: PipelineConfig
    mock: MockBehavior | None = None


def _reject_unknown(section: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _parse_endpoints(raw: Any) -> dict[str, BackendEndpoint]:
    if not isinstance(raw, dict):
        raise ConfigError("'endpoints' must be a table of role -> settings")
    endpoints: dict[str, BackendEndpoint] = {}
    for role, settings in raw.items():
        if role not in ROLES:
            raise ConfigError(f"unknown endpoint role {role!r}")
        if not isinstance(settings, dict):
            raise ConfigError(f"endpoints.{role} must be a table")
        _reject_unknown(settings, _ENDPOINT_KEYS, f"endpoints.{role}")
        if "base_url" not in settings:
            raise ConfigError(f"endpoints.{role} is missing 'base_url'")
        try:
            endpoints[role] = BackendEndpoint(
                role=role,
                base_url=str(settings["base_url"]),
                timeout=float(settings.get("timeout", 30.0)),
                max_retries=int(settings.get("max_retries", 2)),
                batch_size=int(settings.get("batch_size", 8)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"endpoints.{role}: {exc}") from exc
    return endpoints


def _parse_budgets(raw: Any) -> StageBudget:
    if not isinstance(raw, dict):
        raise ConfigError("'budgets' must be a table")
    _reject_unknown(raw, _BUDGET_KEYS, "budgets")
    defaults = StageBudget()
    try:
        return StageBudget(
            translation_input_max=int(
                raw.get("translation_input_max", defaults.translation_input_max)
            ),
            translation_output_max=int(
                raw.get("translation_output_max", defaults.translation_output_max)
            ),
            generation_output_max=int(
                raw.get("generation_output_max", defaults.generation_output_max)
            ),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"budgets: {exc}") from exc


def _parse_tag_map(style: Any, codes: Any) -> TagMap:
    if not isinstance(codes, dict):
        raise ConfigError("'codes' must be a table of language -> backend code")
    for lang in codes:
        if lang not in LANGUAGES:
            raise ConfigError(f"codes.{lang}: unknown language code")
    merged = {lang: lang for lang in LANGUAGES}
    merged.update({k: str(v) for k, v in codes.items()})
    try:
        return TagMap(style=str(style), codes=merged)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_rules(raw: Any) -> ArtifactRules:
    if not isinstance(raw, dict):
        raise ConfigError("'artifact_rules' must be a table")
    _reject_unknown(raw, _RULE_KEYS, "artifact_rules")
    for lang in raw.get("danda_languages", ()):
        if lang not in LANGUAGES:
            raise ConfigError(f"artifact_rules.danda_languages: unknown language {lang!r}")
    return ArtifactRules(
        strip_prefixes=tuple(raw.get("strip_prefixes", DEFAULT_RULES.strip_prefixes)),
        danda_languages=tuple(raw.get("danda_languages", DEFAULT_RULES.danda_languages)),
        danda=bool(raw.get("danda", DEFAULT_RULES.danda)),
    )


def _parse_mock(raw: Any) -> MockBehavior:
    if not isinstance(raw, dict):
        raise ConfigError("'mock' must be a table")
    _reject_unknown(raw, _MOCK_KEYS, "mock")
    fault_plan: dict[int, str] = {}
    for index, kind in dict(raw.get("fault_plan", {})).items():
        try:
            fault_plan[int(index)] = str(kind)
        except ValueError as exc:
            raise ConfigError(f"mock.fault_plan: bad call index {index!r}") from exc
    try:
        return MockBehavior(
            translator=str(raw.get("translator", "identity")),
            dictionary={str(k): str(v) for k, v in dict(raw.get("dictionary", {})).items()},
            generator=str(raw.get("generator", "echo")),
            fixed={str(k): str(v) for k, v in dict(raw.get("fixed", {})).items()},
            embed_dim=int(raw.get("embed_dim", 32)),
            role=str(raw.get("role", "mock")),
            fault_plan=fault_plan,
            delay=float(raw.get("delay", 0.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"mock: {exc}") from exc


def parse_config(data: Mapping[str, Any]) -> AppConfig:
    """Build an :class:`AppConfig` from already-deserialized config data."""
    if not isinstance(data, Mapping):
        raise ConfigError("config root must be a table/object")
    _reject_unknown(data, _TOP_LEVEL_KEYS, "config")

    try:
        parallelism = int(data.get("parallelism", 4))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"parallelism: {exc}") from exc

    checkpoint_path = data.get("checkpoint_path")
    if checkpoint_path is not None and not isinstance(checkpoint_path, str):
        raise ConfigError("'checkpoint_path' must be a string")
    template_path = data.get("template_path")
    if template_path is not None and not isinstance(template_path, str):
        raise ConfigError("'template_path' must be a string")

    try:
        pipeline = PipelineConfig(
            endpoints=_parse_endpoints(data.get("endpoints", {})),
            budget=_parse_budgets(data.get("budgets", {})),
            tag_map=_parse_tag_map(data.get("tag_style", "angle"), data.get("codes", {})),
            rules=_parse_rules(data.get("artifact_rules", {})),
            parallelism=parallelism,
            checkpoint_path=checkpoint_path,
            template_path=template_path,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    mock = _parse_mock(data["mock"]) if "mock" in data else None
    return AppConfig(pipeline=pipeline, mock=mock)


def load_config(path: str | Path) -> AppConfig:
    """Load a TOML or JSON config file (by extension; TOML otherwise)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    raw = path.read_bytes()
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(raw.decode("utf-8"))
        except ValueError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    else:
        try:
            data = _toml.loads(raw.decode("utf-8"))
        except _toml.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return parse_config(data)
