"""Shim configuration: which checkpoint backs each wire-protocol role.

A config file (TOML or JSON) has an optional ``[models]`` table keyed by role.
Omitting the table serves every role with its default checkpoint; naming only
some roles serves only those. Each role section accepts ``model`` (checkpoint
id or local path), ``max_input_tokens`` (tokenizer-level truncation bound;
0 disables truncation), and ``trust_remote_code``. When ``model`` is omitted
the role's default checkpoint is used, and ``trust_remote_code`` then defaults
to whatever that checkpoint requires; for an explicitly named model it
defaults to false.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib


class ShimConfigError(ValueError):
    """Raised when a shim config file is malformed."""


ROLES = ("translate_fwd", "translate_rev", "generate", "embed")

# Checkpoint ids served when a role's config omits "model".
DEFAULT_MODELS = {
    "translate_fwd": "prajdabre/rotary-indictrans2-indic-en-dist-200M",
    "translate_rev": "prajdabre/rotary-indictrans2-en-indic-dist-200M",
    "generate": "unsloth/Qwen3-4B-Instruct-2507-unsloth-bnb-4bit",
    "embed": "sentence-transformers/all-MiniLM-L6-v2",
}

# Per-role truncation bounds; generation inputs are capped, the rest pass through.
DEFAULT_MAX_INPUT_TOKENS = {
    "translate_fwd": 0,
    "translate_rev": 0,
    "generate": 2048,
    "embed": 0,
}

# The default translation checkpoints ship custom modeling code.
DEFAULT_TRUST_REMOTE_CODE = {
    "translate_fwd": True,
    "translate_rev": True,
    "generate": False,
    "embed": False,
}

_TOP_KEYS = {"device", "port", "models"}
_MODEL_KEYS = {"model", "max_input_tokens", "trust_remote_code"}


@dataclass(frozen=True)
class ModelSpec:
    """One role's checkpoint, its input-length cap (0 means uncapped), and load options."""

    model: str
    max_input_tokens: int = 0
    trust_remote_code: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.model, str) or not self.model:
            raise ShimConfigError("model must be a non-empty string")
        if not isinstance(self.max_input_tokens, int) or isinstance(self.max_input_tokens, bool):
            raise ShimConfigError("max_input_tokens must be an integer")
        if self.max_input_tokens < 0:
            raise ShimConfigError("max_input_tokens must be >= 0")
        if not isinstance(self.trust_remote_code, bool):
            raise ShimConfigError("trust_remote_code must be a boolean")


@dataclass(frozen=True)
class ShimConfig:
    """Full shim configuration: device, port, and the role -> checkpoint map."""

    device: str = "cpu"
    port: int = 8100
    models: dict[str, ModelSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.device, str) or not self.device:
            raise ShimConfigError("device must be a non-empty string")
        if not isinstance(self.port, int) or isinstance(self.port, bool):
            raise ShimConfigError("port must be an integer")
        if not 0 <= self.port <= 65535:
            raise ShimConfigError("port must be in 0..65535")
        if not self.models:
            object.__setattr__(self, "models", default_models())
        for role, spec in self.models.items():
            if role not in ROLES:
                raise ShimConfigError(f"unknown model role: {role!r}")
            if not isinstance(spec, ModelSpec):
                raise ShimConfigError(f"model role {role!r} must map to a ModelSpec")


def default_models() -> dict[str, ModelSpec]:
    """The full role map with default checkpoints, caps, and load options."""
    return {
        role: ModelSpec(
            model=DEFAULT_MODELS[role],
            max_input_tokens=DEFAULT_MAX_INPUT_TOKENS[role],
            trust_remote_code=DEFAULT_TRUST_REMOTE_CODE[role],
        )
        for role in ROLES
    }


def _parse_model_section(role: str, section: object) -> ModelSpec:
    if not isinstance(section, dict):
        raise ShimConfigError(f"models.{role} must be a table")
    unknown = set(section) - _MODEL_KEYS
    if unknown:
        raise ShimConfigError(f"unknown keys in models.{role}: {sorted(unknown)}")
    model = section.get("model")
    # Role defaults for remote code apply only to the role's default checkpoint.
    trc_default = DEFAULT_TRUST_REMOTE_CODE[role] if model is None else False
    if model is None:
        model = DEFAULT_MODELS[role]
    cap = section.get("max_input_tokens", DEFAULT_MAX_INPUT_TOKENS[role])
    if not isinstance(cap, int) or isinstance(cap, bool):
        raise ShimConfigError(f"models.{role}.max_input_tokens must be an integer")
    trc = section.get("trust_remote_code", trc_default)
    return ModelSpec(model=model, max_input_tokens=cap, trust_remote_code=trc)


def parse_shim_config(data: object) -> ShimConfig:
    """Build a ShimConfig from a parsed TOML/JSON mapping, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ShimConfigError("config root must be a table")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ShimConfigError(f"unknown config keys: {sorted(unknown)}")
    device = data.get("device", "cpu")
    port = data.get("port", 8100)
    models_data = data.get("models")
    if models_data is None:
        models = default_models()
    else:
        if not isinstance(models_data, dict):
            raise ShimConfigError("models must be a table keyed by role")
        if not models_data:
            raise ShimConfigError("models table must name at least one role")
        for role in models_data:
            if role not in ROLES:
                raise ShimConfigError(f"unknown model role: {role!r}")
        models = {role: _parse_model_section(role, section) for role, section in models_data.items()}
    return ShimConfig(device=device, port=port, models=models)


def load_shim_config(path: str | Path) -> ShimConfig:
    """Load a shim config from a .toml or .json file."""
    path = Path(path)
    if not path.is_file():
        raise ShimConfigError(f"config file not found: {path}")
    raw = path.read_bytes()
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ShimConfigError(f"invalid JSON in {path}: {exc}") from exc
    else:
        try:
            data = tomllib.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
            raise ShimConfigError(f"invalid TOML in {path}: {exc}") from exc
    return parse_shim_config(data)
