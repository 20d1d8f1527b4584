"""Checkpoint wrappers behind the wire protocol: load, truncate, run greedily.

Each backend owns one tokenizer/model pair and a lock so at most one inference
runs on a model at a time. Generation is forced greedy regardless of whatever
sampling defaults the checkpoint ships.
"""

from __future__ import annotations

import threading
from typing import Any

import torch
from transformers import AutoModel, AutoModelForCausalLM, AutoModelForSeq2SeqLM, AutoTokenizer

from .config import ModelSpec

# Per-call overrides beat the checkpoint's generation_config.
_GREEDY = {"do_sample": False, "num_beams": 1}


class ModelLoadError(RuntimeError):
    """Raised when a configured checkpoint cannot be loaded."""


def _load_tokenizer(spec: ModelSpec) -> Any:
    return AutoTokenizer.from_pretrained(spec.model, trust_remote_code=spec.trust_remote_code)


def _silence_sampling_defaults(model: Any) -> None:
    # Checkpoints that ship sampling defaults would otherwise warn on every
    # greedy call; neutralize them once at load.
    gc = getattr(model, "generation_config", None)
    if gc is None:
        return
    gc.do_sample = False
    gc.num_beams = 1
    for attr in ("temperature", "top_p", "top_k", "typical_p"):
        if hasattr(gc, attr):
            setattr(gc, attr, None)


class _Backend:
    """Shared load/encode plumbing for the concrete role backends."""

    def __init__(self, spec: ModelSpec, device: str, loader: Any) -> None:
        self.model_id = spec.model
        self.max_input_tokens = spec.max_input_tokens
        self.device = torch.device(device)
        self.lock = threading.Lock()
        try:
            self.tokenizer = _load_tokenizer(spec)
            self.model = loader.from_pretrained(spec.model, trust_remote_code=spec.trust_remote_code)
        except Exception as exc:
            raise ModelLoadError(f"cannot load model {spec.model!r}: {exc}") from exc
        if self.tokenizer.pad_token is None and self.tokenizer.eos_token is not None:
            self.tokenizer.pad_token = self.tokenizer.eos_token
        _silence_sampling_defaults(self.model)
        self.model.to(self.device)
        self.model.eval()

    def _encode(self, texts: str | list[str], *, padding: bool = False, add_special_tokens: bool = True) -> dict:
        kwargs: dict[str, Any] = {
            "return_tensors": "pt",
            "padding": padding,
            "add_special_tokens": add_special_tokens,
        }
        if self.max_input_tokens > 0:
            kwargs["truncation"] = True
            kwargs["max_length"] = self.max_input_tokens
        enc = self.tokenizer(texts, **kwargs)
        return {k: v.to(self.device) for k, v in enc.items()}


class TranslationBackend(_Backend):
    """Seq2seq checkpoint serving one translation direction."""

    def __init__(self, spec: ModelSpec, device: str) -> None:
        super().__init__(spec, device, AutoModelForSeq2SeqLM)

    def translate(self, texts: list[str], max_new_tokens: int) -> tuple[list[str], dict]:
        with self.lock:
            enc = self._encode(texts, padding=True)
            # Encoder-decoder generate() rejects segment ids some tokenizers emit.
            enc.pop("token_type_ids", None)
            with torch.no_grad():
                out = self.model.generate(**enc, max_new_tokens=max_new_tokens, **_GREEDY)
            translations = self.tokenizer.batch_decode(out, skip_special_tokens=True)
            info = {"input_tokens": int(enc["attention_mask"].sum(dim=1).max().item())}
        return translations, info


class GenerationBackend(_Backend):
    """Causal LM checkpoint serving single-prompt completion."""

    def __init__(self, spec: ModelSpec, device: str) -> None:
        super().__init__(spec, device, AutoModelForCausalLM)

    def generate(self, prompt: str, max_new_tokens: int) -> tuple[str, dict]:
        with self.lock:
            rendered = prompt
            templated = bool(getattr(self.tokenizer, "chat_template", None))
            if templated:
                rendered = self.tokenizer.apply_chat_template(
                    [{"role": "user", "content": prompt}],
                    tokenize=False,
                    add_generation_prompt=True,
                )
            # A chat template already embeds its own special tokens.
            enc = self._encode(rendered, add_special_tokens=not templated)
            enc.pop("token_type_ids", None)
            prompt_len = enc["input_ids"].shape[1]
            with torch.no_grad():
                out = self.model.generate(**enc, max_new_tokens=max_new_tokens, **_GREEDY)
            completion = self.tokenizer.decode(out[0][prompt_len:], skip_special_tokens=True)
            info = {"input_tokens": int(prompt_len), "rendered_prompt": rendered}
        return completion, info


class EmbeddingBackend(_Backend):
    """Encoder checkpoint serving mean-pooled sentence vectors."""

    def __init__(self, spec: ModelSpec, device: str) -> None:
        super().__init__(spec, device, AutoModel)

    def embed(self, tokens: list[str]) -> tuple[list[list[float]], dict]:
        with self.lock:
            enc = self._encode(tokens, padding=True)
            with torch.no_grad():
                hidden = self.model(**enc).last_hidden_state
            mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1)
            vectors = [[float(x) for x in row] for row in pooled]
            info = {"input_tokens": int(enc["attention_mask"].sum(dim=1).max().item())}
        return vectors, info


_BACKENDS = {
    "translate_fwd": TranslationBackend,
    "translate_rev": TranslationBackend,
    "generate": GenerationBackend,
    "embed": EmbeddingBackend,
}


def load_backend(role: str, spec: ModelSpec, device: str) -> _Backend:
    """Instantiate the backend class matching a wire-protocol role."""
    return _BACKENDS[role](spec, device)
