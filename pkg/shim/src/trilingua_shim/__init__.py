"""Serve real translation, generation, and embedding models over the trilingua wire protocol."""

from .config import DEFAULT_MODELS, ModelSpec, ShimConfig, load_shim_config
from .server import ShimServer, serve_models

__all__ = [
    "DEFAULT_MODELS",
    "ModelSpec",
    "ShimConfig",
    "ShimServer",
    "load_shim_config",
    "serve_models",
]
