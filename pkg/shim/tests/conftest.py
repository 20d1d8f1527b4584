import os

# Keep every model load strictly local; the fixtures are trained on the fly.
os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")
os.environ.setdefault("HF_HUB_DISABLE_PROGRESS_BARS", "1")
os.environ.setdefault("TRANSFORMERS_VERBOSITY", "error")

import pytest

from trilingua_shim.config import ModelSpec, ShimConfig
from trilingua_shim.server import serve_models


@pytest.fixture(scope="session")
def tiny_models(tmp_path_factory):
    """Train the tiny fixture checkpoints once per session; see tinybuild."""
    pytest.importorskip("trilingua", reason="fixture training derives its strings from trilingua")
    from tinybuild import build_all

    return build_all(tmp_path_factory.mktemp("models"))


@pytest.fixture(scope="session")
def tiny_specs(tiny_models):
    return {role: ModelSpec(model=path) for role, path in tiny_models["dirs"].items()}


@pytest.fixture(scope="session")
def shim_server(tiny_specs):
    """One server process-wide with all four roles loaded."""
    with serve_models(ShimConfig(models=tiny_specs), port=0) as server:
        yield server
