"""Shared fixtures: mock backend servers and endpoint/config builders."""

from __future__ import annotations

import pytest

from trilingua.client import ROLES, BackendEndpoint
from trilingua.mockserve import MockBehavior, MockServer, serve_mock
from trilingua.pipeline import PipelineConfig


def endpoints_for(base_url: str, roles=ROLES, **kwargs) -> dict[str, BackendEndpoint]:
    return {role: BackendEndpoint(role=role, base_url=base_url, **kwargs) for role in roles}


def config_for(server: MockServer, **kwargs) -> PipelineConfig:
    endpoint_kwargs = kwargs.pop("endpoint_kwargs", {})
    return PipelineConfig(
        endpoints=endpoints_for(server.base_url, **endpoint_kwargs), **kwargs
    )


@pytest.fixture
def start_mock():
    """Factory fixture: start mock servers, shut them all down afterwards."""
    servers: list[MockServer] = []

    def _start(behavior: MockBehavior | None = None, **kwargs) -> MockServer:
        server = serve_mock(behavior if behavior is not None else MockBehavior(**kwargs))
        servers.append(server)
        return server

    yield _start
    for server in servers:
        server.shutdown()


@pytest.fixture
def identity_mock(start_mock) -> MockServer:
    return start_mock(MockBehavior(translator="identity", generator="echo"))


@pytest.fixture
def tagging_mock(start_mock) -> MockServer:
    return start_mock(MockBehavior(translator="tag_prefix", generator="echo"))
