"""Model backends: one ``complete`` interface, three interchangeable modes."""

from __future__ import annotations

from typing import Protocol, Sequence

from .base import (
    BackendConfig,
    BackendError,
    BackendMode,
    BackendResponse,
    ChatMessage,
    ProtocolError,
    ResponseKind,
    Role,
    ScriptError,
    ToolDescriptor,
    TransientBackendError,
    check_call_preconditions,
)
from .http_backend import HttpBackend
from .rules import NO_CAPABILITY_SENTINEL, ROUTE_TOOL_PREFIX, RulesBackend
from .scripted import ScriptedBackend, ScriptTable, load_script

__all__ = [
    "Backend",
    "BackendConfig",
    "BackendError",
    "BackendMode",
    "BackendResponse",
    "ChatMessage",
    "HttpBackend",
    "NO_CAPABILITY_SENTINEL",
    "ProtocolError",
    "ResponseKind",
    "Role",
    "ROUTE_TOOL_PREFIX",
    "RulesBackend",
    "ScriptError",
    "ScriptTable",
    "ScriptedBackend",
    "ToolDescriptor",
    "TransientBackendError",
    "check_call_preconditions",
    "complete",
    "load_script",
    "make_backend",
]


class Backend(Protocol):
    def complete(
        self, messages: Sequence[ChatMessage], tools: Sequence[ToolDescriptor]
    ) -> BackendResponse: ...


def make_backend(config: BackendConfig) -> Backend:
    """Build a fresh backend for one conversation.

    SCRIPTED instances hold a replay cursor, so each conversation needs its own.
    """
    if config.mode is BackendMode.HTTP:
        return HttpBackend(config)
    if config.mode is BackendMode.SCRIPTED:
        assert config.script_path is not None
        return ScriptedBackend.from_path(config.script_path)
    return RulesBackend(config)


def complete(
    messages: Sequence[ChatMessage],
    tools: Sequence[ToolDescriptor],
    config: BackendConfig,
) -> BackendResponse:
    """One-shot completion against a fresh backend built from ``config``."""
    return make_backend(config).complete(messages, tools)
