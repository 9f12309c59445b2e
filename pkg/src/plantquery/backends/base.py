"""Shared backend types: messages, tool descriptors, responses, configuration."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

from ..schemaguard import ParamSchema, ToolCallEnvelope


class Role(Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"
    TOOL = "tool"


@dataclass(frozen=True)
class ChatMessage:
    """One conversation message; tool-result messages carry their call id."""

    role: Role
    content: str = ""
    tool_call_id: str | None = None
    tool_call: ToolCallEnvelope | None = None

    def __post_init__(self) -> None:
        if self.role is Role.TOOL and not self.tool_call_id:
            raise ValueError("tool messages require tool_call_id")
        if not self.content and self.tool_call is None:
            raise ValueError("message needs content or a tool-call payload")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"role": self.role.value, "content": self.content}
        if self.tool_call_id is not None:
            out["tool_call_id"] = self.tool_call_id
        if self.tool_call is not None:
            out["tool_call"] = self.tool_call.to_dict()
        return out

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "ChatMessage":
        return cls(
            role=Role(payload["role"]),
            content=payload.get("content", ""),
            tool_call_id=payload.get("tool_call_id"),
            tool_call=(
                ToolCallEnvelope.from_dict(payload["tool_call"])
                if payload.get("tool_call")
                else None
            ),
        )


_TOOL_NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")


@dataclass(frozen=True)
class ToolDescriptor:
    """A callable surface offered to the model."""

    name: str
    description: str
    parameters: tuple[ParamSchema, ...] = ()

    def __post_init__(self) -> None:
        if not _TOOL_NAME_RE.match(self.name):
            raise ValueError(f"invalid tool name {self.name!r}")
        names = [p.name for p in self.parameters]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate parameter names in tool {self.name}")


class ResponseKind(Enum):
    TEXT = "TEXT"
    TOOL_CALL = "TOOL_CALL"


@dataclass(frozen=True)
class BackendResponse:
    kind: ResponseKind
    text: str | None = None
    tool_call: ToolCallEnvelope | None = None

    def __post_init__(self) -> None:
        if self.kind is ResponseKind.TEXT and (self.text is None or self.tool_call is not None):
            raise ValueError("TEXT response must populate text only")
        if self.kind is ResponseKind.TOOL_CALL and (
            self.tool_call is None or self.text is not None
        ):
            raise ValueError("TOOL_CALL response must populate tool_call only")

    @classmethod
    def from_text(cls, text: str) -> "BackendResponse":
        return cls(kind=ResponseKind.TEXT, text=text)

    @classmethod
    def from_tool_call(cls, envelope: ToolCallEnvelope) -> "BackendResponse":
        return cls(kind=ResponseKind.TOOL_CALL, tool_call=envelope)

    def to_dict(self) -> dict[str, Any]:
        if self.kind is ResponseKind.TEXT:
            return {"kind": "TEXT", "text": self.text}
        assert self.tool_call is not None
        return {"kind": "TOOL_CALL", "tool_call": self.tool_call.to_dict()}

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "BackendResponse":
        if payload.get("kind") == "TEXT":
            return cls.from_text(payload["text"])
        if payload.get("kind") == "TOOL_CALL":
            return cls.from_tool_call(ToolCallEnvelope.from_dict(payload["tool_call"]))
        raise ValueError(f"response kind must be TEXT or TOOL_CALL, got {payload.get('kind')!r}")


class BackendMode(Enum):
    HTTP = "HTTP"
    SCRIPTED = "SCRIPTED"
    RULES = "RULES"


@dataclass(frozen=True)
class BackendConfig:
    """Backend selection and connection settings.

    ``model_name`` is free-form and not enforced. For HTTP mode, note that
    open models below roughly 70B parameters tend to handle combined
    conversation and function calling poorly; pick the remote model
    accordingly.
    """

    mode: BackendMode = BackendMode.RULES
    model_name: str = "gpt-4o"
    endpoint_url: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 30.0
    # Sampling temperature; pinned to 0 by default for reproducibility.
    temperature: float = 0.0
    script_path: str | None = None

    def __post_init__(self) -> None:
        if self.mode is BackendMode.HTTP and not self.endpoint_url:
            raise ValueError("HTTP mode requires endpoint_url")
        if self.mode is BackendMode.SCRIPTED and not self.script_path:
            raise ValueError("SCRIPTED mode requires script_path")


class BackendError(Exception):
    """Base error for model backends."""


class TransientBackendError(BackendError):
    """Network failure or timeout; the caller may retry."""


class ProtocolError(BackendError):
    """The remote endpoint returned a payload we cannot interpret."""


class ScriptError(BackendError):
    """Scripted replay failed (exhausted, mismatch, or unparseable script)."""


def check_call_preconditions(messages: Sequence[ChatMessage]) -> None:
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[0].role is not Role.SYSTEM:
        raise ValueError("first message must have role SYSTEM")
