"""Chat-completions wire format: build and parse OpenAI-compatible payloads.

Build and parse are exact inverses for the message and tool shapes we emit,
so wire-format consistency is testable without a network.
"""

from __future__ import annotations

import json
from typing import Any, Sequence

from ..schemaguard import ParamSchema, ToolCallEnvelope
from .base import (
    BackendConfig,
    BackendResponse,
    ChatMessage,
    ProtocolError,
    ResponseKind,
    Role,
    ToolDescriptor,
)


def message_to_wire(message: ChatMessage) -> dict[str, Any]:
    if message.role is Role.TOOL:
        return {
            "role": "tool",
            "tool_call_id": message.tool_call_id,
            "content": message.content,
        }
    out: dict[str, Any] = {"role": message.role.value, "content": message.content}
    if message.tool_call is not None:
        out["tool_calls"] = [
            {
                "id": message.tool_call.call_id,
                "type": "function",
                "function": {
                    "name": message.tool_call.tool_name,
                    "arguments": json.dumps(message.tool_call.arguments, sort_keys=True),
                },
            }
        ]
    return out


def message_from_wire(payload: dict[str, Any]) -> ChatMessage:
    role = Role(payload["role"])
    tool_call = None
    if payload.get("tool_calls"):
        call = payload["tool_calls"][0]
        tool_call = ToolCallEnvelope(
            tool_name=call["function"]["name"],
            arguments=json.loads(call["function"]["arguments"]),
            call_id=call.get("id", ""),
        )
    return ChatMessage(
        role=role,
        content=payload.get("content") or "",
        tool_call_id=payload.get("tool_call_id"),
        tool_call=tool_call,
    )


def tool_to_wire(tool: ToolDescriptor) -> dict[str, Any]:
    properties = {p.name: p.to_json_schema() for p in tool.parameters}
    required = [p.name for p in tool.parameters if p.required]
    return {
        "type": "function",
        "function": {
            "name": tool.name,
            "description": tool.description,
            "parameters": {
                "type": "object",
                "properties": properties,
                "required": required,
            },
        },
    }


def tool_from_wire(payload: dict[str, Any]) -> ToolDescriptor:
    fn = payload["function"]
    schema = fn.get("parameters", {})
    required = set(schema.get("required", []))
    params = tuple(
        ParamSchema.from_json_schema(name, fragment, required=name in required)
        for name, fragment in schema.get("properties", {}).items()
    )
    return ToolDescriptor(name=fn["name"], description=fn.get("description", ""), parameters=params)


def build_request(
    messages: Sequence[ChatMessage],
    tools: Sequence[ToolDescriptor],
    config: BackendConfig,
) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "model": config.model_name,
        "temperature": config.temperature,
        "messages": [message_to_wire(m) for m in messages],
    }
    if tools:
        payload["tools"] = [tool_to_wire(t) for t in tools]
    return payload


def parse_request(payload: dict[str, Any]) -> tuple[list[ChatMessage], list[ToolDescriptor]]:
    messages = [message_from_wire(m) for m in payload.get("messages", [])]
    tools = [tool_from_wire(t) for t in payload.get("tools", [])]
    return messages, tools


def parse_response(payload: dict[str, Any]) -> BackendResponse:
    try:
        message = payload["choices"][0]["message"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"malformed completion payload: {exc}") from exc
    calls = message.get("tool_calls")
    if calls:
        try:
            call = calls[0]
            arguments = json.loads(call["function"]["arguments"])
            if not isinstance(arguments, dict):
                raise ProtocolError("tool-call arguments must be a JSON object")
            envelope = ToolCallEnvelope(
                tool_name=call["function"]["name"],
                arguments=arguments,
                call_id=call.get("id", ""),
            )
        except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"malformed tool call in response: {exc}") from exc
        return BackendResponse.from_tool_call(envelope)
    content = message.get("content")
    if content is None:
        raise ProtocolError("completion has neither content nor tool calls")
    return BackendResponse.from_text(content)


def build_response(response: BackendResponse) -> dict[str, Any]:
    """Shape a BackendResponse like a remote completion (used by test doubles)."""
    if response.kind is ResponseKind.TEXT:
        message: dict[str, Any] = {"role": "assistant", "content": response.text}
    else:
        assert response.tool_call is not None
        message = {
            "role": "assistant",
            "content": None,
            "tool_calls": [
                {
                    "id": response.tool_call.call_id,
                    "type": "function",
                    "function": {
                        "name": response.tool_call.tool_name,
                        "arguments": json.dumps(response.tool_call.arguments, sort_keys=True),
                    },
                }
            ],
        }
    return {"choices": [{"index": 0, "message": message, "finish_reason": "stop"}]}
