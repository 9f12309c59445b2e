"""Remote backend speaking the OpenAI-compatible chat-completions protocol."""

from __future__ import annotations

import os
from typing import Sequence

import httpx

from . import wire
from .base import (
    BackendConfig,
    BackendResponse,
    ChatMessage,
    ProtocolError,
    ToolDescriptor,
    TransientBackendError,
    check_call_preconditions,
)


class HttpBackend:
    """POSTs completions requests to a remote endpoint.

    The API key is read from the environment variable named in the config and
    sent as a bearer token; it is never logged or echoed in errors.
    """

    def __init__(self, config: BackendConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self._client = httpx.Client(timeout=config.timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def complete(
        self, messages: Sequence[ChatMessage], tools: Sequence[ToolDescriptor]
    ) -> BackendResponse:
        check_call_preconditions(messages)
        payload = wire.build_request(messages, tools, self.config)
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        assert self.config.endpoint_url is not None
        try:
            response = self._client.post(self.config.endpoint_url, json=payload, headers=headers)
        except httpx.TimeoutException as exc:
            raise TransientBackendError(f"backend timed out after {self.config.timeout}s") from exc
        except httpx.TransportError as exc:
            raise TransientBackendError(f"backend unreachable: {exc}") from exc
        if response.status_code >= 500:
            raise TransientBackendError(f"backend returned status {response.status_code}")
        if response.status_code >= 400:
            raise ProtocolError(f"backend rejected request with status {response.status_code}")
        try:
            body = response.json()
        except ValueError as exc:
            raise ProtocolError("backend returned non-JSON payload") from exc
        return wire.parse_response(body)
