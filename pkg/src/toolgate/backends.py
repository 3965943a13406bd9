"""Completion backends behind one interface.

Two implementations: a wire client for chat-completions-style HTTP
endpoints, and a scripted backend that answers deterministically from a
fixture file, keyed by (task id, step index). The scripted backend is what
makes benchmarks replayable: it is a pure function of the script, the
request's task/step, and the offered schema's tool names.
"""

from __future__ import annotations

import json
import os
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .errors import BackendUnavailable, DuplicateKey, ParseError, ScriptMiss
from .ledger import completion_tokens, request_tokens
from .registry import ToolSpec, canonical_json

SENTINEL_TOOL_NAME = "request_full_toolset"

# Reserved step index for scripted classification replies.
CLASSIFY_STEP = -1

ROLES = ("system", "user", "assistant", "tool")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str
    tool_call_id: str | None = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"invalid role {self.role!r}")
        if self.tool_call_id is not None and self.role != "tool":
            raise ValueError("tool_call_id is only valid on tool messages")


@dataclass(frozen=True)
class ToolCall:
    """One tool invocation requested by the model.

    `arguments` is None when the wire payload was not valid JSON; the loop
    turns that into a tool-error result instead of crashing.
    """

    id: str
    name: str
    arguments: Mapping[str, Any] | None
    arguments_raw: str = ""


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int
    completion_tokens: int


@dataclass(frozen=True)
class CompletionRequest:
    """One chat completion request.

    `task_id` and `step` are local routing metadata for the scripted
    backend; they are never serialized on the wire.
    """

    messages: tuple[ChatMessage, ...]
    tools: tuple[ToolSpec, ...] | None = None
    temperature: float = 0.0
    model: str = "gpt-4-turbo"
    task_id: str | None = None
    step: int | None = None

    def offered_tool_names(self) -> frozenset[str]:
        return frozenset(t.name for t in self.tools) if self.tools else frozenset()


@dataclass(frozen=True)
class CompletionResponse:
    """Either tool calls or terminal content, never both."""

    content: str | None = None
    tool_calls: tuple[ToolCall, ...] = ()
    usage: Usage | None = None

    def __post_init__(self) -> None:
        if (self.content is None) == (not self.tool_calls):
            raise ValueError("response must carry tool_calls xor terminal content")

    @property
    def terminal(self) -> bool:
        return self.content is not None


def calls_as_text(calls: Sequence[ToolCall]) -> str:
    """Canonical text of a call list; the assistant content used for history
    and desk token accounting. Call ids are wire plumbing and excluded."""
    return canonical_json(
        [{"arguments": c.arguments or {}, "name": c.name} for c in calls]
    )


def _desk_usage(request: CompletionRequest, content_text: str) -> Usage:
    return Usage(
        prompt_tokens=request_tokens(request),
        completion_tokens=completion_tokens("assistant", content_text),
    )


# --- scripted backend ---------------------------------------------------------


@dataclass(frozen=True)
class ScriptCall:
    name: str
    arguments: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ScriptResponse:
    content: str | None = None
    tool_calls: tuple[ScriptCall, ...] = ()

    def __post_init__(self) -> None:
        if (self.content is None) == (not self.tool_calls):
            raise ValueError("script response must carry tool_calls xor content")


@dataclass(frozen=True)
class ScriptEntry:
    """What the model 'says' at (task, step).

    needs: tool names this response depends on; if any is missing from the
    offered schema the backend instead emits one call to the sentinel tool
    (the deterministic stand-in for prompted reversion).
    respond_narrow: optional variant used when the offered schema is gated
    (sentinel present), letting fixtures aggregate more calls per step on a
    narrow toolset.
    """

    task: str
    step: int
    respond: ScriptResponse
    needs: frozenset[str] = frozenset()
    respond_narrow: ScriptResponse | None = None


class ScriptedBackend:
    """Deterministic completion backend answering from script entries."""

    def __init__(self, entries: Sequence[ScriptEntry]) -> None:
        self._entries: dict[tuple[str, int], ScriptEntry] = {}
        for entry in entries:
            key = (entry.task, entry.step)
            if key in self._entries:
                raise DuplicateKey(f"duplicate script entry for {key}")
            self._entries[key] = entry

    @property
    def entries(self) -> tuple[ScriptEntry, ...]:
        return tuple(self._entries.values())

    def classification_reply(self, task_id: str) -> str:
        """The scripted classification label for a task (step -1 entry)."""
        entry = self._entries.get((task_id, CLASSIFY_STEP))
        if entry is None or entry.respond.content is None:
            raise ScriptMiss(f"no classification entry for task {task_id!r}")
        return entry.respond.content

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        if not request.messages:
            raise ValueError("request has no messages")
        if request.task_id is None or request.step is None:
            raise ScriptMiss("scripted backend needs task_id and step on the request")
        entry = self._entries.get((request.task_id, request.step))
        if entry is None:
            raise ScriptMiss(f"no script entry for {(request.task_id, request.step)}")

        offered = request.offered_tool_names()
        if entry.needs and not entry.needs <= offered:
            calls = (ToolCall(id="call_0", name=SENTINEL_TOOL_NAME, arguments={}),)
            return CompletionResponse(
                tool_calls=calls, usage=_desk_usage(request, calls_as_text(calls))
            )

        respond = entry.respond
        if entry.respond_narrow is not None and SENTINEL_TOOL_NAME in offered:
            respond = entry.respond_narrow

        if respond.content is not None:
            return CompletionResponse(
                content=respond.content, usage=_desk_usage(request, respond.content)
            )
        calls = tuple(
            ToolCall(id=f"call_{i}", name=c.name, arguments=dict(c.arguments))
            for i, c in enumerate(respond.tool_calls)
        )
        return CompletionResponse(
            tool_calls=calls, usage=_desk_usage(request, calls_as_text(calls))
        )


def _response_from_entry_dict(value: Mapping[str, Any], where: str) -> ScriptResponse:
    if "content" in value:
        return ScriptResponse(content=value["content"])
    if "tool_calls" in value:
        return ScriptResponse(
            tool_calls=tuple(
                ScriptCall(name=c["name"], arguments=c.get("arguments", {}))
                for c in value["tool_calls"]
            )
        )
    raise ParseError(f"{where}: respond needs 'content' or 'tool_calls'")


def script_from_document(document: Any) -> ScriptedBackend:
    """Build a scripted backend from a parsed JSON list of entries."""
    if not isinstance(document, list):
        raise ParseError("script document must be a JSON list of entries")
    entries: list[ScriptEntry] = []
    for i, raw in enumerate(document):
        if not isinstance(raw, Mapping) or "task" not in raw or "step" not in raw:
            raise ParseError(f"script entry {i}: needs 'task' and 'step'")
        where = f"script entry {i}"
        entries.append(
            ScriptEntry(
                task=raw["task"],
                step=int(raw["step"]),
                respond=_response_from_entry_dict(raw.get("respond", {}), where),
                needs=frozenset(raw.get("needs", [])),
                respond_narrow=(
                    _response_from_entry_dict(raw["respond_narrow"], where)
                    if "respond_narrow" in raw
                    else None
                ),
            )
        )
    return ScriptedBackend(entries)


def load_script(path: str | Path) -> ScriptedBackend:
    """Load a script file; pure and replayable afterwards."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot load script from {path}: {exc}") from exc
    return script_from_document(document)


def script_to_document(backend: ScriptedBackend) -> list[dict[str, Any]]:
    """Inverse of script_from_document; round-trips structurally."""
    out: list[dict[str, Any]] = []
    for entry in backend.entries:
        raw: dict[str, Any] = {"task": entry.task, "step": entry.step}
        raw["respond"] = _response_to_dict(entry.respond)
        if entry.needs:
            raw["needs"] = sorted(entry.needs)
        if entry.respond_narrow is not None:
            raw["respond_narrow"] = _response_to_dict(entry.respond_narrow)
        out.append(raw)
    return out


def _response_to_dict(respond: ScriptResponse) -> dict[str, Any]:
    if respond.content is not None:
        return {"content": respond.content}
    return {
        "tool_calls": [
            {"name": c.name, "arguments": dict(c.arguments)} for c in respond.tool_calls
        ]
    }


# --- wire client ---------------------------------------------------------------


def request_to_wire(request: CompletionRequest) -> dict[str, Any]:
    """Chat-completions request body. Local routing metadata is not sent."""
    body: dict[str, Any] = {
        "model": request.model,
        "messages": [_message_to_wire(m) for m in request.messages],
        "temperature": request.temperature,
    }
    if request.tools is not None:
        body["tools"] = [
            {"type": "function", "function": t.to_dict()} for t in request.tools
        ]
        body["tool_choice"] = "auto"
    return body


def _message_to_wire(message: ChatMessage) -> dict[str, Any]:
    wire: dict[str, Any] = {"role": message.role, "content": message.content}
    if message.tool_call_id is not None:
        wire["tool_call_id"] = message.tool_call_id
    return wire


def request_from_wire(body: Mapping[str, Any]) -> CompletionRequest:
    messages = tuple(
        ChatMessage(
            role=m["role"], content=m["content"], tool_call_id=m.get("tool_call_id")
        )
        for m in body["messages"]
    )
    tools: tuple[ToolSpec, ...] | None = None
    if "tools" in body:
        tools = tuple(
            ToolSpec(
                name=t["function"]["name"],
                description=t["function"].get("description", ""),
                parameters=t["function"].get("parameters", {}),
            )
            for t in body["tools"]
        )
    return CompletionRequest(
        messages=messages,
        tools=tools,
        temperature=body.get("temperature", 0.0),
        model=body.get("model", ""),
    )


def response_from_wire(body: Mapping[str, Any]) -> CompletionResponse:
    try:
        message = body["choices"][0]["message"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ParseError(f"malformed completion response: {exc}") from exc
    usage = None
    if "usage" in body:
        usage = Usage(
            prompt_tokens=int(body["usage"].get("prompt_tokens", 0)),
            completion_tokens=int(body["usage"].get("completion_tokens", 0)),
        )
    raw_calls = message.get("tool_calls")
    if raw_calls:
        calls = []
        for raw in raw_calls:
            arguments_raw = raw["function"].get("arguments", "{}")
            try:
                arguments = json.loads(arguments_raw)
                if not isinstance(arguments, dict):
                    arguments = None
            except json.JSONDecodeError:
                arguments = None
            calls.append(
                ToolCall(
                    id=raw.get("id", f"call_{len(calls)}"),
                    name=raw["function"]["name"],
                    arguments=arguments,
                    arguments_raw=arguments_raw,
                )
            )
        return CompletionResponse(tool_calls=tuple(calls), usage=usage)
    content = message.get("content")
    if content is None:
        raise ParseError("completion response has neither tool_calls nor content")
    return CompletionResponse(content=content, usage=usage)


def response_to_wire(response: CompletionResponse) -> dict[str, Any]:
    """Wire body for a response; used by mock endpoints and golden files."""
    message: dict[str, Any] = {"role": "assistant"}
    if response.terminal:
        message["content"] = response.content
    else:
        message["tool_calls"] = [
            {
                "id": c.id,
                "type": "function",
                "function": {
                    "name": c.name,
                    "arguments": c.arguments_raw or json.dumps(c.arguments or {}),
                },
            }
            for c in response.tool_calls
        ]
    body: dict[str, Any] = {"choices": [{"message": message}]}
    if response.usage is not None:
        body["usage"] = {
            "prompt_tokens": response.usage.prompt_tokens,
            "completion_tokens": response.usage.completion_tokens,
        }
    return body


class WireBackend:
    """HTTP client for chat-completions-style endpoints.

    Retries transient failures with exponential backoff, bounds concurrent
    in-flight requests, and reads the credential from LLM_API_KEY.
    """

    def __init__(
        self,
        endpoint: str,
        *,
        retries: int = 3,
        backoff_base: float = 0.5,
        timeout: float = 60.0,
        max_in_flight: int = 8,
        api_key_env: str = "LLM_API_KEY",
    ) -> None:
        self.endpoint = endpoint
        self.retries = retries
        self.backoff_base = backoff_base
        self.timeout = timeout
        self._gate = threading.BoundedSemaphore(max_in_flight)
        self._api_key_env = api_key_env

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        if not request.messages:
            raise ValueError("request has no messages")
        body = json.dumps(request_to_wire(request)).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self._api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error: Exception | None = None
        for attempt in range(self.retries):
            if attempt:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                with self._gate:
                    http_request = urllib.request.Request(
                        self.endpoint, data=body, headers=headers, method="POST"
                    )
                    with urllib.request.urlopen(http_request, timeout=self.timeout) as raw:
                        payload = json.loads(raw.read().decode("utf-8"))
                return response_from_wire(payload)
            except (urllib.error.URLError, urllib.error.HTTPError, TimeoutError, json.JSONDecodeError) as exc:
                last_error = exc
        raise BackendUnavailable(
            f"endpoint {self.endpoint} failed after {self.retries} attempts: {last_error}"
        )
