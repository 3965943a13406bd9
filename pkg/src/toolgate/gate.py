"""Runtime intent gating.

One extra completion call classifies the prompt's intent; the toolset
offered to the planner is narrowed to the mapped libraries plus a sentinel
tool. Calling the sentinel reverts the session to the full toolset, at
most once per task. When classification resolves to the "ALL" marker the
full schema is offered directly, with no sentinel to expand to.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Protocol

from .backends import (
    CLASSIFY_STEP,
    SENTINEL_TOOL_NAME,
    ChatMessage,
    CompletionRequest,
    ScriptedBackend,
    Usage,
    calls_as_text,
)
from .errors import AlreadyExpanded, NotGated, ParseError
from .intents import ALL_MARKER, UNKNOWN_LABEL, IntentMap, libraries_for
from .ledger import completion_tokens as completion_cost
from .ledger import message_tokens
from .registry import ToolRegistry, ToolSchema, ToolSpec

SENTINEL_TOOL = ToolSpec(
    name=SENTINEL_TOOL_NAME,
    description=(
        "Call this tool if none of the offered tools can accomplish the "
        "request; the full toolset will be made available on the next step."
    ),
    parameters={"type": "object", "properties": {}},
)

DEFAULT_CLASSIFIER_TEMPLATE = (
    "Decide which intent category fits the user request.\n"
    "\n"
    "Known intents:\n"
    "{intents}\n"
    "\n"
    "User request:\n"
    "{query}\n"
    "\n"
    "Reply with exactly one intent id from the list, or UNKNOWN if none fits.\n"
)

_WORDS = re.compile(r"[a-z0-9]+")


@dataclass
class GateDecision:
    """Outcome of runtime intent classification for one task.

    selected_libraries holds the "ALL" marker when the decision resolves to
    the full toolset; gate_toolset resolves the marker against the registry.
    fallback_used is flipped by expand_toolset.
    """

    intent_id: str
    selected_libraries: frozenset[str]
    classification_prompt_tokens: int
    classification_completion_tokens: int
    backend_kind: str
    malformed: bool = False
    fallback_used: bool = False

    @property
    def is_all(self) -> bool:
        return self.intent_id == ALL_MARKER or ALL_MARKER in self.selected_libraries

    def to_dict(self) -> dict[str, Any]:
        return {
            "intent_id": self.intent_id,
            "selected_libraries": sorted(self.selected_libraries),
            "classification_prompt_tokens": self.classification_prompt_tokens,
            "classification_completion_tokens": self.classification_completion_tokens,
            "backend_kind": self.backend_kind,
            "malformed": self.malformed,
            "fallback_used": self.fallback_used,
        }


class ClassifierBackend(Protocol):
    """Answers a classification request with a raw label reply."""

    kind: str

    def reply(
        self,
        prompt: str,
        intent_map: IntentMap,
        request_text: str,
        *,
        task_id: str | None = None,
        model: str = "gpt-4-turbo",
        temperature: float = 0.0,
    ) -> tuple[str, Usage | None]: ...


def rule_classifier(prompt: str, intent_map: IntentMap) -> str:
    """Deterministic keyword classifier: case-insensitive word overlap
    against each intent's example queries; ties break by map order; zero
    overlap yields UNKNOWN."""
    words = set(_WORDS.findall(prompt.lower()))
    best_id = UNKNOWN_LABEL
    best_overlap = 0
    for record in intent_map.intents:
        vocabulary: set[str] = set()
        for query in record.example_queries:
            vocabulary.update(_WORDS.findall(query.lower()))
        overlap = len(words & vocabulary)
        if overlap > best_overlap:
            best_id, best_overlap = record.id, overlap
    return best_id


class RuleClassifier:
    kind = "rule"

    def reply(self, prompt, intent_map, request_text, *, task_id=None, model="gpt-4-turbo", temperature=0.0):
        return rule_classifier(prompt, intent_map), None


class ScriptedClassifier:
    """Fixed classification answers, keyed by task id or by prompt text."""

    kind = "scripted"

    def __init__(
        self,
        answers_by_task: Mapping[str, str] | None = None,
        answers_by_prompt: Mapping[str, str] | None = None,
        default: str = UNKNOWN_LABEL,
    ) -> None:
        self.answers_by_task = dict(answers_by_task or {})
        self.answers_by_prompt = dict(answers_by_prompt or {})
        self.default = default

    @classmethod
    def from_script(cls, backend: ScriptedBackend) -> "ScriptedClassifier":
        """Pull classification replies (step -1 entries) out of a script."""
        answers = {
            entry.task: entry.respond.content
            for entry in backend.entries
            if entry.step == CLASSIFY_STEP and entry.respond.content is not None
        }
        return cls(answers_by_task=answers)

    def reply(self, prompt, intent_map, request_text, *, task_id=None, model="gpt-4-turbo", temperature=0.0):
        if task_id is not None and task_id in self.answers_by_task:
            return self.answers_by_task[task_id], None
        return self.answers_by_prompt.get(prompt, self.default), None


class LLMClassifier:
    """Classification over a live completion backend (one user message,
    no tool schema attached: the classifier never sees the tools)."""

    kind = "llm"

    def __init__(self, backend) -> None:
        self.backend = backend

    def reply(self, prompt, intent_map, request_text, *, task_id=None, model="gpt-4-turbo", temperature=0.0):
        request = CompletionRequest(
            messages=(ChatMessage(role="user", content=request_text),),
            tools=None,
            temperature=temperature,
            model=model,
        )
        response = self.backend.complete(request)
        if response.terminal:
            return response.content, response.usage
        # A tool-call reply to a classification request is never a valid label.
        return calls_as_text(response.tool_calls), response.usage


def render_classification_prompt(template: str, intent_map: IntentMap, query: str) -> str:
    intents = "\n".join(f"- {r.id}: {r.description}" for r in intent_map.intents)
    return template.replace("{intents}", intents).replace("{query}", query)


def load_classifier_template(path: str | Path) -> str:
    text = Path(path).read_text(encoding="utf-8")
    for placeholder in ("{intents}", "{query}"):
        if placeholder not in text:
            raise ParseError(f"classifier prompt {path} lacks the {placeholder} placeholder")
    return text


def classify_intent(
    prompt: str,
    intent_map: IntentMap,
    backend: ClassifierBackend,
    *,
    task_id: str | None = None,
    template: str = DEFAULT_CLASSIFIER_TEMPLATE,
    model: str = "gpt-4-turbo",
    temperature: float = 0.0,
    tokenizer: str = "desk",
) -> GateDecision:
    """Classify one prompt with one extra completion call.

    The reply must be exactly one intent id or UNKNOWN. One retry is
    allowed; a still-unparsable reply fails open to the ALL sentinel with
    the malformed flag set. Token costs of every attempt are charged to the
    decision, desk-counted unless the backend reports endpoint usage and
    tokenizer="endpoint".
    """
    request_text = render_classification_prompt(template, intent_map, prompt)
    prompt_tokens = 0
    reply_tokens = 0
    raw = ""
    for _attempt in range(2):
        raw, usage = backend.reply(
            prompt,
            intent_map,
            request_text,
            task_id=task_id,
            model=model,
            temperature=temperature,
        )
        if usage is not None and tokenizer == "endpoint":
            prompt_tokens += usage.prompt_tokens
            reply_tokens += usage.completion_tokens
        else:
            prompt_tokens += message_tokens(ChatMessage(role="user", content=request_text))
            reply_tokens += completion_cost("assistant", raw)

        label = raw.strip()
        if label == UNKNOWN_LABEL:
            selected = libraries_for(intent_map, label)  # policy: ALL marker or raise
            return GateDecision(
                intent_id=ALL_MARKER,
                selected_libraries=selected,
                classification_prompt_tokens=prompt_tokens,
                classification_completion_tokens=reply_tokens,
                backend_kind=backend.kind,
            )
        record = intent_map.get(label)
        if record is not None:
            return GateDecision(
                intent_id=record.id,
                selected_libraries=record.libraries,
                classification_prompt_tokens=prompt_tokens,
                classification_completion_tokens=reply_tokens,
                backend_kind=backend.kind,
            )

    return GateDecision(
        intent_id=ALL_MARKER,
        selected_libraries=frozenset({ALL_MARKER}),
        classification_prompt_tokens=prompt_tokens,
        classification_completion_tokens=reply_tokens,
        backend_kind=backend.kind,
        malformed=True,
    )


def gate_toolset(decision: GateDecision, registry: ToolRegistry) -> ToolSchema:
    """The schema offered under a decision.

    Gated: the selected libraries' tools plus the sentinel appended last.
    ALL-sentinel decisions get the full schema with no sentinel — there is
    nothing to expand to.
    """
    if decision.is_all:
        return registry.full_schema()
    base = registry.subset_schema(decision.selected_libraries)
    return ToolSchema(tools=base.tools + (SENTINEL_TOOL,), origin=base.origin)


@dataclass
class GateSession:
    """Per-task gating state; confined to one logical worker."""

    registry: ToolRegistry
    schema: ToolSchema
    decision: GateDecision | None = None
    expanded: bool = False

    @property
    def sentinel_offered(self) -> bool:
        return SENTINEL_TOOL_NAME in self.schema.tool_names()


def expand_toolset(session: GateSession) -> ToolSchema:
    """Revert a gated session to the full toolset; allowed once per task."""
    if session.expanded:
        raise AlreadyExpanded("full toolset already enabled")
    if not session.sentinel_offered:
        raise NotGated("session is not gated; nothing to expand to")
    session.expanded = True
    session.schema = session.registry.full_schema()
    if session.decision is not None:
        session.decision.fallback_used = True
    return session.schema


def open_session(
    registry: ToolRegistry, decision: GateDecision | None
) -> GateSession:
    """Build the per-task session: gated schema under a decision, full
    schema when gating is off (decision None)."""
    schema = gate_toolset(decision, registry) if decision else registry.full_schema()
    return GateSession(registry=registry, schema=schema, decision=decision)


__all__ = [
    "SENTINEL_TOOL",
    "SENTINEL_TOOL_NAME",
    "DEFAULT_CLASSIFIER_TEMPLATE",
    "GateDecision",
    "GateSession",
    "ClassifierBackend",
    "RuleClassifier",
    "ScriptedClassifier",
    "LLMClassifier",
    "rule_classifier",
    "render_classification_prompt",
    "load_classifier_template",
    "classify_intent",
    "gate_toolset",
    "expand_toolset",
    "open_session",
]
