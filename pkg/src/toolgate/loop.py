"""The compositional agent loop.

Build messages under a scaffold, call the backend, dispatch however many
tool calls one step carries, append results, and stop on a terminal
answer, budget exhaustion, or an unrecoverable backend error. Gating only
changes which schema is offered; the loop mechanics are shared by every
scaffold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

from .backends import (
    SENTINEL_TOOL_NAME,
    ChatMessage,
    CompletionRequest,
    ToolCall,
    calls_as_text,
)
from .errors import AlreadyExpanded, BackendUnavailable, NotGated, ParseError
from .gate import (
    DEFAULT_CLASSIFIER_TEMPLATE,
    ClassifierBackend,
    GateDecision,
    GateSession,
    classify_intent,
    expand_toolset,
    open_session,
)
from .intents import IntentMap
from .ledger import completion_tokens as completion_cost
from .ledger import ledger_from_trajectory, request_tokens
from .registry import ToolRegistry

OUTCOME_SUCCESS = "success"
OUTCOME_FAILURE = "failure"
OUTCOME_BUDGET = "budget-exceeded"

SCAFFOLD_BASES = {
    "cot": (
        "You are a tool-using assistant. Break the request into steps, call "
        "the tools needed for each step, and finish with a final answer."
    ),
    "react": (
        "You are a tool-using assistant. Work in a thought-action loop: state "
        "a brief thought, act by calling tools, observe the results, and "
        "finish with a final answer."
    ),
}

SCAFFOLDS = ("cot-zero", "cot-few", "react-zero", "react-few")

DEFAULT_EXEMPLARS = (
    "Worked examples:\n"
    "request: count the records in the area -> call the query tool, then "
    "answer with the count.\n"
    "request: show the latest page -> call the fetch tool and the render "
    "tool in one step, then answer with a short summary.\n"
)

SENTINEL_OK_RESULT = "full toolset enabled"

ToolHandler = Callable[[Mapping[str, Any]], str]


def scaffold_text(scaffold: str, exemplars_text: str | None = None) -> str:
    """System prompt for a scaffold; few-shot variants append the exemplar
    block, which is charged to prompt tokens like any other text."""
    if scaffold not in SCAFFOLDS:
        raise ParseError(f"unknown scaffold {scaffold!r}; choose one of {SCAFFOLDS}")
    base, variant = scaffold.rsplit("-", 1)
    text = SCAFFOLD_BASES[base]
    if variant == "few":
        text = text + "\n\n" + (exemplars_text or DEFAULT_EXEMPLARS)
    return text


@dataclass(frozen=True)
class TaskSpec:
    """One benchmark task: the prompt plus ground truth for success checks."""

    id: str
    prompt: str
    intent_truth: str | None = None
    required_tools: frozenset[str] = frozenset()
    expected_answer: str | None = None


@dataclass(frozen=True)
class SessionConfig:
    scaffold: str = "cot-zero"
    gating: bool = True
    max_steps: int = 10
    temperature: float = 0.0
    model: str = "gpt-4-turbo"
    exemplars_text: str | None = None
    tokenizer: str = "desk"  # "desk" | "endpoint"
    classifier_template: str = DEFAULT_CLASSIFIER_TEMPLATE

    def __post_init__(self) -> None:
        if self.scaffold not in SCAFFOLDS:
            raise ParseError(f"unknown scaffold {self.scaffold!r}")
        if self.max_steps < 1:
            raise ParseError("max_steps must be >= 1")
        if self.tokenizer not in ("desk", "endpoint"):
            raise ParseError(f"unknown tokenizer {self.tokenizer!r}")

    @property
    def name(self) -> str:
        return f"{self.scaffold}:{'gated' if self.gating else 'ungated'}"


@dataclass(frozen=True)
class StepCall:
    name: str
    arguments: Mapping[str, Any] | None
    result: str
    error: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "arguments": dict(self.arguments) if self.arguments is not None else None,
            "result": self.result,
            "error": self.error,
        }


@dataclass(frozen=True)
class StepRecord:
    """One GPT request: its token cost and the tool calls it produced."""

    index: int
    offered_schema_origin: tuple[str, ...]
    prompt_tokens: int
    completion_tokens: int
    tool_calls: tuple[StepCall, ...]
    terminal: bool
    answer: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "offered_schema_origin": list(self.offered_schema_origin),
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "tool_calls": [c.to_dict() for c in self.tool_calls],
            "terminal": self.terminal,
            "answer": self.answer,
        }


@dataclass(frozen=True)
class Trajectory:
    task_id: str
    decision: GateDecision | None
    steps: tuple[StepRecord, ...]
    outcome: str
    failure_reason: str | None = None

    def executed_tool_names(self) -> frozenset[str]:
        """Names of tools that ran without error; the sentinel is control
        flow, not a tool execution."""
        return frozenset(
            call.name
            for step in self.steps
            for call in step.tool_calls
            if not call.error and call.name != SENTINEL_TOOL_NAME
        )

    def total_tool_calls(self) -> int:
        return sum(len(step.tool_calls) for step in self.steps)

    def sentinel_calls(self) -> int:
        return sum(
            1
            for step in self.steps
            for call in step.tool_calls
            if call.name == SENTINEL_TOOL_NAME
        )

    @property
    def terminal_answer(self) -> str:
        return self.steps[-1].answer if self.steps and self.steps[-1].terminal else ""

    def to_dict(self, include_decision: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "task_id": self.task_id,
            "steps": [s.to_dict() for s in self.steps],
            "outcome": self.outcome,
            "failure_reason": self.failure_reason,
        }
        if include_decision:
            out["decision"] = self.decision.to_dict() if self.decision else None
        return out


def make_echo_handlers(registry: ToolRegistry) -> dict[str, ToolHandler]:
    """Side-effect-free handlers: every registered tool answers "<name>-ok"."""
    return {
        name: (lambda arguments, name=name: f"{name}-ok")
        for library in registry.library_names()
        for name in (t.name for t in registry.get_library(library).tools)
    }


def dispatch_tool_calls(
    calls: Sequence[ToolCall],
    handlers: Mapping[str, ToolHandler],
    *,
    session: GateSession | None = None,
    offered: frozenset[str] | None = None,
) -> list[StepCall]:
    """Route each call to its handler; results keep call order.

    Nothing escapes: unavailable tools, malformed arguments, missing
    handlers, and handler exceptions all become tool-error results. Only
    the sentinel expands the toolset; any other unoffered tool is refused.
    """
    results: list[StepCall] = []
    for call in calls:
        if call.name == SENTINEL_TOOL_NAME:
            results.append(_expand_result(call, session))
            continue
        if offered is not None and call.name not in offered:
            results.append(
                StepCall(call.name, call.arguments, f"tool-error: tool not available: {call.name}", error=True)
            )
            continue
        if call.arguments is None:
            results.append(
                StepCall(call.name, None, f"tool-error: malformed arguments for {call.name}", error=True)
            )
            continue
        handler = handlers.get(call.name)
        if handler is None:
            results.append(
                StepCall(call.name, call.arguments, f"tool-error: no handler for {call.name}", error=True)
            )
            continue
        try:
            results.append(StepCall(call.name, call.arguments, str(handler(call.arguments))))
        except Exception as exc:
            results.append(
                StepCall(call.name, call.arguments, f"tool-error: {exc}", error=True)
            )
    return results


def _expand_result(call: ToolCall, session: GateSession | None) -> StepCall:
    if session is None:
        return StepCall(call.name, call.arguments, "tool-error: tool not available: " + call.name, error=True)
    try:
        expand_toolset(session)
        return StepCall(call.name, call.arguments, SENTINEL_OK_RESULT)
    except AlreadyExpanded:
        return StepCall(call.name, call.arguments, "tool-error: full toolset already enabled", error=True)
    except NotGated:
        return StepCall(call.name, call.arguments, f"tool-error: tool not available: {call.name}", error=True)


def run_task(
    task: TaskSpec,
    config: SessionConfig,
    *,
    registry: ToolRegistry,
    backend,
    intent_map: IntentMap | None = None,
    classifier: ClassifierBackend | None = None,
    handlers: Mapping[str, ToolHandler] | None = None,
) -> Trajectory:
    """Execute one task end to end and return its trajectory.

    With gating on, the decision comes first (one classification call),
    then steps run over the gated schema; the sentinel path swaps in the
    full schema for every remaining step, at most once. With gating off,
    classification is skipped entirely and the full schema is offered.
    """
    decision: GateDecision | None = None
    if config.gating:
        if intent_map is None or classifier is None:
            raise ParseError("gated runs need an intent map and a classifier")
        decision = classify_intent(
            task.prompt,
            intent_map,
            classifier,
            task_id=task.id,
            template=config.classifier_template,
            model=config.model,
            temperature=config.temperature,
            tokenizer=config.tokenizer,
        )
    session = open_session(registry, decision)
    if handlers is None:
        handlers = make_echo_handlers(registry)

    messages: list[ChatMessage] = [
        ChatMessage(role="system", content=scaffold_text(config.scaffold, config.exemplars_text)),
        ChatMessage(role="user", content=task.prompt),
    ]
    steps: list[StepRecord] = []
    outcome = OUTCOME_BUDGET
    failure_reason: str | None = None
    script_cursor = 0

    for index in range(config.max_steps):
        schema = session.schema
        offered = frozenset(schema.tool_names())
        request = CompletionRequest(
            messages=tuple(messages),
            tools=schema.tools,
            temperature=config.temperature,
            model=config.model,
            task_id=task.id,
            step=script_cursor,
        )
        try:
            response = backend.complete(request)
        except BackendUnavailable as exc:
            outcome = OUTCOME_FAILURE
            failure_reason = str(exc)
            break

        origin = tuple(sorted(schema.origin))
        if response.terminal:
            prompt_tokens, completion_tokens = _step_tokens(request, response.content, response, config)
            steps.append(
                StepRecord(
                    index=index,
                    offered_schema_origin=origin,
                    prompt_tokens=prompt_tokens,
                    completion_tokens=completion_tokens,
                    tool_calls=(),
                    terminal=True,
                    answer=response.content,
                )
            )
            outcome = OUTCOME_SUCCESS
            break

        calls = response.tool_calls
        content_text = calls_as_text(calls)
        prompt_tokens, completion_tokens = _step_tokens(request, content_text, response, config)
        dispatched = dispatch_tool_calls(calls, handlers, session=session, offered=offered)
        steps.append(
            StepRecord(
                index=index,
                offered_schema_origin=origin,
                prompt_tokens=prompt_tokens,
                completion_tokens=completion_tokens,
                tool_calls=tuple(dispatched),
                terminal=False,
            )
        )
        messages.append(ChatMessage(role="assistant", content=content_text))
        for call, record in zip(calls, dispatched):
            messages.append(ChatMessage(role="tool", content=record.result, tool_call_id=call.id))

        # A lone sentinel call is reversion, not plan progress: the next
        # request replays the same script step against the full schema.
        if not (len(calls) == 1 and calls[0].name == SENTINEL_TOOL_NAME):
            script_cursor += 1

    trajectory = Trajectory(
        task_id=task.id,
        decision=decision,
        steps=tuple(steps),
        outcome=outcome,
        failure_reason=failure_reason,
    )
    # Additivity is checked on every run: totals must equal the sum of
    # the classification pair and the per-step pairs.
    ledger_from_trajectory(trajectory, source=config.tokenizer)
    return trajectory


def _step_tokens(request: CompletionRequest, content_text: str, response, config: SessionConfig) -> tuple[int, int]:
    if config.tokenizer == "endpoint" and response.usage is not None:
        return response.usage.prompt_tokens, response.usage.completion_tokens
    return request_tokens(request), completion_cost("assistant", content_text)


def check_success(trajectory: Trajectory, task: TaskSpec) -> bool:
    """Success: terminal answer reached, every required tool executed
    without error, and the expected answer (when given) appears in the
    terminal text."""
    if trajectory.outcome != OUTCOME_SUCCESS:
        return False
    if not task.required_tools <= trajectory.executed_tool_names():
        return False
    if task.expected_answer is not None and task.expected_answer not in trajectory.terminal_answer:
        return False
    return True
