"""Deterministic token accounting.

The desk tokenizer counts ceil(utf8_bytes / 4) so token costs reproduce
bit-exactly offline, on any platform. It makes no accuracy claim versus a
real BPE tokenizer; it exists so relative savings can be measured without
a model in the loop. Endpoint-reported usage can be recorded alongside.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

from .errors import NonPositiveBaseline

if TYPE_CHECKING:
    from .backends import ChatMessage, CompletionRequest
    from .loop import Trajectory

# Fixed per-message framing overhead, mimicking how chat endpoints bill
# role/content envelopes.
MESSAGE_OVERHEAD = 4

TokenCounter = Callable[[str], int]


def desk_count(text: str) -> int:
    """ceil(utf-8 byte length / 4); pure and platform-independent."""
    return (len(text.encode("utf-8")) + 3) // 4


def message_tokens(message: "ChatMessage", counter: TokenCounter = desk_count) -> int:
    """Cost of one chat message: overhead + role + content."""
    return MESSAGE_OVERHEAD + counter(message.role) + counter(message.content)


def request_tokens(request: "CompletionRequest", counter: TokenCounter = desk_count) -> int:
    """Total prompt cost of a completion request.

    Sum of message costs plus the serialized tool schema. Requests that
    carry no tools field at all (the classification call) pay nothing for
    a schema; a present-but-empty schema still pays for its serialization.
    """
    from .registry import serialize_schema

    total = sum(message_tokens(m, counter) for m in request.messages)
    if request.tools is not None:
        total += counter(serialize_schema(request.tools))
    return total


def completion_tokens(role: str, content: str, counter: TokenCounter = desk_count) -> int:
    """Cost of a completion, charged as the assistant message it becomes."""
    return MESSAGE_OVERHEAD + counter(role) + counter(content)


def reduction_percent(baseline: float, gated: float) -> float:
    """Percentage reduction of `gated` versus `baseline`, to one decimal."""
    if baseline <= 0:
        raise NonPositiveBaseline(f"baseline must be positive, got {baseline}")
    return round(100.0 * (baseline - gated) / baseline, 1)


@dataclass
class TokenLedger:
    """Per-task token accounting: one classification pair plus one pair per step.

    Totals are computed from the parts, so additivity holds by construction;
    `check_additivity` re-verifies it against independently summed fields.
    """

    task_id: str
    classification_prompt: int = 0
    classification_completion: int = 0
    steps: tuple[tuple[int, int], ...] = field(default_factory=tuple)
    source: str = "desk"  # "desk" | "endpoint"

    @property
    def prompt_total(self) -> int:
        return self.classification_prompt + sum(p for p, _ in self.steps)

    @property
    def completion_total(self) -> int:
        return self.classification_completion + sum(c for _, c in self.steps)

    @property
    def total(self) -> int:
        return self.prompt_total + self.completion_total

    @property
    def total_without_classification(self) -> int:
        return self.total - self.classification_prompt - self.classification_completion

    def check_additivity(self) -> None:
        parts = (
            self.classification_prompt
            + self.classification_completion
            + sum(p + c for p, c in self.steps)
        )
        if parts != self.total:
            raise AssertionError(
                f"ledger for {self.task_id!r} is not additive: {parts} != {self.total}"
            )
        counts = [self.classification_prompt, self.classification_completion]
        counts.extend(n for pair in self.steps for n in pair)
        if any(n < 0 for n in counts):
            raise AssertionError(f"ledger for {self.task_id!r} has negative counts")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "classification_prompt": self.classification_prompt,
            "classification_completion": self.classification_completion,
            "steps": [list(pair) for pair in self.steps],
            "total": self.total,
            "source": self.source,
        }


def ledger_from_trajectory(trajectory: "Trajectory", source: str = "desk") -> TokenLedger:
    """Build the per-task ledger from a finished trajectory."""
    decision = trajectory.decision
    ledger = TokenLedger(
        task_id=trajectory.task_id,
        classification_prompt=decision.classification_prompt_tokens if decision else 0,
        classification_completion=decision.classification_completion_tokens if decision else 0,
        steps=tuple((s.prompt_tokens, s.completion_tokens) for s in trajectory.steps),
        source=source,
    )
    ledger.check_additivity()
    return ledger


def mean(values: Sequence[float]) -> float:
    """Arithmetic mean over a fixed-order sequence; 0.0 for empty input."""
    if not values:
        return 0.0
    return sum(values) / len(values)
