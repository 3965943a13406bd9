"""The A/B benchmark harness.

Runs every (task, config) pair over a scripted or wire backend, aggregates
per-config metrics, pairs gated/ungated configs per scaffold into
reduction rows, and emits reports as json, csv, or a markdown table. A
fixture mode replays recorded tokens-per-task totals through the same
metrics pipeline without executing anything.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from .errors import DuplicateTask, ParseError, UnknownTool
from .gate import ClassifierBackend
from .intents import IntentMap
from .ledger import TokenLedger, ledger_from_trajectory, mean, reduction_percent
from .loop import (
    SessionConfig,
    TaskSpec,
    ToolHandler,
    Trajectory,
    check_success,
    run_task,
)
from .registry import ToolRegistry

CSV_HEADER = "config,tasks,success_rate,tokens_per_task,steps_per_task,tool_calls_per_step,fallback_rate"


def load_corpus(path: str | Path, registry: ToolRegistry | None = None) -> list[TaskSpec]:
    """Load and validate a corpus file: unique ids, resolvable tools."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot load corpus from {path}: {exc}") from exc
    return corpus_from_document(document, registry)


def corpus_from_document(
    document: Any, registry: ToolRegistry | None = None
) -> list[TaskSpec]:
    if not isinstance(document, list):
        raise ParseError("corpus document must be a JSON list of tasks")
    tasks: list[TaskSpec] = []
    seen: set[str] = set()
    for raw in document:
        if not isinstance(raw, Mapping) or "id" not in raw or "prompt" not in raw:
            raise ParseError("each task needs 'id' and 'prompt'")
        task_id = raw["id"]
        if task_id in seen:
            raise DuplicateTask(f"task {task_id!r} appears twice")
        seen.add(task_id)
        required = frozenset(raw.get("required_tools", []))
        if registry is not None:
            for name in sorted(required):
                if not registry.has_tool(name):
                    raise UnknownTool(f"task {task_id!r} requires unknown tool {name!r}")
        tasks.append(
            TaskSpec(
                id=task_id,
                prompt=raw["prompt"],
                intent_truth=raw.get("intent_truth"),
                required_tools=required,
                expected_answer=raw.get("expected_answer"),
            )
        )
    return tasks


@dataclass(frozen=True)
class TaskResult:
    trajectory: Trajectory
    ledger: TokenLedger
    success: bool


@dataclass(frozen=True)
class ConfigMetrics:
    """Aggregates for one (scaffold, gating) configuration."""

    config: str
    tasks: int
    success_rate: float
    tokens_per_task: float
    tokens_per_task_successful: float
    tokens_per_task_no_classification: float
    steps_per_task: float
    tool_calls_per_step: float
    fallback_rate: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "tasks": self.tasks,
            "success_rate": self.success_rate,
            "tokens_per_task": self.tokens_per_task,
            "tokens_per_task_successful": self.tokens_per_task_successful,
            "tokens_per_task_no_classification": self.tokens_per_task_no_classification,
            "steps_per_task": self.steps_per_task,
            "tool_calls_per_step": self.tool_calls_per_step,
            "fallback_rate": self.fallback_rate,
        }


@dataclass(frozen=True)
class AbRow:
    """One gated-vs-ungated pairing for a scaffold."""

    scaffold: str
    baseline_tokens_per_task: float
    gated_tokens_per_task: float
    reduction_percent: float
    success_rate_delta: float
    baseline_success_rate: float | None = None
    gated_success_rate: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "scaffold": self.scaffold,
            "baseline_tokens_per_task": self.baseline_tokens_per_task,
            "gated_tokens_per_task": self.gated_tokens_per_task,
            "reduction_percent": self.reduction_percent,
            "success_rate_delta": self.success_rate_delta,
            "baseline_success_rate": self.baseline_success_rate,
            "gated_success_rate": self.gated_success_rate,
        }


@dataclass(frozen=True)
class MetricsReport:
    configs: tuple[ConfigMetrics, ...]
    ab: tuple[AbRow, ...]
    max_reduction_percent: float | None
    source: str = "desk"

    def to_dict(self) -> dict[str, Any]:
        return {
            "configs": [c.to_dict() for c in self.configs],
            "ab": [row.to_dict() for row in self.ab],
            "max_reduction_percent": self.max_reduction_percent,
            "source": self.source,
        }


def report_from_dict(document: Mapping[str, Any]) -> MetricsReport:
    return MetricsReport(
        configs=tuple(ConfigMetrics(**c) for c in document.get("configs", [])),
        ab=tuple(AbRow(**row) for row in document.get("ab", [])),
        max_reduction_percent=document.get("max_reduction_percent"),
        source=document.get("source", "desk"),
    )


def run_config(
    corpus: Sequence[TaskSpec],
    config: SessionConfig,
    *,
    registry: ToolRegistry,
    backend,
    intent_map: IntentMap | None = None,
    classifier: ClassifierBackend | None = None,
    handlers: Mapping[str, ToolHandler] | None = None,
    workers: int = 1,
) -> list[TaskResult]:
    """Run every task under one config; results sorted by task id so the
    aggregation order (and therefore the report bytes) never depends on
    worker scheduling."""

    def one(task: TaskSpec) -> tuple[str, TaskResult]:
        trajectory = run_task(
            task,
            config,
            registry=registry,
            backend=backend,
            intent_map=intent_map,
            classifier=classifier,
            handlers=handlers,
        )
        ledger = ledger_from_trajectory(trajectory, source=config.tokenizer)
        return task.id, TaskResult(trajectory, ledger, check_success(trajectory, task))

    if workers <= 1:
        keyed = [one(task) for task in corpus]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            keyed = list(pool.map(one, corpus))
    keyed.sort(key=lambda pair: pair[0])
    return [result for _, result in keyed]


def aggregate(config_name: str, results: Sequence[TaskResult]) -> ConfigMetrics:
    totals = [float(r.ledger.total) for r in results]
    successful = [float(r.ledger.total) for r in results if r.success]
    step_counts = [len(r.trajectory.steps) for r in results]
    call_count = sum(r.trajectory.total_tool_calls() for r in results)
    step_count = sum(step_counts)
    fallbacks = sum(
        1
        for r in results
        if r.trajectory.decision is not None and r.trajectory.decision.fallback_used
    )
    n = len(results)
    return ConfigMetrics(
        config=config_name,
        tasks=n,
        success_rate=100.0 * sum(r.success for r in results) / n if n else 0.0,
        tokens_per_task=mean(totals),
        tokens_per_task_successful=mean(successful),
        tokens_per_task_no_classification=mean(
            [float(r.ledger.total_without_classification) for r in results]
        ),
        steps_per_task=mean([float(c) for c in step_counts]),
        tool_calls_per_step=call_count / step_count if step_count else 0.0,
        fallback_rate=100.0 * fallbacks / n if n else 0.0,
    )


def ab_rows(metrics: Sequence[ConfigMetrics]) -> list[AbRow]:
    """Pair gated/ungated metrics per scaffold, in first-appearance order."""
    by_config = {m.config: m for m in metrics}
    rows: list[AbRow] = []
    seen: set[str] = set()
    for m in metrics:
        scaffold = m.config.split(":", 1)[0]
        if scaffold in seen:
            continue
        seen.add(scaffold)
        baseline = by_config.get(f"{scaffold}:ungated")
        gated = by_config.get(f"{scaffold}:gated")
        if baseline is None or gated is None:
            continue
        rows.append(
            AbRow(
                scaffold=scaffold,
                baseline_tokens_per_task=baseline.tokens_per_task,
                gated_tokens_per_task=gated.tokens_per_task,
                reduction_percent=reduction_percent(
                    baseline.tokens_per_task, gated.tokens_per_task
                ),
                success_rate_delta=round(gated.success_rate - baseline.success_rate, 1),
                baseline_success_rate=baseline.success_rate,
                gated_success_rate=gated.success_rate,
            )
        )
    return rows


def build_report(metrics: Sequence[ConfigMetrics], source: str = "desk") -> MetricsReport:
    rows = ab_rows(metrics)
    return MetricsReport(
        configs=tuple(metrics),
        ab=tuple(rows),
        max_reduction_percent=max((r.reduction_percent for r in rows), default=None),
        source=source,
    )


def run_benchmark(
    corpus: Sequence[TaskSpec],
    configs: Sequence[SessionConfig],
    *,
    registry: ToolRegistry,
    backend,
    intent_map: IntentMap | None = None,
    classifier: ClassifierBackend | None = None,
    handlers: Mapping[str, ToolHandler] | None = None,
    workers: int = 1,
) -> MetricsReport:
    """Execute every (task, config) pair and build the metrics report.

    Deterministic under the scripted backend regardless of worker count.
    Task-level failures are data; only configuration errors abort.
    """
    if any(c.gating for c in configs) and (intent_map is None or classifier is None):
        raise ParseError("gated configs need an intent map and a classifier")
    metrics = [
        aggregate(
            config.name,
            run_config(
                corpus,
                config,
                registry=registry,
                backend=backend,
                intent_map=intent_map,
                classifier=classifier,
                handlers=handlers,
                workers=workers,
            ),
        )
        for config in configs
    ]
    source = "endpoint" if any(c.tokenizer == "endpoint" for c in configs) else "desk"
    return build_report(metrics, source=source)


# --- fixture mode -------------------------------------------------------------


def load_fixture_pairs(path: str | Path) -> list[dict[str, Any]]:
    """Recorded (scaffold, baseline, gated) tokens-per-task totals."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot load fixture pairs from {path}: {exc}") from exc
    if not isinstance(document, list):
        raise ParseError("fixture document must be a JSON list")
    for row in document:
        for key in ("scaffold", "baseline_tokens_per_task", "gated_tokens_per_task"):
            if key not in row:
                raise ParseError(f"fixture row missing {key!r}: {row}")
    return document


def fixture_report(pairs: Sequence[Mapping[str, Any]]) -> MetricsReport:
    """Run recorded totals through the reduction pipeline, no execution."""
    rows = [
        AbRow(
            scaffold=row["scaffold"],
            baseline_tokens_per_task=float(row["baseline_tokens_per_task"]),
            gated_tokens_per_task=float(row["gated_tokens_per_task"]),
            reduction_percent=reduction_percent(
                float(row["baseline_tokens_per_task"]),
                float(row["gated_tokens_per_task"]),
            ),
            success_rate_delta=0.0,
        )
        for row in pairs
    ]
    return MetricsReport(
        configs=(),
        ab=tuple(rows),
        max_reduction_percent=max((r.reduction_percent for r in rows), default=None),
        source="recorded",
    )


# --- emitters -----------------------------------------------------------------


def emit_report(report: MetricsReport, format: str = "json") -> str:
    if format == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if format == "csv":
        return _emit_csv(report)
    if format == "markdown-table":
        return _emit_markdown(report)
    raise ParseError(f"unknown report format {format!r}")


def write_report(report: MetricsReport, path: str | Path, format: str = "json") -> None:
    Path(path).write_text(emit_report(report, format), encoding="utf-8")


def _emit_csv(report: MetricsReport) -> str:
    lines = [CSV_HEADER]
    for m in report.configs:
        lines.append(
            f"{m.config},{m.tasks},{m.success_rate:.1f},{m.tokens_per_task:.4f},"
            f"{m.steps_per_task:.4f},{m.tool_calls_per_step:.4f},{m.fallback_rate:.1f}"
        )
    return "\n".join(lines) + "\n"


def _fmt_tokens(value: float) -> str:
    return f"{value:g}"


def _emit_markdown(report: MetricsReport) -> str:
    lines = [
        "| configuration | success rate | tokens/task | reduction |",
        "| --- | --- | --- | --- |",
    ]
    for row in report.ab:
        baseline_success = (
            f"{row.baseline_success_rate:.1f}%" if row.baseline_success_rate is not None else "-"
        )
        gated_success = (
            f"{row.gated_success_rate:.1f}%" if row.gated_success_rate is not None else "-"
        )
        lines.append(
            f"| {row.scaffold} | {baseline_success} | "
            f"{_fmt_tokens(row.baseline_tokens_per_task)} | - |"
        )
        lines.append(
            f"| {row.scaffold} + gated | {gated_success} | "
            f"{_fmt_tokens(row.gated_tokens_per_task)} | {row.reduction_percent:.1f}% |"
        )
    if report.max_reduction_percent is not None:
        lines.append(f"| max reduction | - | - | {report.max_reduction_percent:.1f}% |")
    if not report.ab and report.configs:
        lines = [
            "| configuration | tasks | success rate | tokens/task | fallback rate |",
            "| --- | --- | --- | --- | --- |",
        ]
        for m in report.configs:
            lines.append(
                f"| {m.config} | {m.tasks} | {m.success_rate:.1f}% | "
                f"{_fmt_tokens(m.tokens_per_task)} | {m.fallback_rate:.1f}% |"
            )
    return "\n".join(lines) + "\n"
