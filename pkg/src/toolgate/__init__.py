"""toolgate: intent-gated tool selection for LLM agents.

Classify each prompt's intent with one extra completion call, offer the
planner only the mapped tool libraries plus a sentinel fallback tool, and
measure the token savings against ungated baselines with a deterministic
benchmark harness.
"""

from .backends import (
    CLASSIFY_STEP,
    SENTINEL_TOOL_NAME,
    ChatMessage,
    CompletionRequest,
    CompletionResponse,
    ScriptCall,
    ScriptEntry,
    ScriptResponse,
    ScriptedBackend,
    ToolCall,
    Usage,
    WireBackend,
    load_script,
    script_from_document,
    script_to_document,
)
from .bench import (
    AbRow,
    ConfigMetrics,
    MetricsReport,
    TaskResult,
    aggregate,
    build_report,
    emit_report,
    fixture_report,
    load_corpus,
    load_fixture_pairs,
    report_from_dict,
    run_benchmark,
    run_config,
    write_report,
)
from .errors import (
    AlreadyExpanded,
    BackendUnavailable,
    DuplicateIntent,
    DuplicateKey,
    DuplicateLibrary,
    DuplicateTask,
    DuplicateTool,
    EmptyLibrarySet,
    InvalidName,
    NonPositiveBaseline,
    NotGated,
    ParseError,
    RegistryNotSealed,
    RegistrySealed,
    ScriptMiss,
    ToolgateError,
    UnknownIntent,
    UnknownLibrary,
    UnknownTool,
)
from .gate import (
    DEFAULT_CLASSIFIER_TEMPLATE,
    SENTINEL_TOOL,
    GateDecision,
    GateSession,
    LLMClassifier,
    RuleClassifier,
    ScriptedClassifier,
    classify_intent,
    expand_toolset,
    gate_toolset,
    open_session,
    rule_classifier,
)
from .intents import (
    ALL_MARKER,
    UNKNOWN_LABEL,
    IntentMap,
    IntentRecord,
    MissingLibrary,
    intent_map_to_document,
    libraries_for,
    load_intent_map,
    load_intent_map_file,
    propose_intent_map,
    validate,
)
from .ledger import (
    TokenLedger,
    desk_count,
    ledger_from_trajectory,
    message_tokens,
    reduction_percent,
    request_tokens,
)
from .loop import (
    SCAFFOLDS,
    SessionConfig,
    StepCall,
    StepRecord,
    TaskSpec,
    Trajectory,
    check_success,
    dispatch_tool_calls,
    make_echo_handlers,
    run_task,
    scaffold_text,
)
from .registry import (
    ToolLibrary,
    ToolRegistry,
    ToolSchema,
    ToolSpec,
    canonical_json,
    load_registry,
    registry_from_document,
    registry_to_document,
    serialize_schema,
)

__version__ = "0.1.0"
