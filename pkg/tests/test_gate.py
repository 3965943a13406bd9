from __future__ import annotations

import pytest

from toolgate import (
    ALL_MARKER,
    AlreadyExpanded,
    ChatMessage,
    NotGated,
    ParseError,
    RuleClassifier,
    ScriptedClassifier,
    UnknownIntent,
    classify_intent,
    expand_toolset,
    gate_toolset,
    load_intent_map,
    message_tokens,
    open_session,
    rule_classifier,
)
from toolgate.gate import (
    DEFAULT_CLASSIFIER_TEMPLATE,
    SENTINEL_TOOL,
    SENTINEL_TOOL_NAME,
    load_classifier_template,
    render_classification_prompt,
)
from toolgate.ledger import completion_tokens


def test_classify_scripted_load_filter_plot(trio_map) -> None:
    classifier = ScriptedClassifier(
        answers_by_prompt={
            "Plot xview1 images around Tampa Bay, FL, USA": "Load→Filter→Plot"
        }
    )
    decision = classify_intent(
        "Plot xview1 images around Tampa Bay, FL, USA", trio_map, classifier
    )
    assert decision.intent_id == "Load→Filter→Plot"
    assert decision.selected_libraries == frozenset({"SQL_apis", "data_apis", "map_apis"})
    assert decision.backend_kind == "scripted"
    assert not decision.malformed
    assert not decision.fallback_used


def test_classify_unknown_resolves_to_all_under_full_toolset(trio_map) -> None:
    classifier = ScriptedClassifier(default="UNKNOWN")
    decision = classify_intent("anything", trio_map, classifier)
    assert decision.intent_id == ALL_MARKER
    assert decision.is_all
    assert not decision.malformed


def test_classify_unknown_rejected_under_reject_policy() -> None:
    reject_map = load_intent_map(
        {"default_policy": "reject", "intents": [{"id": "x", "libraries": ["a"]}]}
    )
    classifier = ScriptedClassifier(default="UNKNOWN")
    with pytest.raises(UnknownIntent):
        classify_intent("anything", reject_map, classifier)


def test_classify_malformed_reply_twice_falls_open_flagged(trio_map) -> None:
    classifier = ScriptedClassifier(default="probably mapping stuff")
    decision = classify_intent("do things", trio_map, classifier)
    assert decision.is_all
    assert decision.malformed
    # both attempts are charged
    request_text = render_classification_prompt(
        DEFAULT_CLASSIFIER_TEMPLATE, trio_map, "do things"
    )
    one_prompt = message_tokens(ChatMessage(role="user", content=request_text))
    one_reply = completion_tokens("assistant", "probably mapping stuff")
    assert decision.classification_prompt_tokens == 2 * one_prompt
    assert decision.classification_completion_tokens == 2 * one_reply


def test_classify_charges_desk_tokens_of_the_exchange(trio_map) -> None:
    prompt = "Which model to use for airplane detection?"
    classifier = ScriptedClassifier(answers_by_prompt={prompt: "Information Seeking"})
    decision = classify_intent(prompt, trio_map, classifier)
    request_text = render_classification_prompt(
        DEFAULT_CLASSIFIER_TEMPLATE, trio_map, prompt
    )
    assert decision.classification_prompt_tokens == message_tokens(
        ChatMessage(role="user", content=request_text)
    )
    assert decision.classification_completion_tokens == completion_tokens(
        "assistant", "Information Seeking"
    )


def test_classify_is_pure_for_scripted_and_rule_backends(trio_map) -> None:
    prompt = "Search Bing for cheap flights"
    for classifier in (RuleClassifier(), ScriptedClassifier(default="UNKNOWN")):
        first = classify_intent(prompt, trio_map, classifier)
        second = classify_intent(prompt, trio_map, classifier)
        assert first == second


def test_rule_classifier_word_overlap(trio_map) -> None:
    assert rule_classifier("Search Bing for cheap flights", trio_map) == "UI/Web Navigation"


def test_rule_classifier_empty_prompt_unknown(trio_map) -> None:
    assert rule_classifier("", trio_map) == "UNKNOWN"


def test_rule_classifier_tie_breaks_by_map_order() -> None:
    tie_map = load_intent_map(
        {
            "intents": [
                {"id": "first", "example_queries": ["amber stone"], "libraries": ["a"]},
                {"id": "second", "example_queries": ["quartz stone"], "libraries": ["b"]},
            ]
        }
    )
    # "stone" overlaps both at 1; earlier record wins
    assert rule_classifier("a stone", tie_map) == "first"


def test_gate_toolset_single_library_plus_sentinel(trio_map, registry6) -> None:
    classifier = ScriptedClassifier(default="Information Seeking")
    decision = classify_intent("look it up", trio_map, classifier)
    schema = gate_toolset(decision, registry6)
    names = schema.tool_names()
    assert names[-1] == SENTINEL_TOOL_NAME
    wiki_tools = registry6.get_library("wiki_apis").tools
    assert names[:-1] == tuple(t.name for t in wiki_tools)
    assert schema.origin == frozenset({"wiki_apis"})


def test_gate_toolset_all_sentinel_full_schema_without_sentinel(trio_map, registry6) -> None:
    decision = classify_intent("??", trio_map, ScriptedClassifier(default="UNKNOWN"))
    schema = gate_toolset(decision, registry6)
    assert schema == registry6.full_schema()
    assert SENTINEL_TOOL_NAME not in schema.tool_names()


def test_gate_toolset_every_library_explicitly_still_has_sentinel(registry6) -> None:
    every = load_intent_map(
        {
            "intents": [
                {"id": "everything", "libraries": list(registry6.library_names())}
            ]
        }
    )
    decision = classify_intent("x", every, ScriptedClassifier(default="everything"))
    schema = gate_toolset(decision, registry6)
    assert schema.tool_names()[:-1] == registry6.full_schema().tool_names()
    assert schema.tool_names()[-1] == SENTINEL_TOOL_NAME


def test_expand_gated_session_returns_full_schema(trio_map, registry6) -> None:
    decision = classify_intent(
        "look", trio_map, ScriptedClassifier(default="Information Seeking")
    )
    session = open_session(registry6, decision)
    assert session.sentinel_offered
    expanded = expand_toolset(session)
    assert expanded == registry6.full_schema()
    assert session.decision.fallback_used
    assert not session.sentinel_offered


def test_expand_twice_rejected(trio_map, registry6) -> None:
    decision = classify_intent(
        "look", trio_map, ScriptedClassifier(default="Information Seeking")
    )
    session = open_session(registry6, decision)
    expand_toolset(session)
    with pytest.raises(AlreadyExpanded):
        expand_toolset(session)


def test_expand_on_ungated_session_rejected(registry6) -> None:
    session = open_session(registry6, None)
    with pytest.raises(NotGated):
        expand_toolset(session)


def test_sentinel_tool_never_in_ungated_schema(registry6) -> None:
    session = open_session(registry6, None)
    assert SENTINEL_TOOL_NAME not in session.schema.tool_names()


def test_sentinel_tool_has_no_parameters() -> None:
    assert SENTINEL_TOOL.parameters == {"type": "object", "properties": {}}


def test_gated_schema_cost_bounded_by_full_plus_sentinel(trio_map, registry6) -> None:
    from toolgate import desk_count, serialize_schema

    full_cost = desk_count(serialize_schema(registry6.full_schema()))
    sentinel_cost = desk_count(serialize_schema([SENTINEL_TOOL]))
    for intent in trio_map.intents:
        decision = classify_intent(
            "q", trio_map, ScriptedClassifier(default=intent.id)
        )
        gated_cost = desk_count(serialize_schema(gate_toolset(decision, registry6)))
        assert gated_cost <= full_cost + sentinel_cost
        if intent.libraries < set(registry6.library_names()):
            assert gated_cost < full_cost + sentinel_cost


def test_template_loading_requires_placeholders(tmp_path) -> None:
    good = tmp_path / "good.txt"
    good.write_text("intents:\n{intents}\nquery: {query}\n", encoding="utf-8")
    assert "{intents}" in load_classifier_template(good)
    bad = tmp_path / "bad.txt"
    bad.write_text("no placeholders here", encoding="utf-8")
    with pytest.raises(ParseError):
        load_classifier_template(bad)


def test_classifier_does_not_see_tool_schemas(trio_map) -> None:
    captured: list = []

    class Spy:
        kind = "llm"

        def complete(self, request):
            captured.append(request)
            from toolgate import CompletionResponse, Usage

            return CompletionResponse(
                content="Information Seeking", usage=Usage(40, 4)
            )

    from toolgate import LLMClassifier

    decision = classify_intent("look up", trio_map, LLMClassifier(Spy()))
    assert decision.intent_id == "Information Seeking"
    assert len(captured) == 1
    assert captured[0].tools is None
