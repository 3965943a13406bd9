from __future__ import annotations

import math
import random

import pytest

from toolgate import (
    ChatMessage,
    CompletionRequest,
    NonPositiveBaseline,
    TokenLedger,
    desk_count,
    message_tokens,
    reduction_percent,
    request_tokens,
)

from .conftest import read_data


def test_desk_count_matches_published_fixture_set() -> None:
    cases = read_data("desk_token_cases.json")
    assert len(cases) >= 20
    for case in cases:
        assert len(case["text"].encode("utf-8")) == case["bytes"]
        assert desk_count(case["text"]) == case["tokens"], case


def test_desk_count_boundaries() -> None:
    assert desk_count("") == 0
    assert desk_count("abcd") == 1
    assert desk_count("abcde") == 2


def test_desk_count_equals_ceiling_rule_on_random_strings() -> None:
    rng = random.Random(7)
    alphabet = "abcdef 0123456789é日🙂"
    for _ in range(300):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 40)))
        assert desk_count(text) == math.ceil(len(text.encode("utf-8")) / 4)


def test_desk_count_subadditivity_bounds() -> None:
    rng = random.Random(11)
    alphabet = "xyzé🙂 "
    for _ in range(200):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 20)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 20)))
        joined = desk_count(a + b)
        split = desk_count(a) + desk_count(b)
        assert joined <= split <= joined + 1


def test_message_tokens_empty_user_content() -> None:
    assert message_tokens(ChatMessage(role="user", content="")) == 5


def test_message_tokens_system_forty_bytes() -> None:
    assert message_tokens(ChatMessage(role="system", content="x" * 40)) == 16


def test_message_tokens_additive_over_messages() -> None:
    one = ChatMessage(role="user", content="hello there")
    two = ChatMessage(role="assistant", content="general reply")
    request = CompletionRequest(messages=(one, two), tools=None)
    assert request_tokens(request) == message_tokens(one) + message_tokens(two)


def test_request_tokens_empty_schema_plus_five_token_message() -> None:
    # one 5-token message (empty user content) + {"tools":[]} = 3
    request = CompletionRequest(
        messages=(ChatMessage(role="user", content=""),), tools=()
    )
    assert request_tokens(request) == 5 + 3


def test_request_tokens_monotone_in_schema_bytes(synth_registry) -> None:
    messages = (ChatMessage(role="user", content="do the thing"),)
    gated = CompletionRequest(
        messages=messages, tools=synth_registry.subset_schema(["wiki_apis"]).tools
    )
    full = CompletionRequest(messages=messages, tools=synth_registry.full_schema().tools)
    assert request_tokens(gated) < request_tokens(full)


def test_request_tokens_deterministic(synth_registry) -> None:
    request = CompletionRequest(
        messages=(ChatMessage(role="user", content="again"),),
        tools=synth_registry.full_schema().tools,
    )
    assert request_tokens(request) == request_tokens(request)


def test_reduction_percent_recorded_pairs() -> None:
    assert reduction_percent(25.8, 19.45) == 24.6
    assert reduction_percent(23.6, 18.48) == 21.7
    assert reduction_percent(26.7, 20.38) == 23.7
    assert reduction_percent(32.5, 25.14) == 22.6


def test_reduction_percent_identity_and_errors() -> None:
    assert reduction_percent(10.0, 10.0) == 0.0
    with pytest.raises(NonPositiveBaseline):
        reduction_percent(0.0, 1.0)
    with pytest.raises(NonPositiveBaseline):
        reduction_percent(-5.0, 1.0)


def test_reduction_percent_scale_invariant() -> None:
    rng = random.Random(3)
    for _ in range(100):
        baseline = rng.uniform(1.0, 1e6)
        gated = rng.uniform(0.0, baseline)
        k = rng.uniform(0.001, 1000.0)
        assert reduction_percent(baseline, gated) == reduction_percent(
            baseline * k, gated * k
        )


def test_ledger_totals_equal_sum_of_parts() -> None:
    ledger = TokenLedger(
        task_id="t1",
        classification_prompt=12,
        classification_completion=3,
        steps=((100, 10), (120, 8)),
    )
    assert ledger.prompt_total == 232
    assert ledger.completion_total == 21
    assert ledger.total == 253
    assert ledger.total_without_classification == 238
    ledger.check_additivity()
