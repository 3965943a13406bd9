from __future__ import annotations

import random

import pytest

from toolgate import (
    DuplicateLibrary,
    DuplicateTool,
    InvalidName,
    RegistryNotSealed,
    RegistrySealed,
    ToolRegistry,
    ToolSpec,
    UnknownLibrary,
    desk_count,
    registry_from_document,
    registry_to_document,
    serialize_schema,
)

from .conftest import small_registry


def test_register_single_library_single_tool() -> None:
    registry = ToolRegistry()
    registry.register_library(
        "map_apis", "map rendering", [ToolSpec(name="plot_images", description="plot")]
    )
    assert registry.library_names() == ("map_apis",)
    assert len(registry.get_library("map_apis").tools) == 1


def test_register_empty_library_gives_empty_subset() -> None:
    registry = ToolRegistry().register_library("empty_lib", "nothing", []).seal()
    assert registry.subset_schema(["empty_lib"]).tools == ()


def test_register_duplicate_library_rejected() -> None:
    registry = ToolRegistry()
    registry.register_library("map_apis", "", [])
    with pytest.raises(DuplicateLibrary):
        registry.register_library("map_apis", "", [])


def test_register_duplicate_tool_across_libraries_rejected() -> None:
    registry = ToolRegistry()
    registry.register_library("a", "", [ToolSpec(name="shared", description="")])
    with pytest.raises(DuplicateTool):
        registry.register_library("b", "", [ToolSpec(name="shared", description="")])


@pytest.mark.parametrize("bad", ["", "has space", "dash-ed", "ALL", "request_full_toolset"])
def test_invalid_or_reserved_names_rejected(bad: str) -> None:
    with pytest.raises(InvalidName):
        ToolRegistry().register_library(bad, "", [])
    with pytest.raises(InvalidName):
        ToolRegistry().register_library("lib", "", [ToolSpec(name=bad, description="")])


def test_register_after_seal_rejected() -> None:
    registry = ToolRegistry().seal()
    with pytest.raises(RegistrySealed):
        registry.register_library("late", "", [])


def test_schema_queries_require_seal() -> None:
    registry = ToolRegistry()
    registry.register_library("a", "", [])
    with pytest.raises(RegistryNotSealed):
        registry.full_schema()


def test_subset_union_of_two_libraries() -> None:
    registry = ToolRegistry()
    registry.register_library("A", "", [ToolSpec(name=f"a{i}", description="") for i in range(3)])
    registry.register_library("B", "", [ToolSpec(name=f"b{i}", description="") for i in range(2)])
    registry.register_library("C", "", [ToolSpec(name=f"c{i}", description="") for i in range(4)])
    registry.seal()
    schema = registry.subset_schema({"A", "C"})
    assert len(schema.tools) == 7
    assert not any(name.startswith("b") for name in schema.tool_names())
    assert schema.origin == frozenset({"A", "C"})


def test_subset_unknown_library_rejected() -> None:
    registry = small_registry()
    with pytest.raises(UnknownLibrary):
        registry.subset_schema({"nonexistent"})


def test_subset_over_all_libraries_equals_full_schema() -> None:
    registry = small_registry()
    subset = registry.subset_schema(registry.library_names())
    full = registry.full_schema()
    assert subset == full
    assert serialize_schema(subset) == serialize_schema(full)


def test_full_schema_empty_registry() -> None:
    assert ToolRegistry().seal().full_schema().tools == ()


def test_full_schema_six_libraries_two_tools_each() -> None:
    registry = small_registry(tools_per_library=2)
    assert len(registry.full_schema().tools) == 12


def test_full_schema_serialization_stable_across_calls() -> None:
    registry = small_registry()
    assert serialize_schema(registry.full_schema()) == serialize_schema(registry.full_schema())


def test_serialize_empty_schema_exact_bytes() -> None:
    registry = ToolRegistry().seal()
    assert serialize_schema(registry.full_schema()) == '{"tools":[]}'


def test_serialize_no_parameter_tool_fixed_canonical_string() -> None:
    tool = ToolSpec(name="ping", description="pong")
    expected = (
        '{"tools":[{"description":"pong","name":"ping",'
        '"parameters":{"properties":{},"type":"object"}}]}'
    )
    assert serialize_schema([tool]) == expected
    assert serialize_schema([tool]) == serialize_schema([tool])


def test_serialize_golden_two_tool_schema() -> None:
    # Golden byte sequence; identical on every platform and run.
    tools = [
        ToolSpec(name="alpha", description="first"),
        ToolSpec(
            name="beta",
            description="second",
            parameters={
                "type": "object",
                "properties": {"q": {"type": "string", "description": "query"}},
                "required": ["q"],
            },
        ),
    ]
    expected = (
        '{"tools":['
        '{"description":"first","name":"alpha","parameters":{"properties":{},"type":"object"}},'
        '{"description":"second","name":"beta","parameters":{"properties":{"q":'
        '{"description":"query","type":"string"}},"required":["q"],"type":"object"}}'
        "]}"
    )
    assert serialize_schema(tools) == expected


def test_subset_monotone_under_library_inclusion() -> None:
    registry = small_registry(tools_per_library=3)
    names = list(registry.library_names())
    rng = random.Random(23)
    for _ in range(50):
        smaller = {n for n in names if rng.random() < 0.5}
        larger = smaller | {n for n in names if rng.random() < 0.5}
        small_tools = set(registry.subset_schema(smaller).tool_names())
        large_tools = set(registry.subset_schema(larger).tool_names())
        assert small_tools <= large_tools


def test_serialization_injective_over_distinct_tool_sets() -> None:
    registry = small_registry(tools_per_library=2)
    names = list(registry.library_names())
    rng = random.Random(5)
    seen: dict[str, frozenset[str]] = {}
    for _ in range(60):
        subset = frozenset(n for n in names if rng.random() < 0.5)
        schema = registry.subset_schema(subset)
        text = serialize_schema(schema)
        tools = frozenset(schema.tool_names())
        if text in seen:
            assert seen[text] == tools
        seen[text] = tools


def test_subset_bytes_bounded_by_full_with_empty_library_equality() -> None:
    registry = ToolRegistry()
    registry.register_library("a", "", [ToolSpec(name="a0", description="x")])
    registry.register_library("b", "", [ToolSpec(name="b0", description="y")])
    registry.register_library("hollow", "", [])
    registry.seal()
    full_bytes = len(serialize_schema(registry.full_schema()).encode())
    proper = len(serialize_schema(registry.subset_schema({"a"})).encode())
    covering = len(serialize_schema(registry.subset_schema({"a", "b"})).encode())
    assert proper < full_bytes
    # Covers every non-empty library: equal bytes despite missing "hollow".
    assert covering == full_bytes
    assert desk_count(serialize_schema(registry.subset_schema({"a"}))) <= desk_count(
        serialize_schema(registry.full_schema())
    )


def test_registry_document_round_trip(synth_docs) -> None:
    registry = registry_from_document(synth_docs["registry"])
    assert registry_to_document(registry) == synth_docs["registry"]
