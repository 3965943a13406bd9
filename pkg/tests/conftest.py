from __future__ import annotations

import json
from pathlib import Path

import pytest

from toolgate import (
    IntentMap,
    ScriptedBackend,
    ScriptedClassifier,
    ToolRegistry,
    ToolSpec,
    load_intent_map,
    registry_from_document,
)
from toolgate.backends import script_from_document
from toolgate.bench import corpus_from_document
from toolgate.synth import (
    default_intent_map_document,
    default_registry_document,
    identity_intent_map_document,
    make_corpus_documents,
)

DATA_DIR = Path(__file__).parent / "data"


def read_data(name: str):
    return json.loads((DATA_DIR / name).read_text(encoding="utf-8"))


def small_registry(tools_per_library: int = 2) -> ToolRegistry:
    """The six default library names with n plain tools each."""
    registry = ToolRegistry()
    for library in ("SQL_apis", "data_apis", "map_apis", "web_apis", "UI_apis", "wiki_apis"):
        prefix = library.split("_")[0].lower()
        registry.register_library(
            library,
            f"{library} bundle",
            [
                ToolSpec(name=f"{prefix}_tool_{i}", description=f"{prefix} tool {i}")
                for i in range(tools_per_library)
            ],
        )
    return registry.seal()


TRIO_MAP_DOCUMENT = {
    "default_policy": "full-toolset",
    "intents": [
        {
            "id": "Load→Filter→Plot",
            "description": "load records, filter them, and plot the result",
            "example_queries": ["Plot xview1 images around Tampa Bay, FL, USA"],
            "libraries": ["SQL_apis", "data_apis", "map_apis"],
        },
        {
            "id": "UI/Web Navigation",
            "description": "navigate the web or the platform interface",
            "example_queries": ['Search Bing for "System-efficient LLM prompting"?'],
            "libraries": ["web_apis", "UI_apis"],
        },
        {
            "id": "Information Seeking",
            "description": "look up reference information",
            "example_queries": ["Which model to use for airplane detection?"],
            "libraries": ["wiki_apis"],
        },
    ],
}


@pytest.fixture(scope="session")
def trio_map() -> IntentMap:
    return load_intent_map(TRIO_MAP_DOCUMENT)


@pytest.fixture(scope="session")
def registry6() -> ToolRegistry:
    return small_registry(tools_per_library=2)


@pytest.fixture(scope="session")
def synth_docs():
    """Parsed synthetic fixture documents for the default 60-task corpus."""
    corpus, script = make_corpus_documents(60)
    _, script_misclassified = make_corpus_documents(60, misclassify_every=5)
    return {
        "registry": default_registry_document(),
        "intent_map": default_intent_map_document(),
        "intent_map_identity": identity_intent_map_document(),
        "corpus": corpus,
        "script": script,
        "script_misclassified": script_misclassified,
    }


@pytest.fixture(scope="session")
def synth_registry(synth_docs) -> ToolRegistry:
    return registry_from_document(synth_docs["registry"])


@pytest.fixture(scope="session")
def synth_map(synth_docs) -> IntentMap:
    return load_intent_map(synth_docs["intent_map"])


@pytest.fixture(scope="session")
def synth_corpus(synth_docs, synth_registry):
    return corpus_from_document(synth_docs["corpus"], synth_registry)


@pytest.fixture(scope="session")
def synth_backend(synth_docs) -> ScriptedBackend:
    return script_from_document(synth_docs["script"])


@pytest.fixture(scope="session")
def synth_classifier(synth_backend) -> ScriptedClassifier:
    return ScriptedClassifier.from_script(synth_backend)


@pytest.fixture(scope="session")
def synth_fixture_dir(tmp_path_factory) -> Path:
    """The fixture set written to disk, for CLI-level tests."""
    from toolgate.synth import write_fixtures

    out = tmp_path_factory.mktemp("fixtures")
    write_fixtures(out, n_tasks=60)
    return out
