"""The offline phase: intent taxonomy and the intent -> library mapping.

An intent map is loaded from JSON, validated against the sealed registry,
and immutable afterwards. Records may map to the reserved "ALL" marker,
which resolves to the full toolset at gating time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .errors import DuplicateIntent, EmptyLibrarySet, ParseError, UnknownIntent
from .registry import ToolRegistry

ALL_MARKER = "ALL"
UNKNOWN_LABEL = "UNKNOWN"

POLICY_FULL_TOOLSET = "full-toolset"
POLICY_REJECT = "reject"


@dataclass(frozen=True)
class IntentRecord:
    """One taxonomy row: an intent and the library subset it unlocks."""

    id: str
    description: str
    example_queries: tuple[str, ...]
    libraries: frozenset[str]


@dataclass(frozen=True)
class MissingLibrary:
    """Validation issue: an intent references a library the registry lacks."""

    intent: str
    library: str


@dataclass(frozen=True)
class IntentMap:
    """Ordered intent records plus the policy for unknown intents."""

    intents: tuple[IntentRecord, ...]
    default_policy: str = POLICY_FULL_TOOLSET

    def get(self, intent_id: str) -> IntentRecord | None:
        for record in self.intents:
            if record.id == intent_id:
                return record
        return None

    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.intents)


def load_intent_map(document: Mapping[str, Any]) -> IntentMap:
    """Build an IntentMap from a parsed config document.

    Records keep file order; default_policy defaults to full-toolset.
    """
    if not isinstance(document, Mapping) or "intents" not in document:
        raise ParseError("intent map document must be an object with an 'intents' list")
    entries = document["intents"]
    if not isinstance(entries, list) or not entries:
        raise ParseError("intent map needs at least one intent")
    policy = document.get("default_policy", POLICY_FULL_TOOLSET)
    if policy not in (POLICY_FULL_TOOLSET, POLICY_REJECT):
        raise ParseError(f"unknown default_policy {policy!r}")

    records: list[IntentRecord] = []
    seen: set[str] = set()
    for entry in entries:
        if not isinstance(entry, Mapping) or "id" not in entry:
            raise ParseError("each intent needs at least an 'id'")
        intent_id = entry["id"]
        if intent_id in seen:
            raise DuplicateIntent(f"intent {intent_id!r} appears twice")
        seen.add(intent_id)
        libraries = entry.get("libraries", [])
        if not libraries:
            raise EmptyLibrarySet(f"intent {intent_id!r} maps to no libraries")
        records.append(
            IntentRecord(
                id=intent_id,
                description=entry.get("description", intent_id),
                example_queries=tuple(entry.get("example_queries", [])),
                libraries=frozenset(libraries),
            )
        )
    return IntentMap(intents=tuple(records), default_policy=policy)


def load_intent_map_file(path: str | Path) -> IntentMap:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot load intent map from {path}: {exc}") from exc
    return load_intent_map(document)


def intent_map_to_document(intent_map: IntentMap) -> dict[str, Any]:
    """Inverse of load_intent_map; round-trips structurally."""
    return {
        "default_policy": intent_map.default_policy,
        "intents": [
            {
                "id": r.id,
                "description": r.description,
                "example_queries": list(r.example_queries),
                "libraries": sorted(r.libraries),
            }
            for r in intent_map.intents
        ],
    }


def validate(intent_map: IntentMap, registry: ToolRegistry) -> list[MissingLibrary]:
    """Report every (intent, library) reference the registry cannot resolve.

    Issues are data, not failures; an empty list means every libraries_for
    result is a valid subset_schema input. The "ALL" marker always resolves.
    """
    known = set(registry.library_names())
    issues: list[MissingLibrary] = []
    for record in intent_map.intents:
        for library in sorted(record.libraries):
            if library != ALL_MARKER and library not in known:
                issues.append(MissingLibrary(intent=record.id, library=library))
    return issues


def libraries_for(intent_map: IntentMap, intent_id: str) -> frozenset[str]:
    """The library set an intent unlocks.

    Unknown ids follow the map's policy: full-toolset yields the "ALL"
    marker (resolved to the full schema by the gate), reject raises.
    """
    record = intent_map.get(intent_id)
    if record is not None:
        return record.libraries
    if intent_map.default_policy == POLICY_REJECT:
        raise UnknownIntent(f"no intent named {intent_id!r}")
    return frozenset({ALL_MARKER})


def propose_intent_map(
    prompts: Sequence[str],
    classifier: Callable[[str], str] | Any,
    out_path: str | Path,
    *,
    invoked_libraries: Mapping[str, frozenset[str] | set[str]] | None = None,
) -> dict[str, Any]:
    """Draft an intent map by grouping prompts under classified labels.

    `classifier` is either a plain prompt -> label callable or a gate
    classifier backend (anything with a .reply method). Each group's
    library set is the union of the libraries its prompts invoked in
    reference trajectories (`invoked_libraries`, keyed by prompt) when
    provided, else empty and flagged for human review. The draft is
    written to `out_path` and never activated: a record with an empty
    library set cannot load (EmptyLibrarySet), so promotion requires a
    human to complete and point the runtime at the file.
    """
    if not prompts:
        raise ParseError("corpus of prompts is empty")
    if hasattr(classifier, "reply"):
        labeler = lambda prompt: classifier.reply(prompt, None, "")[0]
    else:
        labeler = classifier
    groups: dict[str, list[str]] = {}
    for prompt in prompts:
        groups.setdefault(labeler(prompt), []).append(prompt)

    intents = []
    for label, grouped in groups.items():  # first-appearance order
        libraries: set[str] = set()
        if invoked_libraries is not None:
            for prompt in grouped:
                libraries.update(invoked_libraries.get(prompt, ()))
        entry: dict[str, Any] = {
            "id": label,
            "description": label,
            "example_queries": grouped,
            "libraries": sorted(libraries),
        }
        if not libraries:
            entry["needs_review"] = True
        intents.append(entry)

    draft = {"default_policy": POLICY_FULL_TOOLSET, "intents": intents}
    Path(out_path).write_text(
        json.dumps(draft, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return draft
