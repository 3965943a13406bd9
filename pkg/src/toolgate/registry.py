"""Tool definitions, grouped into libraries, and their canonical serialization.

The registry is built single-threaded, then sealed. After sealing it is
immutable and safe to share across any number of concurrent sessions, and
schema serialization is canonical (sorted keys, no insignificant whitespace,
UTF-8) so token costs reproduce bit-exactly across runs and platforms.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import (
    DuplicateLibrary,
    DuplicateTool,
    InvalidName,
    ParseError,
    RegistryNotSealed,
    RegistrySealed,
    UnknownLibrary,
)

NAME_PATTERN = re.compile(r"[A-Za-z0-9_]+")

# Reserved names: "ALL" is the full-toolset marker used by the gate, and the
# sentinel tool is appended to gated schemas by the gate itself.
RESERVED_NAMES = frozenset({"ALL", "request_full_toolset"})

EMPTY_PARAMETERS: dict[str, Any] = {"type": "object", "properties": {}}


def canonical_json(value: Any) -> str:
    """Canonical JSON text: sorted keys, compact separators, raw UTF-8."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _check_name(name: str, what: str) -> None:
    if not name or not NAME_PATTERN.fullmatch(name):
        raise InvalidName(f"{what} name {name!r} must match [A-Za-z0-9_]+")
    if name in RESERVED_NAMES:
        raise InvalidName(f"{what} name {name!r} is reserved")


def _check_parameters(tool_name: str, parameters: Mapping[str, Any]) -> None:
    if not isinstance(parameters, Mapping):
        raise ParseError(f"tool {tool_name!r}: parameters must be an object")
    if parameters.get("type", "object") != "object":
        raise ParseError(f"tool {tool_name!r}: parameters type must be 'object'")
    properties = parameters.get("properties", {})
    if not isinstance(properties, Mapping):
        raise ParseError(f"tool {tool_name!r}: properties must be an object")
    required = parameters.get("required", [])
    if not isinstance(required, list) or any(not isinstance(r, str) for r in required):
        raise ParseError(f"tool {tool_name!r}: required must be a list of names")
    for r in required:
        if r not in properties:
            raise ParseError(f"tool {tool_name!r}: required name {r!r} not in properties")


@dataclass(frozen=True)
class ToolSpec:
    """One callable tool: name, description, and a JSON-schema parameter object."""

    name: str
    description: str
    parameters: Mapping[str, Any] = field(default_factory=lambda: dict(EMPTY_PARAMETERS))

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "parameters": dict(self.parameters),
        }


@dataclass(frozen=True)
class ToolLibrary:
    """A named bundle of tools; the granularity at which gating operates."""

    name: str
    description: str
    tools: tuple[ToolSpec, ...]


@dataclass(frozen=True)
class ToolSchema:
    """The flattened tool payload offered to the planner.

    Ordering is deterministic: libraries in registration order, tools in
    declaration order. `origin` records which libraries it was drawn from.
    """

    tools: tuple[ToolSpec, ...]
    origin: frozenset[str]

    def tool_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tools)


def serialize_schema(schema: ToolSchema | Sequence[ToolSpec]) -> str:
    """Canonical text form of a schema; the unit of desk token costing.

    Deterministic and injective over distinct tool sequences. `origin` is
    bookkeeping, not payload, so it is not serialized.
    """
    tools = schema.tools if isinstance(schema, ToolSchema) else tuple(schema)
    return canonical_json({"tools": [t.to_dict() for t in tools]})


class ToolRegistry:
    """Owns the universe of tool libraries.

    Build phase is single-threaded: register libraries, then seal(). Schema
    queries require a sealed registry and never mutate it.
    """

    def __init__(self) -> None:
        self._libraries: dict[str, ToolLibrary] = {}
        self._tool_owner: dict[str, str] = {}
        self._sealed = False
        self._schema_cache: dict[frozenset[str], ToolSchema] = {}

    @property
    def sealed(self) -> bool:
        return self._sealed

    def register_library(
        self,
        name: str,
        description: str,
        tools: Iterable[ToolSpec | Mapping[str, Any]],
    ) -> "ToolRegistry":
        """Add a library. Names are validated; tool names are registry-unique."""
        if self._sealed:
            raise RegistrySealed("cannot register libraries after seal()")
        _check_name(name, "library")
        if name in self._libraries:
            raise DuplicateLibrary(f"library {name!r} already registered")

        specs: list[ToolSpec] = []
        seen_here: set[str] = set()
        for tool in tools:
            spec = tool if isinstance(tool, ToolSpec) else ToolSpec(
                name=tool["name"],
                description=tool.get("description", ""),
                parameters=tool.get("parameters", dict(EMPTY_PARAMETERS)),
            )
            _check_name(spec.name, "tool")
            _check_parameters(spec.name, spec.parameters)
            if spec.name in seen_here or spec.name in self._tool_owner:
                raise DuplicateTool(f"tool {spec.name!r} already registered")
            seen_here.add(spec.name)
            specs.append(spec)

        self._libraries[name] = ToolLibrary(name, description, tuple(specs))
        for spec in specs:
            self._tool_owner[spec.name] = name
        return self

    def seal(self) -> "ToolRegistry":
        """Freeze the registry; from here on it is read-only and shareable."""
        self._sealed = True
        return self

    def library_names(self) -> tuple[str, ...]:
        """Library names in registration order."""
        return tuple(self._libraries)

    def get_library(self, name: str) -> ToolLibrary:
        try:
            return self._libraries[name]
        except KeyError:
            raise UnknownLibrary(f"no library named {name!r}") from None

    def owning_library(self, tool_name: str) -> str | None:
        """The library that declares `tool_name`, or None."""
        return self._tool_owner.get(tool_name)

    def has_tool(self, tool_name: str) -> bool:
        return tool_name in self._tool_owner

    def subset_schema(self, libraries: Iterable[str]) -> ToolSchema:
        """Union of the requested libraries' tools, in deterministic order."""
        if not self._sealed:
            raise RegistryNotSealed("seal() the registry before building schemas")
        requested = frozenset(libraries)
        cached = self._schema_cache.get(requested)
        if cached is not None:
            return cached
        for name in requested:
            if name not in self._libraries:
                raise UnknownLibrary(f"no library named {name!r}")
        tools: list[ToolSpec] = []
        for name in self._libraries:  # registration order
            if name in requested:
                tools.extend(self._libraries[name].tools)
        schema = ToolSchema(tools=tuple(tools), origin=requested)
        self._schema_cache[requested] = schema
        return schema

    def full_schema(self) -> ToolSchema:
        """Every registered library's tools; equals subset_schema(all names)."""
        return self.subset_schema(self._libraries)


def load_registry(path: str | Path) -> ToolRegistry:
    """Load and seal a registry from its JSON definition file."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot load registry from {path}: {exc}") from exc
    return registry_from_document(document)


def registry_from_document(document: Mapping[str, Any]) -> ToolRegistry:
    """Build and seal a registry from a parsed definition document."""
    if not isinstance(document, Mapping) or "libraries" not in document:
        raise ParseError("registry document must be an object with a 'libraries' list")
    libraries = document["libraries"]
    if not isinstance(libraries, list):
        raise ParseError("'libraries' must be a list")
    registry = ToolRegistry()
    for entry in libraries:
        if not isinstance(entry, Mapping) or "name" not in entry:
            raise ParseError("each library needs at least a 'name'")
        registry.register_library(
            entry["name"], entry.get("description", ""), entry.get("tools", [])
        )
    return registry.seal()


def registry_to_document(registry: ToolRegistry) -> dict[str, Any]:
    """Inverse of registry_from_document, for drafts and fixtures."""
    return {
        "libraries": [
            {
                "name": lib.name,
                "description": lib.description,
                "tools": [t.to_dict() for t in lib.tools],
            }
            for lib in (registry.get_library(n) for n in registry.library_names())
        ]
    }
