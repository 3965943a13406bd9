"""Exception hierarchy for the toolgate package."""

from __future__ import annotations


class ToolgateError(Exception):
    """Base class for all toolgate errors."""


# --- registry ---------------------------------------------------------------


class InvalidName(ToolgateError):
    """A library or tool name is empty, malformed, or reserved."""


class DuplicateLibrary(ToolgateError):
    """A library with this name is already registered."""


class DuplicateTool(ToolgateError):
    """A tool with this name already exists in the registry."""


class UnknownLibrary(ToolgateError):
    """A requested library name is not registered."""


class RegistrySealed(ToolgateError):
    """Mutation attempted after the registry was sealed."""


class RegistryNotSealed(ToolgateError):
    """Schema queries require a sealed registry."""


# --- intent map -------------------------------------------------------------


class ParseError(ToolgateError):
    """A configuration document failed to parse or is structurally invalid."""


class DuplicateIntent(ToolgateError):
    """Two intent records share an id."""


class EmptyLibrarySet(ToolgateError):
    """An intent record maps to no libraries."""


class UnknownIntent(ToolgateError):
    """An intent id is not in the map and the map's policy is reject."""


# --- gate / loop ------------------------------------------------------------


class AlreadyExpanded(ToolgateError):
    """The session already reverted to the full toolset once."""


class NotGated(ToolgateError):
    """Expansion requested on a session that offers the full toolset."""


# --- backends ---------------------------------------------------------------


class BackendUnavailable(ToolgateError):
    """The completion backend failed after exhausting retries."""


class ScriptMiss(ToolgateError):
    """No script entry for (task id, step index); a fixture bug."""


class DuplicateKey(ToolgateError):
    """Two script entries share the same (task id, step index)."""


# --- ledger / bench ---------------------------------------------------------


class NonPositiveBaseline(ToolgateError):
    """Reduction percentage requires a positive baseline."""


class DuplicateTask(ToolgateError):
    """Two corpus tasks share an id."""


class UnknownTool(ToolgateError):
    """A corpus task requires a tool that no registered library provides."""
