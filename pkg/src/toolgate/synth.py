"""Deterministic synthetic fixtures: registry, intent map, corpus, scripts.

The default corpus is 60 tasks over 3 intents and 6 libraries of 8 tools
each, with scripted trajectories of 2-4 steps. Scripts carry both the
baseline plan and a narrow-schema variant that aggregates more calls per
step, plus a misclassified sibling where every fifth task's classification
reply names the wrong intent (20% fallback pressure). Everything is a pure
function of the task count, so fixtures regenerate byte-identically.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .gate import DEFAULT_CLASSIFIER_TEMPLATE
from .loop import DEFAULT_EXEMPLARS

LIBRARY_TOOLS = {
    "SQL_apis": (
        "sql_query", "sql_tables", "sql_schema", "sql_insert",
        "sql_join", "sql_aggregate", "sql_explain", "sql_export",
    ),
    "data_apis": (
        "load_dataset", "filter_area", "filter_date", "sample_rows",
        "merge_frames", "compute_stats", "export_csv", "cache_dataset",
    ),
    "map_apis": (
        "plot_images", "draw_bbox", "render_heatmap", "zoom_region",
        "add_layer", "remove_layer", "export_map", "tile_preview",
    ),
    "web_apis": (
        "web_search", "open_url", "extract_text", "submit_form",
        "download_file", "screenshot_page", "list_links", "check_status",
    ),
    "UI_apis": (
        "click_element", "type_text", "scroll_view", "select_menu",
        "read_label", "wait_for", "focus_window", "close_dialog",
    ),
    "wiki_apis": (
        "wiki_lookup", "wiki_summary", "wiki_related", "wiki_citations",
        "wiki_images", "wiki_categories", "wiki_search", "wiki_langs",
    ),
}

LIBRARY_TOPICS = {
    "SQL_apis": "catalog queries over the imagery metadata store",
    "data_apis": "loading, filtering, and shaping retrieved datasets",
    "map_apis": "rendering layers and figures on the map canvas",
    "web_apis": "fetching and inspecting external web content",
    "UI_apis": "driving the platform's interactive interface",
    "wiki_apis": "looking up reference articles and model notes",
}

INTENTS = ("load_filter_plot", "ui_web_navigation", "information_seeking")

INTENT_LIBRARIES = {
    "load_filter_plot": ("SQL_apis", "data_apis", "map_apis"),
    "ui_web_navigation": ("web_apis", "UI_apis"),
    "information_seeking": ("wiki_apis",),
}

INTENT_DESCRIPTIONS = {
    "load_filter_plot": "load records, filter them, and plot the result",
    "ui_web_navigation": "navigate the web or the platform interface",
    "information_seeking": "look up reference information",
}

INTENT_EXAMPLES = {
    "load_filter_plot": (
        "Plot xview1 images around Tampa Bay, FL, USA",
        "Load sentinel2 tiles for Lisbon and render a heatmap",
    ),
    "ui_web_navigation": (
        'Search Bing for "System-efficient LLM prompting"?',
        "Open the settings page and click the export button",
    ),
    "information_seeking": (
        "Which model to use for airplane detection?",
        "Look up the reference article on flood mapping",
    ),
}

PLACES = (
    "Tampa Bay", "Lisbon", "Nairobi", "Osaka", "Tromso",
    "Cusco", "Adelaide", "Reykjavik", "Valparaiso", "Chiang Mai",
)
TOPICS = (
    "airplane detection", "flood mapping", "ship tracking", "crop health",
    "cloud masking", "road extraction", "port congestion", "wildfire spread",
    "glacier retreat", "urban growth",
)

# (ungated step plan, narrow step plan) per intent; each plan is a tuple of
# per-step call-name tuples, terminal answer appended separately. Narrow
# plans aggregate the same calls into fewer steps.
_PLANS: dict[str, list[tuple[tuple[tuple[str, ...], ...], tuple[tuple[str, ...], ...]]]] = {
    "load_filter_plot": [
        ((("sql_query",), ("filter_area",), ("plot_images",)),
         (("sql_query", "filter_area"), ("plot_images",))),
        ((("sql_query",), ("filter_area",), ("plot_images",)),
         (("sql_query", "filter_area", "plot_images"),)),
    ],
    "ui_web_navigation": [
        ((("web_search",), ("open_url",), ("click_element",)),
         (("web_search", "open_url"), ("click_element",))),
        ((("web_search",), ("open_url",), ("click_element",)),
         (("web_search", "open_url", "click_element"),)),
    ],
    "information_seeking": [
        ((("wiki_lookup",), ("wiki_summary",)),
         (("wiki_lookup", "wiki_summary"),)),
        ((("wiki_lookup",), ("wiki_summary",)),
         (("wiki_lookup", "wiki_summary"),)),
    ],
}


def _tool_entry(library: str, name: str) -> dict[str, Any]:
    label = name.replace("_", " ")
    return {
        "name": name,
        "description": (
            f"Run the {label} operation for {LIBRARY_TOPICS[library]}; accepts "
            "structured arguments and returns a compact text result suitable "
            "for chaining into later steps."
        ),
        "parameters": {
            "type": "object",
            "properties": {
                "query": {
                    "type": "string",
                    "description": f"What the {label} operation should act on.",
                }
            },
            "required": ["query"],
        },
    }


def default_registry_document() -> dict[str, Any]:
    return {
        "libraries": [
            {
                "name": library,
                "description": f"Tools for {LIBRARY_TOPICS[library]}.",
                "tools": [_tool_entry(library, name) for name in tools],
            }
            for library, tools in LIBRARY_TOOLS.items()
        ]
    }


def default_intent_map_document() -> dict[str, Any]:
    return {
        "default_policy": "full-toolset",
        "intents": [
            {
                "id": intent,
                "description": INTENT_DESCRIPTIONS[intent],
                "example_queries": list(INTENT_EXAMPLES[intent]),
                "libraries": list(INTENT_LIBRARIES[intent]),
            }
            for intent in INTENTS
        ],
    }


def identity_intent_map_document() -> dict[str, Any]:
    """Every intent resolves to the full toolset via the ALL marker."""
    document = default_intent_map_document()
    for entry in document["intents"]:
        entry["libraries"] = ["ALL"]
    return document


def _task_prompt(intent: str, index: int) -> str:
    place = PLACES[index % len(PLACES)]
    topic = TOPICS[index % len(TOPICS)]
    if intent == "load_filter_plot":
        return f"Plot xview1 images around {place} after filtering the area"
    if intent == "ui_web_navigation":
        return f"Search the web for {topic} and open the top result"
    return f"Which model should we use for {topic}?"


def make_corpus_documents(
    n_tasks: int = 60, misclassify_every: int | None = None
) -> tuple[list[dict[str, Any]], list[dict[str, Any]]]:
    """Build (corpus, script) documents for `n_tasks` tasks.

    With misclassify_every=k, every k-th task's classification entry names
    the next intent in rotation instead of the true one; its step entries
    still need the true tools, so the run must revert via the sentinel.
    """
    corpus: list[dict[str, Any]] = []
    script: list[dict[str, Any]] = []
    for index in range(n_tasks):
        intent = INTENTS[index % len(INTENTS)]
        task_id = f"t{index:04d}"
        prompt = _task_prompt(intent, index)
        ungated_plan, narrow_plan = _PLANS[intent][(index // len(INTENTS)) % 2]
        used_tools = sorted({name for step in ungated_plan for name in step})
        answer = f"done: {task_id} used {len(used_tools)} tools"

        corpus.append(
            {
                "id": task_id,
                "prompt": prompt,
                "intent_truth": intent,
                "required_tools": used_tools,
                "expected_answer": f"done: {task_id}",
            }
        )

        label = intent
        if misclassify_every and index % misclassify_every == 0:
            label = INTENTS[(INTENTS.index(intent) + 1) % len(INTENTS)]
        script.append({"task": task_id, "step": -1, "respond": {"content": label}})

        for step_index in range(len(ungated_plan)):
            entry: dict[str, Any] = {
                "task": task_id,
                "step": step_index,
                "needs": used_tools,
                "respond": {
                    "tool_calls": [
                        {"name": name, "arguments": {"query": prompt}}
                        for name in ungated_plan[step_index]
                    ]
                },
            }
            if step_index < len(narrow_plan):
                entry["respond_narrow"] = {
                    "tool_calls": [
                        {"name": name, "arguments": {"query": prompt}}
                        for name in narrow_plan[step_index]
                    ]
                }
            else:
                entry["respond_narrow"] = {"content": answer}
            script.append(entry)
        # Terminal step of the baseline plan; the narrow plan reaches its
        # terminal earlier via the respond_narrow of an interior entry.
        script.append(
            {
                "task": task_id,
                "step": len(ungated_plan),
                "needs": used_tools,
                "respond": {"content": answer},
            }
        )
    return corpus, script


def write_fixtures(out_dir: str | Path, n_tasks: int = 60) -> dict[str, Path]:
    """Write the full fixture set; returns the paths keyed by artifact name."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus, script = make_corpus_documents(n_tasks)
    _, script_misclassified = make_corpus_documents(n_tasks, misclassify_every=5)
    artifacts: dict[str, Any] = {
        "registry.json": default_registry_document(),
        "intent_map.json": default_intent_map_document(),
        "intent_map_identity.json": identity_intent_map_document(),
        "corpus.json": corpus,
        "script.json": script,
        "script_misclassified.json": script_misclassified,
    }
    paths: dict[str, Path] = {}
    for name, document in artifacts.items():
        path = out / name
        path.write_text(
            json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        paths[name] = path
    for name, text in (
        ("classifier_prompt.txt", DEFAULT_CLASSIFIER_TEMPLATE),
        ("exemplars.txt", DEFAULT_EXEMPLARS),
    ):
        path = out / name
        path.write_text(text, encoding="utf-8")
        paths[name] = path
    return paths
