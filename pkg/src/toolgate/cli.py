"""Command-line harness: `bench run`, `bench ab`, `bench fixtures`, `bench synth`.

Exit code 0 on completion, 2 on configuration errors (bad paths, invalid
documents, unresolved intent-map references). Task-level failures never
abort a run; they land in the report as data.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backends import WireBackend, load_script
from .bench import (
    emit_report,
    fixture_report,
    load_corpus,
    load_fixture_pairs,
    run_benchmark,
)
from .errors import ToolgateError
from .gate import (
    DEFAULT_CLASSIFIER_TEMPLATE,
    LLMClassifier,
    RuleClassifier,
    ScriptedClassifier,
    load_classifier_template,
)
from .intents import load_intent_map_file, validate
from .loop import SCAFFOLDS, SessionConfig
from .registry import load_registry
from .synth import write_fixtures

ALL_SCAFFOLDS = list(SCAFFOLDS)


def _add_run_arguments(parser: argparse.ArgumentParser, with_gating: bool) -> None:
    parser.add_argument("--registry", required=True, help="registry definition JSON")
    parser.add_argument("--intent-map", required=True, help="intent map JSON")
    parser.add_argument("--corpus", required=True, help="task corpus JSON")
    parser.add_argument("--script", help="scripted backend fixture JSON")
    parser.add_argument("--endpoint", help="chat-completions endpoint URL (live mode)")
    if with_gating:
        parser.add_argument("--scaffold", default="cot-zero", choices=ALL_SCAFFOLDS)
        parser.add_argument("--gating", default="on", choices=["on", "off"])
    else:
        parser.add_argument(
            "--scaffold",
            nargs="+",
            default=ALL_SCAFFOLDS,
            choices=ALL_SCAFFOLDS,
            help="scaffolds to pair gated vs ungated",
        )
    parser.add_argument("--classifier", default="scripted", choices=["scripted", "rule"])
    parser.add_argument("--classifier-prompt", help="template file with {intents} and {query}")
    parser.add_argument("--exemplars", help="exemplar block file for few-shot scaffolds")
    parser.add_argument("--max-steps", type=int, default=10)
    parser.add_argument("--temperature", type=float, default=0.0)
    parser.add_argument("--model", default="gpt-4-turbo")
    parser.add_argument("--tokenizer", default="desk", choices=["desk", "endpoint"])
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", help="report output path (stdout when omitted)")
    parser.add_argument(
        "--format", default="json", choices=["json", "csv", "markdown-table"]
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Intent-gated tool selection benchmark harness",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one configuration over a corpus")
    _add_run_arguments(run, with_gating=True)

    ab = commands.add_parser("ab", help="paired gated-vs-ungated runs per scaffold")
    _add_run_arguments(ab, with_gating=False)

    fixtures = commands.add_parser(
        "fixtures", help="replay recorded tokens-per-task totals through the metrics pipeline"
    )
    fixtures.add_argument(
        "--table2", required=True, help="JSON list of recorded scaffold token pairs"
    )
    fixtures.add_argument("--out", help="report output path (stdout when omitted)")
    fixtures.add_argument(
        "--format", default="markdown-table", choices=["json", "csv", "markdown-table"]
    )

    synth = commands.add_parser("synth", help="write the synthetic fixture set")
    synth.add_argument("--out-dir", required=True)
    synth.add_argument("--tasks", type=int, default=60)

    return parser


def _load_shared(args) -> tuple:
    registry = load_registry(args.registry)
    intent_map = load_intent_map_file(args.intent_map)
    issues = validate(intent_map, registry)
    if issues:
        details = "; ".join(f"{i.intent} -> {i.library}" for i in issues)
        raise ToolgateError(f"intent map references missing libraries: {details}")
    corpus = load_corpus(args.corpus, registry)
    template = (
        load_classifier_template(args.classifier_prompt)
        if args.classifier_prompt
        else DEFAULT_CLASSIFIER_TEMPLATE
    )
    exemplars = (
        Path(args.exemplars).read_text(encoding="utf-8") if args.exemplars else None
    )

    if args.endpoint:
        backend = WireBackend(args.endpoint)
        classifier = LLMClassifier(backend)
    elif args.script:
        backend = load_script(args.script)
        classifier = (
            ScriptedClassifier.from_script(backend)
            if args.classifier == "scripted"
            else RuleClassifier()
        )
    else:
        raise ToolgateError("either --script or --endpoint is required")
    return registry, intent_map, corpus, template, exemplars, backend, classifier


def _session_config(args, scaffold: str, gating: bool, template: str, exemplars) -> SessionConfig:
    return SessionConfig(
        scaffold=scaffold,
        gating=gating,
        max_steps=args.max_steps,
        temperature=args.temperature,
        model=args.model,
        exemplars_text=exemplars,
        tokenizer=args.tokenizer,
        classifier_template=template,
    )


def _emit(args, report) -> None:
    text = emit_report(report, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)


def _command_run(args) -> int:
    registry, intent_map, corpus, template, exemplars, backend, classifier = _load_shared(args)
    if not corpus:
        print("nothing to run: corpus is empty")
        return 0
    config = _session_config(args, args.scaffold, args.gating == "on", template, exemplars)
    report = run_benchmark(
        corpus,
        [config],
        registry=registry,
        backend=backend,
        intent_map=intent_map,
        classifier=classifier,
        workers=args.workers,
    )
    _emit(args, report)
    return 0


def _command_ab(args) -> int:
    registry, intent_map, corpus, template, exemplars, backend, classifier = _load_shared(args)
    if not corpus:
        print("nothing to run: corpus is empty")
        return 0
    configs = []
    for scaffold in args.scaffold:
        configs.append(_session_config(args, scaffold, False, template, exemplars))
        configs.append(_session_config(args, scaffold, True, template, exemplars))
    report = run_benchmark(
        corpus,
        configs,
        registry=registry,
        backend=backend,
        intent_map=intent_map,
        classifier=classifier,
        workers=args.workers,
    )
    _emit(args, report)
    return 0


def _command_fixtures(args) -> int:
    report = fixture_report(load_fixture_pairs(args.table2))
    _emit(args, report)
    return 0


def _command_synth(args) -> int:
    paths = write_fixtures(args.out_dir, n_tasks=args.tasks)
    for name in sorted(paths):
        print(f"wrote {paths[name]}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _command_run,
        "ab": _command_ab,
        "fixtures": _command_fixtures,
        "synth": _command_synth,
    }
    try:
        return handlers[args.command](args)
    except (ToolgateError, FileNotFoundError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
