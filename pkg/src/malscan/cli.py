"""Command-line interface: ``malscan scan|rules-check|render|eval``."""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .backends import ModelBackend, ModelConfig, RuleBackend
from .cache import ResultCache
from .config import BACKENDS, ConfigError, ScanConfig, load_config
from .evaluation import ManifestError, build_bundled_corpus, format_table, run_eval
from .orchestrator import RootMissing, scan_tree
from .prescore import RuleLoadError, bundled_rules, load_rules
from .report import ReportError, exit_code, from_json, to_json, to_markdown

EXIT_OK, EXIT_USAGE = 0, 2  # 1 comes from report.exit_code


class UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="malscan", description="Component-wise security scanning of source trees.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    scan = sub.add_parser("scan", help="scan a file or directory")
    scan.add_argument("target", help="file or directory to scan")
    scan.add_argument("--config", help="YAML config file with ScanConfig fields")
    scan.add_argument("--backend", choices=BACKENDS)
    scan.add_argument("--format", choices=("json", "markdown", "both"), default="json")
    scan.add_argument("-o", "--output", help="JSON report path (markdown path with --format markdown)")
    scan.add_argument("--markdown-output", help="Markdown report path")
    scan.add_argument("--threshold", type=float, dest="flag_threshold", help="prescore flag threshold")
    scan.add_argument("--fail-threshold", type=float, help="exit 1 when a finding scores at least this")
    scan.add_argument("--token-budget", type=int)
    scan.add_argument("--max-parallel", type=int)
    scan.add_argument("--force-analyze-all", action="store_true", default=None,
                      help="send every component to the backend regardless of prescore")
    scan.add_argument("--full-report", action="store_true", default=None,
                      help="also summarize components that are not analyzed")
    scan.add_argument("--rules", dest="rule_set_path", help="indicator rule file (default: bundled rules)")
    scan.add_argument("--include", action="append", metavar="GLOB", help="replace the default include globs")
    scan.add_argument("--exclude", action="append", metavar="GLOB", help="add to the default exclude globs")
    scan.add_argument("--cache-dir", help="reuse backend results stored here")
    scan.add_argument("--model-endpoint", help="chat-completions URL for --backend model")
    scan.add_argument("--model-name", help="model name for --backend model")

    check = sub.add_parser("rules-check", help="validate an indicator rule file")
    check.add_argument("path", nargs="?", help="rule file (default: bundled rules)")

    render = sub.add_parser("render", help="render Markdown from a stored JSON report")
    render.add_argument("report", help="JSON report produced by scan")
    render.add_argument("-o", "--output", help="Markdown path (default: stdout)")

    ev = sub.add_parser("eval", help="score the rule backend against the bundled labelled corpus")
    ev.add_argument("--corpus-out", help="materialize the corpus here instead of a temporary directory")
    ev.add_argument("--output", help="write the result as JSON")
    return parser


def _write(path: Optional[str], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    if target.parent != Path(""):
        target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")


def _config(args) -> ScanConfig:
    cfg = load_config(args.config) if args.config else ScanConfig()
    model = dict(cfg.model)
    if args.model_endpoint:
        model["endpoint"] = args.model_endpoint
    if args.model_name:
        model["model"] = args.model_name
    exclude = tuple(cfg.exclude) + tuple(args.exclude) if args.exclude else None
    try:
        return cfg.with_overrides(
            backend=args.backend,
            flag_threshold=args.flag_threshold,
            fail_threshold=args.fail_threshold,
            token_budget=args.token_budget,
            max_parallel=args.max_parallel,
            force_analyze_all=args.force_analyze_all,
            full_report=args.full_report,
            rule_set_path=args.rule_set_path,
            include=tuple(args.include) if args.include else None,
            exclude=exclude,
            cache_dir=args.cache_dir,
            model=model,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _rules(path: Optional[str]):
    if path is None:
        return bundled_rules()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read rule file {path}: {exc.strerror}") from None
    try:
        return load_rules(text)
    except RuleLoadError as exc:
        raise UsageError(f"{path}:{exc.line}: {exc.reason}") from None


def cmd_scan(args) -> int:
    cfg = _config(args)
    rules = _rules(cfg.rule_set_path)
    if cfg.backend == "model":
        try:
            backend = ModelBackend(ModelConfig.from_mapping(cfg.model))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid model settings: {exc}") from None
    else:
        backend = RuleBackend(rules)
    if args.format == "both" and not (args.output or args.markdown_output):
        raise UsageError("--format both needs -o or --markdown-output so the two reports do not share stdout")
    cache = ResultCache(cfg.cache_dir) if cfg.cache_dir else None
    try:
        report = scan_tree(args.target, cfg, rules, backend, cache)
    except RootMissing as exc:
        raise UsageError(str(exc)) from None

    if args.format in ("json", "both"):
        _write(args.output, to_json(report))
    if args.format == "markdown":
        _write(args.markdown_output or args.output, to_markdown(report))
    elif args.format == "both":
        _write(args.markdown_output, to_markdown(report))
    for err in report.errors:
        print(f"malscan: {err.path}: {err.message}", file=sys.stderr)
    return exit_code(report, cfg.fail_threshold)


def cmd_rules_check(args) -> int:
    rules = _rules(args.path)
    where = args.path or "bundled rules"
    print(f"{where}: {len(rules)} rule{'s' if len(rules) != 1 else ''} OK")
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        text = Path(args.report).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read report {args.report}: {exc.strerror}") from None
    try:
        report = from_json(text)
    except ReportError as exc:
        raise UsageError(f"{args.report}: {exc}") from None
    _write(args.output, to_markdown(report))
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.corpus_out:
        result = run_eval(build_bundled_corpus(args.corpus_out))
    else:
        with tempfile.TemporaryDirectory(prefix="malscan-corpus-") as tmp:
            result = run_eval(build_bundled_corpus(tmp))
    sys.stdout.write(format_table(result))
    if args.output:
        _write(args.output, result.to_json())
    return EXIT_OK


COMMANDS = {"scan": cmd_scan, "rules-check": cmd_rules_check, "render": cmd_render, "eval": cmd_eval}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, ManifestError) as exc:
        print(f"malscan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
