"""Batch driver: ingest, preprocess, run, export, evaluate, serve.

Exit codes: 0 success, 1 domain or gateway error, 2 configuration error
(argparse usage errors also exit 2).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import AppConfig, load_config
from .errors import ConfigError, NarrarcError
from .evaluate import evaluate_export, format_report
from .gateway import LLMGateway
from .store import Store, open_store


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="narrarc",
        description="Extract, store, and refine narrative arcs from episode plots.",
    )
    parser.add_argument("--config", help="path to a TOML config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="register a series corpus directory")
    p_ingest.add_argument("series_dir", help="directory with series.toml and S##E##.txt files")

    p_pre = sub.add_parser("preprocess", help="simplify, normalize, and summarize plots")
    p_pre.add_argument("--series", required=True)
    p_pre.add_argument("--season", type=int, required=True)

    p_run = sub.add_parser("run", help="run the extraction pipeline over a season")
    p_run.add_argument("--series", required=True)
    p_run.add_argument("--season", type=int, required=True)

    p_export = sub.add_parser("export", help="write the canonical JSON export")
    p_export.add_argument("--series", required=True)
    p_export.add_argument("out_path", help="output file path")

    p_eval = sub.add_parser("evaluate", help="score an export against gold annotations")
    p_eval.add_argument("extracted_export", help="canonical export JSON file")
    p_eval.add_argument("gold_annotations", help="gold annotations JSON file")
    p_eval.add_argument("--threshold", type=float, default=None,
                        help="title+description match threshold (default from config)")

    p_serve = sub.add_parser("serve", help="launch the HTTP service")
    p_serve.add_argument("--host", default=None)
    p_serve.add_argument("--port", type=int, default=None)

    return parser


def _open(cfg: AppConfig) -> Store:
    return open_store(cfg.store_path, id_seed=cfg.id_seed)


def _dispatch(args: argparse.Namespace, cfg: AppConfig) -> int:
    if args.command == "ingest":
        from .corpus import ingest_series

        summary = ingest_series(_open(cfg), args.series_dir)
        print(
            f"ingested {summary['series']!r}: {summary['created']} created, "
            f"{summary['updated']} updated, {summary['unchanged']} unchanged"
        )
        return 0

    if args.command == "preprocess":
        from .preprocess import preprocess_season

        gateway = LLMGateway.from_config(cfg.provider)
        preprocess_season(gateway, _open(cfg), args.series, args.season)
        print(f"preprocessed {args.series} season {args.season}")
        return 0

    if args.command == "run":
        from .pipeline import run_season

        gateway = LLMGateway.from_config(cfg.provider)
        reports = run_season(
            gateway, _open(cfg), args.series, args.season,
            runs_dir=cfg.runs_dir, semantic=cfg.semantic,
        )
        for report in reports:
            print(
                f"S{report.season:02d}E{report.episode:02d}: "
                f"{len(report.created_arcs)} created, "
                f"{len(report.extended_arcs)} extended, "
                f"{len(report.drops)} dropped, "
                f"{len(report.warnings)} warnings, "
                f"{report.gateway_call_count} gateway calls"
            )
        return 0

    if args.command == "export":
        store = _open(cfg)
        text = store.export_canonical(args.series)
        Path(args.out_path).write_text(text, encoding="utf-8")
        print(f"exported {args.series!r} to {args.out_path}")
        return 0

    if args.command == "evaluate":
        gateway = LLMGateway.from_config(cfg.provider)
        export_doc = json.loads(Path(args.extracted_export).read_text(encoding="utf-8"))
        gold_doc = json.loads(Path(args.gold_annotations).read_text(encoding="utf-8"))
        threshold = args.threshold if args.threshold is not None else cfg.eval_match_threshold
        report = evaluate_export(gateway, export_doc, gold_doc, threshold)
        print(format_report(report))
        return 0

    if args.command == "serve":
        from dataclasses import replace

        from .api import serve

        service = cfg.service
        if args.host is not None:
            service = replace(service, host=args.host)
        if args.port is not None:
            service = replace(service, port=args.port)
        cfg = replace(cfg, service=service)
        gateway = LLMGateway.from_config(cfg.provider)
        serve(_open(cfg), gateway, cfg)
        return 0

    raise ConfigError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _dispatch(args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NarrarcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
