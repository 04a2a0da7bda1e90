"""Command-line entry point.

Exit codes: 0 success, 2 configuration problems, 3 runtime failures.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

from .adapters import AdapterCallError, AdapterProtocolError, AdapterTransportError
from .cleaning import AnnotationError
from .config import ConfigError, load_config, validate_files
from .corpus import DatasetError
from .report import ReportError, write_report
from .runner import RunError, RunPaths, Runner, variant_keys


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, metavar="FILE", help="run config JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisecurve",
        description=(
            "Measure how task performance degrades as transcription noise rises, "
            "and how much word-class cleaning buys back."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a full run from a config file")
    _add_config_arg(p)

    p = sub.add_parser("resume", help="continue an interrupted run")
    _add_config_arg(p)

    p = sub.add_parser("report", help="rebuild report files from existing scores")
    _add_config_arg(p)

    p = sub.add_parser("validate-config", help="check a config without running")
    _add_config_arg(p)

    p = sub.add_parser("clean-cache", help="delete cached adapter responses")
    p.add_argument("--config", metavar="FILE", help="run config JSON")
    p.add_argument("--cache-dir", metavar="DIR", help="cache directory to remove")
    return parser


def _print_run_summary(run_dir: Path) -> None:
    summary_file = run_dir / "report" / "summary.json"
    print(f"run directory: {run_dir}")
    if not summary_file.is_file():
        return
    summary = json.loads(summary_file.read_text(encoding="utf-8"))
    for metric, techniques in summary.get("analytics", {}).items():
        for technique, values in techniques.items():
            ntp = values["ntp"]
            ces = values["ces"]
            print(
                f"  {metric:>12} {technique:<14} "
                f"auc={values['auc']:.4f} "
                f"ntp={'-' if ntp is None else format(ntp, '.4f')} "
                f"ces={'-' if ces is None else format(ces, '.4f')}"
            )
    for warning in summary.get("warnings", []):
        print(f"  warning: {warning}")


def _cmd_run(args, resume: bool) -> int:
    config = load_config(args.config)
    runner = Runner(config, resume=resume)
    run_dir = runner.run()
    _print_run_summary(run_dir)
    return 0


def _cmd_report(args) -> int:
    config = load_config(args.config)
    write_report(config, RunPaths(config.run_dir))
    _print_run_summary(config.run_dir)
    return 0


def _cmd_validate(args) -> int:
    config = load_config(args.config)
    problems = validate_files(config)
    if problems:
        for problem in problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    n_variants = len(variant_keys(config))
    print(f"config ok: run_id={config.run_id}")
    print(f"  task={config.dataset.task} backend={config.noise.backend}")
    print(
        f"  levels={config.noise.levels} techniques={len(config.cleaning.techniques)} "
        f"variants={n_variants}"
    )
    print(f"  metrics={','.join(config.metrics)}")
    return 0


def _cmd_clean_cache(args) -> int:
    if args.cache_dir:
        cache_dir = Path(args.cache_dir)
    elif args.config:
        cache_dir = load_config(args.config).cache_dir
    else:
        raise ConfigError("clean-cache needs --config or --cache-dir")
    if cache_dir.is_dir():
        shutil.rmtree(cache_dir)
        print(f"removed {cache_dir}")
    else:
        print(f"nothing to remove at {cache_dir}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args, resume=False)
        if args.command == "resume":
            return _cmd_run(args, resume=True)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "validate-config":
            return _cmd_validate(args)
        return _cmd_clean_cache(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (
        DatasetError,
        AnnotationError,
        RunError,
        ReportError,
        AdapterProtocolError,
        AdapterTransportError,
        AdapterCallError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
