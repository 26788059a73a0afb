"""cybermobility コマンドライン入口

終了コード: 0 = 成功, 2 = 使い方・設定の誤り, 1 = 実行時の失敗
結果の要約は stdout に 1 行の JSON、ログは stderr に出します。
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from app.mobility import __version__
from app.mobility.pipeline import run_step, write_artifacts
from commands import register_subcommands
from commands.options import config_overrides
from config import LOG_LEVEL, ConfigError, RunConfig, load_run_config
from services.run_manifest_service import MANIFEST_NAME, RunManifestService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class CliArgumentParser(argparse.ArgumentParser):
    """argparse の既定（メッセージを出して SystemExit）ではなく例外にする。"""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(
        prog="cybermobility",
        description="Human mobility analysis of online community activity logs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="step", metavar="subcommand", parser_class=CliArgumentParser)
    subparsers.required = True
    register_subcommands(subparsers)
    return parser


def _configure_logging(level: Optional[str]) -> None:
    name = (level or LOG_LEVEL).upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        raise UsageError(f"unknown log level: {level}")
    logging.basicConfig(
        level=numeric,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _json_default(value: Any) -> Any:
    # numpy scalars in step summaries
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _emit(payload: Dict[str, Any]) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True, ensure_ascii=False, default=_json_default) + "\n")
    sys.stdout.flush()


def _error_message(e: Exception) -> str:
    if isinstance(e, ValidationError):
        parts = []
        for err in e.errors():
            where = ".".join(str(p) for p in err.get("loc", ())) or "config"
            parts.append(f"{where}: {err.get('msg')}")
        return "; ".join(parts)
    return str(e)


def _fail(
    code: str,
    message: str,
    exit_code: int,
    manifest: Optional[RunManifestService],
    output_dir: Optional[Path],
) -> int:
    logger.error("%s: %s", code, message)
    if manifest is not None and output_dir is not None:
        manifest.fail(code, message)
        try:
            manifest.write(output_dir)
        except OSError as e:
            logger.error("could not write %s: %s", MANIFEST_NAME, e)
    _emit({"error": {"code": code, "message": message}})
    return exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _configure_logging(args.log_level)
    except UsageError as e:
        return _fail("usage", str(e), EXIT_USAGE, None, None)

    step: str = args.step
    manifest = RunManifestService(subcommand=step)
    output_dir = Path(args.output_dir) if args.output_dir else None

    try:
        config: RunConfig = load_run_config(config_overrides(args), args.config_file)
    except (ValidationError, ConfigError) as e:
        return _fail("config", _error_message(e), EXIT_USAGE, manifest, output_dir)

    output_dir = config.output_dir
    try:
        manifest.start(config.inputs, config.snapshot())
        result = run_step(step, config)
        written: List[Path] = write_artifacts(result, output_dir)
    except Exception as e:
        logger.exception("%s failed", step)
        return _fail("runtime", _error_message(e), EXIT_FAILURE, manifest, output_dir)

    for name, seconds in result.timings.items():
        manifest.record_step(name, seconds, result.step_rows.get(name))
    manifest.outputs = [p.name for p in written]
    manifest.warnings = list(result.warnings)
    manifest.write(output_dir)

    _emit(
        {
            "status": "ok",
            "subcommand": step,
            "output_dir": str(output_dir),
            "outputs": sorted(manifest.outputs),
            "warnings": len(result.warnings),
            "summary": result.summary,
        }
    )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
