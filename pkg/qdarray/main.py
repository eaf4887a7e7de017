"""Command Line Interface

Subcommands ``synth``, ``measure``, ``extract``, ``stats`` and ``pipeline``.
Every command reads the same JSON configuration; each writes under the
output directory and can be rerun independently with identical results.
"""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence

from pydantic import ValidationError

from qdarray import __version__
from qdarray.campaign import MANIFEST_NAME, SAMPLE_NAME, Manifest, measure_sample, sample_dir, synthesize
from qdarray.config import OutputFormat, PipelineConfig, load_config
from qdarray.exceptions import ConfigurationError, QDArrayError
from qdarray.records import load_sample, save_sample
from qdarray.reports import (
    EXTRACTION_NAME,
    STATISTICS_NAME,
    ExtractionReport,
    StatisticsReport,
    build_statistics,
    extract_sample,
    load_extraction,
    write_json,
    write_plots,
    write_tables,
)
from qdarray.settings import RuntimeSettings, configure_logging

logger = logging.getLogger(__name__)

COMMANDS = ("synth", "measure", "extract", "stats", "pipeline")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _map(func: Callable, items: Sequence, jobs: int) -> List:
    """Apply func to every item, across processes when jobs > 1; order is kept."""
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as executor:
        return list(executor.map(func, items))


# Commands
def cmd_synth(config: PipelineConfig, out: Path) -> List[Path]:
    """Write one sample file per configured sample."""
    paths = []
    for spec in config.samples:
        sample = synthesize(spec, config)
        paths.append(save_sample(sample, sample_dir(out, spec.label) / SAMPLE_NAME))
        logger.info("synthesized sample %s (t1 = %.1f nm)", spec.label, spec.t1)
    return paths


def _measure_one(label: str, config: PipelineConfig, out: Path) -> Manifest:
    sample = load_sample(sample_dir(out, label) / SAMPLE_NAME)
    return measure_sample(sample, config, out)


def cmd_measure(config: PipelineConfig, out: Path, jobs: int = 1) -> List[Manifest]:
    """Measure every synthesized sample; sample files must exist."""
    labels = [spec.label for spec in config.samples]
    return _map(partial(_measure_one, config=config, out=out), labels, jobs)


def _extract_one(label: str, config: PipelineConfig, out: Path) -> ExtractionReport:
    report = extract_sample(config.sample(label), config, out)
    write_json(report, sample_dir(out, label) / EXTRACTION_NAME)
    return report


def _existing(config: PipelineConfig, out: Path, name: str) -> List[str]:
    labels = []
    for spec in config.samples:
        if (sample_dir(out, spec.label) / name).exists():
            labels.append(spec.label)
        else:
            logger.warning("%s: no %s under %s, skipped", spec.label, name, out)
    return labels


def cmd_extract(config: PipelineConfig, out: Path, jobs: int = 1) -> List[ExtractionReport]:
    """Extraction report for every sample with a manifest."""
    labels = _existing(config, out, MANIFEST_NAME)
    if not labels:
        raise ConfigurationError(f"no measurement records to extract under {out}")
    return _map(partial(_extract_one, config=config, out=out), labels, jobs)


def cmd_stats(
    config: PipelineConfig,
    out: Path,
    fmt: OutputFormat = OutputFormat.TABLE,
    hashsalt: str = "qdarray",
) -> StatisticsReport:
    """Statistics report, CSV tables and (optionally) SVG plots."""
    labels = _existing(config, out, EXTRACTION_NAME)
    if not labels:
        raise ConfigurationError(f"no extraction reports under {out}")
    reports = [load_extraction(sample_dir(out, label) / EXTRACTION_NAME) for label in labels]
    report, tables = build_statistics(reports, config.statistics)
    write_json(report, out / STATISTICS_NAME)
    write_tables(tables, out)
    if fmt == OutputFormat.VECTOR_PLOT:
        write_plots(report, tables, out, hashsalt)
    logger.info("statistics of %d samples written to %s", len(reports), out)
    return report


def cmd_pipeline(
    config: PipelineConfig,
    out: Path,
    jobs: int = 1,
    fmt: OutputFormat = OutputFormat.TABLE,
    hashsalt: str = "qdarray",
) -> StatisticsReport:
    cmd_synth(config, out)
    cmd_measure(config, out, jobs)
    cmd_extract(config, out, jobs)
    return cmd_stats(config, out, fmt, hashsalt)


# Argument parsing
def build_parser(settings: RuntimeSettings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdarray",
        description="Simulate and characterize silicon quantum-dot arrays.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synth": "Synthesize one sample per oxide condition.",
        "measure": "Run the row-by-row measurement protocol on synthesized samples.",
        "extract": "Extract thresholds, bias points and diamonds from the records.",
        "stats": "Aggregate extraction reports into array statistics.",
        "pipeline": "Run synth, measure, extract and stats in sequence.",
    }
    for name in COMMANDS:
        sub = subparsers.add_parser(name, help=helps[name])
        sub.add_argument("--config", required=True, metavar="PATH")
        sub.add_argument("--out", default=None, metavar="DIR", help="overrides output_dir of the config")
        sub.add_argument("--seed", type=int, default=None, metavar="U64", help="overrides master_seed")
        sub.add_argument("--jobs", type=int, default=settings.jobs, metavar="N")
        sub.add_argument("--format", choices=[f.value for f in OutputFormat], default=settings.output_format)
        sub.add_argument("--log-level", type=str.upper, default=settings.log_level, choices=LOG_LEVELS)
    return parser


def _run(args: argparse.Namespace, settings: RuntimeSettings) -> None:
    if args.jobs < 1:
        raise ConfigurationError("--jobs must be at least 1")
    config = load_config(args.config, {"master_seed": args.seed})
    out = Path(args.out) if args.out else config.output_path
    fmt = OutputFormat(args.format)
    if args.command == "synth":
        cmd_synth(config, out)
    elif args.command == "measure":
        cmd_measure(config, out, args.jobs)
    elif args.command == "extract":
        cmd_extract(config, out, args.jobs)
    elif args.command == "stats":
        cmd_stats(config, out, fmt, settings.svg_hashsalt)
    else:
        cmd_pipeline(config, out, args.jobs, fmt, settings.svg_hashsalt)


def main(argv: Optional[Iterable[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    try:
        settings = RuntimeSettings()
    except ValidationError as exc:
        configure_logging()
        logger.error("invalid runtime settings: %s", exc)
        return ConfigurationError.exit_code
    args = build_parser(settings).parse_args(list(argv) if argv is not None else None)
    configure_logging(args.log_level, settings.log_format)
    try:
        _run(args, settings)
    except QDArrayError as exc:
        logger.error("%s", exc.detail)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
