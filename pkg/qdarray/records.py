"""Record Files

Plain-text persistence for measurement records and sample instances.

A record file starts with ``#`` header lines carrying the schema version and
the JSON-encoded label, seed, routing plan, sweep spec and metadata. The data
section has one whitespace-separated row per (channel, point): axis values,
channel, current. Currents carry 9 significant digits, which is exactly the
precision the sweep engine quantizes to, so a save/load round trip is
bit-exact.
"""

import io
import json
import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from qdarray.exceptions import RecordFormatError, UnsupportedVersionError
from qdarray.models import MeasurementRecord, RecordMetadata, RoutingPlan, SampleInstance, SweepSpec

logger = logging.getLogger(__name__)

RECORD_VERSION = 1
SAMPLE_VERSION = 1
RECORD_MAGIC = "qdarray-record"

PathLike = Union[str, Path]


def _header(record: MeasurementRecord) -> List[str]:
    def dump(model) -> str:
        return json.dumps(model.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    columns = [a.gate for a in record.spec.axes] + ["channel", "current_A"]
    return [
        f"# {RECORD_MAGIC}",
        f"# version: {RECORD_VERSION}",
        f"# label: {json.dumps(record.sample_label)}",
        f"# seed: {record.seed}",
        f"# timestamp: {json.dumps(record.timestamp)}",
        f"# routing: {dump(record.routing)}",
        f"# spec: {dump(record.spec)}",
        f"# metadata: {dump(record.metadata)}",
        f"# columns: {' '.join(columns)}",
    ]


def save_record(record: MeasurementRecord, path: PathLike) -> Path:
    """Write a record file.

    Args:
        record: Record to persist
        path: Destination file

    Returns:
        Path: The written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    axes = np.meshgrid(*(a.values() for a in record.spec.axes), indexing="ij")
    frames = []
    for channel in record.spec.channels:
        data = {a.gate: g.ravel() for a, g in zip(record.spec.axes, axes)}
        data["channel"] = np.full(record.spec.n_points, channel, dtype=int)
        data["current_A"] = np.asarray(record.currents[channel], dtype=float)
        frames.append(pd.DataFrame(data))
    table = pd.concat(frames, ignore_index=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(_header(record)) + "\n")
        table.to_csv(fh, sep=" ", header=False, index=False, float_format="%.8e", lineterminator="\n")
    logger.debug("wrote %s (%d rows)", path, len(table))
    return path


def _parse_header(lines: List[str], path: Path) -> Dict[str, str]:
    fields: Dict[str, str] = {}
    for line in lines:
        body = line[1:].strip()
        if ":" in body:
            key, _, value = body.partition(":")
            fields[key.strip()] = value.strip()
    if not lines or lines[0][1:].strip() != RECORD_MAGIC:
        raise RecordFormatError(f"{path}: not a record file")
    return fields


def load_record(path: PathLike) -> MeasurementRecord:
    """Read a record file written by ``save_record``.

    Raises:
        UnsupportedVersionError: If the schema version is not supported
        RecordFormatError: If the file is truncated or malformed
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise RecordFormatError(f"{path}: {exc}") from exc
    if not text.endswith("\n"):
        raise RecordFormatError(f"{path}: truncated (no final newline)")
    lines = text.splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    fields = _parse_header(header, path)

    version = fields.get("version")
    if version is None:
        raise RecordFormatError(f"{path}: missing version header")
    if version != str(RECORD_VERSION):
        raise UnsupportedVersionError(f"{path}: record version {version} is not supported")
    try:
        routing = RoutingPlan.model_validate_json(fields["routing"])
        spec = SweepSpec.model_validate_json(fields["spec"])
        metadata = RecordMetadata.model_validate_json(fields["metadata"])
        label = json.loads(fields["label"])
        timestamp = json.loads(fields.get("timestamp", '""'))
        seed = int(fields["seed"])
    except (KeyError, ValueError, ValidationError) as exc:
        raise RecordFormatError(f"{path}: bad header ({exc})") from exc

    n_cols = len(spec.axes) + 2
    try:
        table = pd.read_csv(
            io.StringIO(text), sep=r"\s+", comment="#", header=None,
            float_precision="round_trip", names=list(range(n_cols)),
        )
    except (ValueError, pd.errors.ParserError) as exc:
        raise RecordFormatError(f"{path}: unreadable data section ({exc})") from exc

    expected = spec.n_points * len(spec.channels)
    if len(table) != expected:
        raise RecordFormatError(f"{path}: expected {expected} data rows, found {len(table)}")
    if table.isna().to_numpy().any():
        raise RecordFormatError(f"{path}: incomplete data row")

    channel_col = table[n_cols - 2].to_numpy()
    current_col = table[n_cols - 1].to_numpy(dtype=float)
    currents: Dict[int, List[float]] = {}
    for i, channel in enumerate(spec.channels):
        block = slice(i * spec.n_points, (i + 1) * spec.n_points)
        if not np.all(channel_col[block] == channel):
            raise RecordFormatError(f"{path}: channel block {channel} is out of order")
        currents[channel] = current_col[block].tolist()
    try:
        return MeasurementRecord(
            spec=spec, routing=routing, currents=currents, metadata=metadata,
            sample_label=label, timestamp=timestamp, seed=seed,
        )
    except ValidationError as exc:
        raise RecordFormatError(f"{path}: inconsistent record ({exc})") from exc


def save_sample(sample: SampleInstance, path: PathLike) -> Path:
    """Write a sample instance as a versioned JSON document."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"schema_version": SAMPLE_VERSION, "sample": sample.model_dump(mode="json")}
    path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def load_sample(path: PathLike) -> SampleInstance:
    """Read a sample written by ``save_sample``."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RecordFormatError(f"{path}: {exc}") from exc
    version = document.get("schema_version")
    if version != SAMPLE_VERSION:
        raise UnsupportedVersionError(f"{path}: sample version {version} is not supported")
    try:
        return SampleInstance.model_validate(document["sample"])
    except (KeyError, ValidationError) as exc:
        raise RecordFormatError(f"{path}: invalid sample ({exc})") from exc
