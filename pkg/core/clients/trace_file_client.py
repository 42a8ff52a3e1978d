"""
Trace file client.
Reads and writes the delimited workload format: header `timestamp,vm_id,<resource>...`,
one sample per row, timestamps in epoch seconds.
"""
import re
from pathlib import Path
from typing import List, Optional, Sequence, TextIO, Union

import numpy as np
import pandas as pd

from core.interfaces import IWorkloadSource
from core.models import RESOURCES, TaskSeries
from core.utils.error_handler import TraceFormatError
from core.utils.logging_utils import get_logger

logger = get_logger(__name__)

DEFAULT_INTERVAL_MINUTES = 5
KEY_COLUMNS = ("timestamp", "vm_id")

Source = Union[str, Path, TextIO]


class TraceFileClient(IWorkloadSource):
    """Client for delimited trace files."""

    def __init__(self, delimiter: str = ",", interval_minutes: Optional[int] = None):
        self.delimiter = delimiter
        self.interval_minutes = interval_minutes

    def load(self, source: Source) -> List[TaskSeries]:
        return parse_trace(source, self.delimiter, self.interval_minutes)

    def save(self, series: Sequence[TaskSeries], target: Source) -> None:
        write_trace(series, target, self.delimiter)


def _line_of(row_index: int) -> int:
    # header is line 1
    return int(row_index) + 2


def _numeric(frame: pd.DataFrame, column: str) -> pd.Series:
    stripped = frame[column].str.strip()
    parsed = pd.to_numeric(stripped, errors="coerce")
    bad = parsed.isna() | ~np.isfinite(parsed.fillna(0.0))
    if bad.any():
        row = bad.idxmax()
        raise TraceFormatError(f"column '{column}' has non-numeric value {frame.at[row, column]!r}", _line_of(row))
    # float() parsing keeps written reprs bit-exact
    return stripped.astype(float)


def _infer_interval(vm_id: str, timestamps: np.ndarray) -> int:
    if timestamps.size < 2:
        return DEFAULT_INTERVAL_MINUTES
    step = int(np.diff(timestamps).min())
    if step % 60 != 0:
        raise TraceFormatError(f"{vm_id}: sample spacing of {step} s is not a whole number of minutes")
    return step // 60


def parse_trace(source: Source, delimiter: str = ",", interval_minutes: Optional[int] = None) -> List[TaskSeries]:
    """Parse a trace into one time-sorted TaskSeries per vm_id, in order of first appearance."""
    try:
        # blank lines stay as rows so row index maps to file line
        frame = pd.read_csv(
            source, sep=delimiter, dtype=str, keep_default_na=False, skipinitialspace=True, skip_blank_lines=False
        )
    except pd.errors.EmptyDataError:
        raise TraceFormatError("trace has no header row", 1)
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise TraceFormatError(f"malformed row: {e}", int(match.group(1)) if match else None) from e

    columns = [c.strip() for c in frame.columns]
    frame.columns = columns
    if tuple(columns[:2]) != KEY_COLUMNS or len(columns) < 3:
        raise TraceFormatError(f"header must start with timestamp,vm_id and name at least one resource, got {columns}", 1)
    resources = tuple(columns[2:])
    if len(set(resources)) != len(resources):
        raise TraceFormatError(f"duplicate resource columns in header {columns}", 1)
    if frame.empty:
        return []
    blank_rows = frame.fillna("").apply(lambda column: column.str.strip().eq("")).all(axis=1)
    if blank_rows.all():
        return []
    if blank_rows.any():
        logger.debug(f"Skipping {int(blank_rows.sum())} blank line(s)")
        frame = frame[~blank_rows]

    timestamps = _numeric(frame, "timestamp")
    fractional = (timestamps % 1) != 0
    if fractional.any():
        row = fractional.idxmax()
        raise TraceFormatError(f"timestamp {frame.at[row, 'timestamp']!r} is not whole seconds", _line_of(row))
    vm_ids = frame["vm_id"].str.strip()
    blank = vm_ids.eq("") | vm_ids.isna()
    if blank.any():
        raise TraceFormatError("empty vm_id", _line_of(blank.idxmax()))

    data = pd.DataFrame({"timestamp": timestamps.astype(np.int64), "vm_id": vm_ids})
    for resource in resources:
        values = _numeric(frame, resource)
        negative = values < 0
        if negative.any():
            row = negative.idxmax()
            raise TraceFormatError(f"negative {resource} demand {values[row]}", _line_of(row))
        data[resource] = values.astype(float)

    duplicated = data.duplicated(subset=list(KEY_COLUMNS))
    if duplicated.any():
        row = duplicated.idxmax()
        raise TraceFormatError(
            f"duplicate sample for vm_id={data.at[row, 'vm_id']} timestamp={data.at[row, 'timestamp']}", _line_of(row)
        )

    series = []
    for vm_id, group in data.groupby("vm_id", sort=False):
        group = group.sort_values("timestamp", kind="stable")
        ts = group["timestamp"].to_numpy(dtype=np.int64)
        interval = interval_minutes or _infer_interval(vm_id, ts)
        series.append(TaskSeries(vm_id, interval, ts, group[list(resources)].to_numpy(dtype=float), resources))

    logger.info(f"Parsed {len(data)} sample(s) for {len(series)} VM(s)")
    return series


def write_trace(
    series: Sequence[TaskSeries],
    target: Source,
    delimiter: str = ",",
    resources: Sequence[str] = RESOURCES,
) -> None:
    """Write series losslessly; an empty collection yields a header-only file."""
    if series:
        resources = series[0].resources
    frames = []
    for s in series:
        if s.resources != tuple(resources):
            raise TraceFormatError(f"{s.vm_id}: resources {s.resources} differ from {tuple(resources)}")
        frame = pd.DataFrame(s.demands, columns=list(resources))
        frame.insert(0, "vm_id", s.vm_id)
        frame.insert(0, "timestamp", s.timestamps)
        frames.append(frame)
    columns = list(KEY_COLUMNS) + list(resources)
    table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=columns)
    table.to_csv(target, sep=delimiter, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(table)} sample(s) for {len(series)} VM(s)")
