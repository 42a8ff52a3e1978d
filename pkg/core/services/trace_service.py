"""
Trace service for workload series.
Follows SRP - Single Responsibility: aggregate, normalize, window and synthesize demand series.
"""
from typing import List, Sequence, Union

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from core.models import NormalizedSeries, TaskSeries, WindowSet
from core.utils.config import SynthSpec
from core.utils.error_handler import ConfigError, TraceFormatError, TraceGapError
from core.utils.logging_utils import get_logger

logger = get_logger(__name__)

ArrayLike = Union[float, np.ndarray]


def aggregate(series: TaskSeries, window_minutes: int) -> TaskSeries:
    """Mean-aggregate a series into epoch-aligned windows of `window_minutes`."""
    if window_minutes <= 0 or window_minutes % series.interval_minutes != 0:
        raise TraceFormatError(
            f"{series.vm_id}: window {window_minutes} min is not a positive multiple "
            f"of the {series.interval_minutes} min interval"
        )
    if window_minutes == series.interval_minutes or len(series) == 0:
        return TaskSeries(series.vm_id, window_minutes, series.timestamps, series.demands, series.resources)

    width = window_minutes * 60
    buckets = series.timestamps // width
    present = np.unique(buckets)
    if np.any(np.diff(present) > 1):
        missing = int(present[np.argmax(np.diff(present) > 1)] + 1)
        raise TraceGapError(f"{series.vm_id}: no samples in window starting at {missing * width}")

    frame = pd.DataFrame(series.demands, columns=list(series.resources))
    means = frame.groupby(buckets, sort=True).mean()
    return TaskSeries(
        vm_id=series.vm_id,
        interval_minutes=window_minutes,
        timestamps=means.index.to_numpy(dtype=np.int64) * width,
        demands=means.to_numpy(dtype=float),
        resources=series.resources,
    )


def normalize(series: TaskSeries) -> NormalizedSeries:
    """Min-max scale every resource column into [0, 1]; constant columns map to 0."""
    if len(series) == 0:
        raise TraceFormatError(f"{series.vm_id}: cannot normalize an empty series")
    d_min = series.demands.min(axis=0)
    d_max = series.demands.max(axis=0)
    return NormalizedSeries(series, d_min, d_max, scale(series.demands, d_min, d_max))


def scale(values: ArrayLike, d_min: np.ndarray, d_max: np.ndarray, clip: bool = False) -> np.ndarray:
    """Apply existing normalization bounds to new values."""
    values = np.asarray(values, dtype=float)
    span = np.asarray(d_max, dtype=float) - np.asarray(d_min, dtype=float)
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (values - d_min) / safe, 0.0)
    return np.clip(scaled, 0.0, 1.0) if clip else scaled


def denormalize(value: ArrayLike, d_min: ArrayLike, d_max: ArrayLike) -> ArrayLike:
    if np.any(np.asarray(d_max) < np.asarray(d_min)):
        raise TraceFormatError(f"denormalize needs d_max >= d_min, got {d_min} > {d_max}")
    result = np.asarray(d_min, dtype=float) + np.asarray(value, dtype=float) * (
        np.asarray(d_max, dtype=float) - np.asarray(d_min, dtype=float)
    )
    return float(result) if result.ndim == 0 else result


def check_contiguous(series: TaskSeries) -> None:
    """Raise TraceGapError if any consecutive timestamps are more than one interval apart."""
    if len(series) < 2:
        return
    step = series.interval_minutes * 60
    gaps = np.flatnonzero(np.diff(series.timestamps) != step)
    if gaps.size:
        at = int(series.timestamps[gaps[0]])
        raise TraceGapError(f"{series.vm_id}: missing timestamp after {at}")


def make_windows(series: NormalizedSeries, n: int) -> WindowSet:
    """Sliding windows of n consecutive samples, each targeting the sample that follows."""
    if n < 1:
        raise TraceFormatError(f"window length n must be >= 1, got {n}")
    length = series.values.shape[0]
    if length < n + 1:
        raise TraceFormatError(f"{series.base.vm_id}: series of {length} samples is too short for n={n}")
    check_contiguous(series.base)
    views = sliding_window_view(series.values, n, axis=0)[:-1]  # (m, x, n)
    return WindowSet(np.ascontiguousarray(views.transpose(0, 2, 1)), series.values[n:].copy())


def synth_workload(spec: SynthSpec, seed: int) -> List[TaskSeries]:
    """Sinusoid + noise + burst generator; a pure function of (spec, seed)."""
    if spec.tasks < 0 or spec.duration_minutes <= 0 or spec.interval_minutes <= 0:
        raise ConfigError("synthetic workload needs tasks >= 0 and positive duration and interval")
    rng = np.random.default_rng(seed)
    samples = spec.samples
    minutes = np.arange(samples, dtype=float) * spec.interval_minutes
    timestamps = spec.start_timestamp + np.arange(samples, dtype=np.int64) * spec.interval_minutes * 60
    resources = tuple(spec.resources)

    series = []
    for i in range(spec.tasks):
        columns = []
        for pattern in spec.resources.values():
            base = pattern.base
            if pattern.base_spread > 0:
                base += rng.uniform(-pattern.base_spread, pattern.base_spread)
            phase = rng.uniform(0, pattern.phase_spread_minutes) if pattern.phase_spread_minutes > 0 else 0.0
            column = base + pattern.amplitude * np.sin(2 * np.pi * (minutes + phase) / pattern.period_minutes)
            if pattern.noise > 0:
                column = column + rng.normal(0.0, pattern.noise, samples)
            if pattern.burst_probability > 0:
                column = column + (rng.random(samples) < pattern.burst_probability) * pattern.burst_height
            columns.append(np.clip(column, 0.0, 1.0))
        series.append(TaskSeries(f"vm-{i:04d}", spec.interval_minutes, timestamps, np.column_stack(columns), resources))

    logger.info(f"Synthesized {spec.tasks} task(s) x {samples} sample(s) with seed={seed}")
    return series


def align(series_list: Sequence[TaskSeries], resources: Sequence[str]) -> np.ndarray:
    """Stack same-grid series into a (tasks, samples, resources) array, truncating to the shortest."""
    if not series_list:
        return np.zeros((0, 0, len(resources)))
    length = min(len(s) for s in series_list)
    reference = series_list[0].timestamps[:length]
    for s in series_list:
        if not np.array_equal(s.timestamps[:length], reference):
            raise TraceFormatError(f"{s.vm_id}: timestamps do not line up with {series_list[0].vm_id}")
        check_contiguous(s.head(length))
    return np.stack([s.select(resources).demands[:length] for s in series_list])
