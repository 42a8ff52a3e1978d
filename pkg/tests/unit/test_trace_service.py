"""
Unit tests for the trace service: aggregation, normalization, windowing and synthesis.
"""
import numpy as np
import pytest

from core.models import TaskSeries
from core.services.trace_service import (
    aggregate,
    align,
    denormalize,
    make_windows,
    normalize,
    scale,
    synth_workload,
)
from core.utils.config import ResourcePattern, SynthSpec
from core.utils.error_handler import TraceFormatError, TraceGapError
from tests.conftest import make_series


class TestAggregate:

    def test_native_window_is_identity(self):
        series = make_series(values=[0.1, 0.2, 0.3], resources=("cpu",))
        out = aggregate(series, 5)
        np.testing.assert_array_equal(out.demands, series.demands)
        np.testing.assert_array_equal(out.timestamps, series.timestamps)

    def test_two_samples_in_one_window_average(self):
        series = make_series(values=[0.2, 0.4], resources=("cpu",))
        out = aggregate(series, 10)
        assert len(out) == 1
        assert out.demands[0, 0] == pytest.approx(0.3)
        assert out.interval_minutes == 10

    def test_hour_window_over_twelve_samples(self):
        values = np.linspace(0.05, 0.6, 12)
        out = aggregate(make_series(values=values, resources=("cpu",)), 60)
        assert len(out) == 1
        assert out.demands[0, 0] == pytest.approx(values.mean())

    def test_windows_are_epoch_aligned(self):
        # starts 5 minutes into a 10-minute bucket
        series = make_series(values=[0.2, 0.4, 0.6], start=300, resources=("cpu",))
        out = aggregate(series, 10)
        np.testing.assert_array_equal(out.timestamps, [0, 600])
        np.testing.assert_allclose(out.demands[:, 0], [0.2, 0.5])

    @pytest.mark.parametrize("window,start", [(15, 0), (30, 600), (60, 1500)])
    def test_window_means_preserve_total_demand(self, window, start):
        values = np.random.default_rng(window).random((50, 2))
        series = make_series(values=values, start=start)
        out = aggregate(series, window)
        per_window = np.bincount(series.timestamps // (window * 60) - series.timestamps[0] // (window * 60))
        np.testing.assert_allclose((out.demands * per_window[:, None]).sum(axis=0), values.sum(axis=0))

    def test_rejects_window_not_multiple_of_interval(self):
        with pytest.raises(TraceFormatError):
            aggregate(make_series(values=[0.1, 0.2], resources=("cpu",)), 7)

    def test_empty_window_raises_gap_error(self):
        timestamps = np.array([0, 300, 1800, 2100], dtype=np.int64)
        series = TaskSeries("vm-gap", 5, timestamps, np.full((4, 1), 0.5), ("cpu",))
        with pytest.raises(TraceGapError):
            aggregate(series, 10)


class TestNormalize:

    @pytest.mark.parametrize(
        "values,expected",
        [
            ([2, 4, 6], [0, 0.5, 1]),
            ([5, 5, 5], [0, 0, 0]),
            ([0.1, 0.7, 0.4], [0, 1, 0.5]),
        ],
    )
    def test_min_max_scaling(self, values, expected):
        out = normalize(make_series(values=values, resources=("cpu",)))
        np.testing.assert_allclose(out.values[:, 0], expected, atol=1e-12)

    def test_bounds_are_per_resource(self):
        out = normalize(make_series(values=[[1, 10], [3, 30]]))
        np.testing.assert_array_equal(out.d_min, [1, 10])
        np.testing.assert_array_equal(out.d_max, [3, 30])

    def test_scale_with_clip(self):
        np.testing.assert_allclose(scale([-1.0, 0.5, 3.0], 0.0, 2.0, clip=True), [0.0, 0.25, 1.0])


@pytest.mark.parametrize("value,expected", [(0, 2), (1, 6), (0.5, 4)])
def test_denormalize_endpoints_and_midpoint(value, expected):
    assert denormalize(value, 2, 6) == pytest.approx(expected)


def test_denormalize_inverts_normalize():
    series = make_series(values=[[0.3, 1.0], [0.9, 2.0], [0.6, 1.5]])
    norm = normalize(series)
    np.testing.assert_allclose(denormalize(norm.values, norm.d_min, norm.d_max), series.demands)


class TestMakeWindows:

    def test_minimal_length_gives_one_window(self):
        windows = make_windows(normalize(make_series(values=[1, 2, 3, 4], resources=("cpu",))), 3)
        assert len(windows) == 1

    def test_windows_overlap(self):
        values = np.arange(6, dtype=float)
        windows = make_windows(normalize(make_series(values=values, resources=("cpu",))), 3)
        assert len(windows) == 3
        scaled = values / 5.0
        for k, window in enumerate(windows):
            np.testing.assert_allclose(window.inputs[:, 0], scaled[k:k + 3])
            assert window.target[0] == pytest.approx(scaled[k + 3])

    def test_multi_resource_shapes(self):
        windows = make_windows(normalize(make_series(values=np.random.default_rng(0).random((8, 2)))), 3)
        assert windows.inputs.shape[1:] == (3, 2)
        assert windows.targets.shape[1:] == (2,)
        assert windows[0].inputs.size == 6

    def test_too_short_series(self):
        with pytest.raises(TraceFormatError):
            make_windows(normalize(make_series(values=[1, 2, 3], resources=("cpu",))), 3)

    def test_gap_inside_series(self):
        timestamps = np.array([0, 300, 600, 1200, 1500], dtype=np.int64)
        series = TaskSeries("vm-gap", 5, timestamps, np.arange(5, dtype=float).reshape(-1, 1), ("cpu",))
        with pytest.raises(TraceGapError):
            make_windows(normalize(series), 2)


class TestSynthWorkload:

    def test_flat_generator_gives_constant_series(self):
        spec = SynthSpec(tasks=2, duration_minutes=60, resources={
            "cpu": ResourcePattern(base=0.4, amplitude=0.0, noise=0.0),
            "mem": ResourcePattern(base=0.2, amplitude=0.0, noise=0.0),
        })
        for series in synth_workload(spec, seed=3):
            np.testing.assert_allclose(series.demands, [[0.4, 0.2]] * 12)

    def test_same_seed_is_bit_identical(self):
        spec = SynthSpec(tasks=3, duration_minutes=120)
        first, second = synth_workload(spec, 11), synth_workload(spec, 11)
        for a, b in zip(first, second):
            assert a.vm_id == b.vm_id
            np.testing.assert_array_equal(a.demands, b.demands)

    def test_zero_tasks(self):
        assert synth_workload(SynthSpec(tasks=0), 0) == []

    def test_autocorrelation_peaks_at_period(self):
        spec = SynthSpec(tasks=1, duration_minutes=5 * 480, resources={
            "cpu": ResourcePattern(base=0.5, amplitude=0.3, period_minutes=240, noise=0.002),
        })
        column = synth_workload(spec, 5)[0].column("cpu")
        centered = column - column.mean()
        lags = np.arange(24, 72)
        acf = [np.dot(centered[:-lag], centered[lag:]) / (len(centered) - lag) for lag in lags]
        # period of 240 minutes is 48 samples
        assert lags[int(np.argmax(acf))] == 48


def test_align_stacks_series():
    a = make_series("a", [[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]])
    b = make_series("b", [[0.7, 0.8], [0.9, 1.0]])
    stacked = align([a, b], ("cpu", "mem"))
    assert stacked.shape == (2, 2, 2)
    np.testing.assert_array_equal(stacked[1], b.demands)
