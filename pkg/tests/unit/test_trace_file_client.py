"""
Unit tests for the trace file client (parsing and writing the delimited trace format).
"""
import io

import numpy as np
import pytest

from core.clients.trace_file_client import TraceFileClient, parse_trace, write_trace
from core.services.trace_service import synth_workload
from core.utils.config import SynthSpec
from core.utils.error_handler import TraceFormatError


def _parse(text, **kwargs):
    return parse_trace(io.StringIO(text), **kwargs)


class TestParseTrace:

    def test_header_only_gives_empty_collection(self):
        assert _parse("timestamp,vm_id,cpu,mem\n") == []

    def test_single_vm_in_order(self):
        series = _parse("timestamp,vm_id,cpu\n0,a,0.1\n300,a,0.2\n600,a,0.3\n")
        assert len(series) == 1
        assert series[0].vm_id == "a"
        np.testing.assert_allclose(series[0].column("cpu"), [0.1, 0.2, 0.3])
        assert series[0].interval_minutes == 5

    def test_interleaved_vms_are_split_and_sorted(self):
        text = "timestamp,vm_id,cpu,mem\n300,a,0.2,0.1\n0,b,0.5,0.5\n0,a,0.1,0.1\n300,b,0.6,0.4\n"
        series = _parse(text)
        assert [s.vm_id for s in series] == ["a", "b"]
        np.testing.assert_array_equal(series[0].timestamps, [0, 300])
        np.testing.assert_allclose(series[0].column("cpu"), [0.1, 0.2])
        np.testing.assert_allclose(series[1].column("mem"), [0.5, 0.4])

    @pytest.mark.parametrize(
        "text,line",
        [
            ("timestamp,vm_id,cpu\n0,a,0.1\n300,a,abc\n", 3),
            ("timestamp,vm_id,cpu\n0,a,-0.1\n", 2),
            ("timestamp,vm_id,cpu\n0,a,0.1\n0,a,0.2\n", 3),
            ("timestamp,vm_id,cpu\n0,,0.1\n", 2),
            ("timestamp,vm_id,cpu\n0.5,a,0.1\n", 2),
        ],
    )
    def test_bad_rows_name_their_line(self, text, line):
        with pytest.raises(TraceFormatError) as info:
            _parse(text)
        assert info.value.line == line
        assert f"line {line}" in str(info.value)

    @pytest.mark.parametrize(
        "text,line",
        [
            ("timestamp,vm_id,cpu\n0,a,0.1\n\n300,a,abc\n", 4),
            ("timestamp,vm_id,cpu\n\n\n0,a,-0.1\n", 4),
            ("timestamp,vm_id,cpu\n0,a,0.1\n\n0,a,0.2\n", 4),
        ],
    )
    def test_line_numbers_count_blank_lines(self, text, line):
        with pytest.raises(TraceFormatError) as info:
            _parse(text)
        assert info.value.line == line

    def test_blank_lines_are_skipped(self):
        series = _parse("timestamp,vm_id,cpu\n0,a,0.1\n\n300,a,0.2\n\n")
        np.testing.assert_allclose(series[0].column("cpu"), [0.1, 0.2])

    def test_bad_header(self):
        with pytest.raises(TraceFormatError):
            _parse("time,vm,cpu\n0,a,0.1\n")

    def test_custom_delimiter(self):
        series = _parse("timestamp;vm_id;cpu\n0;a;0.25\n", delimiter=";")
        assert series[0].column("cpu")[0] == 0.25


class TestWriteTrace:

    def test_empty_collection_writes_header(self):
        buffer = io.StringIO()
        write_trace([], buffer)
        assert buffer.getvalue() == "timestamp,vm_id,cpu,mem\n"

    def test_generated_trace_round_trips(self, tmp_path):
        series = synth_workload(SynthSpec(tasks=3, duration_minutes=60), seed=2)
        path = tmp_path / "trace.csv"
        client = TraceFileClient()
        client.save(series, path)
        parsed = client.load(path)
        assert [s.vm_id for s in parsed] == [s.vm_id for s in series]
        for a, b in zip(series, parsed):
            np.testing.assert_array_equal(a.timestamps, b.timestamps)
            np.testing.assert_array_equal(a.demands, b.demands)
            assert a.interval_minutes == b.interval_minutes
