"""
File-format clients: workload traces, predictor artifacts and report files.
"""
from .trace_file_client import TraceFileClient, parse_trace, write_trace
from .artifact_client import PredictorDocument, load_predictor, save_predictor
from .report_client import ReportClient

__all__ = [
    'TraceFileClient',
    'parse_trace',
    'write_trace',
    'PredictorDocument',
    'load_predictor',
    'save_predictor',
    'ReportClient',
]
