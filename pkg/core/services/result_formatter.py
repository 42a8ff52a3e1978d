"""
Result formatting service for simulation outputs.
Follows SRP - Single Responsibility: turn domain results into flat table rows.
"""
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from core.models import Allocation, IntervalMetrics, TaskSeries, VmDemand
from core.utils.logging_utils import get_logger

logger = get_logger(__name__)


class ResultFormatter:
    """Flattens metrics, comparisons and allocations into rows for CSV files and console tables."""

    # Column headings for the comparison table
    COMPARISON_LABELS = {
        "scenario": "Scenario",
        "engine": "Engine",
        "intervals": "Intervals",
        "errors": "Errors",
        "mean_pw": "Mean PW (W)",
        "mean_ru": "Mean RU",
        "mean_active_pms": "Active PMs",
        "capacity_violations": "Violations",
        "pw_saving_pct": "PW saving vs WPWA (%)",
        "ru_gain_pct": "RU gain vs WPWA (%)",
    }

    @staticmethod
    def _round(value: Any, digits: int = 4) -> Any:
        if value is None:
            return None
        if isinstance(value, (float, np.floating)):
            return round(float(value), digits)
        return value

    @staticmethod
    def interval_row(scenario: str, metrics: IntervalMetrics, resources: Sequence[str]) -> Dict[str, Any]:
        """One per-interval record; prediction errors spread into one column per resource."""
        row = {
            "scenario": scenario,
            "interval": metrics.interval,
            "timestamp": metrics.timestamp,
            "ru": ResultFormatter._round(metrics.ru, 6),
            "pw": ResultFormatter._round(metrics.pw, 4),
            "active_pms": metrics.active_pms,
            "tasks_placed": metrics.tasks_placed,
            "tasks_idle": metrics.tasks_idle,
            "capacity_violations": metrics.capacity_violations,
            "churn": metrics.churn,
        }
        for name, count in sorted(metrics.vm_counts.items()):
            row[f"vm_{name}"] = count
        for k, resource in enumerate(resources):
            error = metrics.prediction_error[k] if metrics.prediction_error else None
            row[f"error_{resource}"] = ResultFormatter._round(error, 8)
        row["error"] = metrics.error or ""
        return row

    @staticmethod
    def interval_rows(runs: Mapping[str, Any], resources: Sequence[str]) -> List[Dict[str, Any]]:
        rows = []
        for kind, run in runs.items():
            rows.extend(ResultFormatter.interval_row(kind, m, resources) for m in run.metrics)
        return rows

    @staticmethod
    def comparison_table(rows: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
        """Human-facing comparison rows with labelled headings."""
        table = []
        for row in rows:
            table.append({
                label: ResultFormatter._round(row.get(key), 2)
                for key, label in ResultFormatter.COMPARISON_LABELS.items()
            })
        return table

    @staticmethod
    def comparison_records(rows: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
        """Comparison rows for CSV: nested VM totals become one column per type."""
        records = []
        for row in rows:
            record = {k: ResultFormatter._round(v, 6) for k, v in row.items() if k != "vm_totals"}
            for name, count in row.get("vm_totals", {}).items():
                record[f"vm_{name}"] = count
            records.append(record)
        return records

    @staticmethod
    def prediction_rows(rows: Sequence[Any]) -> List[Dict[str, Any]]:
        formatted = []
        for row in rows:
            record = {
                "pws_minutes": row.pws_minutes,
                "vm_id": row.vm_id,
                "model": row.model,
                "trainer": row.trainer,
            }
            for resource, value in row.errors.items():
                record[f"xi_{resource}"] = ResultFormatter._round(value, 8)
            record["seconds"] = ResultFormatter._round(row.seconds, 4)
            record["peak_kib"] = round(row.peak_bytes / 1024.0, 1)
            formatted.append(record)
        return formatted

    @staticmethod
    def convergence_rows(history: Sequence[Any], resources: Sequence[str]) -> List[Dict[str, Any]]:
        """Per-generation trainer log, with that generation's success counters when recorded."""
        rows = []
        for record in history:
            row = {"generation": record.generation, "best_aggregate": record.best_aggregate}
            for resource, value in zip(resources, record.best_fitness):
                row[f"best_{resource}"] = value
            for k, value in enumerate(record.gamma, start=1):
                row[f"gamma_{k}"] = value
            for k, value in enumerate(record.omega, start=1):
                row[f"omega_{k}"] = value
            row["mean_mr"] = record.mean_mr
            row["mean_cr"] = record.mean_cr
            row["updated"] = record.updated
            counters = record.counters
            if counters is not None:
                for name in ("sm", "fm", "cs", "cf"):
                    for k, value in enumerate(getattr(counters, name), start=1):
                        row[f"{name}_{k}"] = int(value)
            rows.append(row)
        return rows

    @staticmethod
    def forecast_rows(
        vm_id: str,
        resources: Sequence[str],
        predicted: np.ndarray,
        padding: np.ndarray,
        padded_raw: np.ndarray,
        actual: Optional[np.ndarray] = None,
    ) -> List[Dict[str, Any]]:
        rows = []
        for k, resource in enumerate(resources):
            rows.append({
                "vm_id": vm_id,
                "resource": resource,
                "predicted": ResultFormatter._round(predicted[k], 6),
                "padding": ResultFormatter._round(padding[k], 6),
                "padded_demand": ResultFormatter._round(padded_raw[k], 6),
                "actual": None if actual is None else ResultFormatter._round(actual[k], 6),
            })
        return rows

    @staticmethod
    def vm_demand_rows(task_ids: Sequence[str], demand: VmDemand) -> List[Dict[str, Any]]:
        labels = demand.clustering.labels if demand.clustering is not None else [None] * len(task_ids)
        return [
            {"task_id": task_id, "cluster": None if label is None else int(label), "vm_type": vm_type}
            for task_id, label, vm_type in zip(task_ids, labels, demand.task_types)
        ]

    @staticmethod
    def allocation_rows(vm_ids: Sequence[str], server_ids: Sequence[str], allocation: Allocation) -> List[Dict[str, Any]]:
        return [
            {"vm_id": vm_id, "server_id": server_ids[int(gene)]}
            for vm_id, gene in zip(vm_ids, allocation.genes)
        ]

    @staticmethod
    def trace_summary(series: Sequence[TaskSeries]) -> List[Dict[str, Any]]:
        """Per-VM sample count and mean/peak demand per resource."""
        rows = []
        for s in series:
            row = {"vm_id": s.vm_id, "samples": len(s), "interval_minutes": s.interval_minutes}
            for resource in s.resources:
                column = s.column(resource)
                row[f"mean_{resource}"] = ResultFormatter._round(column.mean() if len(s) else 0.0, 4)
                row[f"peak_{resource}"] = ResultFormatter._round(column.max() if len(s) else 0.0, 4)
            rows.append(row)
        logger.debug(f"trace_summary - {len(rows)} series")
        return rows
