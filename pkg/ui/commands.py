# ui/commands.py
"""
Subcommand handlers.
CommandRunner coordinates clients and services for one CLI invocation; business logic
stays in core.services.
"""
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.clients.artifact_client import artifact_name, load_predictors, save_predictor
from core.clients.report_client import ReportClient
from core.clients.trace_file_client import TraceFileClient, write_trace
from core.models import TaskDemand, TaskSeries, VmInstance
from core.services.autoscaler_service import autoscale, wcss_curve
from core.services.orchestrator_service import (
    compare_scenarios,
    ordering_fraction,
    prediction_report,
    prepare_traces,
    reference_capacity,
    run_suite,
)
from core.services.placement_service import PlacementProblem, build_engine
from core.services.predictor_service import OmFnnPredictor
from core.services.result_formatter import ResultFormatter
from core.services.trace_service import align, make_windows, normalize, synth_workload
from core.services.training_service import build_trainer
from core.utils.config import RunConfig
from core.utils.error_handler import EXIT_OK, ConfigError, ErrorHandler, PredictorError, ReportWriteError
from core.utils.logging_utils import get_logger
from ui.console import render_dry_run, render_summary, render_table, render_written

logger = get_logger(__name__)

IDLE_EPS = 1e-12


class CommandRunner:
    """
    Runs one subcommand against a validated RunConfig.
    Every handler returns an exit code; errors propagate to the caller for mapping.
    """

    def __init__(self, config: RunConfig, dry_run: bool = False):
        self.config = config
        self.dry_run = dry_run
        self.reports = ReportClient(config.out_dir, config.delimiter)

    @property
    def seed(self) -> int:
        return self.config.seed

    # -- inputs ------------------------------------------------------------

    def _load_traces(self, vm_ids: Optional[Sequence[str]] = None, aggregated: bool = True) -> List[TaskSeries]:
        path = self.config.require_trace()
        series = TraceFileClient(self.config.delimiter).load(path)
        if vm_ids:
            missing = sorted(set(vm_ids) - {s.vm_id for s in series})
            if missing:
                raise ConfigError(f"unknown vm id(s) {missing} in {path}")
            series = [s for s in series if s.vm_id in set(vm_ids)]
        if not series:
            raise ConfigError(f"trace file {path} holds no samples")
        return prepare_traces(series, self.config) if aggregated else series

    def _interval_demands(self, traces: Sequence[TaskSeries], interval: Optional[int]) -> Tuple[int, np.ndarray]:
        """Absolute demand of every task at one interval (default: the last)."""
        demands = align(traces, self.config.resources)
        samples = demands.shape[1]
        t = samples - 1 if interval is None else interval
        if not 0 <= t < samples:
            raise ConfigError(f"--interval must lie in [0, {samples - 1}], got {interval}")
        return t, demands[:, t] * reference_capacity(self.config)

    def _autoscale(self, traces: Sequence[TaskSeries], interval: Optional[int]):
        t, demands = self._interval_demands(traces, interval)
        busy = [i for i in range(len(traces)) if demands[i].max() > IDLE_EPS]
        if not busy:
            return t, demands, busy, None
        sim = self.config.simulation
        tasks = [TaskDemand(traces[i].vm_id, demands[i]) for i in busy]
        demand = autoscale(tasks, self.config.build_catalog(), self.seed, sim.k_max, sim.kmeans_max_iters)
        return t, demands, busy, demand

    def _plan(self, command: str, **extra) -> Dict[str, object]:
        plan = {
            "trace": self.config.trace_path,
            "out": self.config.out_dir,
            "seed": self.seed,
            "pws_minutes": self.config.pws_minutes,
        }
        plan.update(extra)
        logger.info(f"[dry-run] {command}: {plan}")
        return plan

    # -- commands ----------------------------------------------------------

    def gen(self, output: Optional[Path] = None) -> int:
        spec = self.config.synth
        target = Path(output) if output else self.reports.path("trace.csv")
        if self.dry_run:
            render_dry_run("gen", {"target": target, "tasks": spec.tasks, "samples": spec.samples, "seed": self.seed})
            return EXIT_OK
        series = synth_workload(spec, self.seed)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            write_trace(series, target, self.config.delimiter, tuple(spec.resources))
        except OSError as e:
            raise ReportWriteError(f"cannot write {target}: {e}") from e
        render_table("Synthetic workload (first 10 VMs)", ResultFormatter.trace_summary(series[:10]))
        render_written([target])
        return EXIT_OK

    def train(self, trainer_name: str = "tade", vm_ids: Optional[Sequence[str]] = None) -> int:
        if self.dry_run:
            self.config.require_trace()
            build_trainer(trainer_name)
            render_dry_run("train", self._plan("train", trainer=trainer_name, gmax=self.config.tade.gmax))
            return EXIT_OK
        traces = self._load_traces(vm_ids)
        topology = self.config.build_topology()
        tade = self.config.tade.model_copy(update={"seed": self.seed})
        backprop = self.config.backprop.model_copy(update={"seed": self.seed})

        summary = []
        for series in traces:
            normalized = normalize(series)
            windows = make_windows(normalized, topology.n)
            result = build_trainer(trainer_name, tade, backprop).train(windows, topology)
            predictor = OmFnnPredictor(topology, self.config.simulation.alpha, self.config.resources, series.vm_id)
            predictor.install(
                result.genome, normalized.d_min, normalized.d_max,
                validation_error=result.validation_fitness,
                metadata={"trainer": result.trainer},
            )
            artifact = save_predictor(
                predictor, self.reports.path(f"predictors/{artifact_name(series.vm_id)}"), self.seed, result
            )
            self.reports.written.append(artifact)
            self.reports.write_table(
                f"convergence/{artifact_name(series.vm_id)[:-5]}.csv",
                ResultFormatter.convergence_rows(result.history, self.config.resources),
            )
            row = {"vm_id": series.vm_id, "trainer": result.trainer, "generations": result.generations,
                   "stopped_early": result.stopped_early}
            for resource, value in zip(self.config.resources, result.validation_fitness):
                row[f"xi_{resource}"] = float(value)
            summary.append(row)

        self.reports.write_json("train_summary.json", {"seed": self.seed, "topology": asdict(topology), "tasks": summary})
        render_table("Training", summary)
        render_written(self.reports.written)
        return EXIT_OK

    def predict(self, predictors_dir: Optional[Path] = None, vm_ids: Optional[Sequence[str]] = None) -> int:
        directory = Path(predictors_dir) if predictors_dir else self.reports.path("predictors")
        if self.dry_run:
            self.config.require_trace()
            if not directory.is_dir():
                raise ConfigError(f"predictor directory not found: {directory}")
            render_dry_run("predict", self._plan("predict", predictors=directory))
            return EXIT_OK
        traces = self._load_traces(vm_ids)
        predictors = load_predictors(directory)
        rows = []
        for series in traces:
            predictor = predictors.get(series.vm_id)
            if predictor is None:
                logger.warning(f"no trained predictor for {series.vm_id}, skipping")
                continue
            if predictor.resources != series.resources:
                raise PredictorError(
                    f"{series.vm_id}: predictor covers {predictor.resources}, trace has {series.resources}"
                )
            forecast, padded = predictor.forecast_raw(series.demands)
            rows.extend(ResultFormatter.forecast_rows(
                series.vm_id, series.resources, forecast.predicted, forecast.padding, padded
            ))
        if not rows:
            raise PredictorError(f"no predictor in {directory} matches a VM of the trace")
        self.reports.write_table("forecasts.csv", rows)
        render_table("Next-interval forecasts", rows)
        render_written(self.reports.written)
        return EXIT_OK

    def autoscale(self, interval: Optional[int] = None) -> int:
        if self.dry_run:
            self.config.require_trace()
            render_dry_run("autoscale", self._plan("autoscale", interval=interval, k_max=self.config.simulation.k_max))
            return EXIT_OK
        traces = self._load_traces()
        t, demands, busy, demand = self._autoscale(traces, interval)
        catalog = self.config.build_catalog()
        task_ids = [traces[i].vm_id for i in busy]
        payload = {"interval": t, "tasks": len(traces), "idle_tasks": len(traces) - len(busy),
                   "k": 0, "counts": {v.name: 0 for v in catalog}, "wcss_curve": []}
        rows = []
        if demand is not None:
            coords = demands[busy] / catalog.largest.capacity
            sim = self.config.simulation
            payload.update(
                k=demand.clustering.k,
                counts=demand.counts,
                cluster_types={str(k): v for k, v in demand.cluster_types.items()},
                wcss_curve=ErrorHandler.safe_execute(
                    wcss_curve, coords, sim.k_max, self.seed, sim.kmeans_max_iters, fallback_value=[]
                ),
            )
            rows = ResultFormatter.vm_demand_rows(task_ids, demand)
        self.reports.write_table("vm_demand.csv", rows, columns=["task_id", "cluster", "vm_type"])
        self.reports.write_json("autoscale.json", payload)
        render_summary(f"Autoscaling at interval {t}", {"K": payload["k"], **payload["counts"]})
        render_written(self.reports.written)
        return EXIT_OK

    def place(self, interval: Optional[int] = None, engine: Optional[str] = None) -> int:
        name = engine or self.config.simulation.placement_engine
        if self.dry_run:
            self.config.require_trace()
            build_engine(name, self.config.ga)
            render_dry_run("place", self._plan("place", interval=interval, engine=name))
            return EXIT_OK
        traces = self._load_traces()
        t, demands, busy, demand = self._autoscale(traces, interval)
        servers = self.config.build_servers()
        payload = {"interval": t, "engine": name, "vms": len(busy), "ru": 0.0, "pw": 0.0,
                   "active_pms": 0, "history": []}
        rows = []
        if demand is not None:
            vms = [
                VmInstance(traces[i].vm_id, demand.task_types[k], float(demands[i, 0]), float(demands[i, 1]))
                for k, i in enumerate(busy)
            ]
            problem = PlacementProblem.build(servers, vms)
            allocation = build_engine(name, self.config.ga).place(problem, self.seed)
            payload.update(ru=allocation.ru, pw=allocation.pw, active_pms=allocation.active_pms,
                           history=list(allocation.history))
            rows = ResultFormatter.allocation_rows([v.vm_id for v in vms], [s.server_id for s in servers], allocation)
        self.reports.write_table("placement.csv", rows, columns=["vm_id", "server_id"])
        self.reports.write_json("placement.json", payload)
        render_summary(f"Placement at interval {t} ({name})",
                       {k: payload[k] for k in ("vms", "active_pms", "pw", "ru")})
        render_written(self.reports.written)
        return EXIT_OK

    def simulate(self) -> int:
        kinds = list(self.config.scenarios)
        if self.dry_run:
            self.config.require_trace()
            render_dry_run("simulate", self._plan(
                "simulate", scenarios=",".join(kinds), engine=self.config.simulation.placement_engine
            ))
            return EXIT_OK
        traces = self._load_traces()
        runs = run_suite(traces, self.config, self.seed, kinds)
        for kind, run in runs.items():
            self.reports.write_table(
                f"metrics_{kind}.csv", ResultFormatter.interval_rows({kind: run}, self.config.resources)
            )
        for kind, run in runs.items():
            failed = len(run.metrics) - len(run.ok_metrics)
            if failed:
                ErrorHandler.log_and_display(
                    f"{kind}: {failed} interval(s) could not be placed and are left out of the means", level="warning"
                )
        comparison = compare_scenarios(runs)
        self.reports.write_table("comparison.csv", ResultFormatter.comparison_records(comparison))
        summary = {
            "seed": self.seed,
            "pws_minutes": self.config.pws_minutes,
            "tasks": len(traces),
            "engine": self.config.simulation.placement_engine,
            "scenarios": comparison,
        }
        if len(runs) > 1:
            summary["ordering"] = {
                "pw_increasing": ordering_fraction(runs, "pw", increasing=True),
                "ru_decreasing": ordering_fraction(runs, "ru", increasing=False),
            }
        self.reports.write_json("summary.json", summary)
        render_table("Scenario comparison", ResultFormatter.comparison_table(comparison))
        render_written(self.reports.written)
        return EXIT_OK

    def report(self) -> int:
        if self.dry_run:
            self.config.require_trace()
            render_dry_run("report", self._plan(
                "report", pws_set=",".join(str(v) for v in self.config.report.pws_set)
            ))
            return EXIT_OK
        traces = self._load_traces(aggregated=False)
        rows = ResultFormatter.prediction_rows(prediction_report(traces, self.config, self.seed))
        # wall-clock columns live in their own file so the error table stays reproducible
        cost_columns = ("seconds", "peak_kib")
        errors = [{k: v for k, v in row.items() if k not in cost_columns} for row in rows]
        costs = [{k: row[k] for k in ("pws_minutes", "vm_id", "model", "trainer", *cost_columns)} for row in rows]
        self.reports.write_table("prediction_errors.csv", errors)
        self.reports.write_table("prediction_cost.csv", costs)
        self.reports.write_json("prediction_report.json", {
            "seed": self.seed, "pws_set": list(self.config.report.pws_set), "rows": errors,
        })
        render_table("Prediction report", rows)
        render_written(self.reports.written)
        return EXIT_OK
