"""
Orchestrator service.
Follows SRP - Single Responsibility: run the periodic forecast -> autoscale -> place loop
for each scenario and compare the scenarios.

Scenarios:
    OA    actual demand, autoscaled VMs reserving that demand
    PA    padded forecasts, autoscaled VMs reserving the forecast
    PWA   padded forecasts, one fixed-size VM per task (smallest covering type)
    WPWA  no prediction, one fixed-size VM per task covering its historical peak
"""
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.models import (
    IntervalMetrics,
    NormalizedSeries,
    ServerSpec,
    TaskDemand,
    TaskSeries,
    VmCatalog,
    VmInstance,
)
from core.services.autoscaler_service import autoscale, size_per_task
from core.services.placement_service import (
    PlacementProblem,
    build_engine,
    cost,
    feasible,
    server_loads,
)
from core.services.predictor_service import OmFnnPredictor
from core.services.trace_service import aggregate, align, make_windows, normalize, scale
from core.services.training_service import TadeTrainer, build_trainer
from core.utils.config import SCENARIO_ORDER, RunConfig
from core.utils.error_handler import (
    CapacityError,
    ClusteringError,
    InfeasibleInstanceError,
    ResourceManagerError,
    ScenarioError,
)
from core.utils.logging_utils import get_logger

logger = get_logger(__name__)

IDLE_EPS = 1e-12
BASELINE = "WPWA"


@dataclass(frozen=True)
class Scenario:
    kind: str
    placement_engine: str = "GA"

    def __post_init__(self):
        if self.kind not in SCENARIO_ORDER:
            raise ScenarioError(f"unknown scenario '{self.kind}', expected one of {SCENARIO_ORDER}")

    @property
    def uses_prediction(self) -> bool:
        return self.kind in ("PA", "PWA")

    @property
    def autoscaling(self) -> bool:
        return self.kind in ("OA", "PA")


@dataclass
class ForecastBook:
    """Padded forecasts (tasks, samples, x) in trace units, and squared errors in normalized units."""

    start: int
    padded: np.ndarray
    errors: np.ndarray


@dataclass
class ScenarioRun:
    scenario: Scenario
    tasks: int
    metrics: List[IntervalMetrics] = field(default_factory=list)

    @property
    def ok_metrics(self) -> List[IntervalMetrics]:
        return [m for m in self.metrics if m.ok]

    def mean(self, attribute: str) -> float:
        values = [getattr(m, attribute) for m in self.ok_metrics]
        return float(np.mean(values)) if values else 0.0

    def summary(self) -> Dict[str, object]:
        ok = self.ok_metrics
        vm_totals = Counter()
        for m in ok:
            vm_totals.update(m.vm_counts)
        return {
            "scenario": self.scenario.kind,
            "engine": self.scenario.placement_engine,
            "tasks": self.tasks,
            "intervals": len(self.metrics),
            "errors": len(self.metrics) - len(ok),
            "mean_ru": self.mean("ru"),
            "mean_pw": self.mean("pw"),
            "mean_active_pms": self.mean("active_pms"),
            "capacity_violations": int(sum(m.capacity_violations for m in ok)),
            "mean_churn": self.mean("churn"),
            "vm_totals": dict(sorted(vm_totals.items())),
        }


def _interval_seed(seed: int, interval: int) -> int:
    return int(np.random.SeedSequence([seed, interval]).generate_state(1)[0])


def reference_capacity(config: RunConfig) -> np.ndarray:
    """Absolute size of one demand unit per resource (trace values are fractions of it)."""
    try:
        return np.array([config.simulation.reference_capacity[r] for r in config.resources], dtype=float)
    except KeyError as e:
        raise ScenarioError(f"no reference capacity for resource {e}") from e


def prepare_traces(traces: Sequence[TaskSeries], config: RunConfig) -> List[TaskSeries]:
    """Aggregate every series to the configured prediction window size."""
    return [aggregate(s.select(config.resources), config.pws_minutes) for s in traces]


def forecast_tasks(traces: Sequence[TaskSeries], config: RunConfig, seed: int) -> ForecastBook:
    """
    Per-VM online forecasting: train on the warm-up history, then every interval retrain from
    the previous population on the sliding history window, forecast, and observe the actual.
    """
    demands = align(traces, config.resources)
    tasks, samples, x = demands.shape
    sim = config.simulation
    start = sim.warmup_intervals
    end = samples if sim.max_intervals is None else min(samples, start + sim.max_intervals)
    if samples <= start:
        raise ScenarioError(f"traces cover {samples} interval(s); warm-up needs more than {start}")
    topology = config.build_topology(x)
    padded = np.zeros_like(demands)
    errors = np.zeros_like(demands)
    task_seeds = np.random.SeedSequence(seed).generate_state(max(tasks, 1))

    for i, series in enumerate(traces):
        trainer = TadeTrainer(config.tade.model_copy(update={"seed": int(task_seeds[i])}))
        predictor = OmFnnPredictor(topology, sim.alpha, config.resources, series.vm_id)
        state = None
        for t in range(start, end):
            lo = max(0, t - sim.history_window)
            history = demands[i, lo:t]
            window_series = TaskSeries(series.vm_id, series.interval_minutes, series.timestamps[lo:t], history, config.resources)
            d_min, d_max = history.min(axis=0), history.max(axis=0)
            windows = make_windows(NormalizedSeries(window_series, d_min, d_max, scale(history, d_min, d_max)), topology.n)
            generations = None if state is None else sim.retrain_generations
            result = trainer.train(windows, topology, initial_state=state, generations=generations)
            predictor.install(
                result.genome, d_min, d_max,
                validation_error=result.validation_fitness if state is None else None,
                metadata={"trainer": result.trainer},
            )
            state = result.state
            _, padded[i, t] = predictor.forecast_raw(history)
            errors[i, t] = predictor.observe(demands[i, t])
        logger.debug(f"forecasts ready for {series.vm_id}")
    logger.info(f"Forecast {tasks} task(s) over intervals {start}..{end - 1}")
    return ForecastBook(start=start, padded=padded, errors=errors)


def _estimates(scenario: Scenario, demands: np.ndarray, t: int, forecasts: Optional[ForecastBook]) -> np.ndarray:
    if scenario.kind == "OA":
        return demands[:, t]
    if scenario.uses_prediction:
        return forecasts.padded[:, t]
    return demands[:, :t].max(axis=1)


def _run_interval(
    scenario: Scenario,
    t: int,
    timestamp: int,
    task_ids: Sequence[str],
    estimate: np.ndarray,
    actual: np.ndarray,
    servers: Sequence[ServerSpec],
    catalog: VmCatalog,
    config: RunConfig,
    seed: int,
) -> Tuple[IntervalMetrics, Dict[str, int]]:
    metrics = IntervalMetrics(interval=t, timestamp=timestamp, vm_counts={v.name: 0 for v in catalog})
    busy = np.flatnonzero(estimate.max(axis=1) > IDLE_EPS)
    idle = np.setdiff1d(np.arange(len(task_ids)), busy)
    metrics.tasks_idle = int(idle.size)
    # an idle estimate leaves real demand unserved
    metrics.capacity_violations = int(np.count_nonzero(actual[idle].max(axis=1) > IDLE_EPS)) if idle.size else 0
    if busy.size == 0:
        return metrics, {}

    if scenario.autoscaling:
        demand = autoscale(
            [TaskDemand(task_ids[i], estimate[i]) for i in busy],
            catalog, seed, config.simulation.k_max, config.simulation.kmeans_max_iters,
        )
        types = list(demand.task_types)
        reserved = estimate[busy]
    else:
        types = size_per_task(estimate[busy], catalog)
        reserved = np.stack([catalog.by_name(name).capacity for name in types])
    capacity = np.stack([catalog.by_name(name).capacity for name in types])
    if np.any(reserved > capacity + 1e-9):
        raise ScenarioError(f"interval {t}: a VM reserves more than its type provides")

    vms = [VmInstance(task_ids[i], types[k], float(reserved[k, 0]), float(reserved[k, 1])) for k, i in enumerate(busy)]
    problem = PlacementProblem.build(servers, vms)
    allocation = build_engine(scenario.placement_engine, config.ga).place(problem, seed)
    if not feasible(allocation.genes, problem).ok:
        raise InfeasibleInstanceError(f"interval {t}: {scenario.placement_engine} returned an overloaded allocation")

    charged = np.minimum(actual[busy], capacity)
    charged_problem = problem.with_demands(charged[:, 0], charged[:, 1])
    charged_cost = cost(allocation.genes, charged_problem)
    cpu, mem, hosted = server_loads(allocation.genes, charged_problem)

    metrics.ru = charged_cost.ru
    metrics.pw = charged_cost.pw
    metrics.active_pms = int(np.count_nonzero(hosted))
    metrics.tasks_placed = int(busy.size)
    metrics.capacity_violations += int(np.count_nonzero(np.any(actual[busy] > capacity + 1e-9, axis=1)))
    for name in types:
        metrics.vm_counts[name] += 1
    if sum(metrics.vm_counts.values()) != busy.size:
        raise ScenarioError(f"interval {t}: VM counts do not match the {busy.size} busy task(s)")
    placement = {task_ids[i]: int(allocation.genes[k]) for k, i in enumerate(busy)}
    return metrics, placement


def run_scenario(
    scenario: Scenario,
    traces: Sequence[TaskSeries],
    servers: Sequence[ServerSpec],
    catalog: VmCatalog,
    config: RunConfig,
    seed: int,
    forecasts: Optional[ForecastBook] = None,
) -> ScenarioRun:
    """Periodic estimate, size and place loop; infeasible intervals are recorded as error entries."""
    if not traces:
        raise ScenarioError("no traces to simulate")
    demands = align(traces, config.resources)
    tasks, samples, _ = demands.shape
    if samples < 2:
        raise ScenarioError(f"traces cover {samples} interval(s); at least 2 are needed")
    sim = config.simulation
    start = sim.warmup_intervals
    if samples <= start:
        raise ScenarioError(f"traces cover {samples} interval(s); warm-up needs more than {start}")
    end = samples if sim.max_intervals is None else min(samples, start + sim.max_intervals)
    if scenario.uses_prediction and forecasts is None:
        forecasts = forecast_tasks(traces, config, seed)

    reference = reference_capacity(config)
    task_ids = [s.vm_id for s in traces]
    timestamps = traces[0].timestamps
    run = ScenarioRun(scenario, tasks)
    previous: Dict[str, int] = {}
    started = time.perf_counter()
    for t in range(start, end):
        estimate = _estimates(scenario, demands, t, forecasts) * reference
        actual = demands[:, t] * reference
        try:
            metrics, placement = _run_interval(
                scenario, t, int(timestamps[t]), task_ids, estimate, actual,
                servers, catalog, config, _interval_seed(seed, t),
            )
        except (InfeasibleInstanceError, CapacityError, ClusteringError) as e:
            logger.warning(f"[{scenario.kind}] interval {t} failed: {e}")
            run.metrics.append(IntervalMetrics(interval=t, timestamp=int(timestamps[t]), error=str(e)))
            previous = {}
            continue
        if scenario.uses_prediction:
            metrics.prediction_error = tuple(float(v) for v in forecasts.errors[:, t].mean(axis=0))
        if previous:
            moved = set(previous) ^ set(placement)
            moved |= {k for k in set(previous) & set(placement) if previous[k] != placement[k]}
            metrics.churn = len(moved)
        previous = placement
        run.metrics.append(metrics)
        logger.debug(
            f"[{scenario.kind}] t={t} pw={metrics.pw:.1f} ru={metrics.ru:.3f} "
            f"pms={metrics.active_pms} violations={metrics.capacity_violations}"
        )
    logger.info(
        f"[{scenario.kind}/{scenario.placement_engine}] {len(run.metrics)} interval(s) in "
        f"{time.perf_counter() - started:.1f}s: mean PW={run.mean('pw'):.1f} W, mean RU={run.mean('ru'):.3f}"
    )
    return run


def run_suite(
    traces: Sequence[TaskSeries],
    config: RunConfig,
    seed: Optional[int] = None,
    scenarios: Optional[Sequence[str]] = None,
) -> Dict[str, ScenarioRun]:
    """Run the configured scenarios on one trace; forecasts are shared by PA and PWA."""
    seed = config.seed if seed is None else seed
    kinds = [k for k in SCENARIO_ORDER if k in (scenarios or config.scenarios)]
    servers = config.build_servers()
    catalog = config.build_catalog()
    forecasts = None
    if any(Scenario(k).uses_prediction for k in kinds):
        forecasts = forecast_tasks(traces, config, seed)
    return {
        kind: run_scenario(Scenario(kind, config.simulation.placement_engine), traces, servers, catalog, config, seed, forecasts)
        for kind in kinds
    }


def compare_scenarios(runs: Mapping[str, ScenarioRun]) -> List[Dict[str, object]]:
    """Per-scenario means plus percentage savings relative to WPWA, in OA, PA, PWA, WPWA order."""
    if not runs:
        raise ScenarioError("no scenario results to compare")
    lengths = {kind: [m.interval for m in run.metrics] for kind, run in runs.items()}
    first = next(iter(lengths.values()))
    for kind, intervals in lengths.items():
        if intervals != first:
            raise ScenarioError(f"scenario {kind} covers {len(intervals)} interval(s), expected {len(first)}")

    baseline = runs.get(BASELINE)
    rows = []
    for kind in [k for k in SCENARIO_ORDER if k in runs] + [k for k in runs if k not in SCENARIO_ORDER]:
        row = runs[kind].summary()
        if baseline is not None:
            base_pw, base_ru = baseline.mean("pw"), baseline.mean("ru")
            row["pw_saving_pct"] = (base_pw - row["mean_pw"]) / base_pw * 100.0 if base_pw > 0 else 0.0
            row["ru_gain_pct"] = (row["mean_ru"] - base_ru) / base_ru * 100.0 if base_ru > 0 else 0.0
        else:
            row["pw_saving_pct"] = None
            row["ru_gain_pct"] = None
        rows.append(row)
    return rows


def ordering_fraction(runs: Mapping[str, ScenarioRun], attribute: str = "pw", increasing: bool = True) -> float:
    """Share of intervals where the attribute is monotone along OA, PA, PWA, WPWA (ties allowed)."""
    kinds = [k for k in SCENARIO_ORDER if k in runs]
    series = [runs[k].metrics for k in kinds]
    total = hits = 0
    for row in zip(*series):
        if any(not m.ok for m in row):
            continue
        values = [getattr(m, attribute) for m in row]
        tol = 1e-9 * max(1.0, max(abs(v) for v in values))
        pairs = zip(values, values[1:])
        good = all(a <= b + tol for a, b in pairs) if increasing else all(a + tol >= b for a, b in pairs)
        total += 1
        hits += int(good)
    return hits / total if total else 1.0


# ---------------------------------------------------------------------------
# Prediction report
# ---------------------------------------------------------------------------

@dataclass
class PredictionRow:
    pws_minutes: int
    vm_id: str
    model: str
    trainer: str
    errors: Dict[str, float]
    seconds: float
    peak_bytes: int


def estimate_training_bytes(population: int, genome_length: int, windows: int, n: int, x: int) -> int:
    """Working-set estimate: population, mutants, two children per member, fitness and windows."""
    genomes = population * genome_length * 4
    return 8 * (genomes + population * x * 3 + windows * (n + 1) * x)


def _fit(trainer_name: str, series: TaskSeries, config: RunConfig, seed: int):
    windows = make_windows(normalize(series), config.topology.n)
    topology = config.build_topology(series.x)
    tade = config.tade.model_copy(update={"seed": seed, "no_improve_patience": max(1, config.tade.gmax + 1)})
    backprop = config.backprop.model_copy(update={"seed": seed})
    trainer = build_trainer(trainer_name, tade, backprop)
    result = trainer.train(windows, topology)
    population = 1 if trainer_name == "backprop" else tade.population
    peak = estimate_training_bytes(population, topology.genome_length, len(windows), topology.n, topology.x)
    return result, peak


def compare_predictors(series: TaskSeries, config: RunConfig, seed: int, trainer: str = "tade") -> List[PredictionRow]:
    """One multi-output predictor against one single-output predictor per resource, same seed and budget."""
    pws = series.interval_minutes
    multi, multi_peak = _fit(trainer, series, config, seed)
    rows = [PredictionRow(
        pws, series.vm_id, "OM-FNN", trainer,
        {r: float(v) for r, v in zip(series.resources, multi.validation_fitness)},
        multi.elapsed_seconds, multi_peak,
    )]
    siso_errors, siso_seconds, siso_peak = {}, 0.0, 0
    for resource in series.resources:
        single, peak = _fit(trainer, series.select([resource]), config, seed)
        siso_errors[resource] = float(single.validation_fitness[0])
        siso_seconds += single.elapsed_seconds
        siso_peak += peak
    rows.append(PredictionRow(pws, series.vm_id, "SISO", trainer, siso_errors, siso_seconds, siso_peak))
    return rows


def prediction_report(
    traces: Sequence[TaskSeries],
    config: RunConfig,
    seed: Optional[int] = None,
    trainers: Sequence[str] = ("tade", "sade", "backprop"),
) -> List[PredictionRow]:
    """
    Per prediction window size: OM-FNN vs per-resource SISO (errors, time, memory) with the
    TaDE trainer, plus OM-FNN errors under each comparator trainer.
    """
    seed = config.seed if seed is None else seed
    rows: List[PredictionRow] = []
    for pws in config.report.pws_set:
        for series in list(traces)[: config.report.max_tasks]:
            try:
                aggregated = aggregate(series.select(config.resources), pws)
                rows.extend(compare_predictors(aggregated, config, seed))
                for name in trainers:
                    if name == "tade":
                        continue
                    result, peak = _fit(name, aggregated, config, seed)
                    rows.append(PredictionRow(
                        pws, series.vm_id, "OM-FNN", name,
                        {r: float(v) for r, v in zip(aggregated.resources, result.validation_fitness)},
                        result.elapsed_seconds, peak,
                    ))
            except ResourceManagerError as e:
                logger.warning(f"prediction report skips {series.vm_id} at {pws} min: {e}")
    return rows
