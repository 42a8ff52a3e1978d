"""
Run configuration.
Follows SRP - Single Responsibility: validate and load experiment settings.

Defaults reproduce the reference setup: server fleet (PE, MIPS/PE, RAM, storage,
peak/idle watts), the four-type VM catalog and the predictor training table.
"""
import math
import os
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.models import RESOURCES, ServerSpec, Topology, VmCatalog, VmType
from core.utils.error_handler import ConfigError, ErrorHandler
from core.utils.logging_utils import get_logger

logger = get_logger(__name__)

DEFAULT_CONFIG_ENV = "PROACTIVE_CONFIG"

ScenarioKind = Literal["OA", "PA", "PWA", "WPWA"]
EngineName = Literal["GA", "BestFit", "RandomFit"]
SCENARIO_ORDER: Tuple[str, ...] = ("OA", "PA", "PWA", "WPWA")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ServerTypeConfig(_Strict):
    name: str
    pe: int = Field(ge=1)
    mips_per_pe: float = Field(gt=0)
    ram_gb: float = Field(gt=0)
    storage_gb: float = Field(default=0.0, ge=0)
    pw_max: float = Field(gt=0)
    pw_min: float = Field(ge=0)
    pw_idle: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check_power(self):
        if self.pw_max < self.pw_min:
            raise ValueError(f"pw_max ({self.pw_max}) must be >= pw_min ({self.pw_min})")
        return self


DEFAULT_SERVER_TYPES = [
    ServerTypeConfig(name="S1", pe=2, mips_per_pe=2660, ram_gb=4, storage_gb=160, pw_max=135, pw_min=93.7),
    ServerTypeConfig(name="S2", pe=4, mips_per_pe=3067, ram_gb=8, storage_gb=250, pw_max=113, pw_min=42.3),
    ServerTypeConfig(name="S3", pe=12, mips_per_pe=3067, ram_gb=16, storage_gb=500, pw_max=222, pw_min=58.4),
]


class FleetConfig(_Strict):
    types: List[ServerTypeConfig] = Field(default_factory=lambda: list(DEFAULT_SERVER_TYPES), min_length=1)
    count: int = Field(default=50, ge=1, le=100000)

    def build(self) -> List[ServerSpec]:
        """Round-robin over the server types until `count` machines exist."""
        servers = []
        for i in range(self.count):
            t = self.types[i % len(self.types)]
            servers.append(ServerSpec(
                server_id=f"pm-{i:04d}",
                type_name=t.name,
                pe=t.pe,
                mips_per_pe=t.mips_per_pe,
                ram_gb=t.ram_gb,
                storage_gb=t.storage_gb,
                pw_max=t.pw_max,
                pw_min=t.pw_min,
                pw_idle=t.pw_min if t.pw_idle is None else t.pw_idle,
            ))
        return servers


class VmTypeConfig(_Strict):
    name: str
    pe: int = Field(ge=1)
    mips: float = Field(gt=0)
    ram_gb: float = Field(gt=0)
    storage_gb: float = Field(default=0.0, ge=0)


DEFAULT_VM_TYPES = [
    VmTypeConfig(name="small", pe=1, mips=500, ram_gb=0.5, storage_gb=40),
    VmTypeConfig(name="medium", pe=2, mips=1000, ram_gb=1, storage_gb=60),
    VmTypeConfig(name="large", pe=3, mips=1500, ram_gb=2, storage_gb=80),
    VmTypeConfig(name="Xlarge", pe=4, mips=2000, ram_gb=3, storage_gb=100),
]


class TopologyConfig(_Strict):
    n: int = Field(default=3, ge=1, le=64)
    p: int = Field(default=5, ge=1, le=256)
    q: int = Field(default=1, ge=1, le=1)

    def build(self, x: int) -> Topology:
        return Topology(n=self.n, p=self.p, q=self.q, x=x)


class TadeConfig(_Strict):
    population: int = Field(default=10, ge=4, le=10000)
    gmax: int = Field(default=200, ge=0)
    gamma: Tuple[float, float, float] = (0.33, 0.33, 0.34)
    omega: Tuple[float, float] = (0.5, 0.5)
    mr_bounds: Tuple[float, float] = (0.1, 0.8)
    cr_bounds: Tuple[float, float] = (0.1, 0.5)
    learning_period: int = Field(default=10, ge=1)
    no_improve_patience: int = Field(default=30, ge=1)
    improvement_threshold: float = Field(default=1e-9, ge=0)
    train_fraction: float = Field(default=0.8, gt=0, lt=1)
    init_range: float = Field(default=1.0, gt=0)
    probability_form: Literal["corrected", "verbatim"] = "corrected"
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_probabilities(self):
        for name in ("gamma", "omega"):
            values = getattr(self, name)
            if any(v < 0 for v in values) or not math.isclose(sum(values), 1.0, abs_tol=1e-9):
                raise ValueError(f"{name} must be non-negative and sum to 1, got {values}")
        lo, hi = self.mr_bounds
        if not 0 <= lo < hi <= 1:
            raise ValueError(f"mr_bounds must satisfy 0 <= low < high <= 1, got {self.mr_bounds}")
        lo, hi = self.cr_bounds
        if not 0 <= lo < hi <= 1:
            raise ValueError(f"cr_bounds must satisfy 0 <= low < high <= 1, got {self.cr_bounds}")
        return self

    @property
    def z(self) -> int:
        """Update threshold: control parameters regenerate when at most this many members improved."""
        return (2 * self.population) // 5


class BackpropConfig(_Strict):
    learning_rate: float = Field(default=0.5, ge=0)
    epochs: int = Field(default=200, ge=0)
    seed: int = Field(default=0, ge=0)


class GaConfig(_Strict):
    population: int = Field(default=20, ge=2, le=10000)
    gmax: int = Field(default=200, ge=0)
    crossover_rate: float = Field(default=1.0, ge=0, le=1)
    mutation_rate: float = Field(default=0.05, ge=0, le=1)
    seed_with_best_fit: bool = True
    seed: int = Field(default=0, ge=0)


class ResourcePattern(_Strict):
    base: float = Field(default=0.3, ge=0, le=1)
    base_spread: float = Field(default=0.0, ge=0, le=1)
    amplitude: float = Field(default=0.15, ge=0, le=1)
    period_minutes: float = Field(default=1440.0, gt=0)
    phase_spread_minutes: float = Field(default=0.0, ge=0)
    noise: float = Field(default=0.02, ge=0, le=1)
    burst_probability: float = Field(default=0.0, ge=0, le=1)
    burst_height: float = Field(default=0.0, ge=0, le=1)


def _default_patterns() -> Dict[str, ResourcePattern]:
    return {
        "cpu": ResourcePattern(base=0.3, base_spread=0.25, amplitude=0.15, noise=0.02),
        "mem": ResourcePattern(base=0.25, base_spread=0.2, amplitude=0.1, noise=0.01),
    }


class SynthSpec(_Strict):
    tasks: int = Field(default=20, ge=0, le=100000)
    duration_minutes: int = Field(default=24 * 60, gt=0)
    interval_minutes: int = Field(default=5, gt=0)
    start_timestamp: int = Field(default=0, ge=0)
    resources: Dict[str, ResourcePattern] = Field(default_factory=_default_patterns, min_length=1)

    @model_validator(mode="after")
    def _check_duration(self):
        if self.duration_minutes < self.interval_minutes:
            raise ValueError(
                f"duration_minutes ({self.duration_minutes}) must be >= interval_minutes ({self.interval_minutes})"
            )
        return self

    @property
    def samples(self) -> int:
        return self.duration_minutes // self.interval_minutes


class SimulationConfig(_Strict):
    warmup_intervals: int = Field(default=10, ge=1)
    history_window: int = Field(default=48, ge=2)
    retrain_generations: int = Field(default=5, ge=0)
    max_intervals: Optional[int] = Field(default=None, ge=1)
    k_max: int = Field(default=8, ge=1, le=64)
    kmeans_max_iters: int = Field(default=100, ge=1)
    alpha: float = Field(default=0.8, gt=0.5, le=1)
    reference_capacity: Dict[str, float] = Field(default_factory=lambda: {"cpu": 2000.0, "mem": 3.0})
    placement_engine: EngineName = "GA"

    @model_validator(mode="after")
    def _check_reference(self):
        if any(v <= 0 for v in self.reference_capacity.values()):
            raise ValueError(f"reference_capacity values must be > 0, got {self.reference_capacity}")
        return self


class ReportConfig(_Strict):
    pws_set: List[int] = Field(default_factory=lambda: [10, 20, 30, 60], min_length=1)
    max_tasks: int = Field(default=3, ge=1)

    @model_validator(mode="after")
    def _check_pws(self):
        if any(v <= 0 for v in self.pws_set):
            raise ValueError(f"pws_set entries must be > 0, got {self.pws_set}")
        return self


class RunConfig(_Strict):
    trace_path: Optional[Path] = None
    out_dir: Path = Path("out")
    pws_minutes: int = Field(default=5, gt=0)
    seed: int = Field(default=0, ge=0)
    delimiter: str = Field(default=",", min_length=1, max_length=1)
    resources: Tuple[str, ...] = RESOURCES
    fleet: FleetConfig = Field(default_factory=FleetConfig)
    catalog: List[VmTypeConfig] = Field(default_factory=lambda: list(DEFAULT_VM_TYPES), min_length=1)
    topology: TopologyConfig = Field(default_factory=TopologyConfig)
    tade: TadeConfig = Field(default_factory=TadeConfig)
    backprop: BackpropConfig = Field(default_factory=BackpropConfig)
    ga: GaConfig = Field(default_factory=GaConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    report: ReportConfig = Field(default_factory=ReportConfig)
    synth: SynthSpec = Field(default_factory=SynthSpec)
    scenarios: List[ScenarioKind] = Field(default_factory=lambda: list(SCENARIO_ORDER), min_length=1)

    @model_validator(mode="after")
    def _check_consistency(self):
        if len(set(self.scenarios)) != len(self.scenarios):
            raise ValueError(f"scenarios must be unique, got {self.scenarios}")
        caps = [(t.mips, t.ram_gb) for t in self.catalog]
        for (c0, m0), (c1, m1) in zip(caps, caps[1:]):
            if not (c1 > c0 and m1 > m0):
                raise ValueError("catalog must be strictly increasing in mips and ram_gb")
        if tuple(self.resources) != RESOURCES:
            raise ValueError(f"resources must be {list(RESOURCES)} (placement packs cpu and mem), got {list(self.resources)}")
        missing = [r for r in self.resources if r not in self.simulation.reference_capacity]
        if missing:
            raise ValueError(f"simulation.reference_capacity has no entry for {missing}")
        needed = self.topology.n + 2
        if self.simulation.warmup_intervals < needed:
            raise ValueError(f"simulation.warmup_intervals must be >= topology.n + 2 ({needed})")
        if self.simulation.history_window < needed:
            raise ValueError(f"simulation.history_window must be >= topology.n + 2 ({needed})")
        return self

    def build_catalog(self) -> VmCatalog:
        return VmCatalog(tuple(VmType(t.name, t.pe, t.mips, t.ram_gb, t.storage_gb) for t in self.catalog))

    def build_servers(self) -> List[ServerSpec]:
        return self.fleet.build()

    def build_topology(self, x: Optional[int] = None) -> Topology:
        return self.topology.build(len(self.resources) if x is None else x)

    def require_trace(self) -> Path:
        """Trace path that must exist before trace-consuming commands run."""
        if self.trace_path is None:
            raise ConfigError("trace_path is not set (pass --trace or set trace_path in the config)")
        if not Path(self.trace_path).is_file():
            raise ConfigError(f"trace file not found: {self.trace_path}")
        return Path(self.trace_path)


def _validate(data: dict, source: str) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        details = ErrorHandler.format_validation_errors(e.errors())
        raise ConfigError(f"invalid configuration in {source}", details=details) from e


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Load a YAML config; without a path, PROACTIVE_CONFIG or built-in defaults apply."""
    path = path or os.getenv(DEFAULT_CONFIG_ENV)
    if not path:
        logger.debug("No config file given, using defaults")
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"config file {path} is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a mapping at the top level")
    logger.info(f"Loaded config from {path}")
    return _validate(data, str(path))


def with_overrides(config: RunConfig, **overrides) -> RunConfig:
    """
    Apply command-line overrides and re-validate.
    None values are ignored; dotted keys ("simulation.placement_engine") reach nested sections.
    """
    updates = {k: v for k, v in overrides.items() if v is not None}
    if not updates:
        return config
    data = config.model_dump()
    for key, value in updates.items():
        *parents, leaf = key.split(".")
        section = data
        for part in parents:
            if not isinstance(section.get(part), dict):
                raise ConfigError(f"unknown configuration section '{part}' in override '{key}'")
            section = section[part]
        section[leaf] = value
    return _validate(data, "command-line overrides")
