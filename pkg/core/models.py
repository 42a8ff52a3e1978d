"""
Runtime domain types shared by the services.
Plain dataclasses over numpy arrays; configuration documents live in core.utils.config.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.utils.error_handler import CapacityError, PredictorError, TraceFormatError

RESOURCES: Tuple[str, ...] = ("cpu", "mem")


@dataclass(frozen=True, eq=False)
class TaskSeries:
    """Per-VM resource-demand time series; demands are fractions of the reference capacity."""

    vm_id: str
    interval_minutes: int
    timestamps: np.ndarray
    demands: np.ndarray
    resources: Tuple[str, ...] = RESOURCES

    def __post_init__(self):
        timestamps = np.asarray(self.timestamps, dtype=np.int64).reshape(-1)
        demands = np.asarray(self.demands, dtype=float)
        if demands.ndim == 1:
            demands = demands.reshape(-1, 1)
        if self.interval_minutes <= 0:
            raise TraceFormatError(f"{self.vm_id}: interval must be positive, got {self.interval_minutes}")
        if demands.shape != (timestamps.size, len(self.resources)):
            raise TraceFormatError(
                f"{self.vm_id}: demand shape {demands.shape} does not match "
                f"{timestamps.size} samples x {len(self.resources)} resources"
            )
        if timestamps.size > 1 and np.any(np.diff(timestamps) <= 0):
            raise TraceFormatError(f"{self.vm_id}: timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "demands", demands)
        object.__setattr__(self, "resources", tuple(self.resources))

    def __len__(self) -> int:
        return int(self.timestamps.size)

    @property
    def x(self) -> int:
        return len(self.resources)

    def column(self, resource: str) -> np.ndarray:
        return self.demands[:, self.resources.index(resource)]

    def head(self, count: int) -> "TaskSeries":
        """First `count` samples as a new series."""
        return TaskSeries(
            self.vm_id, self.interval_minutes, self.timestamps[:count], self.demands[:count], self.resources
        )

    def select(self, resources: Sequence[str]) -> "TaskSeries":
        """Single- or multi-resource projection (used for SISO predictors)."""
        idx = [self.resources.index(r) for r in resources]
        return TaskSeries(self.vm_id, self.interval_minutes, self.timestamps, self.demands[:, idx], tuple(resources))


@dataclass(frozen=True, eq=False)
class NormalizedSeries:
    base: TaskSeries
    d_min: np.ndarray
    d_max: np.ndarray
    values: np.ndarray

    @property
    def x(self) -> int:
        return self.base.x


@dataclass(frozen=True, eq=False)
class TrainingWindow:
    inputs: np.ndarray  # (n, x)
    target: np.ndarray  # (x,)


class WindowSet(Sequence):
    """Stacked training windows: inputs (m, n, x) and targets (m, x)."""

    def __init__(self, inputs: np.ndarray, targets: np.ndarray):
        inputs = np.asarray(inputs, dtype=float)
        targets = np.asarray(targets, dtype=float)
        if inputs.ndim != 3 or targets.ndim != 2 or inputs.shape[0] != targets.shape[0] or inputs.shape[2] != targets.shape[1]:
            raise PredictorError(f"window shapes disagree: inputs {inputs.shape}, targets {targets.shape}")
        self.inputs = inputs
        self.targets = targets

    @classmethod
    def from_windows(cls, windows: Sequence[TrainingWindow]) -> "WindowSet":
        if isinstance(windows, WindowSet):
            return windows
        if not windows:
            raise PredictorError("no training windows")
        return cls(np.stack([w.inputs for w in windows]), np.stack([w.target for w in windows]))

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    def __getitem__(self, item: Union[int, slice]):
        if isinstance(item, slice):
            return WindowSet(self.inputs[item], self.targets[item])
        return TrainingWindow(self.inputs[item], self.targets[item])

    def __iter__(self) -> Iterator[TrainingWindow]:
        for i in range(len(self)):
            yield self[i]

    @property
    def n(self) -> int:
        return int(self.inputs.shape[1])

    @property
    def x(self) -> int:
        return int(self.inputs.shape[2])

    def split(self, train_fraction: float) -> Tuple["WindowSet", "WindowSet"]:
        """Chronological split; both parts keep at least one window."""
        m = len(self)
        if m < 2:
            raise PredictorError(f"samples too few to split: {m} window(s)")
        cut = int(round(train_fraction * m))
        cut = min(max(cut, 1), m - 1)
        return self[:cut], self[cut:]


@dataclass(frozen=True)
class Topology:
    n: int
    p: int
    q: int = 1
    x: int = 1

    def __post_init__(self):
        for name in ("n", "p", "q", "x"):
            if getattr(self, name) < 1:
                raise PredictorError(f"topology {name} must be >= 1, got {getattr(self, name)}")
        if self.q != 1:
            raise PredictorError(f"only single-step forecasts are supported (q=1), got q={self.q}")

    @property
    def channel_size(self) -> int:
        return (self.n + 1) * self.p + self.p * self.q

    @property
    def genome_length(self) -> int:
        return self.x * self.channel_size


@dataclass(frozen=True, eq=False)
class Forecast:
    predicted: np.ndarray
    padding: np.ndarray
    padded: np.ndarray


@dataclass(frozen=True)
class VmType:
    name: str
    pe: int
    mips: float
    ram_gb: float
    storage_gb: float = 0.0

    @property
    def capacity(self) -> np.ndarray:
        return np.array([self.mips, self.ram_gb], dtype=float)


@dataclass(frozen=True)
class VmCatalog:
    """VM types ordered by capacity (strictly increasing on every resource)."""

    types: Tuple[VmType, ...]

    def __post_init__(self):
        if not self.types:
            raise CapacityError("VM catalog is empty")
        caps = self.capacities
        if len(self.types) > 1 and np.any(np.diff(caps, axis=0) <= 0):
            raise CapacityError("VM catalog must be strictly increasing on every resource")

    def __len__(self) -> int:
        return len(self.types)

    def __iter__(self):
        return iter(self.types)

    @property
    def capacities(self) -> np.ndarray:
        return np.stack([t.capacity for t in self.types])

    @property
    def largest(self) -> VmType:
        return self.types[-1]

    def by_name(self, name: str) -> VmType:
        for vm_type in self.types:
            if vm_type.name == name:
                return vm_type
        raise CapacityError(f"unknown VM type '{name}'")

    def smallest_covering(self, demand: np.ndarray) -> VmType:
        demand = np.asarray(demand, dtype=float)
        fits = np.all(self.capacities >= demand - 1e-12, axis=1)
        if not fits.any():
            raise CapacityError(
                f"demand exceeds largest instance: {demand.tolist()} > {self.largest.capacity.tolist()}"
            )
        return self.types[int(np.argmax(fits))]


@dataclass(frozen=True)
class ServerSpec:
    server_id: str
    type_name: str
    pe: int
    mips_per_pe: float
    ram_gb: float
    storage_gb: float
    pw_max: float
    pw_min: float
    pw_idle: float

    @property
    def cpu_capacity(self) -> float:
        return self.pe * self.mips_per_pe

    @property
    def power_density(self) -> float:
        """Dynamic watts per MIPS of capacity."""
        return (self.pw_max - self.pw_min) / self.cpu_capacity

    def power_at(self, cpu_util: float) -> float:
        return self.pw_idle + (self.pw_max - self.pw_min) * cpu_util


@dataclass(frozen=True, eq=False)
class TaskDemand:
    """Per-task demand in absolute units (MIPS, GB)."""

    task_id: str
    demand: np.ndarray


@dataclass(frozen=True)
class VmInstance:
    """A VM to place; cpu/mem are the capacity it reserves on its host."""

    vm_id: str
    vm_type: str
    cpu: float
    mem: float


@dataclass(frozen=True, eq=False)
class Clustering:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    wcss: float
    wcss_history: Tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class VmDemand:
    counts: Dict[str, int]
    cluster_types: Dict[int, str]
    task_types: Tuple[str, ...]
    clustering: Optional[Clustering] = None

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True, eq=False)
class Allocation:
    genes: np.ndarray
    ru: float
    pw: float
    active_pms: int
    history: Tuple[float, ...] = ()

    def server_of(self, vm_index: int) -> int:
        return int(self.genes[vm_index])


@dataclass(frozen=True, eq=False)
class ParetoFronts:
    fronts: List[List[int]]
    ranks: np.ndarray  # 1-based rank per member


@dataclass
class IntervalMetrics:
    interval: int
    timestamp: int
    ru: float = 0.0
    pw: float = 0.0
    active_pms: int = 0
    vm_counts: Dict[str, int] = field(default_factory=dict)
    prediction_error: Optional[Tuple[float, ...]] = None
    capacity_violations: int = 0
    tasks_placed: int = 0
    tasks_idle: int = 0
    churn: int = 0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None
