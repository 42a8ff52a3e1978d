"""
OM-FNN predictor service.
Follows SRP - Single Responsibility: genome encoding, forward evaluation, fitness and padding.

Genome layout: x weight-disjoint channel blocks. Each block is the (n+1) x p input-to-hidden
matrix (last row = bias) in row-major order followed by the p x q hidden-to-output weights.
"""
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.models import RESOURCES, Forecast, Topology, TrainingWindow, WindowSet
from core.services.trace_service import denormalize, scale
from core.utils.error_handler import PredictorError
from core.utils.logging_utils import get_logger

logger = get_logger(__name__)

ERROR_HISTORY_LIMIT = 64
Windows = Union[WindowSet, Sequence[TrainingWindow]]


def network_size(topology: Topology) -> int:
    """Weights per resource channel; the full genome is x times this."""
    return topology.channel_size


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


def init_population(topology: Topology, size: int, rng: np.random.Generator, init_range: float = 1.0) -> np.ndarray:
    return rng.uniform(-init_range, init_range, size=(size, topology.genome_length))


def unpack(genomes: np.ndarray, topology: Topology) -> Tuple[np.ndarray, np.ndarray]:
    """Split (..., L) genomes into input weights (..., x, n+1, p) and output weights (..., x, p)."""
    genomes = np.asarray(genomes, dtype=float)
    if genomes.shape[-1] != topology.genome_length:
        raise PredictorError(f"genome length {genomes.shape[-1]} != {topology.genome_length} for {topology}")
    n, p, x = topology.n, topology.p, topology.x
    lead = genomes.shape[:-1]
    blocks = genomes.reshape(*lead, x, topology.channel_size)
    w_in = blocks[..., : (n + 1) * p].reshape(*lead, x, n + 1, p)
    w_out = blocks[..., (n + 1) * p:].reshape(*lead, x, p)
    return w_in, w_out


def pack(w_in: np.ndarray, w_out: np.ndarray) -> np.ndarray:
    """Inverse of unpack for a single genome."""
    x = w_in.shape[0]
    return np.concatenate([w_in.reshape(x, -1), w_out.reshape(x, -1)], axis=1).reshape(-1)


def _with_bias(inputs: np.ndarray) -> np.ndarray:
    ones = np.ones((inputs.shape[0], 1, inputs.shape[2]))
    return np.concatenate([inputs, ones], axis=1)


def _check_inputs(inputs: np.ndarray, topology: Topology) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 3 or inputs.shape[1:] != (topology.n, topology.x):
        raise PredictorError(
            f"inputs of shape {inputs.shape[1:] if inputs.ndim == 3 else inputs.shape} do not match "
            f"n={topology.n} x={topology.x}"
        )
    return inputs


def forward_batch(population: np.ndarray, topology: Topology, inputs: np.ndarray) -> np.ndarray:
    """Evaluate N genomes on m windows at once; returns (N, m, x) outputs in (0, 1)."""
    inputs = _check_inputs(inputs, topology)
    population = np.atleast_2d(population)
    w_in, w_out = unpack(population, topology)
    hidden = sigmoid(np.einsum("mik,Nkij->Nmkj", _with_bias(inputs), w_in))
    return sigmoid(np.einsum("Nmkj,Nkj->Nmk", hidden, w_out))


def forward(genome: np.ndarray, topology: Topology, window_inputs: np.ndarray) -> np.ndarray:
    """Per-resource prediction for one (n, x) window."""
    window_inputs = np.asarray(window_inputs, dtype=float)
    if window_inputs.shape != (topology.n, topology.x):
        raise PredictorError(f"window of shape {window_inputs.shape} does not match ({topology.n}, {topology.x})")
    return forward_batch(np.asarray(genome)[None, :], topology, window_inputs[None])[0, 0]


def population_fitness(population: np.ndarray, topology: Topology, windows: Windows) -> np.ndarray:
    """Mean squared error per genome and resource, shape (N, x)."""
    if len(windows) == 0:
        raise PredictorError("fitness needs at least one sample")
    windows = WindowSet.from_windows(windows)
    outputs = forward_batch(population, topology, windows.inputs)
    return np.mean((windows.targets[None] - outputs) ** 2, axis=1)


def fitness(genome: np.ndarray, topology: Topology, windows: Windows) -> Tuple[np.ndarray, float]:
    """Per-resource error and its mean (the scalar used for selection)."""
    per_resource = population_fitness(np.asarray(genome)[None, :], topology, windows)[0]
    return per_resource, float(per_resource.mean())


def edp(prev_error, curr_error, alpha: float = 0.8):
    """Error-driven padding: (1 - alpha) * previous error + alpha * current error."""
    if not 0.5 < alpha <= 1.0:
        raise PredictorError(f"alpha must lie in (0.5, 1], got {alpha}")
    prev_error = np.asarray(prev_error, dtype=float)
    curr_error = np.asarray(curr_error, dtype=float)
    if np.any(prev_error < 0) or np.any(curr_error < 0):
        raise PredictorError("errors must be non-negative")
    result = (1.0 - alpha) * prev_error + alpha * curr_error
    return float(result) if result.ndim == 0 else result


class OmFnnPredictor:
    """
    Multi-resource predictor dedicated to one VM.
    Holds the trained genome, the normalization bounds it was trained under and
    the running per-resource error history feeding the padding.
    """

    def __init__(
        self,
        topology: Topology,
        alpha: float = 0.8,
        resources: Sequence[str] = RESOURCES,
        vm_id: str = "",
    ):
        if len(resources) != topology.x:
            raise PredictorError(f"{len(resources)} resource name(s) for x={topology.x}")
        edp(0.0, 0.0, alpha)
        self.topology = topology
        self.alpha = alpha
        self.resources = tuple(resources)
        self.vm_id = vm_id
        self.genome: Optional[np.ndarray] = None
        self.d_min = np.zeros(topology.x)
        self.d_max = np.ones(topology.x)
        self.error_history: List[np.ndarray] = []
        self.trainer_metadata: Dict[str, object] = {}
        self._last_forecast: Optional[Forecast] = None

    @property
    def trained(self) -> bool:
        return self.genome is not None

    def install(
        self,
        genome: np.ndarray,
        d_min: np.ndarray,
        d_max: np.ndarray,
        validation_error: Optional[np.ndarray] = None,
        metadata: Optional[Dict[str, object]] = None,
    ) -> None:
        """Adopt a freshly trained genome together with its normalization bounds."""
        genome = np.asarray(genome, dtype=float)
        unpack(genome, self.topology)
        self.genome = genome.copy()
        self.d_min = np.asarray(d_min, dtype=float).copy()
        self.d_max = np.asarray(d_max, dtype=float).copy()
        if validation_error is not None:
            self.record_error(validation_error)
        if metadata:
            self.trainer_metadata.update(metadata)

    def record_error(self, errors: np.ndarray) -> None:
        errors = np.asarray(errors, dtype=float).reshape(self.topology.x)
        if np.any(errors < 0) or not np.all(np.isfinite(errors)):
            raise PredictorError(f"invalid error values {errors.tolist()}")
        self.error_history.append(errors)
        del self.error_history[:-ERROR_HISTORY_LIMIT]

    def current_padding(self) -> np.ndarray:
        if not self.error_history:
            return np.zeros(self.topology.x)
        prev = self.error_history[-2] if len(self.error_history) > 1 else self.error_history[-1]
        return edp(prev, self.error_history[-1], self.alpha)

    def predict_padded(self, window_inputs: np.ndarray) -> Forecast:
        """Normalized forecast for the next interval, padded and clamped to [0, 1]."""
        if not self.trained:
            raise PredictorError(f"predictor {self.vm_id or '<unnamed>'} has not been trained")
        predicted = forward(self.genome, self.topology, window_inputs)
        padding = np.asarray(self.current_padding(), dtype=float)
        forecast = Forecast(predicted, padding, np.clip(predicted + padding, 0.0, 1.0))
        self._last_forecast = forecast
        return forecast

    def forecast_raw(self, recent_demands: np.ndarray) -> Tuple[Forecast, np.ndarray]:
        """Forecast from the last n raw samples; returns the forecast and the padded demand in raw units."""
        recent = np.asarray(recent_demands, dtype=float)[-self.topology.n:]
        forecast = self.predict_padded(scale(recent, self.d_min, self.d_max, clip=True))
        return forecast, np.maximum(denormalize(forecast.padded, self.d_min, self.d_max), 0.0)

    def observe(self, actual_demand: np.ndarray) -> np.ndarray:
        """Push the squared error of the last forecast (normalized units) into the history."""
        if self._last_forecast is None:
            raise PredictorError("observe() called before any forecast")
        actual = scale(np.asarray(actual_demand, dtype=float), self.d_min, self.d_max)
        error = (actual - self._last_forecast.predicted) ** 2
        self.record_error(error)
        return error


def predict_padded(predictor: OmFnnPredictor, window_inputs: np.ndarray) -> Forecast:
    return predictor.predict_padded(window_inputs)
