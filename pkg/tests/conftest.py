"""
Pytest configuration for test suite.
Defines fixtures, markers, and test configuration.
"""
import pytest
import sys
from pathlib import Path

import numpy as np

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))


def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "unit: Unit tests (pure functions, no file I/O)"
    )
    config.addinivalue_line(
        "markers", "integration: Integration tests (CLI commands, oracle sweeps, file round trips)"
    )
    config.addinivalue_line(
        "markers", "e2e: End-to-end tests (complete scenario suites)"
    )
    config.addinivalue_line(
        "markers", "slow: Tests that take a long time to run"
    )


# Worked training example: population, fitness (cpu, mem) and one generation's offspring
WORKED_POPULATION = np.array([
    [-0.94, -0.66, -0.84, -0.22, -0.126, -0.99, -0.13, -0.15, -0.71, 0.06, -0.03, -0.60, 0.20, -0.07, -0.94, -0.42, 0.33, 0.42],
    [-0.40, -0.02, 0.56, -0.97, -0.40, -0.99, 0.17, 0.26, 0.59, 0.61, -0.99, -0.29, -0.85, -0.31, -0.05, 0.23, -0.48, -0.36],
    [-0.49, -0.41, -0.58, -0.70, -0.59, 0.17, -0.94, -0.64, -0.08, -0.02, -0.88, 0.18, 0.09, 0.23, 0.85, 0.32, -0.36, -0.69],
    [-0.72, -0.89, -0.95, 0.23, 0.03, 0.11, -0.96, -0.04, 0.33, -0.49, -0.86, -0.12, 0.17, 0.17, -0.45, -0.16, 0.14, -0.30],
])
WORKED_FITNESS = np.array([[0.030, 0.027], [0.023, 0.021], [0.072, 0.061], [0.002, 0.006]])
WORKED_MSP = np.array([0.881, 0.846, 0.223, 0.754])
WORKED_CSP = np.array([0.565, 0.476, 0.823, 0.669])
WORKED_OFFSPRING = np.array([
    [-0.94, -0.83, -0.49, -0.22, -0.12, -0.45, -0.13, -0.15, 0.71, -0.06, -0.03, 0.85, -0.29, -0.57, -0.14, -0.42, 0.33, 0.11],
    [-0.93, -0.92, 0.22, -0.97, -0.40, -0.99, 0.17, 0.26, 0.59, 0.61, -0.99, -0.47, -0.85, -0.30, -0.40, 0.23, -0.48, -0.64],
    [-0.53, -0.37, -0.88, -0.70, -0.59, 0.48, -0.94, -0.64, -0.08, -0.02, -0.88, 0.16, 0.47, 0.05, 0.40, 0.32, -0.36, -0.41],
    [-0.05, -0.26, -0.01, 0.23, 0.03, 0.11, -0.96, -0.04, 0.33, -0.49, -0.86, -0.18, 0.17, -0.02, -0.02, -0.16, 0.14, -0.11],
])
WORKED_OFFSPRING_FITNESS = np.array([[0.022, 0.020], [0.036, 0.032], [0.125, 0.109], [0.008, 0.009]])


@pytest.fixture
def worked_example():
    """Population, fitness and offspring of one hand-worked TaDE generation."""
    return {
        "population": WORKED_POPULATION.copy(),
        "fitness": WORKED_FITNESS.copy(),
        "msp": WORKED_MSP.copy(),
        "csp": WORKED_CSP.copy(),
        "offspring": WORKED_OFFSPRING.copy(),
        "offspring_fitness": WORKED_OFFSPRING_FITNESS.copy(),
    }


@pytest.fixture
def catalog():
    from core.utils.config import RunConfig
    return RunConfig().build_catalog()


@pytest.fixture
def server_types():
    """One server of each reference type: S1, S2, S3."""
    from core.utils.config import FleetConfig
    return FleetConfig(count=3).build()


@pytest.fixture
def fast_tade():
    from core.utils.config import TadeConfig
    return TadeConfig(population=8, gmax=30, no_improve_patience=100, seed=7)


def make_series(vm_id="vm-0000", values=None, interval_minutes=5, start=0, resources=("cpu", "mem")):
    from core.models import TaskSeries
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    timestamps = start + np.arange(values.shape[0], dtype=np.int64) * interval_minutes * 60
    return TaskSeries(vm_id, interval_minutes, timestamps, values, tuple(resources))


def sinusoid(samples=120, period=24, base=0.5, amplitude=0.3, phase=0.0):
    t = np.arange(samples, dtype=float)
    return base + amplitude * np.sin(2 * np.pi * t / period + phase)


@pytest.fixture
def sine_series():
    """Noiseless two-resource sinusoid with a 2-hour period on a 5-minute grid."""
    cpu = sinusoid(120, 24, 0.5, 0.3)
    mem = sinusoid(120, 24, 0.4, 0.2, phase=1.0)
    return make_series("vm-sine", np.column_stack([cpu, mem]))


@pytest.fixture
def small_run_config(tmp_path):
    """Small but complete run configuration writing into a temporary directory."""
    from core.utils.config import RunConfig
    return RunConfig.model_validate({
        "out_dir": str(tmp_path / "out"),
        "fleet": {"count": 12},
        "tade": {"population": 6, "gmax": 10, "no_improve_patience": 50},
        "backprop": {"epochs": 10},
        "ga": {"population": 8, "gmax": 8},
        "simulation": {"warmup_intervals": 6, "history_window": 12, "retrain_generations": 2,
                       "max_intervals": 4, "k_max": 4},
        "report": {"pws_set": [10], "max_tasks": 1},
        "synth": {"tasks": 6, "duration_minutes": 120, "interval_minutes": 5},
    })
