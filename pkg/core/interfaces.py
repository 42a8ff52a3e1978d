"""
Interface definitions for dependency inversion (SOLID principle).
These abstract base classes define contracts that concrete implementations must follow.
"""
from abc import ABC, abstractmethod
from typing import Any, List, Sequence, TextIO, Union
from pathlib import Path


# Interface for predictor trainers (TaDE, SaDE, backpropagation)
class ITrainer(ABC):
    """Interface for OM-FNN trainers."""

    name: str = "trainer"

    @abstractmethod
    def train(self, windows: Sequence[Any], topology: Any, initial_state: Any = None) -> Any:
        """Fit a genome to the windows and return a TrainingResult."""
        pass


# Interface for VM placement engines
class IPlacementEngine(ABC):
    """Interface for VM placement engines (GA, Best-Fit, Random-Fit)."""

    name: str = "engine"

    @abstractmethod
    def place(self, problem: Any, seed: int = 0) -> Any:
        """Assign every VM of the problem to a server and return an Allocation."""
        pass


# Interface for workload sources
class IWorkloadSource(ABC):
    """Interface for anything that yields per-VM demand series."""

    @abstractmethod
    def load(self, source: Union[str, Path, TextIO]) -> List[Any]:
        """Read task series from a file path or open stream."""
        pass

    @abstractmethod
    def save(self, series: Sequence[Any], target: Union[str, Path, TextIO]) -> None:
        """Write task series in the same format `load` reads."""
        pass
