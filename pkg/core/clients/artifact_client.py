"""
Predictor artifact client.
Serializes a trained OM-FNN predictor to a versioned JSON document and back.
Output is deterministic (sorted keys, no timings) so repeated seeded runs match byte for byte.
"""
import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.models import Topology
from core.services.predictor_service import OmFnnPredictor
from core.utils.error_handler import ConfigError, ErrorHandler, PredictorError
from core.utils.logging_utils import get_logger

logger = get_logger(__name__)

SCHEMA_VERSION = 1


class TopologyDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=1)
    p: int = Field(ge=1)
    q: int = Field(default=1, ge=1, le=1)
    x: int = Field(ge=1)


class PredictorDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = SCHEMA_VERSION
    vm_id: str
    resources: Tuple[str, ...]
    topology: TopologyDocument
    alpha: float = Field(gt=0.5, le=1)
    trainer: str
    seed: int
    genome: List[float]
    d_min: List[float]
    d_max: List[float]
    error_history: List[List[float]] = Field(default_factory=list)
    train_fitness: List[float] = Field(default_factory=list)
    validation_fitness: List[float] = Field(default_factory=list)
    generations: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_shapes(self):
        topology = Topology(self.topology.n, self.topology.p, self.topology.q, self.topology.x)
        if len(self.genome) != topology.genome_length:
            raise ValueError(f"genome has {len(self.genome)} weights, topology needs {topology.genome_length}")
        for name in ("d_min", "d_max"):
            if len(getattr(self, name)) != topology.x:
                raise ValueError(f"{name} must have {topology.x} entries")
        if len(self.resources) != topology.x:
            raise ValueError(f"{len(self.resources)} resource name(s) for x={topology.x}")
        return self


def to_document(predictor: OmFnnPredictor, seed: int, result=None) -> PredictorDocument:
    if not predictor.trained:
        raise PredictorError(f"predictor {predictor.vm_id or '<unnamed>'} has not been trained")
    topo = predictor.topology
    return PredictorDocument(
        vm_id=predictor.vm_id,
        resources=predictor.resources,
        topology=TopologyDocument(n=topo.n, p=topo.p, q=topo.q, x=topo.x),
        alpha=predictor.alpha,
        trainer=str(predictor.trainer_metadata.get("trainer", "tade")),
        seed=seed,
        genome=[float(v) for v in predictor.genome],
        d_min=[float(v) for v in predictor.d_min],
        d_max=[float(v) for v in predictor.d_max],
        error_history=[[float(v) for v in e] for e in predictor.error_history],
        train_fitness=[] if result is None else [float(v) for v in result.train_fitness],
        validation_fitness=[] if result is None else [float(v) for v in result.validation_fitness],
        generations=0 if result is None else result.generations,
    )


def from_document(document: PredictorDocument) -> OmFnnPredictor:
    t = document.topology
    predictor = OmFnnPredictor(Topology(t.n, t.p, t.q, t.x), document.alpha, document.resources, document.vm_id)
    predictor.install(document.genome, document.d_min, document.d_max, metadata={"trainer": document.trainer})
    for errors in document.error_history:
        predictor.record_error(errors)
    return predictor


def dumps(document: PredictorDocument) -> str:
    return json.dumps(document.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def save_predictor(predictor: OmFnnPredictor, path: Union[str, Path], seed: int = 0, result=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(to_document(predictor, seed, result)), encoding="utf-8")
    logger.info(f"Saved predictor for {predictor.vm_id} to {path}")
    return path


def load_predictor(path: Union[str, Path]) -> OmFnnPredictor:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"predictor artifact not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise PredictorError(f"{path} is not valid JSON: {e}") from e
    version = raw.get("schema_version") if isinstance(raw, dict) else None
    if version != SCHEMA_VERSION:
        raise PredictorError(f"{path}: unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
    try:
        document = PredictorDocument.model_validate(raw)
    except ValidationError as e:
        details = "; ".join(ErrorHandler.format_validation_errors(e.errors()))
        raise PredictorError(f"{path}: invalid predictor artifact: {details}") from e
    logger.debug(f"Loaded predictor {document.vm_id} ({document.trainer}) from {path}")
    return from_document(document)


def load_predictors(directory: Union[str, Path]) -> Dict[str, OmFnnPredictor]:
    """Every *.json artifact in a directory, keyed by VM id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"predictor directory not found: {directory}")
    predictors = {}
    for path in sorted(directory.glob("*.json")):
        predictor = load_predictor(path)
        predictors[predictor.vm_id] = predictor
    return predictors


def artifact_name(vm_id: str, suffix: Optional[str] = None) -> str:
    safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in vm_id) or "vm"
    return f"{safe}{'-' + suffix if suffix else ''}.json"
