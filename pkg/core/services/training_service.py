"""
Training service for OM-FNN predictors.
Follows SRP - Single Responsibility: fit genomes with the tri-adaptive DE trainer (TaDE)
and the SaDE-style and backpropagation comparators.
"""
import time
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from core.interfaces import ITrainer
from core.models import Topology, WindowSet
from core.services.predictor_service import init_population, pack, population_fitness, sigmoid, unpack
from core.utils.config import BackpropConfig, TadeConfig
from core.utils.error_handler import TrainingError
from core.utils.logging_utils import get_logger

logger = get_logger(__name__)


class MutationStrategy(IntEnum):
    BEST_1 = 0
    CURRENT_TO_BEST_1 = 1
    RAND_1 = 2


class CrossoverStrategy(IntEnum):
    UNIFORM = 0
    HEURISTIC = 1


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

def select_mutation(msp: float, gamma: Sequence[float]) -> MutationStrategy:
    """Roulette-wheel pick of the mutation strategy (upper bounds inclusive)."""
    if msp <= gamma[0]:
        return MutationStrategy.BEST_1
    if msp <= gamma[0] + gamma[1]:
        return MutationStrategy.CURRENT_TO_BEST_1
    return MutationStrategy.RAND_1


def select_crossover(csp: float, omega: Sequence[float]) -> CrossoverStrategy:
    return CrossoverStrategy.UNIFORM if csp <= omega[0] else CrossoverStrategy.HEURISTIC


def mutate(
    population: np.ndarray,
    i: int,
    strategy: MutationStrategy,
    mr: float,
    rng: np.random.Generator,
    best: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Build the mutant for member i; r1, r2, r3 are distinct and never i."""
    size = population.shape[0]
    if size < 4:
        raise TrainingError(f"mutation needs a population of at least 4, got {size}")
    r1, r2, r3 = rng.choice(np.delete(np.arange(size), i), size=3, replace=False)
    if best is None and strategy != MutationStrategy.RAND_1:
        raise TrainingError(f"{strategy.name} mutation needs the best genome")
    diff = population[r1] - population[r2]
    if strategy == MutationStrategy.BEST_1:
        return best + mr * diff
    if strategy == MutationStrategy.CURRENT_TO_BEST_1:
        return population[i] + mr * (best - population[i]) + mr * diff
    return population[r3] + mr * diff


def crossover_uniform(
    target: np.ndarray, mutant: np.ndarray, cr: float, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Gene-level crossover; returns the child taking mutant genes where draw <= CR, and its complement."""
    if target.shape != mutant.shape:
        raise TrainingError(f"genome shapes differ: {target.shape} vs {mutant.shape}")
    mask = rng.random(target.shape[0]) <= cr
    return np.where(mask, mutant, target), np.where(mask, target, mutant)


def crossover_heuristic(better: np.ndarray, other: np.ndarray, cr: float) -> np.ndarray:
    """Extrapolate past the fitter parent, away from the other."""
    return cr * (better - other) + better


def select_survivor(
    current: np.ndarray, current_fitness: float, offspring: np.ndarray, offspring_fitness: float
) -> Tuple[np.ndarray, bool]:
    """Offspring replaces the member when it is at least as good (minimization)."""
    if offspring_fitness <= current_fitness:
        return offspring, True
    return current, False


class SelectionOutcome(NamedTuple):
    population: np.ndarray
    fitness: np.ndarray
    accepted: np.ndarray


def select_generation(
    population: np.ndarray,
    fitness: np.ndarray,
    offspring: np.ndarray,
    offspring_fitness: np.ndarray,
) -> SelectionOutcome:
    """Member-wise survivor selection on the mean of the per-resource errors."""
    fitness = np.atleast_2d(np.asarray(fitness, dtype=float).T).T
    offspring_fitness = np.atleast_2d(np.asarray(offspring_fitness, dtype=float).T).T
    current_score = fitness.mean(axis=1)
    offspring_score = offspring_fitness.mean(axis=1)
    survivors = population.copy()
    survivor_fitness = fitness.copy()
    accepted = np.zeros(population.shape[0], dtype=bool)
    for i in range(population.shape[0]):
        genome, won = select_survivor(population[i], current_score[i], offspring[i], offspring_score[i])
        logger.debug(f"member {i}: current={current_score[i]:.6g} offspring={offspring_score[i]:.6g} accepted={won}")
        survivors[i] = genome
        if won:
            survivor_fitness[i] = offspring_fitness[i]
            accepted[i] = True
    return SelectionOutcome(survivors, survivor_fitness, accepted)


def adapt_control(
    g: int,
    z: int,
    mr: float,
    cr: float,
    rng: np.random.Generator,
    mr_bounds: Tuple[float, float] = (0.1, 0.8),
    cr_bounds: Tuple[float, float] = (0.1, 0.5),
) -> Tuple[float, float]:
    """Regenerate MR and CR inside their bounds when at most z members improved."""
    if g > z:
        return mr, cr
    theta_m, theta_c = rng.random(2)
    return (
        mr_bounds[0] + theta_m * (mr_bounds[1] - mr_bounds[0]),
        cr_bounds[0] + theta_c * (cr_bounds[1] - cr_bounds[0]),
    )


@dataclass
class SuccessCounters:
    """Successes/failures per mutation strategy (sm, fm) and crossover strategy (cs, cf)."""

    sm: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))
    fm: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))
    cs: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=np.int64))
    cf: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=np.int64))

    def record(self, mutation: MutationStrategy, crossover: CrossoverStrategy, success: bool) -> None:
        if success:
            self.sm[mutation] += 1
            self.cs[crossover] += 1
        else:
            self.fm[mutation] += 1
            self.cf[crossover] += 1

    def merge(self, other: "SuccessCounters") -> None:
        self.sm += other.sm
        self.fm += other.fm
        self.cs += other.cs
        self.cf += other.cf

    @property
    def successes(self) -> int:
        return int(self.sm.sum())


class StrategyProbabilities(NamedTuple):
    rho: np.ndarray
    sigma: np.ndarray


def _sanitize(values: np.ndarray) -> np.ndarray:
    clipped = np.clip(values, 0.0, None)
    total = clipped.sum()
    if total <= 0:
        return np.full(values.shape, 1.0 / values.size)
    logger.warning(f"probabilities {values.tolist()} fall outside [0, 1]; clipped and renormalized")
    return clipped / total


def strategy_success_probs(counters: SuccessCounters, form: str = "corrected") -> Optional[StrategyProbabilities]:
    """New mutation (rho) and crossover (sigma) selection probabilities; None when nothing succeeded."""
    if counters.successes == 0:
        return None
    sm1, sm2, sm3 = (float(v) for v in counters.sm)
    fm1, fm2, fm3 = (float(v) for v in counters.fm)
    cs1, cs2 = (float(v) for v in counters.cs)
    cf1, cf2 = (float(v) for v in counters.cf)

    if form == "verbatim":
        # as printed: sm2*sm3 appears twice, sm1*sm2 is absent
        b = 2 * (sm2 * sm3 + sm1 * sm3 + sm2 * sm3) + fm1 * (sm2 + sm3) + fm2 * (sm1 + sm3) + fm3 * (sm1 + sm2)
        c = 2 * (cs2 + cs1) + cf1 * cs2 + cf2 * cs1
    elif form == "corrected":
        b = 2 * (sm1 * sm2 + sm1 * sm3 + sm2 * sm3) + fm1 * (sm2 + sm3) + fm2 * (sm1 + sm3) + fm3 * (sm1 + sm2)
        c = 2 * cs1 * cs2 + cf1 * cs2 + cf2 * cs1
    else:
        raise TrainingError(f"unknown probability form '{form}'")

    if b > 0:
        rho1 = sm1 * (sm2 + fm2 + sm3 + fm3) / b
        rho2 = sm2 * (sm1 + fm1 + sm3 + fm3) / b
        rho = np.array([rho1, rho2, 1.0 - rho1 - rho2])
    else:
        rho = counters.sm / counters.sm.sum()
    if c > 0:
        sigma1 = cs1 * (cs2 + cf2) / c
        sigma = np.array([sigma1, 1.0 - sigma1])
    else:
        sigma = counters.cs / counters.cs.sum()

    if np.any(rho < 0) or np.any(rho > 1):
        rho = _sanitize(rho)
    if np.any(sigma < 0) or np.any(sigma > 1):
        sigma = _sanitize(sigma)
    return StrategyProbabilities(rho.astype(float), sigma.astype(float))


# ---------------------------------------------------------------------------
# Trainer state and results
# ---------------------------------------------------------------------------

@dataclass
class GenerationRecord:
    generation: int
    best_fitness: Tuple[float, ...]
    best_aggregate: float
    gamma: Tuple[float, ...] = ()
    omega: Tuple[float, ...] = ()
    mean_mr: float = 0.0
    mean_cr: float = 0.0
    updated: int = 0
    counters: Optional[SuccessCounters] = None


@dataclass
class TrainState:
    population: np.ndarray
    fitness: np.ndarray
    mr: np.ndarray
    cr: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    rngs: List[np.random.Generator]
    best_genome: np.ndarray
    best_fitness: np.ndarray
    msp: Optional[np.ndarray] = None
    csp: Optional[np.ndarray] = None
    counters: SuccessCounters = field(default_factory=SuccessCounters)
    generation: int = 0

    @property
    def best_aggregate(self) -> float:
        return float(np.mean(self.best_fitness))

    def refresh_best(self) -> None:
        scores = self.fitness.mean(axis=1)
        idx = int(np.argmin(scores))
        if scores[idx] < self.best_aggregate:
            self.best_genome = self.population[idx].copy()
            self.best_fitness = self.fitness[idx].copy()


@dataclass
class TrainingResult:
    trainer: str
    topology: Topology
    genome: np.ndarray
    train_fitness: np.ndarray
    validation_fitness: np.ndarray
    history: List[GenerationRecord]
    state: Optional[TrainState] = None
    stopped_early: bool = False
    elapsed_seconds: float = 0.0

    @property
    def generations(self) -> int:
        return len(self.history)


# ---------------------------------------------------------------------------
# Evolutionary trainers
# ---------------------------------------------------------------------------

class TadeTrainer(ITrainer):
    """
    Tri-adaptive differential evolution: mutation-strategy selection, crossover-strategy
    selection and control-parameter regeneration all adapt while training.
    """

    name = "tade"
    adapt_mutation = True
    adapt_crossover = True
    adapt_parameters = True

    def __init__(self, config: Optional[TadeConfig] = None):
        self.config = config or TadeConfig()

    def initial_omega(self) -> np.ndarray:
        return np.asarray(self.config.omega, dtype=float)

    def initialize(
        self,
        topology: Topology,
        windows: WindowSet,
        population: Optional[np.ndarray] = None,
        seed: Optional[int] = None,
    ) -> TrainState:
        """Random population in [-init_range, init_range] plus per-member random streams."""
        cfg = self.config
        streams = np.random.SeedSequence(cfg.seed if seed is None else seed).spawn(cfg.population + 1)
        rngs = [np.random.default_rng(s) for s in streams[:-1]]
        shared = np.random.default_rng(streams[-1])
        if population is None:
            population = init_population(topology, cfg.population, shared, cfg.init_range)
        else:
            population = np.array(population, dtype=float)
            if population.shape != (cfg.population, topology.genome_length):
                raise TrainingError(
                    f"initial population shape {population.shape} != ({cfg.population}, {topology.genome_length})"
                )
        mr = shared.uniform(*cfg.mr_bounds, size=cfg.population)
        cr = shared.uniform(*cfg.cr_bounds, size=cfg.population)
        fitness = population_fitness(population, topology, windows)
        best = int(np.argmin(fitness.mean(axis=1)))
        return TrainState(
            population=population,
            fitness=fitness,
            mr=mr,
            cr=cr,
            gamma=np.asarray(cfg.gamma, dtype=float),
            omega=self.initial_omega(),
            rngs=rngs,
            best_genome=population[best].copy(),
            best_fitness=fitness[best].copy(),
        )

    def resume(self, state: TrainState, topology: Topology, windows: WindowSet) -> TrainState:
        """Continue from an earlier population on new data; fitness and best are re-evaluated."""
        state.fitness = population_fitness(state.population, topology, windows)
        best = int(np.argmin(state.fitness.mean(axis=1)))
        state.best_genome = state.population[best].copy()
        state.best_fitness = state.fitness[best].copy()
        return state

    def step(self, state: TrainState, topology: Topology, windows: WindowSet) -> GenerationRecord:
        """One generation: mutate, cross over, select, then adapt."""
        cfg = self.config
        size = state.population.shape[0]
        pop = state.population
        # selection draws lie in (0, 1] so a zero-probability strategy is never picked
        state.msp = np.array([1.0 - r.random() for r in state.rngs])
        state.csp = np.array([1.0 - r.random() for r in state.rngs])
        m_strategies = [select_mutation(state.msp[i], state.gamma) for i in range(size)]
        c_strategies = [select_crossover(state.csp[i], state.omega) for i in range(size)]

        mutants = np.stack([
            mutate(pop, i, m_strategies[i], state.mr[i], state.rngs[i], state.best_genome) for i in range(size)
        ])
        current_score = state.fitness.mean(axis=1)
        mutant_score = None
        if any(c == CrossoverStrategy.HEURISTIC for c in c_strategies):
            mutant_score = population_fitness(mutants, topology, windows).mean(axis=1)

        candidates, owners = [], []
        for i in range(size):
            if c_strategies[i] == CrossoverStrategy.UNIFORM:
                candidates.extend(crossover_uniform(pop[i], mutants[i], state.cr[i], state.rngs[i]))
                owners.extend([i, i])
            else:
                if mutant_score[i] < current_score[i]:
                    better, other = mutants[i], pop[i]
                else:
                    better, other = pop[i], mutants[i]
                candidates.append(crossover_heuristic(better, other, state.cr[i]))
                owners.append(i)
        candidates = np.stack(candidates)
        candidate_fitness = population_fitness(candidates, topology, windows)
        candidate_score = candidate_fitness.mean(axis=1)

        owners = np.asarray(owners)
        offspring = np.empty_like(pop)
        offspring_fitness = np.empty_like(state.fitness)
        for i in range(size):
            rows = np.flatnonzero(owners == i)
            # first index wins ties: the child of the crossover rule itself
            pick = rows[int(np.argmin(candidate_score[rows]))]
            offspring[i] = candidates[pick]
            offspring_fitness[i] = candidate_fitness[pick]

        outcome = select_generation(pop, state.fitness, offspring, offspring_fitness)
        generation_counters = SuccessCounters()
        for i in range(size):
            generation_counters.record(m_strategies[i], c_strategies[i], bool(outcome.accepted[i]))
        state.counters.merge(generation_counters)
        state.population = outcome.population
        state.fitness = outcome.fitness
        state.refresh_best()

        updated = int(outcome.accepted.sum())
        if self.adapt_parameters:
            for i in range(size):
                state.mr[i], state.cr[i] = adapt_control(
                    updated, cfg.z, state.mr[i], state.cr[i], state.rngs[i], cfg.mr_bounds, cfg.cr_bounds
                )
        state.generation += 1
        if state.generation % cfg.learning_period == 0:
            self._refresh_probabilities(state)

        return GenerationRecord(
            generation=state.generation,
            best_fitness=tuple(float(v) for v in state.best_fitness),
            best_aggregate=state.best_aggregate,
            gamma=tuple(float(v) for v in state.gamma),
            omega=tuple(float(v) for v in state.omega),
            mean_mr=float(state.mr.mean()),
            mean_cr=float(state.cr.mean()),
            updated=updated,
            counters=generation_counters,
        )

    def _refresh_probabilities(self, state: TrainState) -> None:
        probs = strategy_success_probs(state.counters, self.config.probability_form)
        if probs is None:
            logger.warning(f"generation {state.generation}: no successful offspring this period, keeping Γ/Ω")
        else:
            if self.adapt_mutation:
                state.gamma = probs.rho
            if self.adapt_crossover:
                state.omega = probs.sigma
            logger.debug(f"generation {state.generation}: Γ={state.gamma.round(4).tolist()} Ω={state.omega.round(4).tolist()}")
        state.counters = SuccessCounters()

    def train(
        self,
        windows,
        topology: Topology,
        initial_state: Optional[TrainState] = None,
        generations: Optional[int] = None,
    ) -> TrainingResult:
        cfg = self.config
        started = time.perf_counter()
        windows = WindowSet.from_windows(windows)
        if windows.x != topology.x or windows.n != topology.n:
            raise TrainingError(f"windows (n={windows.n}, x={windows.x}) do not match {topology}")
        train, validation = windows.split(cfg.train_fraction)
        if initial_state is None:
            state = self.initialize(topology, train)
        else:
            state = self.resume(initial_state, topology, train)

        gmax = cfg.gmax if generations is None else generations
        history: List[GenerationRecord] = []
        reference = state.best_aggregate
        stall = 0
        stopped_early = False
        for _ in range(gmax):
            record = self.step(state, topology, train)
            history.append(record)
            logger.debug(
                f"[{self.name}] gen={record.generation} best={record.best_aggregate:.6g} "
                f"g={record.updated} mr={record.mean_mr:.3f} cr={record.mean_cr:.3f}"
            )
            if record.best_aggregate < reference - cfg.improvement_threshold:
                reference = record.best_aggregate
                stall = 0
            else:
                stall += 1
            if stall >= cfg.no_improve_patience:
                stopped_early = True
                logger.info(f"[{self.name}] no improvement for {stall} generations, stopping at {record.generation}")
                break

        validation_fitness = population_fitness(state.best_genome[None], topology, validation)[0]
        elapsed = time.perf_counter() - started
        logger.info(
            f"[{self.name}] trained {len(history)} generation(s): train ξ={state.best_aggregate:.6g} "
            f"validation ξ={validation_fitness.mean():.6g}"
        )
        return TrainingResult(
            trainer=self.name,
            topology=topology,
            genome=state.best_genome.copy(),
            train_fitness=state.best_fitness.copy(),
            validation_fitness=validation_fitness,
            history=history,
            state=state,
            stopped_early=stopped_early,
            elapsed_seconds=elapsed,
        )


class SadeTrainer(TadeTrainer):
    """Comparator that adapts mutation-strategy selection only."""

    name = "sade"
    adapt_crossover = False
    adapt_parameters = False

    def initial_omega(self) -> np.ndarray:
        return np.array([1.0, 0.0])


# ---------------------------------------------------------------------------
# Backpropagation comparator
# ---------------------------------------------------------------------------

def loss_and_gradient(genome: np.ndarray, topology: Topology, windows) -> Tuple[float, np.ndarray]:
    """Mean of the per-resource squared errors and its gradient with respect to the genome."""
    windows = WindowSet.from_windows(windows)
    w_in, w_out = unpack(np.asarray(genome, dtype=float), topology)
    inputs = np.concatenate([windows.inputs, np.ones((len(windows), 1, topology.x))], axis=1)
    hidden = sigmoid(np.einsum("mik,kij->mkj", inputs, w_in))
    output = sigmoid(np.einsum("mkj,kj->mk", hidden, w_out))
    error = output - windows.targets
    loss = float(np.mean(error ** 2))

    d_out = 2.0 * error / error.size
    d_z2 = d_out * output * (1.0 - output)
    grad_out = np.einsum("mk,mkj->kj", d_z2, hidden)
    d_z1 = d_z2[:, :, None] * w_out[None] * hidden * (1.0 - hidden)
    grad_in = np.einsum("mik,mkj->kij", inputs, d_z1)
    return loss, pack(grad_in, grad_out)


class BackpropTrainer(ITrainer):
    """Full-batch gradient descent over the same genome encoding."""

    name = "backprop"

    def __init__(self, config: Optional[BackpropConfig] = None, train_fraction: float = 0.8):
        self.config = config or BackpropConfig()
        self.train_fraction = train_fraction

    def train(self, windows, topology: Topology, initial_state: Optional[np.ndarray] = None) -> TrainingResult:
        cfg = self.config
        if cfg.learning_rate < 0:
            raise TrainingError(f"learning_rate must be >= 0, got {cfg.learning_rate}")
        started = time.perf_counter()
        windows = WindowSet.from_windows(windows)
        train, validation = windows.split(self.train_fraction)
        if initial_state is None:
            genome = init_population(topology, 1, np.random.default_rng(cfg.seed))[0]
        else:
            genome = np.array(initial_state, dtype=float)

        history = []
        for epoch in range(1, cfg.epochs + 1):
            loss, grad = loss_and_gradient(genome, topology, train)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            genome = genome - cfg.learning_rate * grad
            per_resource = population_fitness(genome[None], topology, train)[0]
            history.append(GenerationRecord(epoch, tuple(float(v) for v in per_resource), float(per_resource.mean())))

        train_fitness = population_fitness(genome[None], topology, train)[0]
        validation_fitness = population_fitness(genome[None], topology, validation)[0]
        logger.info(f"[backprop] {cfg.epochs} epoch(s): validation ξ={validation_fitness.mean():.6g}")
        return TrainingResult(
            trainer=self.name,
            topology=topology,
            genome=genome,
            train_fitness=train_fitness,
            validation_fitness=validation_fitness,
            history=history,
            elapsed_seconds=time.perf_counter() - started,
        )


# Convenience functions mirroring the trainer classes

def train_tade(windows, topology: Topology, config: Optional[TadeConfig] = None, initial_state=None) -> TrainingResult:
    return TadeTrainer(config).train(windows, topology, initial_state)


def train_sade_baseline(windows, topology: Topology, config: Optional[TadeConfig] = None) -> TrainingResult:
    return SadeTrainer(config).train(windows, topology)


def train_backprop_baseline(
    windows, topology: Topology, learning_rate: float, epochs: int, seed: int = 0
) -> TrainingResult:
    if learning_rate < 0:
        raise TrainingError(f"learning_rate must be >= 0, got {learning_rate}")
    config = BackpropConfig(learning_rate=learning_rate, epochs=epochs, seed=seed)
    return BackpropTrainer(config).train(windows, topology)


def build_trainer(name: str, tade: Optional[TadeConfig] = None, backprop: Optional[BackpropConfig] = None) -> ITrainer:
    trainers = {
        "tade": lambda: TadeTrainer(tade),
        "sade": lambda: SadeTrainer(tade),
        "backprop": lambda: BackpropTrainer(backprop, (tade or TadeConfig()).train_fraction),
    }
    if name not in trainers:
        raise TrainingError(f"unknown trainer '{name}', expected one of {sorted(trainers)}")
    return trainers[name]()
