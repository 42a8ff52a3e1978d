"""
Placement service.
Follows SRP - Single Responsibility: assign VMs to servers under capacity constraints,
trading resource utilization (maximize) against power (minimize).
"""
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from core.interfaces import IPlacementEngine
from core.models import Allocation, ParetoFronts, ServerSpec, VmInstance
from core.utils.config import GaConfig
from core.utils.error_handler import InfeasibleInstanceError, PlacementError
from core.utils.logging_utils import get_logger

logger = get_logger(__name__)

_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PlacementProblem:
    """Servers and VMs flattened into arrays; genes[v] is the server index hosting VM v."""

    servers: Tuple[ServerSpec, ...]
    vms: Tuple[VmInstance, ...]
    cpu_capacity: np.ndarray
    mem_capacity: np.ndarray
    pw_max: np.ndarray
    pw_min: np.ndarray
    pw_idle: np.ndarray
    vm_cpu: np.ndarray
    vm_mem: np.ndarray

    @classmethod
    def build(cls, servers: Sequence[ServerSpec], vms: Sequence[VmInstance]) -> "PlacementProblem":
        if not servers:
            raise PlacementError("placement needs at least one server")
        return cls(
            servers=tuple(servers),
            vms=tuple(vms),
            cpu_capacity=np.array([s.cpu_capacity for s in servers], dtype=float),
            mem_capacity=np.array([s.ram_gb for s in servers], dtype=float),
            pw_max=np.array([s.pw_max for s in servers], dtype=float),
            pw_min=np.array([s.pw_min for s in servers], dtype=float),
            pw_idle=np.array([s.pw_idle for s in servers], dtype=float),
            vm_cpu=np.array([v.cpu for v in vms], dtype=float),
            vm_mem=np.array([v.mem for v in vms], dtype=float),
        )

    @property
    def n_servers(self) -> int:
        return len(self.servers)

    @property
    def n_vms(self) -> int:
        return len(self.vms)

    @property
    def density(self) -> np.ndarray:
        return (self.pw_max - self.pw_min) / self.cpu_capacity

    def with_demands(self, cpu: np.ndarray, mem: np.ndarray) -> "PlacementProblem":
        """Same servers and VM order, different per-VM loads (used to charge actual demand)."""
        return PlacementProblem(
            self.servers, self.vms, self.cpu_capacity, self.mem_capacity, self.pw_max, self.pw_min,
            self.pw_idle, np.asarray(cpu, dtype=float), np.asarray(mem, dtype=float),
        )


class Cost(NamedTuple):
    ru: float
    pw: float


class FeasibilityReport(NamedTuple):
    ok: bool
    cpu_slack: np.ndarray
    mem_slack: np.ndarray


def _check_genes(genes: np.ndarray, problem: PlacementProblem) -> np.ndarray:
    genes = np.asarray(genes, dtype=np.int64)
    if genes.shape != (problem.n_vms,):
        raise PlacementError(f"allocation has {genes.size} gene(s) for {problem.n_vms} VM(s)")
    if genes.size and (genes.min() < 0 or genes.max() >= problem.n_servers):
        raise PlacementError("allocation references an unknown server")
    return genes


def server_loads(genes: np.ndarray, problem: PlacementProblem) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    genes = _check_genes(genes, problem)
    p = problem.n_servers
    cpu = np.bincount(genes, weights=problem.vm_cpu, minlength=p)
    mem = np.bincount(genes, weights=problem.vm_mem, minlength=p)
    hosted = np.bincount(genes, minlength=p)
    return cpu, mem, hosted


def feasible(genes: np.ndarray, problem: PlacementProblem) -> FeasibilityReport:
    """Capacity check per server on CPU and memory."""
    cpu, mem, _ = server_loads(genes, problem)
    cpu_slack = problem.cpu_capacity - cpu
    mem_slack = problem.mem_capacity - mem
    ok = bool(np.all(cpu_slack >= -_TOL) and np.all(mem_slack >= -_TOL))
    return FeasibilityReport(ok, cpu_slack, mem_slack)


def _cost_from_loads(problem: PlacementProblem, cpu: np.ndarray, mem: np.ndarray, hosted: np.ndarray) -> Cost:
    active = hosted > 0
    count = int(active.sum())
    if count == 0:
        return Cost(0.0, 0.0)
    cpu_util = np.minimum(cpu[active] / problem.cpu_capacity[active], 1.0)
    mem_util = np.minimum(mem[active] / problem.mem_capacity[active], 1.0)
    ru = float((cpu_util.sum() + mem_util.sum()) / (2 * count))
    pw = float(np.sum((problem.pw_max[active] - problem.pw_min[active]) * cpu_util + problem.pw_idle[active]))
    return Cost(ru, pw)


def cost(genes: np.ndarray, problem: PlacementProblem) -> Cost:
    cpu, mem, hosted = server_loads(genes, problem)
    return _cost_from_loads(problem, cpu, mem, hosted)


def resource_utilization(genes: np.ndarray, problem: PlacementProblem) -> float:
    """Mean of CPU and memory utilization over active servers; 0 with no active server."""
    return cost(genes, problem).ru


def power(genes: np.ndarray, problem: PlacementProblem) -> float:
    """Linear power model over active servers; inactive servers draw nothing."""
    return cost(genes, problem).pw


def active_servers(genes: np.ndarray, problem: PlacementProblem) -> int:
    return int(np.count_nonzero(server_loads(genes, problem)[2]))


def dominates(a: Cost, b: Cost) -> bool:
    """a dominates b: no worse on both objectives and strictly better on one."""
    return a.ru >= b.ru and a.pw <= b.pw and (a.ru > b.ru or a.pw < b.pw)


def _domination_matrix(costs: Sequence[Cost]) -> np.ndarray:
    arr = np.asarray(costs, dtype=float).reshape(-1, 2)
    ru, pw = arr[:, 0], arr[:, 1]
    no_worse = (ru[:, None] >= ru[None, :]) & (pw[:, None] <= pw[None, :])
    better = (ru[:, None] > ru[None, :]) | (pw[:, None] < pw[None, :])
    return no_worse & better


def pareto_fronts(costs: Sequence[Cost]) -> ParetoFronts:
    """Fast non-dominated sort: peel fronts using domination counts."""
    size = len(costs)
    ranks = np.zeros(size, dtype=np.int64)
    if size == 0:
        return ParetoFronts([], ranks)
    dominated_by = _domination_matrix(costs)  # row p holds S_p, the members p dominates
    remaining = dominated_by.sum(axis=0)  # n_q, how many members dominate q
    current = np.flatnonzero(remaining == 0)
    fronts: List[List[int]] = []
    rank = 1
    while current.size:
        ranks[current] = rank
        fronts.append(current.tolist())
        remaining = remaining - dominated_by[current].sum(axis=0)
        remaining[ranks > 0] = -1
        current = np.flatnonzero(remaining == 0)
        rank += 1
    return ParetoFronts(fronts, ranks)


def _server_preference(problem: PlacementProblem) -> np.ndarray:
    ids = np.arange(problem.n_servers)
    return np.lexsort((ids, problem.pw_idle, problem.density))


def repair(genes: np.ndarray, problem: PlacementProblem) -> np.ndarray:
    """
    Make an allocation feasible: overloaded servers evict their most recently assigned VMs,
    which then move to the most power-efficient active server with room, opening an empty
    server only if none fits.
    """
    genes = _check_genes(genes, problem).copy()
    if problem.vm_cpu.sum() > problem.cpu_capacity.sum() + _TOL or problem.vm_mem.sum() > problem.mem_capacity.sum() + _TOL:
        raise InfeasibleInstanceError("aggregate VM demand exceeds fleet capacity")
    cpu, mem, hosted = server_loads(genes, problem)
    overloaded = np.flatnonzero((cpu > problem.cpu_capacity + _TOL) | (mem > problem.mem_capacity + _TOL))
    if overloaded.size == 0:
        return genes

    evicted = []
    for s in overloaded:
        for v in np.flatnonzero(genes == s)[::-1]:
            if cpu[s] <= problem.cpu_capacity[s] + _TOL and mem[s] <= problem.mem_capacity[s] + _TOL:
                break
            cpu[s] -= problem.vm_cpu[v]
            mem[s] -= problem.vm_mem[v]
            hosted[s] -= 1
            genes[v] = -1
            evicted.append(int(v))

    preference = _server_preference(problem)
    for v in sorted(evicted):
        fits = (cpu + problem.vm_cpu[v] <= problem.cpu_capacity + _TOL) & (mem + problem.vm_mem[v] <= problem.mem_capacity + _TOL)
        ordered = preference[fits[preference]]
        if ordered.size == 0:
            raise InfeasibleInstanceError(f"VM {problem.vms[v].vm_id} fits on no server")
        open_ones = ordered[hosted[ordered] > 0]
        target = int(open_ones[0] if open_ones.size else ordered[0])
        genes[v] = target
        cpu[target] += problem.vm_cpu[v]
        mem[target] += problem.vm_mem[v]
        hosted[target] += 1
    logger.debug(f"repair moved {len(evicted)} VM(s) off {overloaded.size} overloaded server(s)")
    return genes


def make_allocation(genes: np.ndarray, problem: PlacementProblem, history: Sequence[float] = ()) -> Allocation:
    genes = _check_genes(genes, problem)
    c = cost(genes, problem)
    return Allocation(genes=genes.copy(), ru=c.ru, pw=c.pw, active_pms=active_servers(genes, problem), history=tuple(history))


def place_best_fit(problem: PlacementProblem) -> Allocation:
    """Each VM in order goes to the feasible server leaving the least CPU slack, then memory slack."""
    genes = np.full(problem.n_vms, -1, dtype=np.int64)
    cpu_free = problem.cpu_capacity.copy()
    mem_free = problem.mem_capacity.copy()
    for v in range(problem.n_vms):
        candidates = np.flatnonzero((cpu_free >= problem.vm_cpu[v] - _TOL) & (mem_free >= problem.vm_mem[v] - _TOL))
        if candidates.size == 0:
            raise InfeasibleInstanceError(f"Best-Fit: VM {problem.vms[v].vm_id} fits on no server")
        cpu_slack = cpu_free[candidates] - problem.vm_cpu[v]
        mem_slack = mem_free[candidates] - problem.vm_mem[v]
        target = int(candidates[np.lexsort((candidates, mem_slack, cpu_slack))[0]])
        genes[v] = target
        cpu_free[target] -= problem.vm_cpu[v]
        mem_free[target] -= problem.vm_mem[v]
    return make_allocation(genes, problem)


def place_random_fit(problem: PlacementProblem, seed: int = 0) -> Allocation:
    """Each VM in order goes to a uniformly chosen server that still has room."""
    rng = np.random.default_rng(seed)
    genes = np.full(problem.n_vms, -1, dtype=np.int64)
    cpu_free = problem.cpu_capacity.copy()
    mem_free = problem.mem_capacity.copy()
    for v in range(problem.n_vms):
        candidates = np.flatnonzero((cpu_free >= problem.vm_cpu[v] - _TOL) & (mem_free >= problem.vm_mem[v] - _TOL))
        if candidates.size == 0:
            raise InfeasibleInstanceError(f"Random-Fit: VM {problem.vms[v].vm_id} fits on no server")
        target = int(rng.choice(candidates))
        genes[v] = target
        cpu_free[target] -= problem.vm_cpu[v]
        mem_free[target] -= problem.vm_mem[v]
    return make_allocation(genes, problem)


def _random_member(problem: PlacementProblem, rng: np.random.Generator, attempts: int = 10) -> Optional[np.ndarray]:
    for _ in range(attempts):
        try:
            return repair(rng.integers(problem.n_servers, size=problem.n_vms), problem)
        except InfeasibleInstanceError:
            continue
    return None


def _front_pick(population: np.ndarray, costs: np.ndarray, ranks: np.ndarray) -> int:
    """Front-1 member with least power, then highest utilization, then lowest index."""
    front = np.flatnonzero(ranks == 1)
    order = np.lexsort((front, -costs[front, 0], costs[front, 1]))
    return int(front[order[0]])


def place_ga(problem: PlacementProblem, config: Optional[GaConfig] = None, seed: Optional[int] = None) -> Allocation:
    """
    Multi-objective GA over VM->server gene vectors: one-point crossover with a random mate,
    per-gene mutation to a random server, repair, and survival by (front rank, power, -RU).
    """
    cfg = config or GaConfig()
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    q, p, size = problem.n_vms, problem.n_servers, cfg.population
    if q == 0:
        return make_allocation(np.zeros(0, dtype=np.int64), problem)

    members = []
    if cfg.seed_with_best_fit:
        try:
            members.append(place_best_fit(problem).genes)
        except InfeasibleInstanceError:
            logger.debug("Best-Fit seed unavailable; starting from random members only")
    while len(members) < size:
        member = _random_member(problem, rng)
        if member is None:
            if members:
                member = members[0].copy()
            else:
                raise InfeasibleInstanceError(f"no feasible allocation found for {q} VM(s) on {p} server(s)")
        members.append(member)
    population = np.stack(members)
    costs = np.array([cost(g, problem) for g in population])
    ranks = pareto_fronts([Cost(*c) for c in costs]).ranks
    history = [float(costs[_front_pick(population, costs, ranks), 1])]

    for _ in range(cfg.gmax):
        children = []
        for i in range(size):
            mate = int(rng.integers(size - 1)) if size > 1 else 0
            if size > 1 and mate >= i:
                mate += 1
            if q > 1 and rng.random() < cfg.crossover_rate:
                cut = int(rng.integers(1, q))
                first = np.concatenate([population[i, :cut], population[mate, cut:]])
                second = np.concatenate([population[mate, :cut], population[i, cut:]])
            else:
                first, second = population[i].copy(), population[mate].copy()
            for child in (first, second):
                flips = rng.random(q) < cfg.mutation_rate
                if flips.any():
                    child[flips] = rng.integers(p, size=int(flips.sum()))
                try:
                    children.append(repair(child, problem))
                except InfeasibleInstanceError:
                    continue
        pool = np.vstack([population] + ([np.stack(children)] if children else []))
        pool_costs = np.vstack([costs] + ([np.array([cost(c, problem) for c in children])] if children else []))
        pool_ranks = pareto_fronts([Cost(*c) for c in pool_costs]).ranks
        keep = np.lexsort((np.arange(len(pool)), -pool_costs[:, 0], pool_costs[:, 1], pool_ranks))[:size]
        population, costs, ranks = pool[keep], pool_costs[keep], pool_ranks[keep]
        ranks = pareto_fronts([Cost(*c) for c in costs]).ranks
        history.append(float(costs[_front_pick(population, costs, ranks), 1]))

    best = _front_pick(population, costs, ranks)
    return make_allocation(population[best], problem, history)


class GaPlacementEngine(IPlacementEngine):
    name = "GA"

    def __init__(self, config: Optional[GaConfig] = None):
        self.config = config or GaConfig()

    def place(self, problem: PlacementProblem, seed: int = 0) -> Allocation:
        return place_ga(problem, self.config, seed)


class BestFitPlacementEngine(IPlacementEngine):
    name = "BestFit"

    def place(self, problem: PlacementProblem, seed: int = 0) -> Allocation:
        return place_best_fit(problem)


class RandomFitPlacementEngine(IPlacementEngine):
    name = "RandomFit"

    def place(self, problem: PlacementProblem, seed: int = 0) -> Allocation:
        return place_random_fit(problem, seed)


def build_engine(name: str, ga_config: Optional[GaConfig] = None) -> IPlacementEngine:
    engines = {
        "GA": lambda: GaPlacementEngine(ga_config),
        "BestFit": BestFitPlacementEngine,
        "RandomFit": RandomFitPlacementEngine,
    }
    if name not in engines:
        raise PlacementError(f"unknown placement engine '{name}', expected one of {sorted(engines)}")
    return engines[name]()
