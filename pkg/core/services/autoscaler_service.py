"""
Autoscaler service.
Follows SRP - Single Responsibility: group predicted task demands with K-means (elbow-chosen K)
and map each group to the VM type that covers it.
"""
import warnings
from typing import List, Sequence

import numpy as np
from sklearn.cluster import KMeans, kmeans_plusplus
from sklearn.exceptions import ConvergenceWarning

from core.models import Clustering, TaskDemand, VmCatalog, VmDemand, VmType
from core.utils.error_handler import CapacityError, ClusteringError
from core.utils.logging_utils import get_logger

logger = get_logger(__name__)

DEFAULT_K_MAX = 8
_EPS = 1e-12


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _lloyd_step(points: np.ndarray, centroids: np.ndarray, seed: int) -> KMeans:
    """One Lloyd iteration from the given centroids; sklearn relocates empty clusters to the farthest points."""
    model = KMeans(n_clusters=centroids.shape[0], init=centroids, n_init=1, max_iter=1, algorithm="lloyd",
                   random_state=seed)
    with warnings.catch_warnings():
        # duplicate points leave fewer distinct clusters than K
        warnings.simplefilter("ignore", ConvergenceWarning)
        return model.fit(points)


def kmeans(points: np.ndarray, k: int, seed: int = 0, max_iters: int = 100) -> Clustering:
    """Lloyd's algorithm from k-means++ seeds, stepped one iteration at a time to record the wcss curve."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m = points.shape[0]
    if m == 0:
        raise ClusteringError("cannot cluster an empty point set")
    if not 1 <= k <= m:
        raise ClusteringError(f"K={k} must lie in [1, {m}]")
    if max_iters < 1:
        raise ClusteringError(f"max_iters must be >= 1, got {max_iters}")

    centroids, _ = kmeans_plusplus(points, n_clusters=k, random_state=seed)
    history: List[float] = []
    labels = None
    for _ in range(max_iters):
        model = _lloyd_step(points, centroids, seed)
        wcss = float(model.inertia_)
        if history and wcss > history[-1] + 1e-9 * max(1.0, history[-1]):
            raise ClusteringError(f"wcss increased from {history[-1]} to {wcss}")
        history.append(wcss)
        centroids = model.cluster_centers_.copy()
        stable = labels is not None and np.array_equal(model.labels_, labels)
        labels = model.labels_.astype(int)
        if stable:
            break
    else:
        logger.debug(f"k-means with K={k} stopped after {max_iters} iteration(s)")

    d2 = _squared_distances(points, centroids)
    if np.any(d2[np.arange(m), labels] > d2.min(axis=1) + 1e-9 * max(1.0, float(d2.max()))):
        raise ClusteringError("final assignment is not nearest-centroid")
    return Clustering(k=k, centroids=centroids, labels=labels, wcss=history[-1], wcss_history=tuple(history))


def knee_from_wcss(wcss: Sequence[float]) -> int:
    """K (1-based) with the largest second difference; ties go to the smaller K."""
    wcss = [float(v) for v in wcss]
    if not wcss:
        raise ClusteringError("empty wcss curve")
    if wcss[0] <= _EPS or len(wcss) == 1:
        return 1
    if len(wcss) == 2:
        return 2 if wcss[1] < wcss[0] else 1
    curve = np.asarray(wcss)
    second = curve[:-2] - 2 * curve[1:-1] + curve[2:]  # entry j is K = j + 2
    return int(np.argmax(second)) + 2


def wcss_curve(points: np.ndarray, k_max: int, seed: int = 0, max_iters: int = 100) -> List[float]:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    upper = min(k_max, points.shape[0])
    return [kmeans(points, k, seed, max_iters).wcss for k in range(1, upper + 1)]


def elbow(points: np.ndarray, k_max: int = DEFAULT_K_MAX, seed: int = 0, max_iters: int = 100) -> int:
    """Elbow K over K = 1..k_max; fewer than three points have no knee and give 1."""
    if k_max < 1:
        raise ClusteringError(f"k_max must be >= 1, got {k_max}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 3:
        return 1
    return knee_from_wcss(wcss_curve(points, k_max, seed, max_iters))


def map_cluster_to_vm(demands: np.ndarray, catalog: VmCatalog) -> VmType:
    """
    Band mapping on the cluster's per-resource extremes.
    A cluster fits a band when its minimum exceeds the next-smaller type and its maximum is
    within the type; clusters straddling bands get the smallest type covering their maximum.
    """
    demands = np.atleast_2d(np.asarray(demands, dtype=float))
    caps = catalog.capacities
    if demands.shape[1] != caps.shape[1]:
        raise CapacityError(f"demands have {demands.shape[1]} resource(s), catalog has {caps.shape[1]}")
    z_max = demands.max(axis=0)
    z_min = demands.min(axis=0)
    if np.any(z_max > caps[-1] + _EPS):
        raise CapacityError(f"demand exceeds largest instance: {z_max.tolist()} > {caps[-1].tolist()}")

    types = catalog.types
    if np.all(z_max <= caps[0] + _EPS):
        return types[0]
    for idx in range(1, len(types)):
        if np.all(caps[idx - 1] < z_min) and np.all(z_max <= caps[idx] + _EPS):
            return types[idx]
    return catalog.smallest_covering(z_max)


def size_per_task(demands: np.ndarray, catalog: VmCatalog) -> List[str]:
    """Smallest covering type per task, no clustering."""
    demands = np.atleast_2d(np.asarray(demands, dtype=float))
    return [catalog.smallest_covering(row).name for row in demands]


def autoscale(
    tasks: Sequence[TaskDemand],
    catalog: VmCatalog,
    seed: int = 0,
    k_max: int = DEFAULT_K_MAX,
    max_iters: int = 100,
) -> VmDemand:
    """Elbow-chosen K-means over task demands, then one VM of the cluster's type per task."""
    if not tasks:
        raise ClusteringError("autoscale needs at least one task")
    demands = np.stack([np.asarray(t.demand, dtype=float) for t in tasks])
    # clustering coordinates are fractions of the largest instance so resources weigh alike
    coords = demands / catalog.largest.capacity
    k = elbow(coords, k_max, seed, max_iters)
    clustering = kmeans(coords, k, seed, max_iters)

    cluster_types = {}
    for j in range(k):
        members = clustering.labels == j
        if members.any():
            vm_type = map_cluster_to_vm(demands[members], catalog)
            if np.any(vm_type.capacity < demands[members].max(axis=0) - _EPS):
                raise CapacityError(f"cluster {j} mapped to {vm_type.name} which does not cover its demand")
            cluster_types[j] = vm_type.name

    task_types = tuple(cluster_types[int(label)] for label in clustering.labels)
    counts = {t.name: 0 for t in catalog}
    for name in task_types:
        counts[name] += 1
    if sum(counts.values()) != len(tasks):
        raise ClusteringError("autoscaling lost track of tasks")
    logger.debug(f"autoscale: {len(tasks)} task(s) -> K={k} -> {counts}")
    return VmDemand(counts=counts, cluster_types=cluster_types, task_types=task_types, clustering=clustering)
