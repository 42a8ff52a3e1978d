"""
Unit tests for the autoscaler: K-means, elbow selection and VM-type mapping.
"""
import numpy as np
import pytest

from core.models import TaskDemand
from core.services.autoscaler_service import (
    autoscale,
    elbow,
    kmeans,
    knee_from_wcss,
    map_cluster_to_vm,
    size_per_task,
    wcss_curve,
)
from core.utils.error_handler import CapacityError, ClusteringError


def _blobs(seed=0, per_blob=20):
    rng = np.random.default_rng(seed)
    centres = np.array([[0.1, 0.1], [0.5, 0.9], [0.9, 0.2]])
    return np.vstack([c + rng.normal(0, 0.02, (per_blob, 2)) for c in centres]), centres


class TestKmeans:

    def test_single_cluster_is_the_mean(self):
        points = np.random.default_rng(1).random((10, 2))
        result = kmeans(points, 1)
        np.testing.assert_allclose(result.centroids[0], points.mean(axis=0))
        assert result.wcss == pytest.approx(((points - points.mean(axis=0)) ** 2).sum())

    def test_one_cluster_per_point_has_zero_wcss(self):
        points = np.random.default_rng(2).random((6, 2))
        result = kmeans(points, 6)
        assert result.wcss == pytest.approx(0.0)
        assert len(set(result.labels.tolist())) == 6

    def test_separated_blobs_are_recovered(self):
        points, centres = _blobs()
        result = kmeans(points, 3, seed=4)
        found = result.centroids[np.lexsort(result.centroids.T[::-1])]
        expected = centres[np.lexsort(centres.T[::-1])]
        np.testing.assert_allclose(found, expected, atol=0.02)
        for start in range(0, 60, 20):
            assert len(set(result.labels[start:start + 20].tolist())) == 1

    def test_wcss_never_increases_between_iterations(self):
        points = np.random.default_rng(3).random((50, 2))
        history = kmeans(points, 5, seed=1).wcss_history
        assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))

    def test_duplicate_points(self):
        result = kmeans(np.ones((5, 2)), 3)
        assert result.wcss == pytest.approx(0.0)

    def test_same_seed_same_labels(self):
        points = np.random.default_rng(8).random((30, 2))
        np.testing.assert_array_equal(kmeans(points, 4, seed=2).labels, kmeans(points, 4, seed=2).labels)

    @pytest.mark.parametrize("k", [0, 11])
    def test_k_out_of_range(self, k):
        with pytest.raises(ClusteringError):
            kmeans(np.random.default_rng(0).random((10, 2)), k)

    def test_empty_points(self):
        with pytest.raises(ClusteringError):
            kmeans(np.empty((0, 2)), 1)


class TestElbow:

    @pytest.mark.parametrize(
        "wcss,expected",
        [
            ([100, 20, 18, 17], 2),
            ([100, 75, 50, 25], 2),
            ([0.0, 0.0, 0.0], 1),
            ([5.0], 1),
            ([10.0, 4.0], 2),
            ([100, 90, 20, 19, 18], 3),
        ],
    )
    def test_knee(self, wcss, expected):
        assert knee_from_wcss(wcss) == expected

    def test_curve_is_non_increasing_on_blobs(self):
        points, _ = _blobs(seed=5)
        curve = wcss_curve(points, 6, seed=1)
        assert all(b <= a + 1e-9 for a, b in zip(curve, curve[1:]))

    def test_three_blobs_give_three(self):
        points, _ = _blobs(seed=6)
        assert elbow(points, 6, seed=1) == 3

    def test_curve_is_capped_by_point_count(self):
        assert len(wcss_curve(np.random.default_rng(0).random((3, 2)), 8)) == 3

    @pytest.mark.parametrize("points", [[[0.2, 0.3]], [[0.0, 0.0], [1.0, 1.0]]])
    def test_fewer_than_three_points_give_one(self, points):
        assert elbow(np.array(points), 8) == 1

    def test_bad_k_max(self):
        with pytest.raises(ClusteringError):
            elbow(np.zeros((3, 2)), 0)


class TestMapClusterToVm:

    @pytest.mark.parametrize(
        "demands,expected",
        [
            ([[100, 0.1], [400, 0.4]], "small"),
            ([[600, 0.6], [900, 0.9]], "medium"),
            ([[1000, 1.0]], "medium"),
            ([[1600, 2.2], [1800, 2.5]], "Xlarge"),
            ([[300, 0.2], [1800, 2.5]], "Xlarge"),
            ([[200, 0.2], [1200, 1.5]], "large"),
        ],
    )
    def test_band_mapping(self, catalog, demands, expected):
        assert map_cluster_to_vm(np.array(demands, dtype=float), catalog).name == expected

    def test_demand_above_largest_type(self, catalog):
        with pytest.raises(CapacityError):
            map_cluster_to_vm(np.array([[2500.0, 1.0]]), catalog)

    def test_resource_count_mismatch(self, catalog):
        with pytest.raises(CapacityError):
            map_cluster_to_vm(np.array([[1.0, 1.0, 1.0]]), catalog)


def test_size_per_task(catalog):
    assert size_per_task(np.array([[100, 0.1], [1500, 0.5], [100, 2.5]]), catalog) == ["small", "large", "Xlarge"]


class TestAutoscale:

    def test_every_task_gets_exactly_one_vm(self, catalog):
        rng = np.random.default_rng(11)
        tasks = [TaskDemand(f"t{i}", np.array([rng.uniform(50, 1900), rng.uniform(0.05, 2.9)])) for i in range(40)]
        result = autoscale(tasks, catalog, seed=3, k_max=6)
        assert result.total == 40
        assert len(result.task_types) == 40
        for task, type_name in zip(tasks, result.task_types):
            assert np.all(catalog.by_name(type_name).capacity >= task.demand - 1e-9)

    def test_counts_cover_every_catalog_type(self, catalog):
        result = autoscale([TaskDemand("a", np.array([100.0, 0.1]))], catalog)
        assert set(result.counts) == {"small", "medium", "large", "Xlarge"}
        assert result.counts["small"] == 1

    def test_identical_tasks_share_a_type(self, catalog):
        tasks = [TaskDemand(f"t{i}", np.array([700.0, 0.7])) for i in range(5)]
        result = autoscale(tasks, catalog)
        assert result.counts["medium"] == 5

    def test_no_tasks(self, catalog):
        with pytest.raises(ClusteringError):
            autoscale([], catalog)

    def test_oversized_task(self, catalog):
        with pytest.raises(CapacityError):
            autoscale([TaskDemand("huge", np.array([5000.0, 1.0]))], catalog)

    def test_two_distinct_tasks_share_one_cluster(self, catalog):
        tasks = [TaskDemand("a", np.array([100.0, 0.1])), TaskDemand("b", np.array([1900.0, 2.9]))]
        result = autoscale(tasks, catalog)
        assert result.clustering.k == 1
        assert result.task_types[0] == result.task_types[1]
        assert result.total == 2
