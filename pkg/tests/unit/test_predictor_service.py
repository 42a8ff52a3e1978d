"""
Unit tests for the OM-FNN predictor: genome layout, forward pass, fitness and padding.
"""
import numpy as np
import pytest

from core.models import Forecast, Topology, TrainingWindow
from core.services.predictor_service import (
    OmFnnPredictor,
    edp,
    fitness,
    forward,
    forward_batch,
    network_size,
    pack,
    sigmoid,
    unpack,
)
from core.utils.error_handler import PredictorError


@pytest.mark.parametrize("n,p,expected", [(4, 3, 18), (1, 1, 3), (3, 5, 25)])
def test_network_size(n, p, expected):
    assert network_size(Topology(n, p)) == expected


def test_genome_length_scales_with_channels():
    assert Topology(3, 5, x=2).genome_length == 50


def test_pack_inverts_unpack():
    topology = Topology(3, 4, x=2)
    genome = np.random.default_rng(1).normal(size=topology.genome_length)
    w_in, w_out = unpack(genome, topology)
    assert w_in.shape == (2, 4, 4)
    assert w_out.shape == (2, 4)
    np.testing.assert_array_equal(pack(w_in, w_out), genome)


def test_channels_own_disjoint_genome_slices():
    topology = Topology(3, 4, x=3)
    w_in, w_out = unpack(np.zeros(topology.genome_length), topology)
    owners = []
    for k in range(topology.x):
        marked_in, marked_out = w_in.copy(), w_out.copy()
        marked_in[k], marked_out[k] = 1.0, 1.0
        owners.append(set(np.flatnonzero(pack(marked_in, marked_out)).tolist()))
    assert all(len(genes) == topology.channel_size for genes in owners)
    assert set.union(*owners) == set(range(topology.genome_length))
    assert sum(len(genes) for genes in owners) == topology.genome_length


def test_one_channel_ignores_other_channels_weights_and_inputs():
    topology = Topology(3, 4, x=3)
    rng = np.random.default_rng(8)
    genome = rng.uniform(-1, 1, topology.genome_length)
    window = rng.random((3, 3))
    base = forward(genome, topology, window)

    w_in, w_out = unpack(genome, topology)
    w_in, w_out = w_in.copy(), w_out.copy()
    w_in[1] += 0.5
    w_out[1] -= 0.5
    rewired = forward(pack(w_in, w_out), topology, window)
    assert rewired[0] == base[0] and rewired[2] == base[2]
    assert rewired[1] != base[1]

    shifted = window.copy()
    shifted[:, 1] = 1.0 - shifted[:, 1]
    moved = forward(genome, topology, shifted)
    assert moved[0] == base[0] and moved[2] == base[2]


class TestForward:

    def test_zero_weights_give_half(self):
        topology = Topology(3, 5, x=2)
        out = forward(np.zeros(topology.genome_length), topology, np.full((3, 2), 0.7))
        np.testing.assert_allclose(out, [0.5, 0.5])

    def test_single_hidden_node_by_hand(self):
        topology = Topology(1, 1)
        # input weight, bias, output weight
        genome = np.array([2.0, -0.5, 1.5])
        expected = sigmoid(1.5 * sigmoid(2.0 * 0.4 - 0.5))
        assert forward(genome, topology, [[0.4]])[0] == pytest.approx(expected)

    def test_identical_channels_give_identical_outputs(self):
        topology = Topology(2, 3, x=2)
        channel = np.random.default_rng(4).normal(size=topology.channel_size)
        genome = np.concatenate([channel, channel])
        out = forward(genome, topology, np.array([[0.2, 0.2], [0.9, 0.9]]))
        assert out[0] == out[1]

    def test_deterministic(self):
        topology = Topology(3, 5, x=2)
        genome = np.random.default_rng(0).uniform(-1, 1, topology.genome_length)
        window = np.random.default_rng(1).random((3, 2))
        np.testing.assert_array_equal(forward(genome, topology, window), forward(genome, topology, window))

    def test_batch_matches_single(self):
        topology = Topology(3, 2, x=2)
        rng = np.random.default_rng(2)
        population = rng.uniform(-1, 1, (4, topology.genome_length))
        inputs = rng.random((5, 3, 2))
        batch = forward_batch(population, topology, inputs)
        for i in range(4):
            for m in range(5):
                np.testing.assert_allclose(batch[i, m], forward(population[i], topology, inputs[m]))

    def test_rejects_wrong_window_shape(self):
        with pytest.raises(PredictorError):
            forward(np.zeros(Topology(3, 2).genome_length), Topology(3, 2), np.zeros((2, 1)))


class TestFitness:

    def test_perfect_prediction_is_zero(self):
        topology = Topology(1, 1)
        genome = np.zeros(topology.genome_length)
        windows = [TrainingWindow(np.array([[0.3]]), np.array([0.5])) for _ in range(3)]
        per_resource, aggregate = fitness(genome, topology, windows)
        np.testing.assert_allclose(per_resource, [0.0])
        assert aggregate == 0.0

    def test_mean_squared_error_by_hand(self):
        topology = Topology(1, 1)
        genome = np.zeros(topology.genome_length)  # always predicts 0.5
        windows = [TrainingWindow(np.array([[0.0]]), np.array([1.5])),
                   TrainingWindow(np.array([[0.0]]), np.array([-0.5]))]
        per_resource, _ = fitness(genome, topology, windows)
        assert per_resource[0] == pytest.approx(1.0)

    def test_no_windows(self):
        with pytest.raises(PredictorError):
            fitness(np.zeros(3), Topology(1, 1), [])


@pytest.mark.parametrize(
    "prev,curr,alpha,expected",
    [(0.0, 0.0, 0.8, 0.0), (0.3, 0.3, 0.6, 0.3), (0.02, 0.01, 0.8, 0.012)],
)
def test_edp(prev, curr, alpha, expected):
    assert edp(prev, curr, alpha) == pytest.approx(expected)


@pytest.mark.parametrize("alpha", [0.5, 0.2, 1.2])
def test_edp_rejects_alpha_outside_range(alpha):
    with pytest.raises(PredictorError):
        edp(0.1, 0.1, alpha)


class TestOmFnnPredictor:

    def setup_method(self):
        self.topology = Topology(1, 1, x=2)
        self.predictor = OmFnnPredictor(self.topology, alpha=0.8, vm_id="vm-1")
        # zero weights predict 0.5 on every channel
        self.predictor.install(np.zeros(self.topology.genome_length), d_min=[0.0, 0.0], d_max=[2.0, 4.0])

    def test_untrained_predictor_raises(self):
        fresh = OmFnnPredictor(self.topology)
        with pytest.raises(PredictorError):
            fresh.predict_padded(np.zeros((1, 2)))

    def test_zero_padding_leaves_prediction(self):
        forecast = self.predictor.predict_padded(np.zeros((1, 2)))
        assert isinstance(forecast, Forecast)
        np.testing.assert_allclose(forecast.padded, forecast.predicted)

    def test_padding_from_error_history(self):
        self.predictor.record_error([0.02, 0.02])
        self.predictor.record_error([0.01, 0.01])
        forecast = self.predictor.predict_padded(np.zeros((1, 2)))
        np.testing.assert_allclose(forecast.padded, [0.512, 0.512])

    def test_padded_forecast_is_clamped(self):
        self.predictor.record_error([0.9, 0.9])
        forecast = self.predictor.predict_padded(np.zeros((1, 2)))
        np.testing.assert_allclose(forecast.padded, [1.0, 1.0])

    def test_forecast_raw_uses_training_bounds(self):
        _, raw = self.predictor.forecast_raw(np.array([[1.0, 2.0]]))
        np.testing.assert_allclose(raw, [1.0, 2.0])

    def test_observe_pushes_squared_error(self):
        self.predictor.forecast_raw(np.array([[1.0, 2.0]]))
        error = self.predictor.observe(np.array([2.0, 2.0]))
        np.testing.assert_allclose(error, [0.25, 0.0])
        np.testing.assert_allclose(self.predictor.error_history[-1], [0.25, 0.0])

    def test_observe_before_forecast(self):
        with pytest.raises(PredictorError):
            self.predictor.observe(np.array([1.0, 1.0]))
