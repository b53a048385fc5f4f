import numpy as np
import pytest

from viplab import worlds as W
from viplab.encoder import Encoder, EncoderConfig, init_encoder
from viplab.trajstore import Trajectory, TrajectoryDataset


@pytest.fixture
def point_mass():
    return W.PointMassWorld()


@pytest.fixture
def grid():
    return W.GridWorld(5, 5, blocked=frozenset({(2, 2), (2, 3)}))


@pytest.fixture
def scalar_encoder():
    """phi(x) = x on 1-d observations."""
    return Encoder(EncoderConfig(1, (), 1), [(np.eye(1), np.zeros(1))])


@pytest.fixture
def small_encoder():
    return init_encoder(EncoderConfig(input_dim=3, hidden_widths=(12, 10), output_dim=4, activation="tanh", init_seed=7))


@pytest.fixture
def random_dataset():
    rng = np.random.default_rng(0)
    trajs = [Trajectory(frames=rng.normal(size=(length, 3))) for length in (5, 8, 11, 6)]
    return TrajectoryDataset(trajs, {"mode": "synthetic", "obs_dim": 3})


@pytest.fixture
def demo_dataset(point_mass):
    return W.make_expert_dataset(point_mass, W.RAW_STATE, n=6, seed=3, noise=0.0, setting="hard", max_len=60)
