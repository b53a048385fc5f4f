import numpy as np
import pytest

from viplab import gradcore as gc
from viplab import objectives as obj
from viplab.encoder import Encoder, EncoderConfig, init_encoder
from viplab.trajstore import LSTDBatch, TCNBatch, VIPBatch


def scalar_batch(start, mid, mid_next, goal, flag=0.0):
    col = lambda v: np.array([[v]])
    return VIPBatch(
        start=col(start),
        mid=col(mid),
        mid_next=col(mid_next),
        goal=col(goal),
        goal_flag=np.array([flag]),
        neg=np.zeros((0, 1)),
        neg_next=np.zeros((0, 1)),
        n_neg=0,
        indices=[(0, 0, 0, 1)],
        neg_traj=[],
    )


@pytest.fixture
def cfg():
    return obj.LossConfig(gamma=0.98, n_negatives=0, l1_coeff=0.0)


def test_vip_loss_hand_value(scalar_encoder, cfg):
    # scalar embeddings 0, 0.5, 0.8, 1: attraction 0.02*1; exponent
    # -0.5 + 1 + 0.98*0.2 = 0.696 -> loss 0.716
    batch = scalar_batch(0.0, 0.5, 0.8, 1.0)
    loss = obj.vip_loss(scalar_encoder, batch, cfg)
    assert float(loss.values) == pytest.approx(0.716, abs=1e-6)


def test_vip_loss_collapsed_embeddings(scalar_encoder, cfg):
    batch = scalar_batch(0.3, 0.3, 0.3, 0.3)
    loss = obj.vip_loss(scalar_encoder, batch, cfg)
    assert float(loss.values) == pytest.approx(1.0, abs=1e-4)


def test_vip_loss_batch_permutation_invariant(cfg, small_encoder, random_dataset):
    rng = np.random.default_rng(0)
    batch = obj.sample_vip_batch(random_dataset, 16, 0, rng)
    base = float(obj.vip_loss(small_encoder, batch, cfg).values)
    perm = np.random.default_rng(1).permutation(16)
    shuffled = VIPBatch(
        start=batch.start[perm],
        mid=batch.mid[perm],
        mid_next=batch.mid_next[perm],
        goal=batch.goal[perm],
        goal_flag=batch.goal_flag[perm],
        neg=batch.neg,
        neg_next=batch.neg_next,
        n_neg=0,
        indices=batch.indices,
        neg_traj=[],
    )
    assert abs(float(obj.vip_loss(small_encoder, shuffled, cfg).values) - base) <= 1e-12


def test_vip_attraction_weight_vanishes_as_gamma_to_one(scalar_encoder):
    # the (1 - gamma) coefficient scales the attraction term directly
    batch = scalar_batch(0.0, 0.5, 0.5, 1.0)
    for gamma, other in ((0.999, 0.99), (0.9999, 0.999)):
        near = obj.vip_loss(scalar_encoder, batch, obj.LossConfig(gamma=gamma, n_negatives=0, l1_coeff=0.0))
        far = obj.vip_loss(scalar_encoder, batch, obj.LossConfig(gamma=other, n_negatives=0, l1_coeff=0.0))
        assert abs(float(near.values) - float(far.values)) > 0  # both finite
    # attraction contribution: loss(d_start=1) - loss(d_start=0) == (1-gamma)*1
    with_start = scalar_batch(0.0, 0.5, 0.5, 1.0)
    no_start = scalar_batch(1.0, 0.5, 0.5, 1.0)
    for gamma in (0.9, 0.99, 0.999):
        c = obj.LossConfig(gamma=gamma, n_negatives=0, l1_coeff=0.0)
        delta = float(obj.vip_loss(scalar_encoder, with_start, c).values) - float(
            obj.vip_loss(scalar_encoder, no_start, c).values
        )
        assert delta == pytest.approx(1.0 - gamma, abs=1e-6)  # eps_norm smooths the zero distance


def test_tcn_loss_equidistant_zero(scalar_encoder, cfg):
    batch = TCNBatch(
        anchor=np.array([[0.0]]),
        positive=np.array([[0.5]]),
        negative=np.array([[-0.5]]),
        extra_neg=np.zeros((0, 1)),
        n_extra=0,
        indices=[(0, 0, 1, 2)],
    )
    assert float(obj.tcn_loss(scalar_encoder, batch, cfg).values) == pytest.approx(0.0, abs=1e-6)


def test_tcn_loss_hand_value(scalar_encoder, cfg):
    batch = TCNBatch(
        anchor=np.array([[0.0]]),
        positive=np.array([[0.1]]),
        negative=np.array([[1.0]]),
        extra_neg=np.zeros((0, 1)),
        n_extra=0,
        indices=[(0, 0, 1, 2)],
    )
    assert float(obj.tcn_loss(scalar_encoder, batch, cfg).values) == pytest.approx(-0.9, abs=1e-6)


def test_tcn_loss_decreases_as_negative_moves_away(scalar_encoder, cfg):
    def loss_at(neg):
        batch = TCNBatch(
            anchor=np.array([[0.0]]),
            positive=np.array([[0.1]]),
            negative=np.array([[neg]]),
            extra_neg=np.zeros((0, 1)),
            n_extra=0,
            indices=[(0, 0, 1, 2)],
        )
        return float(obj.tcn_loss(scalar_encoder, batch, cfg).values)

    values = [loss_at(v) for v in (0.5, 1.0, 2.0, 4.0)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_lstd_loss_collapsed(scalar_encoder, cfg):
    batch = LSTDBatch(
        obs=np.array([[0.5]]),
        obs_next=np.array([[0.5]]),
        goal=np.array([[0.5]]),
        goal_flag=np.zeros(1),
        indices=[(0, 0, 0, 1)],
    )
    assert float(obj.lstd_loss(scalar_encoder, batch, cfg).values) == pytest.approx(1.0, abs=1e-4)


def test_lstd_loss_hand_value(scalar_encoder, cfg):
    batch = LSTDBatch(
        obs=np.array([[0.0]]),
        obs_next=np.array([[0.5]]),
        goal=np.array([[1.0]]),
        goal_flag=np.zeros(1),
        indices=[(0, 0, 0, 1)],
    )
    assert float(obj.lstd_loss(scalar_encoder, batch, cfg).values) == pytest.approx(0.2401, abs=1e-6)


def test_lstd_loss_nonnegative(small_encoder, random_dataset, cfg):
    rng = np.random.default_rng(0)
    for _ in range(20):
        batch = obj.sample_lstd_tuples(random_dataset, 8, rng)
        assert float(obj.lstd_loss(small_encoder, batch, cfg).values) >= 0.0


@pytest.mark.parametrize("objective", ["vip", "tcn", "lstd"])
def test_loss_gradients_match_central_differences(objective, random_dataset):
    cfg = obj.LossConfig(gamma=0.98, n_negatives=2, l1_coeff=0.001, tcn_window=2)
    worst = 0.0
    for seed in range(3):
        enc = init_encoder(EncoderConfig(3, (10, 8), 4, "tanh", seed))
        batch = obj.sample_batch(random_dataset, objective, 4, cfg, np.random.default_rng(50 + seed))
        analytic = gc.backward(obj.loss_for(enc, objective, batch, cfg))
        fd = gc.central_difference(lambda: float(obj.loss_for(enc, objective, batch, cfg).values), enc.params(), 1e-5)
        for name, a in analytic.items():
            f = fd[name]
            worst = max(worst, float(np.max(np.abs(a - f) / np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-6))))
    assert worst <= 1e-4


@pytest.mark.parametrize("objective", ["vip", "tcn", "lstd"])
def test_losses_invariant_to_final_bias_translation(objective, random_dataset):
    # every term depends only on embedding differences
    cfg = obj.LossConfig(gamma=0.98, n_negatives=2, l1_coeff=0.0, tcn_window=2)
    enc = init_encoder(EncoderConfig(3, (10, 8), 4, "relu", 0))
    batch = obj.sample_batch(random_dataset, objective, 8, cfg, np.random.default_rng(7))
    base = float(obj.loss_for(enc, objective, batch, cfg).values)
    shifted = enc.copy()
    shifted.weights[-1][1][:] += 13.7
    moved = float(obj.loss_for(shifted, objective, batch, cfg).values)
    assert moved == pytest.approx(base, rel=1e-9, abs=1e-9)


def test_train_writes_metrics_and_checkpoints(tmp_path, demo_dataset):
    enc_cfg = EncoderConfig(2, (8, 8), 3, "relu", 1)
    tc = obj.TrainConfig(objective="vip", batch_size=4, learning_rate=1e-3, batches=20, eval_interval=10, seed=2)
    lc = obj.LossConfig(n_negatives=1, l1_coeff=0.001)
    result = obj.train(demo_dataset, enc_cfg, tc, lc, tmp_path)
    assert result.metrics_path.exists()
    lines = result.metrics_path.read_text().strip().splitlines()
    assert lines[0] == "batch,loss,grad_norm,ms"
    assert len(lines) == 21
    assert (tmp_path / "ck_000010.venc").exists()
    assert result.checkpoint_path.exists()


def test_train_deterministic_per_seed(tmp_path, demo_dataset):
    enc_cfg = EncoderConfig(2, (8, 8), 3, "relu", 1)
    tc = obj.TrainConfig(objective="vip", batch_size=4, learning_rate=1e-3, batches=15, eval_interval=0, seed=5)
    lc = obj.LossConfig(n_negatives=1)
    a = obj.train(demo_dataset, enc_cfg, tc, lc, tmp_path / "a")
    b = obj.train(demo_dataset, enc_cfg, tc, lc, tmp_path / "b")
    assert a.losses == b.losses
    assert (tmp_path / "a" / "encoder.venc").read_bytes() == (tmp_path / "b" / "encoder.venc").read_bytes()


def test_train_dim_mismatch_errors(tmp_path, demo_dataset):
    enc_cfg = EncoderConfig(5, (8,), 3, "relu", 1)
    tc = obj.TrainConfig(batches=2)
    with pytest.raises(ValueError, match="dim"):
        obj.train(demo_dataset, enc_cfg, tc, obj.LossConfig(), tmp_path)


def test_train_loss_decreases_on_toy_run(tmp_path, point_mass_demo_pair=None):
    from viplab import worlds as W

    pm = W.PointMassWorld()
    ds = W.make_expert_dataset(pm, W.RAW_STATE, n=20, seed=4, noise=0.0, setting="hard", max_len=60)
    enc_cfg = EncoderConfig(2, (32, 32), 2, "relu", 3)
    tc = obj.TrainConfig(objective="vip", batch_size=16, learning_rate=1e-3, batches=300, eval_interval=0, seed=6)
    result = obj.train(ds, enc_cfg, tc, obj.LossConfig(n_negatives=0, l1_coeff=0.0), tmp_path)
    first = float(np.mean(result.losses[:20]))
    last = float(np.mean(result.losses[-20:]))
    assert last < first


def test_vip_loss_with_negatives_uses_anchor_goal(small_encoder):
    # negatives scored against the anchor's goal: loss changes when the
    # anchor goal moves even with fixed negative frames
    rng = np.random.default_rng(0)
    base = VIPBatch(
        start=rng.normal(size=(2, 3)),
        mid=rng.normal(size=(2, 3)),
        mid_next=rng.normal(size=(2, 3)),
        goal=rng.normal(size=(2, 3)),
        goal_flag=np.zeros(2),
        neg=rng.normal(size=(4, 3)),
        neg_next=rng.normal(size=(4, 3)),
        n_neg=2,
        indices=[(0, 0, 0, 1), (1, 0, 0, 1)],
        neg_traj=[1, 1, 0, 0],
    )
    cfg = obj.LossConfig(n_negatives=2, l1_coeff=0.0)
    a = float(obj.vip_loss(small_encoder, base, cfg).values)
    moved = VIPBatch(**{**vars(base), "goal": base.goal + 0.5})
    b = float(obj.vip_loss(small_encoder, moved, cfg).values)
    assert a != b


@pytest.mark.filterwarnings("ignore::RuntimeWarning")  # intentional overflow
def test_train_divergence_aborts_with_batch_dump(tmp_path, demo_dataset):
    enc_cfg = EncoderConfig(2, (8, 8), 3, "relu", 1)
    # absurd learning rate overflows the forward pass within a few batches
    tc = obj.TrainConfig(objective="vip", batch_size=4, learning_rate=1e80, batches=200, eval_interval=0, seed=2)
    with pytest.raises(obj.TrainingDivergedError, match="batch"):
        obj.train(demo_dataset, enc_cfg, tc, obj.LossConfig(n_negatives=0, l1_coeff=0.0), tmp_path)
    dumps = list(tmp_path.glob("diverged_batch_*.npz"))
    assert len(dumps) == 1


def test_lstd_loss_batch_permutation_invariant(small_encoder, random_dataset):
    cfg = obj.LossConfig(gamma=0.98, n_negatives=0, l1_coeff=0.0)
    rng = np.random.default_rng(12)
    batch = obj.sample_lstd_tuples(random_dataset, 16, rng)
    base = float(obj.lstd_loss(small_encoder, batch, cfg).values)
    perm = np.random.default_rng(13).permutation(16)
    shuffled = LSTDBatch(
        obs=batch.obs[perm],
        obs_next=batch.obs_next[perm],
        goal=batch.goal[perm],
        goal_flag=batch.goal_flag[perm],
        indices=batch.indices,
    )
    assert abs(float(obj.lstd_loss(small_encoder, shuffled, cfg).values) - base) <= 1e-12


def test_tcn_loss_triplet_permutation_invariant(small_encoder, random_dataset):
    cfg = obj.LossConfig(gamma=0.98, n_negatives=0, l1_coeff=0.0, tcn_window=2)
    rng = np.random.default_rng(14)
    batch = obj.sample_tcn_triplets(random_dataset, 16, 2, rng)
    base = float(obj.tcn_loss(small_encoder, batch, cfg).values)
    perm = np.random.default_rng(15).permutation(16)
    shuffled = TCNBatch(
        anchor=batch.anchor[perm],
        positive=batch.positive[perm],
        negative=batch.negative[perm],
        extra_neg=batch.extra_neg,
        n_extra=0,
        indices=batch.indices,
    )
    assert abs(float(obj.tcn_loss(small_encoder, shuffled, cfg).values) - base) <= 1e-12
