"""The three pre-training losses and the training loop.

All three objectives treat the implicit value ``V(x; g) = -||phi(x) - phi(g)||``
as the similarity metric:

* ``vip``: attraction of sub-trajectory start to goal, weight (1 - gamma),
  plus a log-mean-exp over negated one-step TD residuals
  ``V(o) - delta - gamma * V(o')`` pooled over batch mid-pairs and the
  cross-trajectory negative pairs (scored against the anchor's goal).
* ``tcn``: single-view time contrast, ``-log`` of similarity to the positive
  over the mean similarity to pooled negatives, similarity ``exp(-||.||)``.
* ``lstd``: mean squared one-step TD residual.

``delta`` is the sparse reward: 0 on the goal frame, -1 elsewhere.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gradcore as gc
from .encoder import Encoder, EncoderConfig, embed_batch_nodes, init_encoder, make_param_nodes, save_encoder
from .trajstore import (
    LSTDBatch,
    TCNBatch,
    TrajectoryDataset,
    VIPBatch,
    sample_lstd_tuples,
    sample_tcn_triplets,
    sample_vip_batch,
)

OBJECTIVES = ("vip", "tcn", "lstd")


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class LossConfig:
    gamma: float = 0.98
    n_negatives: int = 3
    l1_coeff: float = 0.001
    eps_norm: float = 1e-12
    goal_selfloop_p: float = 0.0
    tcn_window: int = 4

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("LossConfig: gamma must be in (0, 1)")
        if self.n_negatives < 0 or self.tcn_window < 1 or self.eps_norm <= 0:
            raise ValueError("LossConfig: invalid sampler parameters")


@dataclass(frozen=True)
class TrainConfig:
    objective: str = "vip"
    batch_size: int = 32
    learning_rate: float = 1e-4
    batches: int = 2000
    eval_interval: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"TrainConfig: objective must be one of {OBJECTIVES}")
        if self.batch_size < 1 or self.batches < 1 or self.learning_rate <= 0:
            raise ValueError("TrainConfig: batch_size, batches >= 1 and learning_rate > 0 required")


def _distances(a: gc.DiffNode, b: gc.DiffNode, eps: float) -> gc.DiffNode:
    return gc.l2norm(gc.sub(a, b), eps)


def _l1_term(embeddings: list[gc.DiffNode], coeff: float, k: int) -> gc.DiffNode:
    flat = gc.concat([gc.flatten(gc.absval(e)) for e in embeddings])
    # mean over components * K = mean L1 norm over embeddings
    return gc.scale(gc.mean(flat), coeff * k)


def vip_loss(encoder: Encoder, batch: VIPBatch, config: LossConfig) -> gc.DiffNode:
    """(1-gamma) * mean start-goal distance + log-mean-exp of negated TD
    residuals over mid pairs and negatives, plus the L1 embedding penalty."""
    params = make_param_nodes(encoder)
    eps = config.eps_norm
    e_start = embed_batch_nodes(encoder, batch.start, params)
    e_goal = embed_batch_nodes(encoder, batch.goal, params)
    e_mid = embed_batch_nodes(encoder, batch.mid, params)
    e_next = embed_batch_nodes(encoder, batch.mid_next, params)
    embeddings = [e_start, e_goal, e_mid, e_next]

    d_start = _distances(e_start, e_goal, eps)
    d_mid = _distances(e_mid, e_goal, eps)
    d_next = _distances(e_next, e_goal, eps)
    delta = gc.constant(batch.goal_flag - 1.0)
    # V(o) - delta - gamma V(o') with V = -distance
    exponent = gc.sub(gc.sub(gc.scale(d_mid, -1.0), delta), gc.scale(d_next, -config.gamma))

    pooled = exponent
    if batch.n_neg > 0:
        e_neg = embed_batch_nodes(encoder, batch.neg, params)
        e_negn = embed_batch_nodes(encoder, batch.neg_next, params)
        embeddings += [e_neg, e_negn]
        anchor_goal = gc.repeat_rows(e_goal, batch.n_neg)
        d_no = _distances(e_neg, anchor_goal, eps)
        d_nn = _distances(e_negn, anchor_goal, eps)
        neg_delta = gc.constant(np.full(len(batch.neg), -1.0))
        neg_exp = gc.sub(gc.sub(gc.scale(d_no, -1.0), neg_delta), gc.scale(d_nn, -config.gamma))
        pooled = gc.concat([exponent, neg_exp])

    loss = gc.add(gc.scale(gc.mean(d_start), 1.0 - config.gamma), gc.log_mean_exp(pooled))
    if config.l1_coeff > 0.0:
        loss = gc.add(loss, _l1_term(embeddings, config.l1_coeff, encoder.output_dim))
    return loss


def tcn_loss(encoder: Encoder, batch: TCNBatch, config: LossConfig) -> gc.DiffNode:
    """Mean over anchors of d(anchor, positive) + log mean_neg exp(-d(anchor, neg)).

    Each anchor's negative pool is its own later-in-time t3 frame plus the
    anchor's cross-trajectory extras (the expectation over negatives runs
    within the anchor's sequence, approximated with a fixed number of
    samples). With no extras this is the single-negative form
    d(a, positive) - d(a, t3).
    """
    params = make_param_nodes(encoder)
    eps = config.eps_norm
    b = batch.size
    e_a = embed_batch_nodes(encoder, batch.anchor, params)
    e_p = embed_batch_nodes(encoder, batch.positive, params)
    e_n = embed_batch_nodes(encoder, batch.negative, params)

    d_pos = _distances(e_a, e_p, eps)  # (B,)
    d_own = _distances(e_a, e_n, eps)  # (B,)
    if batch.n_extra == 0:
        return gc.mean(gc.sub(d_pos, d_own))

    e_x = embed_batch_nodes(encoder, batch.extra_neg, params)
    d_x = gc.reshape(_distances(gc.repeat_rows(e_a, batch.n_extra), e_x, eps), (b, batch.n_extra))
    denom_x = gc.mean_axis1(gc.exp(gc.scale(d_x, -1.0)))
    total = 1 + batch.n_extra
    denom = gc.add(
        gc.scale(gc.exp(gc.scale(d_own, -1.0)), 1.0 / total),
        gc.scale(denom_x, batch.n_extra / total),
    )
    return gc.mean(gc.add(d_pos, gc.log(denom)))


def lstd_loss(encoder: Encoder, batch: LSTDBatch, config: LossConfig) -> gc.DiffNode:
    """Mean squared TD residual (delta + gamma V(o') - V(o))^2, V = -distance."""
    params = make_param_nodes(encoder)
    eps = config.eps_norm
    e_o = embed_batch_nodes(encoder, batch.obs, params)
    e_n = embed_batch_nodes(encoder, batch.obs_next, params)
    e_g = embed_batch_nodes(encoder, batch.goal, params)
    d_o = _distances(e_o, e_g, eps)
    d_n = _distances(e_n, e_g, eps)
    delta = gc.constant(batch.goal_flag - 1.0)
    resid = gc.sub(gc.add(delta, gc.scale(d_n, -config.gamma)), gc.scale(d_o, -1.0))
    return gc.mean(gc.square(resid))


def sample_batch(dataset: TrajectoryDataset, objective: str, batch_size: int, cfg: LossConfig, rng):
    if objective == "vip":
        return sample_vip_batch(dataset, batch_size, cfg.n_negatives, rng, cfg.goal_selfloop_p)
    if objective == "tcn":
        return sample_tcn_triplets(dataset, batch_size, cfg.tcn_window, rng, cfg.n_negatives)
    if objective == "lstd":
        return sample_lstd_tuples(dataset, batch_size, rng, cfg.goal_selfloop_p)
    raise ValueError(f"unknown objective {objective!r}")


def loss_for(encoder: Encoder, objective: str, batch, cfg: LossConfig) -> gc.DiffNode:
    if objective == "vip":
        return vip_loss(encoder, batch, cfg)
    if objective == "tcn":
        return tcn_loss(encoder, batch, cfg)
    if objective == "lstd":
        return lstd_loss(encoder, batch, cfg)
    raise ValueError(f"unknown objective {objective!r}")


@dataclass
class TrainResult:
    encoder: Encoder
    metrics_path: Path
    checkpoint_path: Path
    losses: list[float] = field(default_factory=list)


def _dump_batch(batch, out_dir: Path, batch_idx: int) -> Path:
    path = out_dir / f"diverged_batch_{batch_idx}.npz"
    arrays = {k: v for k, v in vars(batch).items() if isinstance(v, np.ndarray)}
    np.savez(path, **arrays)
    return path


def train(
    dataset: TrajectoryDataset,
    encoder_config: EncoderConfig,
    train_config: TrainConfig,
    loss_config: LossConfig,
    out_dir,
) -> TrainResult:
    """Run the selected objective, writing metrics.csv and checkpoints.

    Metrics CSV schema: ``batch,loss,grad_norm,ms``. Checkpoints are written
    every eval_interval batches and at the end (``encoder.venc``). Aborts
    with the offending batch index if the loss turns non-finite.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if dataset.obs_dim != encoder_config.input_dim:
        raise ValueError(
            f"train: dataset observation dim {dataset.obs_dim} != encoder input dim {encoder_config.input_dim}"
        )
    encoder = init_encoder(encoder_config)
    params = encoder.params()
    state = gc.AdamState.for_params(params)
    rng = np.random.default_rng(train_config.seed)
    metrics_path = out_dir / "metrics.csv"
    ckpt_path = out_dir / "encoder.venc"
    losses = []
    with open(metrics_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["batch", "loss", "grad_norm", "ms"])
        for i in range(train_config.batches):
            t0 = time.perf_counter()
            batch = sample_batch(dataset, train_config.objective, train_config.batch_size, loss_config, rng)
            loss = loss_for(encoder, train_config.objective, batch, loss_config)
            value = float(loss.values)
            if not np.isfinite(value):
                dump = _dump_batch(batch, out_dir, i)
                raise TrainingDivergedError(f"non-finite loss at batch {i}; batch dumped to {dump}")
            grads = gc.backward(loss)
            grad_norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
            gc.adam_step(params, grads, state, train_config.learning_rate)
            ms = (time.perf_counter() - t0) * 1e3
            writer.writerow([i, f"{value:.17g}", f"{grad_norm:.17g}", f"{ms:.3f}"])
            losses.append(value)
            if train_config.eval_interval > 0 and (i + 1) % train_config.eval_interval == 0:
                save_encoder(encoder, out_dir / f"ck_{i + 1:06d}.venc")
    save_encoder(encoder, ckpt_path)
    return TrainResult(encoder=encoder, metrics_path=metrics_path, checkpoint_path=ckpt_path, losses=losses)
