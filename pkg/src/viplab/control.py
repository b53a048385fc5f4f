"""Everything downstream of a frozen encoder: embedding reward, MPPI
planning against ground-truth dynamics, and offline policy learning via
reward-weighted regression (BC is RWR with tau = 0)."""

from __future__ import annotations

import csv
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import gradcore as gc
from . import worlds as W
from .encoder import Encoder
from .trajstore import TrajectoryDataset

POLICY_MAGIC = b"VIPPOL1\n"


class GoalSpec:
    """One or more goal frames; the cached goal embedding is the mean of the
    per-frame embeddings."""

    def __init__(self, encoder: Encoder, goal_frames: np.ndarray):
        frames = np.asarray(goal_frames, dtype=np.float64)
        if frames.ndim == 1:
            frames = frames[None, :]
        if frames.size == 0:
            raise ValueError("GoalSpec: needs at least one goal frame")
        self.frames = frames
        self.embedding = encoder.embed_batch(frames).mean(axis=0)


def distance(encoder: Encoder, obs: np.ndarray, goal_spec: GoalSpec) -> float:
    """S(o; g) = -||phi(o) - mean goal embedding||; always <= 0."""
    return -float(np.linalg.norm(encoder.embed(np.asarray(obs, dtype=np.float64)) - goal_spec.embedding))


def distance_batch(encoder: Encoder, obs: np.ndarray, goal_spec: GoalSpec) -> np.ndarray:
    diff = encoder.embed_batch(obs) - goal_spec.embedding
    return -np.sqrt(np.einsum("ij,ij->i", diff, diff))


def embedding_reward(encoder: Encoder, obs, obs_next, goal_spec: GoalSpec, gamma: float = 0.98) -> float:
    """Per-transition reward S(o') - S(o); the shaped expansion
    (1-gamma) S(o') + (gamma S(o') - S(o)) must agree to 1e-12."""
    s0 = distance(encoder, obs, goal_spec)
    s1 = distance(encoder, obs_next, goal_spec)
    direct = s1 - s0
    shaped = (1.0 - gamma) * s1 + (gamma * s1 - s0)
    if abs(direct - shaped) > 1e-12:
        raise AssertionError(f"embedding_reward: shaped form disagrees ({direct} vs {shaped})")
    return direct


@dataclass(frozen=True)
class MPPIConfig:
    horizon: int = 12
    n_samples: int = 32
    sigma: float = 0.4  # 0.2 x action range (range = 2 * max_action = 2)
    temperature: float = 0.05
    warm_start: bool = True
    episode_horizon: int = 50

    def __post_init__(self):
        if self.horizon < 1 or self.n_samples < 2 or self.sigma <= 0 or self.temperature <= 0:
            raise ValueError("MPPIConfig: need horizon >= 1, n_samples >= 2, sigma > 0, temperature > 0")


def mppi_weights(scores: np.ndarray, temperature: float) -> np.ndarray:
    """Softmax of scores / temperature; invariant to constant score shifts."""
    z = (scores - scores.max()) / temperature
    w = np.exp(z)
    return w / w.sum()


def mppi_plan(
    world: W.PointMassWorld,
    state: np.ndarray,
    encoder: Encoder,
    goal_spec: GoalSpec,
    config: MPPIConfig,
    rng: np.random.Generator,
    mean_seq: np.ndarray | None = None,
    mode: str = W.RAW_STATE,
) -> tuple[np.ndarray, np.ndarray]:
    """One planning step: sample N length-H action sequences around the mean,
    roll them out with the true dynamics, score by terminal embedding
    distance, and return (first mean action, updated mean sequence)."""
    if not isinstance(world, W.PointMassWorld):
        raise W.WorldError("mppi_plan supports point-mass worlds only")
    h, n = config.horizon, config.n_samples
    if mean_seq is None:
        mean_seq = np.zeros((h, 2))
    noise = rng.normal(0.0, config.sigma, size=(n, h, 2))
    seqs = np.clip(mean_seq[None, :, :] + noise, -world.max_action, world.max_action)
    states = np.repeat(np.asarray(state, dtype=np.float64)[None, :], n, axis=0)
    for t in range(h):
        states = W.step_batch(world, states, seqs[:, t, :])
    scores = distance_batch(encoder, W.observe_batch(world, states, mode), goal_spec)
    weights = mppi_weights(scores, config.temperature)
    new_mean = np.einsum("n,nha->ha", weights, seqs)
    return new_mean[0].copy(), new_mean


@dataclass
class EpisodeResult:
    success: bool
    steps: int
    final_error: float
    true_errors: list[float]  # per visited state incl. the start
    embedding_distances: list[float]  # ||phi(o) - goal embedding|| per visited state
    states: np.ndarray | None = None


def mppi_episode(
    world: W.PointMassWorld,
    start,
    goal,
    encoder: Encoder,
    goal_spec: GoalSpec,
    config: MPPIConfig,
    rng: np.random.Generator,
    mode: str = W.RAW_STATE,
) -> EpisodeResult:
    """Closed-loop MPPI for the episode horizon; success (and early stop)
    when the true state comes within world tolerance of the goal."""
    state = np.asarray(start, dtype=np.float64).copy()
    goal_state = np.asarray(goal, dtype=np.float64)
    mean_seq = None
    visited = [state.copy()]
    errors = [W.state_distance(world, state, goal_state)]
    emb_d = [-distance(encoder, W.observe(world, state, mode), goal_spec)]
    success = errors[0] <= world.tolerance
    steps = 0
    while not success and steps < config.episode_horizon:
        action, mean_seq = mppi_plan(world, state, encoder, goal_spec, config, rng, mean_seq, mode)
        state = W.step(world, state, action)
        steps += 1
        visited.append(state.copy())
        errors.append(W.state_distance(world, state, goal_state))
        emb_d.append(-distance(encoder, W.observe(world, state, mode), goal_spec))
        if config.warm_start:
            mean_seq = np.vstack([mean_seq[1:], mean_seq[-1:]])
        else:
            mean_seq = None
        success = errors[-1] <= world.tolerance
    return EpisodeResult(
        success=bool(success),
        steps=steps,
        final_error=float(errors[-1]),
        true_errors=[float(e) for e in errors],
        embedding_distances=[float(d) for d in emb_d],
        states=np.asarray(visited),
    )


def run_mppi_episodes(
    world: W.PointMassWorld,
    tasks: list[tuple[np.ndarray, np.ndarray]],
    encoder: Encoder,
    config: MPPIConfig,
    master_seed: int,
    mode: str = W.RAW_STATE,
    threads: int = 1,
) -> list[EpisodeResult]:
    """Independent episodes with per-episode RNG streams derived from the
    master seed; results are ordered by episode index regardless of threads."""
    seeds = np.random.SeedSequence(master_seed).spawn(len(tasks))

    def run(i: int) -> EpisodeResult:
        start, goal = tasks[i]
        spec = GoalSpec(encoder, W.observe(world, goal, mode))
        return mppi_episode(world, start, goal, encoder, spec, config, np.random.default_rng(seeds[i]), mode)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, range(len(tasks))))
    return [run(i) for i in range(len(tasks))]


@dataclass(frozen=True)
class RWRConfig:
    tau: float = 0.1
    learning_rate: float = 0.001
    batch_size: int = 32
    steps: int = 20000
    weight_clip_log: float = 10.0
    hidden: tuple[int, int] = (256, 256)

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("RWRConfig: tau must be >= 0")
        if self.batch_size < 1 or self.steps < 1 or self.learning_rate <= 0:
            raise ValueError("RWRConfig: invalid training parameters")


class GaussianPolicy:
    """MLP mean head over concat(embedding, proprio state) with a learned
    per-dimension log sigma. Inputs are standardized with statistics frozen
    from the training data (embedding scale dwarfs the proprio channel)."""

    def __init__(
        self,
        input_dim: int,
        action_dim: int,
        hidden: tuple[int, ...],
        params: dict[str, np.ndarray],
        x_mean: np.ndarray | None = None,
        x_std: np.ndarray | None = None,
    ):
        self.input_dim = input_dim
        self.action_dim = action_dim
        self.hidden = tuple(hidden)
        self.params = params
        self.x_mean = np.zeros(input_dim) if x_mean is None else x_mean
        self.x_std = np.ones(input_dim) if x_std is None else x_std

    @classmethod
    def init(cls, input_dim: int, action_dim: int, hidden: tuple[int, ...], rng: np.random.Generator):
        dims = [input_dim, *hidden, action_dim]
        params: dict[str, np.ndarray] = {}
        for i in range(len(dims) - 1):
            std = np.sqrt(2.0 / dims[i])
            params[f"layer{i}.W"] = rng.normal(0.0, std, size=(dims[i + 1], dims[i]))
            params[f"layer{i}.b"] = np.zeros(dims[i + 1])
        params["log_sigma"] = np.full(action_dim, np.log(0.1))
        return cls(input_dim, action_dim, hidden, params)

    def set_normalization(self, x: np.ndarray) -> None:
        self.x_mean = x.mean(axis=0)
        self.x_std = np.maximum(x.std(axis=0), 1e-8)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.x_mean) / self.x_std

    def n_layers(self) -> int:
        return len(self.hidden) + 1

    def mean_action_batch(self, x: np.ndarray) -> np.ndarray:
        h = self.normalize(np.asarray(x, dtype=np.float64))
        for i in range(self.n_layers()):
            h = h @ self.params[f"layer{i}.W"].T + self.params[f"layer{i}.b"]
            if i < self.n_layers() - 1:
                h = np.maximum(h, 0.0)
        return h

    def mean_action(self, x: np.ndarray) -> np.ndarray:
        return self.mean_action_batch(np.asarray(x, dtype=np.float64)[None, :])[0]

    def sigma(self) -> np.ndarray:
        return np.exp(self.params["log_sigma"])

    def sample_action(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.mean_action(x) + self.sigma() * rng.standard_normal(self.action_dim)


def rwr_weights(rewards: np.ndarray, tau: float, clip_log: float = 10.0) -> np.ndarray:
    """exp(tau * R), clipped at exp(clip_log). tau = 0 gives exactly 1."""
    return np.exp(np.minimum(tau * rewards, clip_log))


def _policy_training_arrays(dataset: TrajectoryDataset, encoder: Encoder, goal_spec: GoalSpec, cfg: RWRConfig):
    xs, acts, ws = [], [], []
    for traj in dataset.trajectories:
        if traj.actions is None:
            raise ValueError("rwr_train: dataset has no actions")
        if traj.states is None:
            raise ValueError("rwr_train: dataset has no ground-truth states (proprio channel)")
        emb = encoder.embed_batch(traj.frames)
        s = -np.linalg.norm(emb - goal_spec.embedding, axis=1)
        rewards = s[1:] - s[:-1]
        xs.append(np.concatenate([emb[:-1], traj.states[:-1]], axis=1))
        acts.append(traj.actions)
        ws.append(rwr_weights(rewards, cfg.tau, cfg.weight_clip_log))
    return np.concatenate(xs), np.concatenate(acts), np.concatenate(ws)


def rwr_train(
    dataset: TrajectoryDataset,
    encoder: Encoder,
    goal_spec: GoalSpec,
    config: RWRConfig,
    gamma: float = 0.98,
    seed: int = 0,
) -> GaussianPolicy:
    """Weighted maximum-likelihood regression of actions on
    concat(phi(o), proprio), weights exp(tau * embedding reward)."""
    x, a, w = _policy_training_arrays(dataset, encoder, goal_spec, config)
    n, in_dim = x.shape
    action_dim = a.shape[1]
    rng = np.random.default_rng(seed)
    policy = GaussianPolicy.init(in_dim, action_dim, config.hidden, rng)
    policy.set_normalization(x)
    x_norm = policy.normalize(x)
    params = policy.params
    state = gc.AdamState.for_params(params)
    n_layers = policy.n_layers()
    for _ in range(config.steps):
        idx = rng.integers(0, n, size=config.batch_size)
        xb, ab, wb = x_norm[idx], a[idx], w[idx]
        leaves = {k: gc.leaf(v, k) for k, v in params.items()}
        h = gc.constant(xb)
        for i in range(n_layers):
            h = gc.add(gc.matvec(leaves[f"layer{i}.W"], h), leaves[f"layer{i}.b"])
            if i < n_layers - 1:
                h = gc.relu(h)
        diff = gc.sub(gc.constant(ab), h)
        inv_sigma = gc.exp(gc.scale(leaves["log_sigma"], -1.0))
        z = gc.mul(diff, inv_sigma)
        nll = gc.add(gc.scale(gc.square(z), 0.5), leaves["log_sigma"])  # (B, A)
        per_sample = gc.scale(gc.mean_axis1(nll), float(action_dim))
        loss = gc.mean(gc.mul(per_sample, gc.constant(wb)))
        grads = gc.backward(loss)
        gc.adam_step(params, grads, state, config.learning_rate)
    return policy


def bc_train(
    dataset: TrajectoryDataset,
    encoder: Encoder,
    goal_spec: GoalSpec,
    config: RWRConfig,
    gamma: float = 0.98,
    seed: int = 0,
) -> GaussianPolicy:
    """BC is RWR with uniform weights: delegates with tau = 0."""
    return rwr_train(dataset, encoder, goal_spec, replace(config, tau=0.0), gamma, seed)


def policy_rollout(
    world,
    policy,
    encoder: Encoder,
    start,
    goal,
    horizon: int,
    mode: str = W.RAW_STATE,
    rng: np.random.Generator | None = None,
    stochastic: bool = False,
) -> EpisodeResult:
    """Roll out the policy mean action (or samples, when stochastic)."""
    state = np.asarray(start, dtype=np.float64).copy()
    goal_state = np.asarray(goal, dtype=np.float64)
    errors = [W.state_distance(world, state, goal_state)]
    success = errors[0] <= world.tolerance
    steps = 0
    while not success and steps < horizon:
        x = np.concatenate([encoder.embed(W.observe(world, state, mode)), W.state_vector(world, state)])
        action = policy.sample_action(x, rng) if stochastic else policy.mean_action(x)
        state = W.step(world, state, action)
        steps += 1
        errors.append(W.state_distance(world, state, goal_state))
        success = errors[-1] <= world.tolerance
    return EpisodeResult(
        success=bool(success),
        steps=steps,
        final_error=float(errors[-1]),
        true_errors=[float(e) for e in errors],
        embedding_distances=[],
    )


def eval_policy(
    world,
    policy,
    encoder: Encoder,
    tasks: list,
    horizon: int,
    mode: str = W.RAW_STATE,
    seed: int = 0,
    stochastic: bool = False,
) -> tuple[float, list[EpisodeResult]]:
    """Success rate over fixed tasks; deterministic per seed."""
    if not tasks:
        raise ValueError("eval_policy: no evaluation tasks")
    seeds = np.random.SeedSequence(seed).spawn(len(tasks))
    outcomes = []
    for i, (start, goal) in enumerate(tasks):
        rng = np.random.default_rng(seeds[i]) if stochastic else None
        outcomes.append(policy_rollout(world, policy, encoder, start, goal, horizon, mode, rng, stochastic))
    rate = float(np.mean([o.success for o in outcomes]))
    return rate, outcomes


def write_episode_csv(results: list[EpisodeResult], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["episode", "success", "steps", "final_error"])
        for i, r in enumerate(results):
            writer.writerow([i, int(r.success), r.steps, f"{r.final_error:.17g}"])


def write_step_csv(results: list[EpisodeResult], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["episode", "step", "true_error", "embedding_distance"])
        for i, r in enumerate(results):
            for t, err in enumerate(r.true_errors):
                emb = r.embedding_distances[t] if t < len(r.embedding_distances) else ""
                writer.writerow([i, t, f"{err:.17g}", f"{emb:.17g}" if emb != "" else ""])


def write_summary_json(results: list[EpisodeResult], path, extra: dict | None = None) -> None:
    payload = {
        "n_episodes": len(results),
        "success_rate": float(np.mean([r.success for r in results])) if results else 0.0,
        "mean_steps": float(np.mean([r.steps for r in results])) if results else 0.0,
        "mean_final_error": float(np.mean([r.final_error for r in results])) if results else 0.0,
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def save_policy(policy: GaussianPolicy, path) -> None:
    header = {
        "input_dim": policy.input_dim,
        "action_dim": policy.action_dim,
        "hidden": list(policy.hidden),
        "dtype": "<f8",
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    names = [f"layer{i}.{p}" for i in range(policy.n_layers()) for p in ("W", "b")] + ["log_sigma"]
    blob = b"".join(np.ascontiguousarray(policy.params[n], dtype="<f8").tobytes() for n in names)
    blob += np.ascontiguousarray(policy.x_mean, dtype="<f8").tobytes()
    blob += np.ascontiguousarray(policy.x_std, dtype="<f8").tobytes()
    with open(path, "wb") as f:
        f.write(POLICY_MAGIC)
        f.write(struct.pack("<I", len(hb)))
        f.write(hb)
        f.write(blob)


def load_policy(path) -> GaussianPolicy:
    with open(path, "rb") as f:
        data = f.read()
    if data[: len(POLICY_MAGIC)] != POLICY_MAGIC:
        raise ValueError(f"{path}: bad magic; not a policy checkpoint")
    off = len(POLICY_MAGIC)
    (hlen,) = struct.unpack_from("<I", data, off)
    off += 4
    header = json.loads(data[off : off + hlen].decode("utf-8"))
    off += hlen
    dims = [header["input_dim"], *header["hidden"], header["action_dim"]]
    params: dict[str, np.ndarray] = {}
    for i in range(len(dims) - 1):
        w = np.frombuffer(data, dtype="<f8", count=dims[i + 1] * dims[i], offset=off).reshape(dims[i + 1], dims[i])
        off += 8 * dims[i + 1] * dims[i]
        b = np.frombuffer(data, dtype="<f8", count=dims[i + 1], offset=off)
        off += 8 * dims[i + 1]
        params[f"layer{i}.W"] = w.copy()
        params[f"layer{i}.b"] = b.copy()
    params["log_sigma"] = np.frombuffer(data, dtype="<f8", count=header["action_dim"], offset=off).copy()
    off += 8 * header["action_dim"]
    x_mean = np.frombuffer(data, dtype="<f8", count=header["input_dim"], offset=off).copy()
    off += 8 * header["input_dim"]
    x_std = np.frombuffer(data, dtype="<f8", count=header["input_dim"], offset=off).copy()
    return GaussianPolicy(header["input_dim"], header["action_dim"], tuple(header["hidden"]), params, x_mean, x_std)
