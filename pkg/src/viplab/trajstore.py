"""Trajectory dataset container, binary persistence, and batch samplers.

On-disk format (``*.vipd``): magic ``VIPDATA1``, little-endian u32 counts
(number of trajectories, then per-trajectory T, D, A, S), the per-trajectory
float32 LE blobs (frames, then actions, then states), a JSON metadata
trailer, and a final little-endian u64 footer holding the byte offset of the
trailer. Frames are stored as 32-bit floats and widened to 64-bit in memory.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"VIPDATA1"


class DatasetFormatError(ValueError):
    code = "dataset_error"


class BadMagicError(DatasetFormatError):
    code = "bad_magic"


class TruncatedError(DatasetFormatError):
    code = "truncated"


class CountMismatchError(DatasetFormatError):
    code = "count_mismatch"


class SamplerError(ValueError):
    pass


@dataclass
class Trajectory:
    """Ordered frames with optional actions and ground-truth states."""

    frames: np.ndarray  # (T, D)
    actions: np.ndarray | None = None  # (T-1, A)
    states: np.ndarray | None = None  # (T, S)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or len(self.frames) < 2:
            raise ValueError(f"Trajectory: frames must be (T>=2, D), got {self.frames.shape}")
        if self.actions is not None:
            self.actions = np.asarray(self.actions, dtype=np.float64)
            if self.actions.ndim != 2 or len(self.actions) != len(self.frames) - 1:
                raise ValueError(
                    f"Trajectory: actions must be (T-1, A), got {self.actions.shape} for T={len(self.frames)}"
                )
        if self.states is not None:
            self.states = np.asarray(self.states, dtype=np.float64)
            if self.states.ndim != 2 or len(self.states) != len(self.frames):
                raise ValueError(f"Trajectory: states must be (T, S), got {self.states.shape}")

    def __len__(self) -> int:
        return len(self.frames)


class TrajectoryDataset:
    def __init__(self, trajectories: list[Trajectory], manifest: dict | None = None):
        if not trajectories:
            raise ValueError("TrajectoryDataset: empty dataset")
        d = trajectories[0].frames.shape[1]
        for t in trajectories:
            if t.frames.shape[1] != d:
                raise ValueError(f"TrajectoryDataset: mixed observation dims {d} vs {t.frames.shape[1]}")
        self.trajectories = list(trajectories)
        self.manifest = dict(manifest or {})

    def __len__(self) -> int:
        return len(self.trajectories)

    def __getitem__(self, i: int) -> Trajectory:
        return self.trajectories[i]

    @property
    def obs_dim(self) -> int:
        return self.trajectories[0].frames.shape[1]


def save_dataset(dataset: TrajectoryDataset, path) -> None:
    trajs = dataset.trajectories
    counts = [struct.pack("<I", len(trajs))]
    blobs = []
    metas = []
    for t in trajs:
        a_dim = 0 if t.actions is None else t.actions.shape[1]
        s_dim = 0 if t.states is None else t.states.shape[1]
        counts.append(struct.pack("<IIII", len(t), t.frames.shape[1], a_dim, s_dim))
        blobs.append(np.ascontiguousarray(t.frames, dtype="<f4").tobytes())
        if t.actions is not None:
            blobs.append(np.ascontiguousarray(t.actions, dtype="<f4").tobytes())
        if t.states is not None:
            blobs.append(np.ascontiguousarray(t.states, dtype="<f4").tobytes())
        metas.append(t.meta)
    trailer = json.dumps({"manifest": dataset.manifest, "meta": metas}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        for c in counts:
            f.write(c)
        for b in blobs:
            f.write(b)
        offset = f.tell()
        f.write(trailer)
        f.write(struct.pack("<Q", offset))


def load_dataset(path) -> TrajectoryDataset:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"{path}: bad magic; not a trajectory dataset")
    if len(data) < len(MAGIC) + 4 + 8:
        raise TruncatedError(f"{path}: truncated header")
    (n,) = struct.unpack_from("<I", data, len(MAGIC))
    off = len(MAGIC) + 4
    if len(data) < off + 16 * n:
        raise TruncatedError(f"{path}: truncated trajectory counts")
    dims = []
    for _ in range(n):
        dims.append(struct.unpack_from("<IIII", data, off))
        off += 16
    expected_blob = 0
    for t_len, d, a, s in dims:
        if t_len < 2 or d < 1:
            raise CountMismatchError(f"{path}: invalid trajectory dims T={t_len}, D={d}")
        expected_blob += 4 * (t_len * d + (t_len - 1) * a + t_len * s)
    if len(data) < off + expected_blob + 8:
        raise TruncatedError(f"{path}: file too short for declared blobs ({len(data)} bytes)")

    (trailer_offset,) = struct.unpack_from("<Q", data, len(data) - 8)
    if trailer_offset > len(data) - 8:
        raise CountMismatchError(f"{path}: trailer offset {trailer_offset} beyond file size")
    try:
        trailer = json.loads(data[trailer_offset : len(data) - 8].decode("utf-8"))
        manifest = trailer["manifest"]
        metas = trailer["meta"]
    except (ValueError, KeyError) as e:
        raise CountMismatchError(f"{path}: malformed metadata trailer ({e})") from e
    if len(metas) != n:
        raise CountMismatchError(f"{path}: {len(metas)} metadata entries for {n} trajectories")

    trajs = []
    for i, (t_len, d, a, s) in enumerate(dims):
        n_floats = t_len * d + (t_len - 1) * a + t_len * s
        if off + 4 * n_floats > trailer_offset:
            raise TruncatedError(f"{path}: truncated blob in trajectory {i}")

        def take(rows, cols):
            nonlocal off
            if cols == 0:
                return None
            arr = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=off).reshape(rows, cols)
            off += 4 * rows * cols
            return arr.astype(np.float64)

        frames = take(t_len, d)
        actions = take(t_len - 1, a)
        states = take(t_len, s)
        trajs.append(Trajectory(frames=frames, actions=actions, states=states, meta=metas[i]))
    if off != trailer_offset:
        raise CountMismatchError(f"{path}: blob size {off} disagrees with trailer offset {trailer_offset}")
    return TrajectoryDataset(trajs, manifest)


@dataclass
class VIPBatch:
    """Per element: (start, mid, mid_next, goal) frames from one trajectory,
    a goal flag, and n_neg consecutive-frame pairs from other trajectories
    scored against the anchor's goal."""

    start: np.ndarray  # (B, D)
    mid: np.ndarray  # (B, D)
    mid_next: np.ndarray  # (B, D)
    goal: np.ndarray  # (B, D)
    goal_flag: np.ndarray  # (B,) 1.0 where the mid index equals the goal index
    neg: np.ndarray  # (B * n_neg, D)
    neg_next: np.ndarray  # (B * n_neg, D)
    n_neg: int
    indices: list[tuple[int, int, int, int]]  # (traj, t, k, T) per element
    neg_traj: list[int]

    @property
    def size(self) -> int:
        return len(self.start)


def sample_vip_batch(
    dataset: TrajectoryDataset,
    batch_size: int,
    n_neg: int,
    rng: np.random.Generator,
    goal_selfloop_p: float = 0.0,
) -> VIPBatch:
    """Sub-trajectory sampler: trajectory uniform, t uniform over [0, h-2],
    goal index T uniform over [t+1, h-1], mid index k uniform over [t, T-1].

    Under these ranges k < T always, so goal_flag is 0; with probability
    goal_selfloop_p an element instead uses the goal self-loop (mid =
    mid_next = goal frame, flag 1).
    """
    if batch_size < 1:
        raise SamplerError("sample_vip_batch: batch_size must be >= 1")
    if n_neg < 0:
        raise SamplerError("sample_vip_batch: n_neg must be >= 0")
    if n_neg > 0 and len(dataset) < 2:
        raise SamplerError("sample_vip_batch: negatives need at least 2 trajectories")
    trajs = dataset.trajectories
    d = dataset.obs_dim
    start = np.empty((batch_size, d))
    mid = np.empty((batch_size, d))
    mid_next = np.empty((batch_size, d))
    goal = np.empty((batch_size, d))
    flag = np.zeros(batch_size)
    neg = np.empty((batch_size * n_neg, d))
    neg_next = np.empty((batch_size * n_neg, d))
    indices = []
    neg_traj = []
    for i in range(batch_size):
        ti = int(rng.integers(len(trajs)))
        frames = trajs[ti].frames
        h = len(frames)
        t = int(rng.integers(0, h - 1))
        T = int(rng.integers(t + 1, h))
        if goal_selfloop_p > 0.0 and rng.random() < goal_selfloop_p:
            k = T
            mid[i] = frames[T]
            mid_next[i] = frames[T]
            flag[i] = 1.0
        else:
            k = int(rng.integers(t, T))
            mid[i] = frames[k]
            mid_next[i] = frames[k + 1]
        start[i] = frames[t]
        goal[i] = frames[T]
        indices.append((ti, t, k, T))
        for j in range(n_neg):
            while True:
                tj = int(rng.integers(len(trajs)))
                if tj != ti:
                    break
            other = trajs[tj].frames
            u = int(rng.integers(0, len(other) - 1))
            neg[i * n_neg + j] = other[u]
            neg_next[i * n_neg + j] = other[u + 1]
            neg_traj.append(tj)
    return VIPBatch(start, mid, mid_next, goal, flag, neg, neg_next, n_neg, indices, neg_traj)


@dataclass
class TCNBatch:
    """Ordered frame triplets (t1 < t2 < t3) from single trajectories, plus
    optional cross-trajectory extra negative frames per anchor."""

    anchor: np.ndarray  # (B, D) frame t1
    positive: np.ndarray  # (B, D) frame t2
    negative: np.ndarray  # (B, D) frame t3
    extra_neg: np.ndarray  # (B * n_extra, D)
    n_extra: int
    indices: list[tuple[int, int, int, int]]  # (traj, t1, t2, t3)

    @property
    def size(self) -> int:
        return len(self.anchor)


def sample_tcn_triplets(
    dataset: TrajectoryDataset,
    batch_size: int,
    window: int,
    rng: np.random.Generator,
    n_extra_neg: int = 0,
) -> TCNBatch:
    """Triplets with t2 = t1 + k for k uniform in [1, window] (clamped so a
    later t3 exists) and t3 uniform over (t2, h-1]."""
    if window < 1:
        raise SamplerError("sample_tcn_triplets: window must be >= 1")
    eligible = [i for i, t in enumerate(dataset.trajectories) if len(t) >= 3]
    if not eligible:
        raise SamplerError("sample_tcn_triplets: no trajectory of length >= 3")
    if n_extra_neg > 0 and len(dataset) < 2:
        raise SamplerError("sample_tcn_triplets: extra negatives need at least 2 trajectories")
    d = dataset.obs_dim
    anchor = np.empty((batch_size, d))
    positive = np.empty((batch_size, d))
    negative = np.empty((batch_size, d))
    extra = np.empty((batch_size * n_extra_neg, d))
    indices = []
    for i in range(batch_size):
        ti = eligible[int(rng.integers(len(eligible)))]
        frames = dataset[ti].frames
        h = len(frames)
        t1 = int(rng.integers(0, h - 2))
        k = int(rng.integers(1, window + 1))
        t2 = min(t1 + k, h - 2)
        t3 = int(rng.integers(t2 + 1, h))
        anchor[i] = frames[t1]
        positive[i] = frames[t2]
        negative[i] = frames[t3]
        indices.append((ti, t1, t2, t3))
        for j in range(n_extra_neg):
            while True:
                tj = int(rng.integers(len(dataset)))
                if tj != ti:
                    break
            other = dataset[tj].frames
            extra[i * n_extra_neg + j] = other[int(rng.integers(len(other)))]
    return TCNBatch(anchor, positive, negative, extra, n_extra_neg, indices)


@dataclass
class LSTDBatch:
    """(o, o', g) tuples reusing the VIP sampler's (mid, mid_next, goal)."""

    obs: np.ndarray
    obs_next: np.ndarray
    goal: np.ndarray
    goal_flag: np.ndarray
    indices: list[tuple[int, int, int, int]]

    @property
    def size(self) -> int:
        return len(self.obs)


def sample_lstd_tuples(
    dataset: TrajectoryDataset,
    batch_size: int,
    rng: np.random.Generator,
    goal_selfloop_p: float = 0.0,
) -> LSTDBatch:
    b = sample_vip_batch(dataset, batch_size, 0, rng, goal_selfloop_p)
    return LSTDBatch(obs=b.mid, obs_next=b.mid_next, goal=b.goal, goal_flag=b.goal_flag, indices=b.indices)
