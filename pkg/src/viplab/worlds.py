"""Deterministic synthetic goal-reaching worlds and demonstration generators.

Two substrates: a continuous point mass on the unit square with clipped
proportional control, and a 4-connected grid world. Observations are either
the raw state (coordinates / one-hot cell) or a flattened 16x16 occupancy
raster ("image16") in which obstacle cells and the agent cell are 1 and the
goal is conveyed only through goal frames.
"""

from __future__ import annotations

import functools
import hashlib
import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from .trajstore import Trajectory, TrajectoryDataset

RAW_STATE = "raw_state"
IMAGE16 = "image16"
OBSERVATION_MODES = (RAW_STATE, IMAGE16)

IMAGE_SIDE = 16

# up, down, left, right, stay as (dr, dc)
GRID_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))
STAY = 4


class WorldError(ValueError):
    pass


@dataclass(frozen=True)
class PointMassWorld:
    """Point mass on [0,1]^2: x' = clip(x + dt * clip(a), bounds)."""

    dt: float = 0.05
    max_action: float = 1.0
    tolerance: float = 0.05
    obstacles: tuple[tuple[float, float, float, float], ...] = ()

    def __post_init__(self):
        if self.dt <= 0 or self.tolerance <= 0 or self.max_action <= 0:
            raise WorldError("PointMassWorld: dt, tolerance and max_action must be > 0")
        for x0, y0, x1, y1 in self.obstacles:
            if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
                raise WorldError(f"PointMassWorld: obstacle {(x0, y0, x1, y1)} outside bounds")


@dataclass(frozen=True)
class GridWorld:
    width: int
    height: int
    blocked: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "blocked", frozenset((int(r), int(c)) for r, c in self.blocked))
        if self.width < 1 or self.height < 1:
            raise WorldError("GridWorld: width and height must be >= 1")
        for r, c in self.blocked:
            if not (0 <= r < self.height and 0 <= c < self.width):
                raise WorldError(f"GridWorld: blocked cell {(r, c)} outside grid")

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def free(self, cell) -> bool:
        return self.in_bounds(cell) and (cell[0], cell[1]) not in self.blocked

    def free_cells(self) -> list[tuple[int, int]]:
        return [(r, c) for r in range(self.height) for c in range(self.width) if (r, c) not in self.blocked]


def _inside_obstacle(world: PointMassWorld, x: np.ndarray) -> bool:
    for x0, y0, x1, y1 in world.obstacles:
        if x0 <= x[0] <= x1 and y0 <= x[1] <= y1:
            return True
    return False


def step(world, state, action):
    """Pure transition function. Invalid actions are clipped, never raised."""
    if isinstance(world, PointMassWorld):
        x = np.asarray(state, dtype=np.float64)
        a = np.clip(np.asarray(action, dtype=np.float64), -world.max_action, world.max_action)
        nxt = np.clip(x + world.dt * a, 0.0, 1.0)
        if _inside_obstacle(world, nxt):
            return x.copy()
        return nxt
    if isinstance(world, GridWorld):
        r, c = int(state[0]), int(state[1])
        dr, dc = GRID_MOVES[int(action)]
        nxt = (r + dr, c + dc)
        return nxt if world.free(nxt) else (r, c)
    raise WorldError(f"unknown world type {type(world)!r}")


def step_batch(world: PointMassWorld, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Vectorized point-mass step for MPPI rollouts."""
    a = np.clip(actions, -world.max_action, world.max_action)
    nxt = np.clip(states + world.dt * a, 0.0, 1.0)
    if world.obstacles:
        bad = np.zeros(len(nxt), dtype=bool)
        for x0, y0, x1, y1 in world.obstacles:
            bad |= (nxt[:, 0] >= x0) & (nxt[:, 0] <= x1) & (nxt[:, 1] >= y0) & (nxt[:, 1] <= y1)
        nxt[bad] = states[bad]
    return nxt


def obs_dim(world, mode: str) -> int:
    if mode == IMAGE16:
        return IMAGE_SIDE * IMAGE_SIDE
    if isinstance(world, PointMassWorld):
        return 2
    return world.width * world.height


def _point_cell(x: np.ndarray) -> tuple[int, int]:
    col = min(int(x[0] * IMAGE_SIDE), IMAGE_SIDE - 1)
    row = min(int(x[1] * IMAGE_SIDE), IMAGE_SIDE - 1)
    return row, col


@functools.lru_cache(maxsize=32)
def _base_raster(world) -> np.ndarray:
    base = np.zeros((IMAGE_SIDE, IMAGE_SIDE))
    if isinstance(world, PointMassWorld):
        for x0, y0, x1, y1 in world.obstacles:
            for r in range(IMAGE_SIDE):
                for c in range(IMAGE_SIDE):
                    cx, cy = (c + 0.5) / IMAGE_SIDE, (r + 0.5) / IMAGE_SIDE
                    if x0 <= cx <= x1 and y0 <= cy <= y1:
                        base[r, c] = 1.0
    else:
        if world.width > IMAGE_SIDE or world.height > IMAGE_SIDE:
            raise WorldError(f"image16 requires grid dims <= {IMAGE_SIDE}, got {world.width}x{world.height}")
        for r, c in world.blocked:
            base[r, c] = 1.0
    return base


def observe(world, state, mode: str) -> np.ndarray:
    if mode not in OBSERVATION_MODES:
        raise WorldError(f"unknown observation mode {mode!r}")
    if isinstance(world, PointMassWorld):
        x = np.asarray(state, dtype=np.float64)
        if mode == RAW_STATE:
            return x.copy()
        raster = _base_raster(world).copy()
        raster[_point_cell(x)] = 1.0
        return raster.reshape(-1)
    r, c = int(state[0]), int(state[1])
    if mode == RAW_STATE:
        onehot = np.zeros(world.width * world.height)
        onehot[r * world.width + c] = 1.0
        return onehot
    raster = _base_raster(world).copy()
    raster[r, c] = 1.0
    return raster.reshape(-1)


def observe_batch(world, states: np.ndarray, mode: str) -> np.ndarray:
    """Observations for a batch of point-mass states, shape (N, D)."""
    if not isinstance(world, PointMassWorld):
        raise WorldError("observe_batch supports point-mass worlds only")
    states = np.asarray(states, dtype=np.float64)
    if mode == RAW_STATE:
        return states.copy()
    n = len(states)
    rasters = np.broadcast_to(_base_raster(world), (n, IMAGE_SIDE, IMAGE_SIDE)).copy()
    cols = np.minimum((states[:, 0] * IMAGE_SIDE).astype(int), IMAGE_SIDE - 1)
    rows = np.minimum((states[:, 1] * IMAGE_SIDE).astype(int), IMAGE_SIDE - 1)
    rasters[np.arange(n), rows, cols] = 1.0
    return rasters.reshape(n, -1)


def state_vector(world, state) -> np.ndarray:
    """True state as a float vector (the "proprioceptive" channel)."""
    if isinstance(world, PointMassWorld):
        return np.asarray(state, dtype=np.float64).copy()
    return np.array([float(state[0]), float(state[1])])


def state_distance(world, a, b) -> float:
    if isinstance(world, PointMassWorld):
        return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
    return float(abs(int(a[0]) - int(b[0])) + abs(int(a[1]) - int(b[1])))


def at_goal(world, state, goal) -> bool:
    if isinstance(world, PointMassWorld):
        return state_distance(world, state, goal) <= world.tolerance
    return (int(state[0]), int(state[1])) == (int(goal[0]), int(goal[1]))


def bfs_distances(world: GridWorld, goal) -> np.ndarray:
    """Grid of step counts to the goal; -1 where unreachable."""
    dist = np.full((world.height, world.width), -1, dtype=int)
    goal = (int(goal[0]), int(goal[1]))
    if not world.free(goal):
        raise WorldError(f"goal cell {goal} is blocked")
    dist[goal] = 0
    queue = deque([goal])
    while queue:
        r, c = queue.popleft()
        for dr, dc in GRID_MOVES[:4]:
            nxt = (r + dr, c + dc)
            if world.free(nxt) and dist[nxt] < 0:
                dist[nxt] = dist[r, c] + 1
                queue.append(nxt)
    return dist


def sample_task(world, rng: np.random.Generator, setting: str = "hard"):
    """Uniform (start, goal) over free states; start != goal.

    Easy draws starts within radius 0.2 of the goal (<= 4 steps on grids);
    Hard draws starts uniformly.
    """
    if setting not in ("easy", "hard"):
        raise WorldError(f"unknown setting {setting!r}")
    if isinstance(world, PointMassWorld):
        def free_point():
            while True:
                p = rng.uniform(0.0, 1.0, size=2)
                if not _inside_obstacle(world, p):
                    return p

        goal = free_point()
        while True:
            if setting == "easy":
                start = goal + rng.uniform(-0.2, 0.2, size=2)
                if not (np.all(start >= 0.0) and np.all(start <= 1.0)) or _inside_obstacle(world, start):
                    continue
                if np.linalg.norm(start - goal) > 0.2:
                    continue
            else:
                start = free_point()
            if np.linalg.norm(start - goal) > world.tolerance:
                return start, goal
    cells = world.free_cells()
    goal = cells[rng.integers(len(cells))]
    if setting == "easy":
        dist = bfs_distances(world, goal)
        near = [c for c in cells if 0 < dist[c] <= 4]
        if not near:
            raise WorldError("no free cell within 4 steps of the goal")
        return near[rng.integers(len(near))], goal
    while True:
        start = cells[rng.integers(len(cells))]
        if start != goal:
            return start, goal


def snap_to_cell_center(x: np.ndarray) -> np.ndarray:
    """Snap a point-mass position to the center of its image16 cell."""
    row, col = _point_cell(np.asarray(x, dtype=float))
    return np.array([(col + 0.5) / IMAGE_SIDE, (row + 0.5) / IMAGE_SIDE])


def expert_rollout(
    world,
    start,
    goal,
    noise_scale: float,
    max_len: int,
    rng: np.random.Generator,
    mode: str = RAW_STATE,
    gain: float = 1.0,
    role: str = "expert",
) -> Trajectory:
    """Goal-directed demonstration.

    Point mass: proportional controller ``a = gain * (goal - x)`` plus
    Gaussian noise (sigma = noise_scale), stopping within tolerance or at
    max_len. Grid: BFS-greedy steps with probability-noise_scale random
    detours. Noise 0 on the grid yields a shortest path.
    """
    if max_len < 2:
        raise WorldError("expert_rollout: max_len must be >= 2")
    frames, actions, states = [], [], []

    def record(state):
        frames.append(observe(world, state, mode))
        states.append(state_vector(world, state))

    if isinstance(world, PointMassWorld):
        x = np.asarray(start, dtype=np.float64).copy()
        g = np.asarray(goal, dtype=np.float64)
        record(x)
        while len(frames) < max_len:
            if len(frames) >= 2 and at_goal(world, x, g):
                break
            if at_goal(world, x, g):
                a = np.zeros(2)
            else:
                a = gain * (g - x)
                if noise_scale > 0.0:
                    a = a + noise_scale * rng.standard_normal(2)
                a = np.clip(a, -world.max_action, world.max_action)
            x = step(world, x, a)
            actions.append(a)
            record(x)
    else:
        dist = bfs_distances(world, goal)
        cell = (int(start[0]), int(start[1]))
        goal_cell = (int(goal[0]), int(goal[1]))
        if dist[cell] < 0:
            raise WorldError(f"goal {goal_cell} unreachable from {cell}")
        record(cell)
        while len(frames) < max_len:
            if len(frames) >= 2 and cell == goal_cell:
                break
            if cell == goal_cell:
                move = STAY
            elif noise_scale > 0.0 and rng.random() < noise_scale:
                legal = [i for i in range(4) if world.free((cell[0] + GRID_MOVES[i][0], cell[1] + GRID_MOVES[i][1]))]
                move = legal[rng.integers(len(legal))]
            else:
                best = [
                    i
                    for i in range(4)
                    if world.free((cell[0] + GRID_MOVES[i][0], cell[1] + GRID_MOVES[i][1]))
                    and dist[cell[0] + GRID_MOVES[i][0], cell[1] + GRID_MOVES[i][1]] == dist[cell] - 1
                ]
                move = best[rng.integers(len(best))]
            cell = step(world, cell, move)
            actions.append(np.array([float(move)]))
            record(cell)

    meta = {
        "world": "point_mass" if isinstance(world, PointMassWorld) else "grid",
        "start": [float(v) for v in state_vector(world, start)],
        "goal": [float(v) for v in state_vector(world, goal)],
        "noise": float(noise_scale),
        "mode": mode,
        "role": role,
    }
    return Trajectory(
        frames=np.asarray(frames, dtype=np.float64),
        actions=np.asarray(actions, dtype=np.float64) if actions else None,
        states=np.asarray(states, dtype=np.float64),
        meta=meta,
    )


def world_to_dict(world) -> dict:
    if isinstance(world, PointMassWorld):
        return {
            "type": "point_mass",
            "dt": world.dt,
            "max_action": world.max_action,
            "tolerance": world.tolerance,
            "obstacles": [list(o) for o in world.obstacles],
        }
    return {
        "type": "grid",
        "width": world.width,
        "height": world.height,
        "blocked": sorted([int(r), int(c)] for r, c in world.blocked),
    }


def world_from_dict(d: dict):
    if d["type"] == "point_mass":
        return PointMassWorld(
            dt=float(d.get("dt", 0.05)),
            max_action=float(d.get("max_action", 1.0)),
            tolerance=float(d.get("tolerance", 0.05)),
            obstacles=tuple(tuple(float(v) for v in o) for o in d.get("obstacles", [])),
        )
    if d["type"] == "grid":
        return GridWorld(
            width=int(d["width"]),
            height=int(d["height"]),
            blocked=frozenset((int(r), int(c)) for r, c in d.get("blocked", [])),
        )
    raise WorldError(f"unknown world type {d.get('type')!r}")


def _manifest(world, mode, gen_params: dict, n: int) -> dict:
    payload = {"world": world_to_dict(world), "mode": mode, "gen": gen_params}
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
    return {
        "mode": mode,
        "obs_dim": obs_dim(world, mode),
        "n_trajectories": n,
        "world": world_to_dict(world),
        "gen": gen_params,
        "config_hash": digest,
    }


def make_expert_dataset(
    world,
    mode: str,
    n: int,
    seed: int,
    noise: float = 0.0,
    setting: str = "hard",
    max_len: int = 100,
    gain: float = 1.0,
    fixed_goal=None,
    snap_goal: bool = False,
) -> TrajectoryDataset:
    """n goal-directed demonstrations with freshly sampled tasks."""
    rng = np.random.default_rng(seed)
    trajs = []
    for _ in range(n):
        start, goal = sample_task(world, rng, setting)
        if fixed_goal is not None:
            goal = np.asarray(fixed_goal, dtype=float)
            while state_distance(world, start, goal) <= getattr(world, "tolerance", 0):
                start, _ = sample_task(world, rng, setting)
        if snap_goal and isinstance(world, PointMassWorld):
            goal = snap_to_cell_center(goal)
        trajs.append(expert_rollout(world, start, goal, noise, max_len, rng, mode, gain))
    gen = {
        "kind": "expert",
        "n": n,
        "seed": seed,
        "noise": noise,
        "setting": setting,
        "max_len": max_len,
        "gain": gain,
        "fixed_goal": None if fixed_goal is None else [float(v) for v in np.asarray(fixed_goal)],
        "snap_goal": snap_goal,
    }
    return TrajectoryDataset(trajs, _manifest(world, mode, gen, n))


def make_mixed_dataset(
    world: PointMassWorld,
    mode: str,
    n_expert: int,
    n_failure: int,
    goal,
    seed: int,
    noise: float = 0.0,
    max_len: int = 100,
    gain: float = 1.0,
    decoy=None,
    decoy_min_dist: float = 0.3,
) -> TrajectoryDataset:
    """Offline-RL task data: experts reach the task goal, failures head to a
    decoy goal (fixed when given, else sampled per trajectory at least
    decoy_min_dist away)."""
    rng = np.random.default_rng(seed)
    goal = np.asarray(goal, dtype=float)
    trajs = []
    for _ in range(n_expert):
        start, _ = sample_task(world, rng, "hard")
        trajs.append(expert_rollout(world, start, goal, noise, max_len, rng, mode, gain, role="expert"))
    for _ in range(n_failure):
        start, _ = sample_task(world, rng, "hard")
        if decoy is not None:
            this_decoy = np.asarray(decoy, dtype=float)
        else:
            while True:
                this_decoy = rng.uniform(0.0, 1.0, size=2)
                if np.linalg.norm(this_decoy - goal) >= decoy_min_dist and not _inside_obstacle(world, this_decoy):
                    break
        traj = expert_rollout(world, start, this_decoy, noise, max_len, rng, mode, gain, role="failure")
        traj.meta["goal"] = [float(v) for v in goal]
        traj.meta["decoy"] = [float(v) for v in this_decoy]
        trajs.append(traj)
    gen = {
        "kind": "mixed",
        "n_expert": n_expert,
        "n_failure": n_failure,
        "goal": [float(v) for v in goal],
        "seed": seed,
        "noise": noise,
        "max_len": max_len,
        "gain": gain,
        "decoy": None if decoy is None else [float(v) for v in np.asarray(decoy)],
        "decoy_min_dist": decoy_min_dist,
    }
    return TrajectoryDataset(trajs, _manifest(world, mode, gen, n_expert + n_failure))
