import numpy as np
import pytest

from viplab import worlds as W

# chi-square critical values at p = 0.001 for the dfs used below
CHI2_CRIT = {24: 51.18, 22: 48.27}


def test_point_mass_step_arithmetic(point_mass):
    nxt = W.step(point_mass, np.array([0.5, 0.5]), np.array([1.0, 0.0]))
    assert np.allclose(nxt, [0.55, 0.5], atol=1e-12)


def test_point_mass_zero_action(point_mass):
    x = np.array([0.3, 0.7])
    assert np.array_equal(W.step(point_mass, x, np.zeros(2)), x)


def test_point_mass_clips_to_bounds(point_mass):
    nxt = W.step(point_mass, np.array([0.99, 0.01]), np.array([5.0, -5.0]))
    assert 0.0 <= nxt[0] <= 1.0 and 0.0 <= nxt[1] <= 1.0


def test_point_mass_obstacle_rejects_step():
    world = W.PointMassWorld(obstacles=((0.4, 0.4, 0.6, 0.6),))
    x = np.array([0.38, 0.5])
    nxt = W.step(world, x, np.array([1.0, 0.0]))
    assert np.array_equal(nxt, x)


def test_step_is_pure(point_mass, grid):
    x = np.array([0.2, 0.9])
    a = np.array([0.5, -0.5])
    first = W.step(point_mass, x, a)
    for _ in range(5):
        assert np.array_equal(W.step(point_mass, x, a), first)
    assert W.step(grid, (0, 0), 3) == W.step(grid, (0, 0), 3)


def test_grid_move_into_wall_unchanged(grid):
    assert W.step(grid, (0, 0), 0) == (0, 0)  # up from top row
    assert W.step(grid, (2, 1), 3) == (2, 1)  # right into blocked (2,2)


def test_grid_moves(grid):
    assert W.step(grid, (1, 1), 1) == (2, 1)
    assert W.step(grid, (1, 1), 4) == (1, 1)


def test_grid_onehot_exactly_one(grid):
    obs = W.observe(grid, (3, 4), W.RAW_STATE)
    assert obs.sum() == 1.0
    assert obs[3 * grid.width + 4] == 1.0


def test_image16_raster_counting(grid):
    obs = W.observe(grid, (0, 0), W.IMAGE16)
    assert obs.shape == (256,)
    assert obs.sum() == 1.0 + len(grid.blocked)


def test_observe_injective_on_grid(grid):
    seen = set()
    for cell in grid.free_cells():
        for mode in (W.RAW_STATE, W.IMAGE16):
            key = (mode, W.observe(grid, cell, mode).tobytes())
            assert key not in seen
            seen.add(key)


def test_observe_batch_matches_single(point_mass):
    rng = np.random.default_rng(0)
    states = rng.uniform(size=(20, 2))
    for mode in (W.RAW_STATE, W.IMAGE16):
        batch = W.observe_batch(point_mass, states, mode)
        for i, s in enumerate(states):
            assert np.array_equal(batch[i], W.observe(point_mass, s, mode))


def test_grid_noiseless_rollout_is_shortest_path(grid):
    rng = np.random.default_rng(4)
    for _ in range(25):
        start, goal = W.sample_task(grid, rng, "hard")
        traj = W.expert_rollout(grid, start, goal, 0.0, 100, rng, W.RAW_STATE)
        assert len(traj) == W.bfs_distances(grid, goal)[start] + 1


def test_rollout_start_equals_goal(point_mass, grid):
    rng = np.random.default_rng(1)
    t = W.expert_rollout(point_mass, np.array([0.4, 0.4]), np.array([0.4, 0.4]), 0.0, 50, rng, W.RAW_STATE)
    assert len(t) == 2
    assert np.array_equal(t.frames[0], t.frames[-1])
    t = W.expert_rollout(grid, (1, 1), (1, 1), 0.0, 50, rng, W.RAW_STATE)
    assert len(t) == 2


def test_point_mass_noiseless_distance_strictly_decreases(point_mass):
    rng = np.random.default_rng(6)
    for _ in range(10):
        start, goal = W.sample_task(point_mass, rng, "hard")
        traj = W.expert_rollout(point_mass, start, goal, 0.0, 200, rng, W.RAW_STATE)
        d = np.linalg.norm(traj.states - goal, axis=1)
        assert np.all(d[1:] < d[:-1])
        assert d[-1] <= point_mass.tolerance


def test_unreachable_goal_errors():
    # wall of blocked cells separates column 0 from the rest
    world = W.GridWorld(3, 3, blocked=frozenset({(0, 1), (1, 1), (2, 1)}))
    rng = np.random.default_rng(0)
    with pytest.raises(W.WorldError):
        W.expert_rollout(world, (0, 0), (0, 2), 0.0, 50, rng, W.RAW_STATE)


def test_sample_task_within_bounds_and_free():
    world = W.PointMassWorld(obstacles=((0.4, 0.4, 0.6, 0.6),))
    rng = np.random.default_rng(9)
    for _ in range(1000):
        start, goal = W.sample_task(world, rng, "hard")
        for p in (start, goal):
            assert np.all(p >= 0) and np.all(p <= 1)
            assert not (0.4 <= p[0] <= 0.6 and 0.4 <= p[1] <= 0.6)
        assert np.linalg.norm(start - goal) > world.tolerance


def test_sample_task_easy_radius(point_mass):
    rng = np.random.default_rng(10)
    for _ in range(200):
        start, goal = W.sample_task(point_mass, rng, "easy")
        assert np.linalg.norm(start - goal) <= 0.2 + 1e-12


def test_sample_task_seeded_determinism(grid):
    a = [W.sample_task(grid, np.random.default_rng(42), "hard") for _ in range(1)]
    b = [W.sample_task(grid, np.random.default_rng(42), "hard") for _ in range(1)]
    assert a == b


def test_sample_task_start_distribution_uniform_chi2(grid):
    # start cell frequencies vs uniform over free cells, fixed seed
    rng = np.random.default_rng(12)
    cells = grid.free_cells()
    counts = {c: 0 for c in cells}
    n = 1000
    for _ in range(n):
        start, _ = W.sample_task(grid, rng, "hard")
        counts[start] += 1
    expected = n / len(cells)
    stat = sum((c - expected) ** 2 / expected for c in counts.values())
    assert stat < CHI2_CRIT[len(cells) - 1]


def test_snap_to_cell_center():
    snapped = W.snap_to_cell_center(np.array([0.03, 0.99]))
    assert np.allclose(snapped, [0.5 / 16, 15.5 / 16])


def test_world_dict_roundtrip(point_mass, grid):
    for world in (point_mass, grid, W.PointMassWorld(dt=0.1, obstacles=((0.1, 0.1, 0.2, 0.2),))):
        assert W.world_from_dict(W.world_to_dict(world)) == world


def test_mixed_dataset_roles_and_goals(point_mass):
    ds = W.make_mixed_dataset(
        point_mass, W.RAW_STATE, n_expert=3, n_failure=4, goal=[0.8, 0.8], seed=0, gain=4.0, decoy=[0.8, 0.45]
    )
    roles = [t.meta["role"] for t in ds.trajectories]
    assert roles.count("expert") == 3 and roles.count("failure") == 4
    for t in ds.trajectories:
        assert t.meta["goal"] == [0.8, 0.8]
        if t.meta["role"] == "failure":
            assert t.meta["decoy"] == [0.8, 0.45]
    assert ds.manifest["gen"]["kind"] == "mixed"


def test_expert_dataset_manifest_hash_stable(point_mass):
    a = W.make_expert_dataset(point_mass, W.RAW_STATE, n=3, seed=1)
    b = W.make_expert_dataset(point_mass, W.RAW_STATE, n=3, seed=1)
    assert a.manifest["config_hash"] == b.manifest["config_hash"]
    assert a.manifest["obs_dim"] == 2
