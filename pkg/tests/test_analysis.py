import json

import numpy as np
import pytest

from viplab import analysis as an
from viplab import worlds as W
from viplab.control import EpisodeResult, GoalSpec
from viplab.encoder import Encoder, EncoderConfig, identity_encoder, init_encoder
from viplab.trajstore import Trajectory, TrajectoryDataset


def constant_encoder(dim=2, k=3):
    cfg = EncoderConfig(dim, (), k)
    return Encoder(cfg, [(np.zeros((k, dim)), np.full(k, 0.5))])


def test_distance_curve_normalization():
    enc = identity_encoder(2)
    frames = np.array([[0.0, 0.0], [0.3, 0.0], [0.6, 0.0], [1.0, 0.0]])
    curve = an.distance_curve(enc, Trajectory(frames=frames), normalize=True)
    assert curve.values[0] == pytest.approx(1.0)
    assert not curve.degenerate


def test_distance_curve_degenerate_flag():
    enc = constant_encoder()
    frames = np.random.default_rng(0).normal(size=(5, 2))
    curve = an.distance_curve(enc, Trajectory(frames=frames), normalize=True)
    assert curve.degenerate
    assert np.allclose(curve.values, 0.0)


def test_distance_curve_identity_monotone_on_noiseless_expert(point_mass):
    enc = identity_encoder(2)
    rng = np.random.default_rng(1)
    start, goal = W.sample_task(point_mass, rng, "hard")
    traj = W.expert_rollout(point_mass, start, goal, 0.0, 200, rng, W.RAW_STATE)
    curve = an.distance_curve(enc, traj, goal_spec=GoalSpec(enc, W.observe(point_mass, goal, W.RAW_STATE)))
    assert np.all(curve.values[1:] < curve.values[:-1])


def test_bump_fraction_hand_example():
    assert an.bump_fraction(np.array([1.0, 0.8, 0.9, 0.5])) == pytest.approx(1.0 / 3.0)


def test_bump_fraction_monotone_zero():
    assert an.bump_fraction(np.array([5.0, 4.0, 3.0, 1.0])) == 0.0


def test_bump_fraction_ties_are_not_bumps():
    assert an.bump_fraction(np.array([1.0, 1.0, 1.0])) == 0.0


def test_bump_fraction_too_short():
    with pytest.raises(an.AnalysisError):
        an.bump_fraction(np.array([1.0]))


def test_bump_plus_nonincreasing_is_one():
    rng = np.random.default_rng(2)
    for _ in range(10):
        values = rng.normal(size=17)
        bumps = an.bump_fraction(values)
        non_increasing = np.sum(values[1:] <= values[:-1]) / (len(values) - 1)
        assert bumps + non_increasing == pytest.approx(1.0, abs=1e-15)


def test_dataset_bump_report_skips_short_and_errors_when_empty(small_encoder):
    rng = np.random.default_rng(3)
    short = TrajectoryDataset([Trajectory(frames=rng.normal(size=(5, 3))) for _ in range(3)])
    with pytest.raises(an.AnalysisError):
        an.dataset_bump_report(small_encoder, short, frame_cap=50)
    report = an.dataset_bump_report(small_encoder, short, frame_cap=None)
    assert len(report.fractions) == 3


def test_dataset_bump_report_single_monotone_trajectory():
    enc = identity_encoder(2)
    frames = np.linspace([1.0, 0.0], [0.0, 0.0], 12)
    ds = TrajectoryDataset([Trajectory(frames=frames)])
    report = an.dataset_bump_report(enc, ds, frame_cap=10)
    assert report.mean == 0.0 and report.std == 0.0


def test_dataset_bump_report_order_invariant(small_encoder, random_dataset):
    a = an.dataset_bump_report(small_encoder, random_dataset, frame_cap=None)
    reversed_ds = TrajectoryDataset(list(reversed(random_dataset.trajectories)))
    b = an.dataset_bump_report(small_encoder, reversed_ds, frame_cap=None)
    assert a.mean == pytest.approx(b.mean, abs=1e-15)
    assert sorted(a.fractions) == pytest.approx(sorted(b.fractions))


def test_dataset_bump_report_truncates_to_cap(small_encoder):
    rng = np.random.default_rng(4)
    ds = TrajectoryDataset([Trajectory(frames=rng.normal(size=(30, 3)))])
    full = an.dataset_bump_report(small_encoder, ds, frame_cap=None)
    capped = an.dataset_bump_report(small_encoder, ds, frame_cap=10)
    assert len(full.fractions) == len(capped.fractions) == 1
    # capped curve has 9 steps; goal is the 10th frame, not the 30th
    assert capped.mean != full.mean


def test_histogram_collapsed_encoder_central_bin(random_dataset):
    enc = constant_encoder(dim=3)
    report = an.reward_histogram([enc], random_dataset, bins=21, normalize=False)
    counts = report.counts[0]
    assert counts[10] == counts.sum()  # all mass in the central bin


def test_histogram_identity_on_monotone_expert_all_positive(point_mass):
    enc = identity_encoder(2)
    ds = W.make_expert_dataset(point_mass, W.RAW_STATE, n=4, seed=5, noise=0.0, setting="hard", max_len=60)
    report = an.reward_histogram([enc], ds, bins=11)
    counts = report.counts[0]
    edges = report.edges
    negative_mass = counts[: len(counts) // 2].sum()
    assert negative_mass == 0
    assert counts.sum() == sum(len(t) - 1 for t in ds.trajectories)


def test_histogram_mass_equals_transitions(small_encoder, random_dataset):
    report = an.reward_histogram([small_encoder], random_dataset, bins=15, normalize=True)
    assert report.counts[0].sum() == sum(len(t) - 1 for t in random_dataset.trajectories)


def test_histogram_self_comparison_zero_ratios(small_encoder, random_dataset):
    report = an.reward_histogram([small_encoder, small_encoder], random_dataset, bins=9)
    for r, count in zip(report.ratios, report.counts[1]):
        if count > 0:
            assert r == 0.0
        else:
            assert r is None


def test_histogram_needs_one_or_two_encoders(small_encoder, random_dataset):
    with pytest.raises(an.AnalysisError):
        an.reward_histogram([], random_dataset)
    with pytest.raises(an.AnalysisError):
        an.reward_histogram([small_encoder] * 3, random_dataset)


def episode_from_curves(emb, true):
    return EpisodeResult(
        success=True,
        steps=len(emb) - 1,
        final_error=float(true[-1]),
        true_errors=[float(v) for v in true],
        embedding_distances=[float(v) for v in emb],
    )


def test_correlation_identity_r2_one():
    rng = np.random.default_rng(6)
    eps = []
    for _ in range(5):
        d = np.abs(rng.normal(size=12)).cumsum()[::-1].copy()
        eps.append(episode_from_curves(d, d))  # embedding distance == true distance
    result = an.reward_correlation(identity_encoder(2), eps)
    assert result.r2 >= 1.0 - 1e-9
    assert result.slope == pytest.approx(1.0, abs=1e-9)
    assert result.intercept == pytest.approx(0.0, abs=1e-9)


def test_correlation_constant_predictor_flagged():
    rng = np.random.default_rng(7)
    eps = [episode_from_curves(np.ones(10), np.abs(rng.normal(size=10)))]
    result = an.reward_correlation(constant_encoder(), eps)
    assert result.degenerate and result.r2 == 0.0


def test_correlation_too_few_samples_errors():
    with pytest.raises(an.AnalysisError):
        an.reward_correlation(identity_encoder(2), [])


def test_prop2_identity_fraction_one(point_mass):
    enc = identity_encoder(2)
    rng = np.random.default_rng(8)
    trajs = []
    for _ in range(5):
        start, goal = W.sample_task(point_mass, rng, "hard")
        trajs.append(W.expert_rollout(point_mass, start, goal, 0.0, 200, rng, W.RAW_STATE))
    assert an.prop2_check(enc, trajs) == 1.0


def test_prop2_constant_encoder_zero(random_dataset):
    assert an.prop2_check(constant_encoder(dim=3), random_dataset.trajectories) == 0.0


def test_csv_writers(tmp_path, small_encoder, random_dataset):
    curves = [an.distance_curve(small_encoder, t, normalize=True, traj_id=i) for i, t in enumerate(random_dataset.trajectories)]
    an.write_curves_csv(curves, tmp_path / "curves.csv")
    header = (tmp_path / "curves.csv").read_text().splitlines()[0]
    assert header == "traj_id,step,distance"

    report = an.dataset_bump_report(small_encoder, random_dataset, frame_cap=None)
    an.write_bumps_csv(report, tmp_path / "bumps.csv")
    lines = (tmp_path / "bumps.csv").read_text().strip().splitlines()
    assert lines[0] == "traj_id,bump_fraction"
    assert lines[-2].startswith("mean,") and lines[-1].startswith("std,")

    hist = an.reward_histogram([small_encoder, small_encoder], random_dataset)
    an.write_histogram_csv(hist, tmp_path / "hist.csv")
    assert (tmp_path / "hist.csv").read_text().splitlines()[0] == "bin_lo,bin_hi,count_a,count_b,ratio"

    eps = [episode_from_curves(np.linspace(3, 0, 10), np.linspace(2, 0, 10))]
    result = an.reward_correlation(small_encoder, eps)
    an.write_correlation(result, tmp_path / "corr.csv", tmp_path / "corr.json")
    assert (tmp_path / "corr.csv").read_text().splitlines()[0] == "embedding_reward,true_reward"
    summary = json.loads((tmp_path / "corr.json").read_text())
    assert set(summary) >= {"r2", "slope", "intercept", "n"}

    an.write_embeddings_csv(small_encoder, random_dataset, tmp_path / "embed.csv")
    header = (tmp_path / "embed.csv").read_text().splitlines()[0]
    assert header == "traj_id,step,e0,e1,e2,e3,distance"
