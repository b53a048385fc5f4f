"""Evaluation battery over frozen encoders: distance curves, bump fractions,
reward histograms with count-difference ratios, reward/ground-truth
correlation, and the monotone-distance check along optimal paths."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .control import EpisodeResult, GoalSpec
from .encoder import Encoder
from .trajstore import Trajectory, TrajectoryDataset


class AnalysisError(ValueError):
    pass


@dataclass
class DistanceCurve:
    traj_id: int
    values: np.ndarray  # per-frame distance to goal
    normalized: bool
    degenerate: bool = False  # initial distance was 0; left unnormalized

    def __len__(self) -> int:
        return len(self.values)


def curve_values(encoder: Encoder, frames: np.ndarray, goal_embedding: np.ndarray) -> np.ndarray:
    diff = encoder.embed_batch(frames) - goal_embedding
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def distance_curve(
    encoder: Encoder,
    trajectory: Trajectory,
    goal_spec: GoalSpec | None = None,
    normalize: bool = False,
    traj_id: int = 0,
) -> DistanceCurve:
    """Distance of every frame to the goal embedding (the trajectory's own
    last frame when no goal spec is given). Normalization divides by the
    initial distance when it is positive, else flags the curve degenerate."""
    if goal_spec is None:
        goal_spec = GoalSpec(encoder, trajectory.frames[-1])
    values = curve_values(encoder, trajectory.frames, goal_spec.embedding)
    degenerate = False
    if normalize:
        if values[0] > 0.0:
            values = values / values[0]
        else:
            degenerate = True
    return DistanceCurve(traj_id=traj_id, values=values, normalized=normalize, degenerate=degenerate)


def bump_fraction(curve) -> float:
    """Fraction of steps with a strictly positive slope."""
    values = curve.values if isinstance(curve, DistanceCurve) else np.asarray(curve, dtype=float)
    if len(values) < 2:
        raise AnalysisError("bump_fraction: curve too short (needs >= 2 points)")
    return float(np.sum(values[1:] > values[:-1]) / (len(values) - 1))


@dataclass
class BumpReport:
    fractions: list[float]
    traj_ids: list[int]
    mean: float
    std: float
    n_skipped_short: int
    n_skipped_degenerate: int


def dataset_bump_report(encoder: Encoder, dataset: TrajectoryDataset, frame_cap: int | None = 50) -> BumpReport:
    """Per-trajectory bump fractions with the goal taken as the last retained
    frame. Trajectories shorter than frame_cap are skipped; curves with zero
    initial distance are excluded and counted as degenerate."""
    fractions, ids = [], []
    skipped_short = 0
    skipped_degenerate = 0
    for i, traj in enumerate(dataset.trajectories):
        frames = traj.frames
        if frame_cap is not None:
            if len(frames) < frame_cap:
                skipped_short += 1
                continue
            frames = frames[:frame_cap]
        values = curve_values(encoder, frames, encoder.embed(frames[-1]))
        if values[0] <= 0.0:
            skipped_degenerate += 1
            continue
        fractions.append(float(np.sum(values[1:] > values[:-1]) / (len(values) - 1)))
        ids.append(i)
    if not fractions:
        raise AnalysisError("dataset_bump_report: no qualifying trajectory (all shorter than cap or degenerate)")
    arr = np.asarray(fractions)
    return BumpReport(
        fractions=fractions,
        traj_ids=ids,
        mean=float(arr.mean()),
        std=float(arr.std()),
        n_skipped_short=skipped_short,
        n_skipped_degenerate=skipped_degenerate,
    )


@dataclass
class HistogramReport:
    edges: np.ndarray  # (bins + 1,)
    counts: list[np.ndarray]  # one (bins,) array per encoder
    ratios: list[float | None] | None  # (|A|-|B|)/|B| per bin; None where |B| == 0
    n_skipped_degenerate: int


def _normalized_rewards(encoder: Encoder, dataset: TrajectoryDataset, normalize: bool) -> tuple[np.ndarray, int]:
    rewards = []
    skipped = 0
    for traj in dataset.trajectories:
        values = curve_values(encoder, traj.frames, encoder.embed(traj.frames[-1]))
        r = values[:-1] - values[1:]  # reward = decrease in distance
        if normalize:
            if values[0] <= 0.0:
                skipped += 1
                continue
            r = r / values[0]
        rewards.append(r)
    return (np.concatenate(rewards) if rewards else np.zeros(0)), skipped


def reward_histogram(
    encoders: list[Encoder],
    dataset: TrajectoryDataset,
    bins: int = 21,
    normalize: bool = True,
) -> HistogramReport:
    """Per-transition embedding rewards (goal = last frame of each
    trajectory), normalized per trajectory by initial distance, binned over a
    symmetric range shared by all encoders."""
    if not 1 <= len(encoders) <= 2:
        raise AnalysisError("reward_histogram: needs one or two encoders")
    per_encoder = []
    skipped = 0
    for enc in encoders:
        r, s = _normalized_rewards(enc, dataset, normalize)
        per_encoder.append(r)
        skipped += s
    span = max((float(np.abs(r).max()) if len(r) else 0.0) for r in per_encoder)
    span = max(span, 1e-12)
    edges = np.linspace(-span, span, bins + 1)
    counts = [np.histogram(r, bins=edges)[0] for r in per_encoder]
    ratios = None
    if len(encoders) == 2:
        a, b = counts
        ratios = [((int(ai) - int(bi)) / int(bi)) if bi > 0 else None for ai, bi in zip(a, b)]
    return HistogramReport(edges=edges, counts=counts, ratios=ratios, n_skipped_degenerate=skipped)


@dataclass
class CorrelationResult:
    pairs: np.ndarray  # (N, 2) columns: embedding reward, true reward
    r2: float
    slope: float
    intercept: float
    n: int
    degenerate: bool  # zero-variance predictor


def reward_correlation(encoder: Encoder, episodes: list[EpisodeResult], goal_spec: GoalSpec | None = None) -> CorrelationResult:
    """OLS of true rewards on embedding rewards over all episode transitions.

    True reward is the per-step decrease in true-state distance to the goal;
    embedding reward the per-step decrease in embedding distance, both read
    from the episode logs.
    """
    xs, ys = [], []
    for ep in episodes:
        d = np.asarray(ep.embedding_distances, dtype=float)
        e = np.asarray(ep.true_errors, dtype=float)
        if len(d) != len(e) or len(d) < 2:
            continue
        xs.append(d[:-1] - d[1:])
        ys.append(e[:-1] - e[1:])
    if not xs:
        raise AnalysisError("reward_correlation: needs at least 2 logged states per episode")
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    if len(x) < 2:
        raise AnalysisError("reward_correlation: fewer than 2 samples")
    pairs = np.stack([x, y], axis=1)
    var_x = float(np.var(x))
    if var_x == 0.0:
        return CorrelationResult(pairs, r2=0.0, slope=0.0, intercept=float(np.mean(y)), n=len(x), degenerate=True)
    slope = float(np.cov(x, y, bias=True)[0, 1] / var_x)
    intercept = float(np.mean(y) - slope * np.mean(x))
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return CorrelationResult(pairs, r2=r2, slope=slope, intercept=intercept, n=len(x), degenerate=False)


def prop2_check(encoder: Encoder, trajectories: list[Trajectory], goal_spec: GoalSpec | None = None) -> float:
    """Pooled fraction of steps with strictly decreasing embedding distance
    along (optimal) trajectories; goal = each trajectory's last frame unless
    a shared goal spec is given."""
    decreasing = 0
    total = 0
    for traj in trajectories:
        g = goal_spec.embedding if goal_spec is not None else encoder.embed(traj.frames[-1])
        values = curve_values(encoder, traj.frames, g)
        decreasing += int(np.sum(values[1:] < values[:-1]))
        total += len(values) - 1
    if total == 0:
        raise AnalysisError("prop2_check: no steps to check")
    return decreasing / total


# ---------------------------------------------------------------------------
# CSV / JSON artifact writers (the documented schemas)


def write_curves_csv(curves: list[DistanceCurve], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["traj_id", "step", "distance"])
        for c in curves:
            for t, v in enumerate(c.values):
                writer.writerow([c.traj_id, t, f"{v:.17g}"])


def write_bumps_csv(report: BumpReport, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["traj_id", "bump_fraction"])
        for tid, frac in zip(report.traj_ids, report.fractions):
            writer.writerow([tid, f"{frac:.17g}"])
        writer.writerow(["mean", f"{report.mean:.17g}"])
        writer.writerow(["std", f"{report.std:.17g}"])


def write_histogram_csv(report: HistogramReport, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["bin_lo", "bin_hi", "count_a", "count_b", "ratio"])
        n_bins = len(report.counts[0])
        for i in range(n_bins):
            count_b = report.counts[1][i] if len(report.counts) == 2 else ""
            ratio = ""
            if report.ratios is not None and report.ratios[i] is not None:
                ratio = f"{report.ratios[i]:.17g}"
            writer.writerow([f"{report.edges[i]:.17g}", f"{report.edges[i + 1]:.17g}", report.counts[0][i], count_b, ratio])


def write_correlation(result: CorrelationResult, csv_path, json_path) -> None:
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["embedding_reward", "true_reward"])
        for x, y in result.pairs:
            writer.writerow([f"{x:.17g}", f"{y:.17g}"])
    with open(json_path, "w") as f:
        json.dump(
            {
                "r2": result.r2,
                "slope": result.slope,
                "intercept": result.intercept,
                "n": result.n,
                "degenerate": result.degenerate,
            },
            f,
            indent=2,
            sort_keys=True,
        )


def write_embeddings_csv(encoder: Encoder, dataset: TrajectoryDataset, path) -> None:
    """Per-frame embeddings plus distance to the trajectory's own last frame:
    ``traj_id,step,e0..e{K-1},distance`` (input for the 2-D scatter figure)."""
    k = encoder.output_dim
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["traj_id", "step", *[f"e{i}" for i in range(k)], "distance"])
        for tid, traj in enumerate(dataset.trajectories):
            emb = encoder.embed_batch(traj.frames)
            d = np.linalg.norm(emb - emb[-1], axis=1)
            for t in range(len(traj.frames)):
                writer.writerow([tid, t, *[f"{v:.17g}" for v in emb[t]], f"{d[t]:.17g}"])
