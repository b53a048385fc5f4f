"""The a10 check: drive the plot scripts on freshly produced artifacts.

Builds a small end-to-end run in the toy-protocol style (a K=2 encoder and
planner episodes), exports the four documented artifact kinds, renders each
figure via the standalone scripts, and verifies the golden-schema failure
mode on a corrupted CSV.
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import worlds as W
from .acceptance import A2_ENCODER, A2_TRAIN, A2_LOSS, CriterionResult, _a2_demos
from .analysis import distance_curve, reward_histogram, write_curves_csv, write_embeddings_csv, write_histogram_csv
from .control import MPPIConfig, run_mppi_episodes, write_episode_csv, write_summary_json
from .encoder import EncoderConfig, init_encoder
from .objectives import TrainConfig, train

PLOTS_DIR = Path(__file__).resolve().parents[2] / "plots"


def _run_script(name: str, *argv) -> subprocess.CompletedProcess:
    env = dict(os.environ, MPLBACKEND="Agg")
    return subprocess.run(
        [sys.executable, str(PLOTS_DIR / name), *map(str, argv)],
        capture_output=True,
        text=True,
        env=env,
    )


def a10_plot_scripts(workdir: Path | None = None) -> CriterionResult:
    t0 = time.perf_counter()
    if workdir is None:
        workdir = Path(tempfile.mkdtemp(prefix="viplab_a10_"))
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    issues: list[str] = []

    # small toy-protocol artifacts (short training keeps this check fast)
    demos = _a2_demos(30, seed=101)
    heldout = _a2_demos(8, seed=202)
    enc_cfg = EncoderConfig(input_dim=256, init_seed=500, **A2_ENCODER)
    tc = TrainConfig(objective="vip", seed=9500, **{**A2_TRAIN, "batches": 200})
    encoder = train(demos, enc_cfg, tc, A2_LOSS, workdir / "a10_train").encoder
    random_enc = init_encoder(EncoderConfig(input_dim=256, init_seed=999, **A2_ENCODER))

    curves_csv = workdir / "curves.csv"
    curves = [distance_curve(encoder, t, normalize=True, traj_id=i) for i, t in enumerate(heldout.trajectories)]
    write_curves_csv(curves, curves_csv)

    embed_csv = workdir / "embed.csv"
    write_embeddings_csv(encoder, heldout, embed_csv)

    hist_csv = workdir / "hist.csv"
    write_histogram_csv(reward_histogram([encoder, random_enc], heldout), hist_csv)

    world = W.PointMassWorld(dt=0.1, tolerance=0.08)
    rng = np.random.default_rng(7)
    tasks = []
    while len(tasks) < 5:
        start, goal = W.sample_task(world, rng, "easy")
        goal = W.snap_to_cell_center(goal)
        if np.linalg.norm(start - goal) > world.tolerance:
            tasks.append((start, goal))
    mppi = MPPIConfig(sigma=0.1, temperature=0.02, episode_horizon=30)
    summaries = []
    for label, enc in (("vip", encoder), ("random", random_enc)):
        results = run_mppi_episodes(world, tasks, enc, mppi, 1234, W.IMAGE16)
        write_episode_csv(results, workdir / f"plan_{label}.csv")
        summary = workdir / f"plan_{label}_summary.json"
        write_summary_json(results, summary, extra={"label": label})
        summaries.append(summary)

    renders = [
        ("plot_curves.py", ["--in", curves_csv, "--out", workdir / "fig_curves.png"]),
        ("plot_embedding2d.py", ["--in", embed_csv, "--out", workdir / "fig_embed.png"]),
        ("plot_histogram.py", ["--in", hist_csv, "--out", workdir / "fig_hist.png", "--label-a", "vip", "--label-b", "random"]),
        ("plot_bars.py", ["--in", *summaries, "--out", workdir / "fig_bars.png"]),
    ]
    for script, argv in renders:
        proc = _run_script(script, *argv)
        out_path = Path(str(argv[argv.index("--out") + 1]))
        if proc.returncode != 0 or not out_path.exists():
            issues.append(f"{script} failed: {proc.stderr.strip()[:200]}")

    # golden-schema failure: corrupt a column header
    lines = curves_csv.read_text().splitlines()
    lines[0] = lines[0].replace("distance", "distnce")
    bad = workdir / "curves_bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    proc = _run_script("plot_curves.py", "--in", bad, "--out", workdir / "never.png")
    if proc.returncode == 0:
        issues.append("corrupted curves CSV was accepted")
    elif "distance" not in proc.stderr:
        issues.append("schema error does not name the missing column")

    payload = {"success_rate": 1.5, "label": "broken"}
    bad_summary = workdir / "bad_summary.json"
    bad_summary.write_text(json.dumps(payload))
    proc = _run_script("plot_bars.py", "--in", bad_summary, "--out", workdir / "never2.png")
    if proc.returncode == 0:
        issues.append("out-of-range success_rate was accepted")

    return CriterionResult(
        id="a10",
        passed=not issues,
        measured={"issues": issues},
        thresholds={"issues": "none"},
        seconds=time.perf_counter() - t0,
        notes="four figure kinds rendered from freshly produced artifacts; corrupted schemas rejected",
    )
