"""Batch command-line entry point.

Subcommands: gen-data, train, plan, offline-rl, analyze, repro. Exit codes:
0 success, 1 config error, 2 runtime error. Logs go to stderr; artifacts go
to files, each accompanied by the resolved config that produced it.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis as A
from . import config as C
from . import control as ctl
from . import worlds as W
from .acceptance import RUNTIME_LIMITS, parse_suite, run_suite
from .encoder import CheckpointError, load_encoder
from .objectives import TrainingDivergedError, train
from .trajstore import DatasetFormatError, load_dataset, save_dataset

log = logging.getLogger("viplab")


class CLIError(Exception):
    """Usage/config error -> exit 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); config errors are exit 1
        raise CLIError(message)


def _resolve_threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("VIPLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CLIError(f"VIPLAB_THREADS must be an integer, got {env!r}")
    return 1


def _seed(cfg: dict, args) -> int:
    return args.seed if args.seed is not None else cfg["seed"]


def _write_config_beside(cfg: dict, artifact: Path) -> None:
    C.write_resolved_config(cfg, artifact.with_suffix(artifact.suffix + ".config.json"))


def _load_encoder_checked(path: str, world, mode: str):
    if not Path(path).exists():
        raise FileNotFoundError(f"encoder checkpoint not found: {path}")
    encoder = load_encoder(path)
    expected = W.obs_dim(world, mode)
    if encoder.config.input_dim != expected:
        raise RuntimeError(
            f"dimension mismatch: encoder input dim {encoder.config.input_dim}, "
            f"observations have dim {expected}"
        )
    return encoder


def _gen_dataset(cfg: dict, seed: int):
    world = C.build_world(cfg)
    ds_cfg = cfg["dataset"]
    mode = cfg["observation_mode"]
    if ds_cfg["kind"] == "mixed":
        if ds_cfg["fixed_goal"] is None:
            raise CLIError("$.dataset.fixed_goal: required for kind 'mixed'")
        return W.make_mixed_dataset(
            world,
            mode,
            n_expert=ds_cfg["n"],
            n_failure=ds_cfg["n_failure"],
            goal=ds_cfg["fixed_goal"],
            seed=seed,
            noise=ds_cfg["noise"],
            max_len=ds_cfg["max_len"],
            gain=ds_cfg["gain"],
            decoy=ds_cfg["decoy"],
            decoy_min_dist=ds_cfg["decoy_min_dist"],
        )
    return W.make_expert_dataset(
        world,
        mode,
        n=ds_cfg["n"],
        seed=seed,
        noise=ds_cfg["noise"],
        setting=ds_cfg["setting"],
        max_len=ds_cfg["max_len"],
        gain=ds_cfg["gain"],
        fixed_goal=ds_cfg["fixed_goal"],
        snap_goal=ds_cfg["snap_goal"],
    )


def cmd_gen_data(args) -> int:
    cfg = C.load_config(args.config)
    seed = _seed(cfg, args)
    dataset = _gen_dataset(cfg, seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, out)
    _write_config_beside({**cfg, "seed": seed}, out)
    log.info("wrote %d trajectories to %s", len(dataset), out)
    return 0


def cmd_train(args) -> int:
    cfg = C.load_config(args.config)
    seed = _seed(cfg, args)
    if not Path(args.data).exists():
        raise FileNotFoundError(f"dataset not found: {args.data}")
    dataset = load_dataset(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    enc_cfg = C.build_encoder_config(cfg, dataset.obs_dim)
    train_cfg = C.build_train_config(cfg, objective=args.objective, seed=seed)
    loss_cfg = C.build_loss_config(cfg)
    result = train(dataset, enc_cfg, train_cfg, loss_cfg, out_dir)
    _write_config_beside({**cfg, "seed": seed, "train": {**cfg["train"], "objective": train_cfg.objective}},
                         result.checkpoint_path)
    log.info("trained %s for %d batches; final loss %.6g; checkpoint %s",
             train_cfg.objective, train_cfg.batches, result.losses[-1], result.checkpoint_path)
    return 0


def _sample_plan_tasks(world, cfg: dict, n: int, seed: int):
    rng = np.random.default_rng(seed)
    snap = cfg["mppi"]["snap_goal"] or cfg["observation_mode"] == W.IMAGE16
    tasks = []
    while len(tasks) < n:
        start, goal = W.sample_task(world, rng, cfg["mppi"]["setting"])
        if snap and isinstance(world, W.PointMassWorld):
            goal = W.snap_to_cell_center(goal)
            if np.linalg.norm(np.asarray(start) - goal) <= world.tolerance:
                continue
        tasks.append((start, goal))
    return tasks


def cmd_plan(args) -> int:
    cfg = C.load_config(args.config)
    if args.episodes < 1:
        raise CLIError("--episodes must be >= 1")
    seed = _seed(cfg, args)
    world = C.build_world(cfg)
    mode = cfg["observation_mode"]
    encoder = _load_encoder_checked(args.encoder, world, mode)
    mppi = C.build_mppi_config(cfg)
    tasks = _sample_plan_tasks(world, cfg, args.episodes, seed + 1)
    results = ctl.run_mppi_episodes(world, tasks, encoder, mppi, seed, mode, threads=_resolve_threads(args))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ctl.write_episode_csv(results, out)
    ctl.write_step_csv(results, out.with_name(out.stem + "_steps.csv"))
    ctl.write_summary_json(results, out.with_name(out.stem + "_summary.json"), extra={"label": args.label})
    _write_config_beside({**cfg, "seed": seed}, out)
    log.info("success rate %.2f over %d episodes", np.mean([r.success for r in results]), len(results))
    return 0


def cmd_offline_rl(args) -> int:
    cfg = C.load_config(args.config)
    seed = _seed(cfg, args)
    world = C.build_world(cfg)
    mode = cfg["observation_mode"]
    if not Path(args.data).exists():
        raise FileNotFoundError(f"dataset not found: {args.data}")
    dataset = load_dataset(args.data)
    encoder = _load_encoder_checked(args.encoder, world, mode)
    if dataset.obs_dim != encoder.config.input_dim:
        raise RuntimeError(
            f"dimension mismatch: dataset observations {dataset.obs_dim}, encoder input {encoder.config.input_dim}"
        )
    tau = 0.0 if args.mode == "bc" else (args.tau if args.tau is not None else None)
    rwr_cfg = C.build_rwr_config(cfg, tau=tau)
    expert_finals = [t.frames[-1] for t in dataset.trajectories if t.meta.get("role", "expert") == "expert"]
    goal_spec = ctl.GoalSpec(encoder, np.stack(expert_finals))
    policy = ctl.rwr_train(dataset, encoder, goal_spec, rwr_cfg, gamma=cfg["loss"]["gamma"], seed=seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    policy_path = out_dir / "policy.vpol"
    ctl.save_policy(policy, policy_path)
    _write_config_beside({**cfg, "seed": seed, "rwr": {**cfg["rwr"], "tau": rwr_cfg.tau}}, policy_path)

    if args.eval_episodes > 0:
        goal = dataset.trajectories[0].meta.get("goal")
        if goal is None:
            raise RuntimeError("dataset metadata has no task goal; cannot evaluate")
        rng = np.random.default_rng(seed + 17)
        tasks = []
        while len(tasks) < args.eval_episodes:
            start, _ = W.sample_task(world, rng, "hard")
            if W.state_distance(world, start, goal) > getattr(world, "tolerance", 0):
                tasks.append((start, np.asarray(goal)))
        rate, outcomes = ctl.eval_policy(world, policy, encoder, tasks, cfg["rwr"]["eval_horizon"], mode, seed=seed)
        ctl.write_episode_csv(outcomes, out_dir / "eval.csv")
        ctl.write_summary_json(outcomes, out_dir / "eval_summary.json", extra={"mode": args.mode, "tau": rwr_cfg.tau})
        log.info("%s success rate %.2f over %d episodes", args.mode, rate, len(tasks))
    return 0


def cmd_analyze(args) -> int:
    cfg = C.load_config(args.config)
    seed = _seed(cfg, args)
    world = C.build_world(cfg)
    mode = cfg["observation_mode"]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    an = cfg["analysis"]
    encoder = _load_encoder_checked(args.encoder, world, mode)

    if args.kind in ("curves", "bumps", "hist", "prop2", "embed2d"):
        if not args.data or not Path(args.data).exists():
            raise FileNotFoundError(f"dataset not found: {args.data}")
        dataset = load_dataset(args.data)
        if dataset.obs_dim != encoder.config.input_dim:
            raise RuntimeError(
                f"dimension mismatch: dataset observations {dataset.obs_dim}, encoder input {encoder.config.input_dim}"
            )

    if args.kind == "curves":
        curves = [
            A.distance_curve(encoder, t, normalize=an["normalize"], traj_id=i)
            for i, t in enumerate(dataset.trajectories)
        ]
        A.write_curves_csv(curves, out)
    elif args.kind == "bumps":
        report = A.dataset_bump_report(encoder, dataset, frame_cap=an["frame_cap"])
        A.write_bumps_csv(report, out)
        log.info("mean bump fraction %.4f over %d trajectories", report.mean, len(report.fractions))
    elif args.kind == "hist":
        encoders = [encoder]
        if args.encoder_b:
            encoders.append(_load_encoder_checked(args.encoder_b, world, mode))
        report = A.reward_histogram(encoders, dataset, bins=an["bins"], normalize=an["normalize"])
        A.write_histogram_csv(report, out)
    elif args.kind == "prop2":
        fraction = A.prop2_check(encoder, dataset.trajectories)
        out.write_text(json.dumps({"strict_decrease_fraction": fraction}, indent=2) + "\n")
        log.info("strictly decreasing on %.1f%% of steps", 100 * fraction)
    elif args.kind == "embed2d":
        A.write_embeddings_csv(encoder, dataset, out)
    elif args.kind == "corr":
        if args.episodes < 1:
            raise CLIError("--episodes must be >= 1 for corr")
        mppi = C.build_mppi_config(cfg)
        tasks = _sample_plan_tasks(world, cfg, args.episodes, seed + 1)
        episodes = ctl.run_mppi_episodes(world, tasks, encoder, mppi, seed, mode, threads=_resolve_threads(args))
        result = A.reward_correlation(encoder, episodes)
        A.write_correlation(result, out, out.with_suffix(".json"))
        log.info("R^2 = %.4f over %d transitions", result.r2, result.n)
    else:
        raise CLIError(f"unknown analyze kind {args.kind!r}")
    _write_config_beside({**cfg, "seed": seed}, out)
    return 0


def cmd_repro(args) -> int:
    try:
        ids = parse_suite(args.suite)
    except ValueError as e:
        raise CLIError(str(e))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    results = []
    if "a10" in ids:
        from .repro_plots import a10_plot_scripts  # local import: needs matplotlib

        ids = [i for i in ids if i != "a10"]
        results_a10 = [a10_plot_scripts(Path(args.workdir) if args.workdir else None)]
    else:
        results_a10 = []
    results = run_suite(ids, Path(args.workdir) if args.workdir else None) + results_a10
    for r in results:
        log.info("%s", r.line())
    report = {
        "criteria": [
            {
                "id": r.id,
                "passed": r.passed,
                "measured": r.measured,
                "thresholds": r.thresholds,
                "seconds": round(r.seconds, 3),
                "runtime_budget_seconds": RUNTIME_LIMITS.get(r.id),
                "notes": r.notes,
            }
            for r in results
        ],
        "all_passed": all(r.passed for r in results),
        "total_seconds": round(time.perf_counter() - t0, 3),
    }
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    log.info("report written to %s", out)
    return 0 if report["all_passed"] else 2


def build_parser() -> _Parser:
    p = _Parser(prog="viplab", description="goal-conditioned value embedding lab")
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a trajectory dataset")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=None)
    g.set_defaults(fn=cmd_gen_data)

    t = sub.add_parser("train", help="train an encoder with vip/tcn/lstd")
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--objective", choices=("vip", "tcn", "lstd"), default=None)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.set_defaults(fn=cmd_train)

    pl = sub.add_parser("plan", help="closed-loop MPPI episodes with a frozen encoder")
    pl.add_argument("--encoder", required=True)
    pl.add_argument("--config", required=True)
    pl.add_argument("--episodes", type=int, required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--seed", type=int, default=None)
    pl.add_argument("--threads", type=int, default=None)
    pl.add_argument("--label", default="vip")
    pl.set_defaults(fn=cmd_plan)

    o = sub.add_parser("offline-rl", help="train RWR/BC policy on an offline dataset")
    o.add_argument("--mode", choices=("rwr", "bc"), required=True)
    o.add_argument("--config", required=True)
    o.add_argument("--data", required=True)
    o.add_argument("--encoder", required=True)
    o.add_argument("--out", required=True)
    o.add_argument("--tau", type=float, default=None)
    o.add_argument("--seed", type=int, default=None)
    o.add_argument("--eval-episodes", type=int, default=0)
    o.set_defaults(fn=cmd_offline_rl)

    a = sub.add_parser("analyze", help="distance curves, bumps, histograms, correlation, monotonicity")
    a.add_argument("--kind", choices=("curves", "bumps", "hist", "corr", "prop2", "embed2d"), required=True)
    a.add_argument("--config", required=True)
    a.add_argument("--encoder", required=True)
    a.add_argument("--encoder-b", default=None)
    a.add_argument("--data", default=None)
    a.add_argument("--episodes", type=int, default=10)
    a.add_argument("--out", required=True)
    a.add_argument("--seed", type=int, default=None)
    a.add_argument("--threads", type=int, default=None)
    a.set_defaults(fn=cmd_analyze)

    r = sub.add_parser("repro", help="run the acceptance suite end-to-end")
    r.add_argument("--suite", default="all")
    r.add_argument("--out", required=True)
    r.add_argument("--workdir", default=None)
    r.add_argument("--threads", type=int, default=None)
    r.set_defaults(fn=cmd_repro)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CLIError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except (DatasetFormatError, CheckpointError, A.AnalysisError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (CLIError, C.ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (FileNotFoundError, OSError, RuntimeError, TrainingDivergedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
