"""Strict JSON experiment configs.

Unknown keys are rejected and every violation is reported with its JSON
path. The resolved (defaults applied) config is written beside each
artifact a command produces.
"""

from __future__ import annotations

import json
from pathlib import Path

from .encoder import EncoderConfig
from .objectives import LossConfig, TrainConfig
from .control import MPPIConfig, RWRConfig
from .worlds import OBSERVATION_MODES, world_from_dict


class ConfigError(ValueError):
    pass


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


DEFAULTS: dict = {
    "seed": 0,
    "observation_mode": "raw_state",
    "world": {"type": "point_mass", "dt": 0.05, "max_action": 1.0, "tolerance": 0.05, "obstacles": []},
    "dataset": {
        "kind": "expert",
        "n": 100,
        "n_failure": 0,
        "noise": 0.0,
        "setting": "hard",
        "max_len": 100,
        "gain": 1.0,
        "fixed_goal": None,
        "snap_goal": False,
        "decoy": None,
        "decoy_min_dist": 0.3,
    },
    "encoder": {"hidden_widths": [64, 64], "output_dim": 8, "activation": "relu", "init_seed": None},
    "loss": {
        "gamma": 0.98,
        "n_negatives": 3,
        "l1_coeff": 0.001,
        "eps_norm": 1e-12,
        "goal_selfloop_p": 0.0,
        "tcn_window": 4,
    },
    "train": {
        "objective": "vip",
        "batch_size": 32,
        "learning_rate": 1e-4,
        "batches": 2000,
        "eval_interval": 500,
        "seed": None,
    },
    "mppi": {
        "horizon": 12,
        "n_samples": 32,
        "sigma": 0.4,
        "temperature": 0.05,
        "warm_start": True,
        "episode_horizon": 50,
        "setting": "easy",
        "snap_goal": False,
    },
    "rwr": {
        "tau": 0.1,
        "learning_rate": 0.001,
        "batch_size": 32,
        "steps": 20000,
        "weight_clip_log": 10.0,
        "hidden": [256, 256],
        "eval_episodes": 100,
        "eval_horizon": 60,
    },
    "analysis": {"frame_cap": 50, "bins": 21, "normalize": True},
}

_WORLD_KEYS = {
    "point_mass": {"type", "dt", "max_action", "tolerance", "obstacles"},
    "grid": {"type", "width", "height", "blocked"},
}


def _check(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _merge_section(path: str, given: dict, defaults: dict) -> dict:
    _check(isinstance(given, dict), path, f"expected an object, got {type(given).__name__}")
    for key in given:
        _check(key in defaults, f"{path}.{key}", "unknown key")
    merged = dict(defaults)
    merged.update(given)
    return merged


def validate_config(raw: dict) -> dict:
    """Validate and resolve an experiment config dict; raises ConfigError
    with the offending JSON path."""
    _check(isinstance(raw, dict), "$", "config must be a JSON object")
    for key in raw:
        _check(key in DEFAULTS, f"$.{key}", "unknown key")
    cfg = {k: v for k, v in DEFAULTS.items() if not isinstance(v, dict)}
    cfg.update({k: v for k, v in raw.items() if not isinstance(DEFAULTS[k], dict)})

    _check(_is_int(cfg["seed"]) and cfg["seed"] >= 0, "$.seed", "expected a nonnegative integer")
    _check(cfg["observation_mode"] in OBSERVATION_MODES, "$.observation_mode", f"expected one of {OBSERVATION_MODES}")

    world_raw = raw.get("world", DEFAULTS["world"])
    _check(isinstance(world_raw, dict), "$.world", "expected an object")
    wtype = world_raw.get("type")
    _check(wtype in _WORLD_KEYS, "$.world.type", "expected 'point_mass' or 'grid'")
    for key in world_raw:
        _check(key in _WORLD_KEYS[wtype], f"$.world.{key}", "unknown key")
    if wtype == "point_mass":
        world = _merge_section("$.world", world_raw, DEFAULTS["world"])
        for k in ("dt", "max_action", "tolerance"):
            _check(_is_num(world[k]) and world[k] > 0, f"$.world.{k}", "expected a positive number")
        _check(isinstance(world["obstacles"], list), "$.world.obstacles", "expected a list")
        for i, o in enumerate(world["obstacles"]):
            _check(
                isinstance(o, list) and len(o) == 4 and all(_is_num(v) for v in o),
                f"$.world.obstacles[{i}]",
                "expected [x0, y0, x1, y1]",
            )
    else:
        world = dict(world_raw)
        for k in ("width", "height"):
            _check(_is_int(world.get(k)) and world[k] >= 1, f"$.world.{k}", "expected a positive integer")
        world.setdefault("blocked", [])
        _check(isinstance(world["blocked"], list), "$.world.blocked", "expected a list")
        for i, c in enumerate(world["blocked"]):
            _check(
                isinstance(c, list) and len(c) == 2 and all(_is_int(v) for v in c),
                f"$.world.blocked[{i}]",
                "expected [row, col]",
            )
    cfg["world"] = world

    ds = _merge_section("$.dataset", raw.get("dataset", {}), DEFAULTS["dataset"])
    _check(ds["kind"] in ("expert", "mixed"), "$.dataset.kind", "expected 'expert' or 'mixed'")
    _check(_is_int(ds["n"]) and ds["n"] >= 1, "$.dataset.n", "expected an integer >= 1")
    _check(_is_int(ds["n_failure"]) and ds["n_failure"] >= 0, "$.dataset.n_failure", "expected an integer >= 0")
    _check(_is_num(ds["noise"]) and ds["noise"] >= 0, "$.dataset.noise", "expected a number >= 0")
    _check(ds["setting"] in ("easy", "hard"), "$.dataset.setting", "expected 'easy' or 'hard'")
    _check(_is_int(ds["max_len"]) and ds["max_len"] >= 2, "$.dataset.max_len", "expected an integer >= 2")
    _check(_is_num(ds["gain"]) and ds["gain"] > 0, "$.dataset.gain", "expected a number > 0")
    if ds["fixed_goal"] is not None:
        _check(
            isinstance(ds["fixed_goal"], list) and len(ds["fixed_goal"]) == 2 and all(_is_num(v) for v in ds["fixed_goal"]),
            "$.dataset.fixed_goal",
            "expected [x, y] or null",
        )
    _check(isinstance(ds["snap_goal"], bool), "$.dataset.snap_goal", "expected a boolean")
    if ds["decoy"] is not None:
        _check(
            isinstance(ds["decoy"], list) and len(ds["decoy"]) == 2 and all(_is_num(v) for v in ds["decoy"]),
            "$.dataset.decoy",
            "expected [x, y] or null",
        )
    _check(_is_num(ds["decoy_min_dist"]) and ds["decoy_min_dist"] >= 0, "$.dataset.decoy_min_dist", "expected a number >= 0")
    _check(ds["kind"] == "mixed" or ds["n_failure"] == 0, "$.dataset.n_failure", "only valid for kind 'mixed'")
    cfg["dataset"] = ds

    enc = _merge_section("$.encoder", raw.get("encoder", {}), DEFAULTS["encoder"])
    _check(
        isinstance(enc["hidden_widths"], list) and all(_is_int(w) and w >= 1 for w in enc["hidden_widths"]),
        "$.encoder.hidden_widths",
        "expected a list of integers >= 1",
    )
    _check(_is_int(enc["output_dim"]) and enc["output_dim"] >= 1, "$.encoder.output_dim", "expected an integer >= 1")
    _check(enc["activation"] in ("relu", "tanh"), "$.encoder.activation", "expected 'relu' or 'tanh'")
    _check(
        enc["init_seed"] is None or (_is_int(enc["init_seed"]) and enc["init_seed"] >= 0),
        "$.encoder.init_seed",
        "expected a nonnegative integer or null",
    )
    cfg["encoder"] = enc

    loss = _merge_section("$.loss", raw.get("loss", {}), DEFAULTS["loss"])
    _check(_is_num(loss["gamma"]) and 0 < loss["gamma"] < 1, "$.loss.gamma", "expected a number in (0, 1)")
    _check(_is_int(loss["n_negatives"]) and loss["n_negatives"] >= 0, "$.loss.n_negatives", "expected an integer >= 0")
    _check(_is_num(loss["l1_coeff"]) and loss["l1_coeff"] >= 0, "$.loss.l1_coeff", "expected a number >= 0")
    _check(_is_num(loss["eps_norm"]) and loss["eps_norm"] > 0, "$.loss.eps_norm", "expected a number > 0")
    _check(
        _is_num(loss["goal_selfloop_p"]) and 0 <= loss["goal_selfloop_p"] <= 1,
        "$.loss.goal_selfloop_p",
        "expected a number in [0, 1]",
    )
    _check(_is_int(loss["tcn_window"]) and loss["tcn_window"] >= 1, "$.loss.tcn_window", "expected an integer >= 1")
    cfg["loss"] = loss

    tr = _merge_section("$.train", raw.get("train", {}), DEFAULTS["train"])
    _check(tr["objective"] in ("vip", "tcn", "lstd"), "$.train.objective", "expected 'vip', 'tcn' or 'lstd'")
    _check(_is_int(tr["batch_size"]) and tr["batch_size"] >= 1, "$.train.batch_size", "expected an integer >= 1")
    _check(_is_num(tr["learning_rate"]) and tr["learning_rate"] > 0, "$.train.learning_rate", "expected a number > 0")
    _check(_is_int(tr["batches"]) and tr["batches"] >= 1, "$.train.batches", "expected an integer >= 1")
    _check(_is_int(tr["eval_interval"]) and tr["eval_interval"] >= 0, "$.train.eval_interval", "expected an integer >= 0")
    _check(tr["seed"] is None or (_is_int(tr["seed"]) and tr["seed"] >= 0), "$.train.seed", "expected an integer or null")
    cfg["train"] = tr

    mp = _merge_section("$.mppi", raw.get("mppi", {}), DEFAULTS["mppi"])
    _check(_is_int(mp["horizon"]) and mp["horizon"] >= 1, "$.mppi.horizon", "expected an integer >= 1")
    _check(_is_int(mp["n_samples"]) and mp["n_samples"] >= 2, "$.mppi.n_samples", "expected an integer >= 2")
    _check(_is_num(mp["sigma"]) and mp["sigma"] > 0, "$.mppi.sigma", "expected a number > 0")
    _check(_is_num(mp["temperature"]) and mp["temperature"] > 0, "$.mppi.temperature", "expected a number > 0")
    _check(isinstance(mp["warm_start"], bool), "$.mppi.warm_start", "expected a boolean")
    _check(_is_int(mp["episode_horizon"]) and mp["episode_horizon"] >= 1, "$.mppi.episode_horizon", "expected an integer >= 1")
    _check(mp["setting"] in ("easy", "hard"), "$.mppi.setting", "expected 'easy' or 'hard'")
    _check(isinstance(mp["snap_goal"], bool), "$.mppi.snap_goal", "expected a boolean")
    cfg["mppi"] = mp

    rw = _merge_section("$.rwr", raw.get("rwr", {}), DEFAULTS["rwr"])
    _check(_is_num(rw["tau"]) and rw["tau"] >= 0, "$.rwr.tau", "expected a number >= 0")
    _check(_is_num(rw["learning_rate"]) and rw["learning_rate"] > 0, "$.rwr.learning_rate", "expected a number > 0")
    _check(_is_int(rw["batch_size"]) and rw["batch_size"] >= 1, "$.rwr.batch_size", "expected an integer >= 1")
    _check(_is_int(rw["steps"]) and rw["steps"] >= 1, "$.rwr.steps", "expected an integer >= 1")
    _check(_is_num(rw["weight_clip_log"]) and rw["weight_clip_log"] > 0, "$.rwr.weight_clip_log", "expected a number > 0")
    _check(
        isinstance(rw["hidden"], list) and all(_is_int(w) and w >= 1 for w in rw["hidden"]),
        "$.rwr.hidden",
        "expected a list of integers >= 1",
    )
    _check(_is_int(rw["eval_episodes"]) and rw["eval_episodes"] >= 1, "$.rwr.eval_episodes", "expected an integer >= 1")
    _check(_is_int(rw["eval_horizon"]) and rw["eval_horizon"] >= 1, "$.rwr.eval_horizon", "expected an integer >= 1")
    cfg["rwr"] = rw

    an = _merge_section("$.analysis", raw.get("analysis", {}), DEFAULTS["analysis"])
    _check(
        an["frame_cap"] is None or (_is_int(an["frame_cap"]) and an["frame_cap"] >= 2),
        "$.analysis.frame_cap",
        "expected an integer >= 2 or null",
    )
    _check(_is_int(an["bins"]) and an["bins"] >= 1, "$.analysis.bins", "expected an integer >= 1")
    _check(isinstance(an["normalize"], bool), "$.analysis.normalize", "expected a boolean")
    cfg["analysis"] = an

    return cfg


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    return validate_config(raw)


def write_resolved_config(cfg: dict, path) -> None:
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def build_world(cfg: dict):
    return world_from_dict(cfg["world"])


def build_encoder_config(cfg: dict, input_dim: int) -> EncoderConfig:
    enc = cfg["encoder"]
    seed = enc["init_seed"] if enc["init_seed"] is not None else cfg["seed"]
    return EncoderConfig(
        input_dim=input_dim,
        hidden_widths=tuple(enc["hidden_widths"]),
        output_dim=enc["output_dim"],
        activation=enc["activation"],
        init_seed=seed,
    )


def build_loss_config(cfg: dict) -> LossConfig:
    c = cfg["loss"]
    return LossConfig(
        gamma=c["gamma"],
        n_negatives=c["n_negatives"],
        l1_coeff=c["l1_coeff"],
        eps_norm=c["eps_norm"],
        goal_selfloop_p=c["goal_selfloop_p"],
        tcn_window=c["tcn_window"],
    )


def build_train_config(cfg: dict, objective: str | None = None, seed: int | None = None) -> TrainConfig:
    c = cfg["train"]
    resolved_seed = seed if seed is not None else (c["seed"] if c["seed"] is not None else cfg["seed"])
    return TrainConfig(
        objective=objective or c["objective"],
        batch_size=c["batch_size"],
        learning_rate=c["learning_rate"],
        batches=c["batches"],
        eval_interval=c["eval_interval"],
        seed=resolved_seed,
    )


def build_mppi_config(cfg: dict) -> MPPIConfig:
    c = cfg["mppi"]
    return MPPIConfig(
        horizon=c["horizon"],
        n_samples=c["n_samples"],
        sigma=c["sigma"],
        temperature=c["temperature"],
        warm_start=c["warm_start"],
        episode_horizon=c["episode_horizon"],
    )


def build_rwr_config(cfg: dict, tau: float | None = None) -> RWRConfig:
    c = cfg["rwr"]
    return RWRConfig(
        tau=c["tau"] if tau is None else tau,
        learning_rate=c["learning_rate"],
        batch_size=c["batch_size"],
        steps=c["steps"],
        weight_clip_log=c["weight_clip_log"],
        hidden=tuple(c["hidden"]),
    )
