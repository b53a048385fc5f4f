"""MLP embedding map with deterministic init and binary checkpoints.

The encoder maps observation vectors to K-dim embeddings. Frozen encoders
are pure and thread-safe; training builds tape graphs over the same weight
arrays via :func:`embed_batch_nodes`.

Checkpoint format (``*.venc``): magic ``VIPENC1\\n``, a little-endian u32
length-prefixed JSON header (config + layer shapes), then the weight blob
as little-endian float64 in layer order (W1, b1, W2, b2, ...), row-major.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from . import gradcore as gc

MAGIC = b"VIPENC1\n"

ACTIVATIONS = ("relu", "tanh")


class CheckpointError(ValueError):
    """Base class for checkpoint format errors."""

    code = "checkpoint_error"


class BadMagicError(CheckpointError):
    code = "bad_magic"


class TruncatedError(CheckpointError):
    code = "truncated"


class SizeMismatchError(CheckpointError):
    code = "size_mismatch"


@dataclass(frozen=True)
class EncoderConfig:
    input_dim: int
    hidden_widths: tuple[int, ...]
    output_dim: int
    activation: str = "relu"
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1 or self.output_dim < 1 or any(w < 1 for w in self.hidden_widths):
            raise ValueError("EncoderConfig: all dims must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"EncoderConfig: activation must be one of {ACTIVATIONS}")

    def layer_dims(self) -> list[tuple[int, int]]:
        """(out, in) shape of each weight matrix."""
        dims = [self.input_dim, *self.hidden_widths, self.output_dim]
        return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_widths": list(self.hidden_widths),
            "output_dim": self.output_dim,
            "activation": self.activation,
            "init_seed": int(self.init_seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(
            input_dim=int(d["input_dim"]),
            hidden_widths=tuple(int(w) for w in d["hidden_widths"]),
            output_dim=int(d["output_dim"]),
            activation=str(d["activation"]),
            init_seed=int(d["init_seed"]),
        )


class Encoder:
    """config + per-layer (W, b) float64 arrays."""

    def __init__(self, config: EncoderConfig, weights: list[tuple[np.ndarray, np.ndarray]]):
        expected = config.layer_dims()
        if len(weights) != len(expected):
            raise ValueError(f"Encoder: {len(weights)} layers, config expects {len(expected)}")
        for (w, b), (out, inp) in zip(weights, expected):
            if w.shape != (out, inp) or b.shape != (out,):
                raise ValueError(f"Encoder: layer shape {w.shape}/{b.shape} inconsistent with config {(out, inp)}")
        self.config = config
        self.weights = weights

    @property
    def output_dim(self) -> int:
        return self.config.output_dim

    def params(self) -> dict[str, np.ndarray]:
        """Named views of the live weight arrays (shared, not copied)."""
        out = {}
        for i, (w, b) in enumerate(self.weights):
            out[f"layer{i}.W"] = w
            out[f"layer{i}.b"] = b
        return out

    def embed_batch(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if obs.ndim != 2 or obs.shape[1] != self.config.input_dim:
            raise ValueError(
                f"embed_batch: observations have dim {obs.shape[1] if obs.ndim == 2 else obs.shape}, "
                f"encoder expects {self.config.input_dim}"
            )
        h = obs
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(self.weights):
            h = h @ w.T + b
            if i < last:
                h = np.maximum(h, 0.0) if self.config.activation == "relu" else np.tanh(h)
        return h

    def embed(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if obs.ndim != 1 or obs.shape[0] != self.config.input_dim:
            raise ValueError(f"embed: observation dim {obs.shape} != encoder input dim {self.config.input_dim}")
        return self.embed_batch(obs[None, :])[0]

    def copy(self, init_seed: int | None = None) -> "Encoder":
        cfg = self.config if init_seed is None else replace(self.config, init_seed=init_seed)
        return Encoder(cfg, [(w.copy(), b.copy()) for w, b in self.weights])


def init_encoder(config: EncoderConfig) -> Encoder:
    """Kaiming fan-in scaling for relu, Xavier for tanh; deterministic per seed."""
    rng = np.random.default_rng(config.init_seed)
    weights = []
    for out, inp in config.layer_dims():
        if config.activation == "relu":
            std = np.sqrt(2.0 / inp)
        else:
            std = np.sqrt(2.0 / (inp + out))
        w = rng.normal(0.0, std, size=(out, inp))
        b = np.zeros(out)
        weights.append((w, b))
    return Encoder(config, weights)


def identity_encoder(dim: int) -> Encoder:
    """Single linear layer with W = I, b = 0: the embedding is the observation."""
    cfg = EncoderConfig(input_dim=dim, hidden_widths=(), output_dim=dim)
    return Encoder(cfg, [(np.eye(dim), np.zeros(dim))])


def embed_batch_nodes(encoder: Encoder, obs: np.ndarray, params: dict[str, gc.DiffNode]) -> gc.DiffNode:
    """Tape forward of a (B, D) observation batch through named weight leaves."""
    h = gc.constant(np.asarray(obs, dtype=np.float64))
    last = len(encoder.weights) - 1
    for i in range(len(encoder.weights)):
        h = gc.add(gc.matvec(params[f"layer{i}.W"], h), params[f"layer{i}.b"])
        if i < last:
            h = gc.relu(h) if encoder.config.activation == "relu" else gc.tanh(h)
    return h


def make_param_nodes(encoder: Encoder) -> dict[str, gc.DiffNode]:
    return {name: gc.leaf(arr, name) for name, arr in encoder.params().items()}


def save_encoder(encoder: Encoder, path) -> None:
    header = {
        "config": encoder.config.to_dict(),
        "layer_shapes": [[int(w.shape[0]), int(w.shape[1])] for w, _ in encoder.weights],
        "dtype": "<f8",
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(
        np.ascontiguousarray(arr, dtype="<f8").tobytes() for w, b in encoder.weights for arr in (w, b)
    )
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        f.write(blob)


def load_encoder(path) -> Encoder:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"{path}: bad magic; not an encoder checkpoint")
    off = len(MAGIC)
    if len(data) < off + 4:
        raise TruncatedError(f"{path}: truncated before header length")
    (hlen,) = struct.unpack_from("<I", data, off)
    off += 4
    if len(data) < off + hlen:
        raise TruncatedError(f"{path}: truncated header")
    try:
        header = json.loads(data[off : off + hlen].decode("utf-8"))
        config = EncoderConfig.from_dict(header["config"])
        shapes = [tuple(s) for s in header["layer_shapes"]]
    except (ValueError, KeyError) as e:
        raise SizeMismatchError(f"{path}: malformed header ({e})") from e
    off += hlen

    if shapes != [tuple(s) for s in config.layer_dims()]:
        raise SizeMismatchError(f"{path}: header layer shapes {shapes} disagree with config dims {config.layer_dims()}")
    expected = sum(out * inp + out for out, inp in shapes) * 8
    remaining = len(data) - off
    if remaining < expected:
        raise TruncatedError(f"{path}: weight blob truncated ({remaining} bytes, expected {expected})")
    if remaining > expected:
        raise SizeMismatchError(f"{path}: weight blob size {remaining} disagrees with header ({expected})")

    weights = []
    for out, inp in shapes:
        w = np.frombuffer(data, dtype="<f8", count=out * inp, offset=off).reshape(out, inp).copy()
        off += out * inp * 8
        b = np.frombuffer(data, dtype="<f8", count=out, offset=off).copy()
        off += out * 8
        weights.append((w, b))
    return Encoder(config, weights)
