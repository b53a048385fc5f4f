import numpy as np
import pytest

from viplab.encoder import (
    BadMagicError,
    Encoder,
    EncoderConfig,
    SizeMismatchError,
    TruncatedError,
    identity_encoder,
    init_encoder,
    load_encoder,
    save_encoder,
)


def test_config_roundtrip_exact():
    cfg = EncoderConfig(7, (32, 16), 3, "tanh", 99)
    assert EncoderConfig.from_dict(cfg.to_dict()) == cfg


def test_config_rejects_bad_dims():
    with pytest.raises(ValueError):
        EncoderConfig(0, (4,), 2)
    with pytest.raises(ValueError):
        EncoderConfig(2, (4,), 2, activation="gelu")


def test_init_deterministic_per_seed():
    cfg = EncoderConfig(4, (8, 8), 3, "relu", 123)
    a, b = init_encoder(cfg), init_encoder(cfg)
    for (wa, ba), (wb, bb) in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
        assert np.array_equal(ba, bb)


def test_degenerate_config_single_linear_layer():
    enc = init_encoder(EncoderConfig(2, (), 2, "relu", 0))
    assert len(enc.weights) == 1
    assert enc.weights[0][0].shape == (2, 2)
    assert enc.weights[0][1].shape == (2,)


def test_zero_weights_zero_embedding():
    cfg = EncoderConfig(3, (4,), 2)
    enc = Encoder(cfg, [(np.zeros((4, 3)), np.zeros(4)), (np.zeros((2, 4)), np.zeros(2))])
    assert np.array_equal(enc.embed(np.array([1.0, -2.0, 3.0])), np.zeros(2))


def test_embed_batch_matches_rowwise_oracle(small_encoder):
    # independent oracle: per-row forward with explicit W @ x loops
    def embed_row(enc, x):
        h = x
        for i, (w, b) in enumerate(enc.weights):
            h = w @ h + b
            if i < len(enc.weights) - 1:
                h = np.maximum(h, 0.0) if enc.config.activation == "relu" else np.tanh(h)
        return h

    rng = np.random.default_rng(5)
    obs = rng.normal(size=(9, 3))
    batch = small_encoder.embed_batch(obs)
    for i in range(len(obs)):
        oracle = embed_row(small_encoder, obs[i])
        assert np.allclose(batch[i], oracle, rtol=1e-12, atol=1e-14)
        assert np.allclose(batch[i], small_encoder.embed(obs[i]), rtol=1e-12, atol=1e-14)


def test_embed_dim_mismatch_errors(small_encoder):
    with pytest.raises(ValueError):
        small_encoder.embed(np.zeros(5))
    with pytest.raises(ValueError):
        small_encoder.embed_batch(np.zeros((2, 5)))


def test_embeddings_finite_for_finite_inputs(small_encoder):
    rng = np.random.default_rng(8)
    obs = rng.normal(scale=50.0, size=(20, 3))
    assert np.all(np.isfinite(small_encoder.embed_batch(obs)))


def test_identity_encoder_is_identity():
    enc = identity_encoder(4)
    rng = np.random.default_rng(2)
    x = rng.normal(size=4)
    assert np.array_equal(enc.embed(x), x)


def test_save_load_roundtrip_bit_exact(tmp_path, small_encoder):
    path = tmp_path / "enc.venc"
    save_encoder(small_encoder, path)
    loaded = load_encoder(path)
    rng = np.random.default_rng(11)
    obs = rng.normal(size=(100, 3))
    assert np.array_equal(small_encoder.embed_batch(obs), loaded.embed_batch(obs))

    again = tmp_path / "enc2.venc"
    save_encoder(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_corrupt_magic_raises_bad_magic(tmp_path, small_encoder):
    path = tmp_path / "enc.venc"
    save_encoder(small_encoder, path)
    data = bytearray(path.read_bytes())
    data[:4] = b"XXXX"
    path.write_bytes(bytes(data))
    with pytest.raises(BadMagicError):
        load_encoder(path)


def test_truncated_blob_raises_truncated(tmp_path, small_encoder):
    path = tmp_path / "enc.venc"
    save_encoder(small_encoder, path)
    data = path.read_bytes()
    path.write_bytes(data[:-16])
    with pytest.raises(TruncatedError):
        load_encoder(path)


def test_header_dim_mismatch_raises_size_mismatch(tmp_path, small_encoder):
    import json
    import struct

    path = tmp_path / "enc.venc"
    save_encoder(small_encoder, path)
    data = path.read_bytes()
    magic, rest = data[:8], data[8:]
    (hlen,) = struct.unpack_from("<I", rest, 0)
    header = json.loads(rest[4 : 4 + hlen].decode())
    header["config"]["output_dim"] = 9  # disagrees with layer shapes and blob
    hb = json.dumps(header, sort_keys=True).encode()
    path.write_bytes(magic + struct.pack("<I", len(hb)) + hb + rest[4 + hlen :])
    with pytest.raises(SizeMismatchError):
        load_encoder(path)


def test_extra_blob_bytes_raise_size_mismatch(tmp_path, small_encoder):
    path = tmp_path / "enc.venc"
    save_encoder(small_encoder, path)
    with open(path, "ab") as f:
        f.write(b"\x00" * 8)
    with pytest.raises(SizeMismatchError):
        load_encoder(path)


def test_frozen_encoder_thread_safe(small_encoder):
    from concurrent.futures import ThreadPoolExecutor

    rng = np.random.default_rng(21)
    obs = rng.normal(size=(64, 3))
    expected = small_encoder.embed_batch(obs)
    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(lambda i: small_encoder.embed_batch(obs), range(16)))
    for r in results:
        assert np.array_equal(r, expected)
