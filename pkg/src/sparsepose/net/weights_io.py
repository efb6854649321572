"""Weight file: named f32 tensors with a config header and crc32 trailer."""

import struct
import zlib

import numpy as np

from .model import ModelConfig, ModelWeights, ShapeMismatch, tensor_shapes

MAGIC = b"SPWT"
VERSION = 1


class WeightFileError(ValueError):
    pass


def save_weights(path, weights: ModelWeights) -> None:
    cfg = weights.config
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<H", VERSION)
    buf += struct.pack("<6I", cfg.input_dim, cfg.embed_dim, cfg.hidden_dim,
                       cfg.layers, int(cfg.bidirectional), cfg.output_dim)
    buf += struct.pack("<I", len(weights.tensors))
    for name in sorted(weights.tensors):
        t = weights.tensors[name]
        raw = name.encode()
        buf += struct.pack("<H", len(raw))
        buf += raw
        buf += struct.pack("<B", t.ndim)
        buf += struct.pack(f"<{t.ndim}I", *t.shape)
        buf += np.ascontiguousarray(t, dtype="<f4").tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    with open(path, "wb") as f:
        f.write(buf)


def load_weights(path) -> ModelWeights:
    """Load f32 weights; rejects bad checksums and shape mismatches."""
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 36 or buf[:4] != MAGIC:
        raise WeightFileError("not a weight file")
    (crc,) = struct.unpack("<I", buf[-4:])
    if zlib.crc32(buf[:-4]) != crc:
        raise WeightFileError("weight file checksum mismatch")
    (version,) = struct.unpack("<H", buf[4:6])
    if version != VERSION:
        raise WeightFileError(f"unsupported weight file version {version}")
    vals = struct.unpack("<6I", buf[6:30])
    cfg = ModelConfig(vals[0], vals[1], vals[2], vals[3], bool(vals[4]), vals[5])
    (count,) = struct.unpack("<I", buf[30:34])
    pos = 34
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", buf[pos:pos + 2])
        pos += 2
        name = buf[pos:pos + nlen].decode()
        pos += nlen
        ndim = buf[pos]
        pos += 1
        shape = struct.unpack(f"<{ndim}I", buf[pos:pos + 4 * ndim])
        pos += 4 * ndim
        n = int(np.prod(shape))
        data = np.frombuffer(buf[pos:pos + 4 * n], dtype="<f4")
        if data.size != n:
            raise WeightFileError("truncated tensor data")
        pos += 4 * n
        tensors[name] = data.reshape(shape).astype(np.float32)
    expected = tensor_shapes(cfg)
    if set(tensors) != set(expected):
        raise ShapeMismatch("tensor names do not match the declared config")
    for name, shape in expected.items():
        if tensors[name].shape != shape:
            raise ShapeMismatch(f"{name}: file has {tensors[name].shape}, "
                                f"config requires {shape}")
    return ModelWeights(cfg, tensors)
