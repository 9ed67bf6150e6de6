"""Model configuration, parameter container and checkpoint I/O.

Checkpoint layout (little-endian)::

    b"APMD"  u32 version  u32 config_len  config JSON (utf-8)
    repeated until EOF:
        u32 name_len  name (utf-8)  u32 rank  u32 dims[rank]  f32 data[prod(dims)]
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

CKPT_MAGIC = b"APMD"
CKPT_VERSION = 1

# Gate column blocks inside lstm_W / lstm_b.
GATE_ORDER = ("input", "forget", "cell", "output")


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    n_mels: int = 40
    d_embed: int = 64
    d_hidden: int = 64
    d_key: int = 64
    kernel_width: int = 5
    n_classes: int = 4

    @property
    def unk_id(self):
        # embeddings carry one extra row past the corpus vocabulary
        return self.vocab_size

    def shapes(self):
        e, h, k, m = self.d_embed, self.d_hidden, self.d_key, self.n_mels
        return {
            "embeddings": (self.vocab_size + 1, e),
            "lstm_W": (e + h, 4 * h),
            "lstm_b": (4 * h,),
            "conv_W": (self.kernel_width, m, k),
            "conv_b": (k,),
            "query_W": (h, k),
            "query_b": (k,),
            "cls_W": (k, self.n_classes),
            "cls_b": (self.n_classes,),
        }

    def fan_in(self, name):
        return {
            "embeddings": self.d_embed,
            "lstm_W": self.d_embed + self.d_hidden,
            "lstm_b": self.d_embed + self.d_hidden,
            "conv_W": self.kernel_width * self.n_mels,
            "conv_b": self.kernel_width * self.n_mels,
            "query_W": self.d_hidden,
            "query_b": self.d_hidden,
            "cls_W": self.d_key,
            "cls_b": self.d_key,
        }[name]


class ModelParams(dict):
    """Ordered ``name -> ndarray`` mapping of every trainable tensor."""

    def __init__(self, config, tensors):
        super().__init__(tensors)
        self.config = config

    @property
    def dtype(self):
        return self["cls_W"].dtype

    def copy(self):
        return ModelParams(self.config, {k: v.copy() for k, v in self.items()})

    def astype(self, dtype):
        return ModelParams(self.config, {k: v.astype(dtype) for k, v in self.items()})

    def zeros_like(self):
        return ModelParams(self.config, {k: np.zeros_like(v) for k, v in self.items()})


def init_params(config, rng, dtype=np.float32):
    """Uniform ``+-1/sqrt(fan_in)`` initialisation from ``rng``."""
    tensors = {}
    for name, shape in config.shapes().items():
        bound = 1.0 / np.sqrt(config.fan_in(name))
        tensors[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return ModelParams(config, tensors)


def load_token_vectors(path, vocabulary, d_embed):
    """Read ``token v1 .. vd`` text lines; returns ``{row index: vector}`` for known tokens.

    Tokens outside ``vocabulary`` are ignored.
    """
    rows = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != d_embed + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected a token and {d_embed} values, got {len(parts) - 1}"
                )
            if parts[0] in vocabulary:
                rows[vocabulary[parts[0]]] = np.array(parts[1:], dtype=np.float64)
    return rows


def save_checkpoint(path, params, vocabulary=None, extra=None):
    meta = {"model": asdict(params.config), "vocabulary": vocabulary or {}}
    if extra:
        meta["extra"] = extra
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC + struct.pack("<II", CKPT_VERSION, len(blob)) + blob)
        for name, arr in params.items():
            enc = name.encode("utf-8")
            fh.write(struct.pack("<I", len(enc)) + enc)
            fh.write(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Return ``(params, vocabulary, extra)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    version, n = struct.unpack_from("<II", data, 4)
    if version != CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 12
    meta = json.loads(data[pos:pos + n].decode("utf-8"))
    pos += n
    config = ModelConfig(**meta["model"])
    tensors = {}
    while pos < len(data):
        (ln,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos:pos + ln].decode("utf-8")
        pos += ln
        (rank,) = struct.unpack_from("<I", data, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}I", data, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos).reshape(dims)
        tensors[name] = arr.astype(np.float32)
        pos += 4 * count
    expected = config.shapes()
    if set(tensors) != set(expected):
        raise ValueError(f"{path}: tensor set mismatch")
    for name, shape in expected.items():
        if tensors[name].shape != tuple(shape):
            raise ValueError(f"{path}: {name} has shape {tensors[name].shape}, expected {shape}")
    params = ModelParams(config, {name: tensors[name] for name in expected})
    return params, meta.get("vocabulary", {}), meta.get("extra")
