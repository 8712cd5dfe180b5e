"""Binary 1-D CNN model description.

Weights are +-1, activations {1, 0}. Conv weights are indexed
``[out_channel, tap, in_channel]``; dense weights ``[out, t * C + c]`` where
the flattened input is position-major.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np


@dataclass
class Conv1d:
    c_in: int
    c_out: int
    k: int
    stride: int = 1
    pool: Optional[int] = None
    bias: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    @property
    def n_weights(self) -> int:
        return self.c_in * self.c_out * self.k


@dataclass
class Pool:
    window: int


@dataclass
class Dense:
    in_features: int
    out_features: int
    bias: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    @property
    def n_weights(self) -> int:
        return self.in_features * self.out_features


Layer = Union[Conv1d, Pool, Dense]


@dataclass
class ModelSpec:
    input_len: int
    input_channels: int
    layers: list = field(default_factory=list)

    @property
    def n_weights(self) -> int:
        return sum(getattr(l, "n_weights", 0) for l in self.layers)

    def randomize(self, seed: int = 0) -> "ModelSpec":
        """Fill every missing weight tensor with seeded random +-1 values."""
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            if isinstance(layer, Conv1d) and layer.weights is None:
                layer.weights = rng.integers(0, 2, (layer.c_out, layer.k, layer.c_in)).astype(np.int8) * 2 - 1
            elif isinstance(layer, Dense) and layer.weights is None:
                layer.weights = rng.integers(0, 2, (layer.out_features, layer.in_features)).astype(np.int8) * 2 - 1
        return self


# -- model description file + sign-bit sidecar -------------------------------
#
#   [model]
#   input_len = 64
#   input_channels = 16
#
#   [layer.0]
#   type = conv
#   c_in = 16
#   c_out = 32
#   k = 3
#   stride = 1
#   pool = 2          ; optional fused max pool
#   bias = 1, -2, ... ; optional, one integer per output channel
#
# Sidecar: all weight tensors concatenated in layer order, each flattened
# C-order ([out, tap, in] for conv, [out, in] for dense); bit 1 = +1,
# bit 0 = -1; packed MSB-first, zero padded to a whole byte at the end.

def _weight_layers(model: ModelSpec):
    return [l for l in model.layers if isinstance(l, (Conv1d, Dense))]


def _weight_shape(layer):
    if isinstance(layer, Conv1d):
        return (layer.c_out, layer.k, layer.c_in)
    return (layer.out_features, layer.in_features)


def save_model(model: ModelSpec, path, weights_path) -> None:
    cp = configparser.ConfigParser()
    cp["model"] = {"input_len": str(model.input_len),
                   "input_channels": str(model.input_channels)}
    for i, layer in enumerate(model.layers):
        sec = {}
        if isinstance(layer, Conv1d):
            sec.update(type="conv", c_in=layer.c_in, c_out=layer.c_out, k=layer.k,
                       stride=layer.stride)
            if layer.pool:
                sec["pool"] = layer.pool
        elif isinstance(layer, Pool):
            sec.update(type="pool", window=layer.window)
        elif isinstance(layer, Dense):
            sec.update(type="dense", in_features=layer.in_features,
                       out_features=layer.out_features)
        bias = getattr(layer, "bias", None)
        if bias is not None:
            sec["bias"] = ", ".join(str(int(b)) for b in bias)
        cp[f"layer.{i}"] = {k: str(v) for k, v in sec.items()}
    with open(path, "w") as f:
        cp.write(f)
    bits = [(np.asarray(l.weights) > 0).astype(np.uint8).ravel() for l in _weight_layers(model)]
    allbits = np.concatenate(bits) if bits else np.zeros(0, dtype=np.uint8)
    with open(weights_path, "wb") as f:
        f.write(np.packbits(allbits).tobytes())


def load_model(path, weights_path=None) -> ModelSpec:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(path)
    m = cp["model"]
    model = ModelSpec(input_len=m.getint("input_len"),
                      input_channels=m.getint("input_channels"))
    secs = sorted((s for s in cp.sections() if s.startswith("layer.")),
                  key=lambda s: int(s.split(".", 1)[1]))
    for s in secs:
        sec = cp[s]
        kind = sec.get("type")
        bias = sec.get("bias")
        bias = np.array([int(b) for b in bias.split(",")], dtype=np.int64) if bias else None
        if kind == "conv":
            model.layers.append(Conv1d(sec.getint("c_in"), sec.getint("c_out"), sec.getint("k"),
                                       stride=sec.getint("stride", 1),
                                       pool=sec.getint("pool", None), bias=bias))
        elif kind == "pool":
            model.layers.append(Pool(sec.getint("window")))
        elif kind == "dense":
            model.layers.append(Dense(sec.getint("in_features"), sec.getint("out_features"),
                                      bias=bias))
        else:
            raise ValueError(f"{path} [{s}]: unknown layer type {kind!r}")
    if weights_path is not None:
        layers = _weight_layers(model)
        total = sum(int(np.prod(_weight_shape(l))) for l in layers)
        raw = np.fromfile(weights_path, dtype=np.uint8)
        if raw.size != -(-total // 8):
            raise ValueError(f"{weights_path}: expected {-(-total // 8)} bytes, got {raw.size}")
        bits = np.unpackbits(raw)[:total].astype(np.int8)
        off = 0
        for l in layers:
            shape = _weight_shape(l)
            n = int(np.prod(shape))
            l.weights = (bits[off:off + n] * 2 - 1).reshape(shape)
            off += n
    return model


def save_bits(path, bits) -> None:
    """Packed (positions, channels) input bits, MSB-first, position-major."""
    bits = np.asarray(bits, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(np.packbits(bits.ravel()).tobytes())


def load_bits(path, positions: int, channels: int) -> np.ndarray:
    raw = np.fromfile(path, dtype=np.uint8)
    n = positions * channels
    if raw.size != -(-n // 8):
        raise ValueError(f"{path}: expected {-(-n // 8)} bytes for {positions}x{channels} bits, "
                         f"got {raw.size}")
    return np.unpackbits(raw)[:n].reshape(positions, channels)
