"""Reference binary 1-D CNN inference.

Ground truth for equivalence testing. Activations are the numbers {1, 0}
(an inactive wordline contributes no current), weights +-1, and an output is
1 iff its pre-activation sum is >= 0.
"""

from __future__ import annotations

import numpy as np

from .model import Conv1d, Dense, ModelSpec, Pool


def binarize(s) -> np.ndarray:
    return (np.asarray(s) >= 0).astype(np.uint8)


def ref_conv1d(x, weights, stride: int = 1, bias=None) -> np.ndarray:
    """x: (L, C_in) bits; weights: (C_out, K, C_in) +-1 -> (n_out, C_out) bits."""
    x = np.asarray(x, dtype=np.int64)
    w = np.asarray(weights, dtype=np.int64)
    c_out, k, c_in = w.shape
    if x.ndim != 2 or x.shape[1] != c_in:
        raise ValueError(f"input shape {x.shape} does not match {c_in} input channels")
    if x.shape[0] < k:
        raise ValueError(f"input length {x.shape[0]} shorter than kernel {k}")
    n_out = (x.shape[0] - k) // stride + 1
    windows = np.stack([x[t * stride:t * stride + k].ravel() for t in range(n_out)])
    s = windows @ w.reshape(c_out, k * c_in).T
    if bias is not None:
        s = s + np.asarray(bias, dtype=np.int64)
    return binarize(s)


def ref_pool(x, window: int) -> np.ndarray:
    """Non-overlapping max pool along positions; a ragged tail pools what remains."""
    x = np.asarray(x, dtype=np.uint8)
    n = -(-x.shape[0] // window)
    return np.stack([x[i * window:(i + 1) * window].max(axis=0) for i in range(n)])


def dense_as_conv_weights(layer: Dense, channels: int) -> np.ndarray:
    length = layer.in_features // channels
    return np.asarray(layer.weights).reshape(layer.out_features, length, channels)


def ref_infer(model: ModelSpec, x) -> list[np.ndarray]:
    """Run every layer; returns one (positions, channels) tensor per layer."""
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != (model.input_len, model.input_channels):
        raise ValueError(f"input shape {x.shape} != ({model.input_len}, {model.input_channels})")
    outs = []
    for layer in model.layers:
        if isinstance(layer, Conv1d):
            x = ref_conv1d(x, layer.weights, layer.stride, layer.bias)
            if layer.pool and layer.pool > 1:
                x = ref_pool(x, layer.pool)
        elif isinstance(layer, Pool):
            x = ref_pool(x, layer.window)
        elif isinstance(layer, Dense):
            if layer.in_features != x.size:
                raise ValueError(f"dense expects {layer.in_features} inputs, got {x.size}")
            x = ref_conv1d(x, dense_as_conv_weights(layer, x.shape[1]), 1, layer.bias)
        else:
            raise TypeError(f"unknown layer {layer!r}")
        outs.append(x)
    return outs


def count_macs(model: ModelSpec) -> int:
    """Multiply-accumulates per inference (bias not counted)."""
    length, macs = model.input_len, 0
    for layer in model.layers:
        if isinstance(layer, Conv1d):
            n = (length - layer.k) // layer.stride + 1
            macs += n * layer.n_weights
            length = -(-n // layer.pool) if layer.pool else n
        elif isinstance(layer, Pool):
            length = -(-length // layer.window)
        elif isinstance(layer, Dense):
            macs += layer.n_weights
            length = 1
    return macs
