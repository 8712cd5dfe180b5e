"""Map binary 1-D CNN models onto the CIM macro and emit a program.

Layout rules:

* Output channel ``q`` of a layer owns bitline pair ``pair_base + q``. Its
  column holds the ``K * C_in`` weights top-down, tap-major then channel
  (the line-buffer fill order), followed by optional bias rows driven by
  constant-1 inputs.
* Layers are placed greedily in execution order with a skyline first-fit
  over the 512 pair columns. Layers that do not fit live in the weight SRAM
  as full macro-row images and are copied in by a WREP right before they
  run, over the row band whose occupants were needed least recently.
* Feature maps alternate between the four banks; a map larger than one bank
  spans an aligned bank pair.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import isa
from .cim import N_BL, N_PAIRS, N_SA, N_WL, twm_encode
from .memory import BANK_WORDS, N_BANKS, WSRAM_ROWS, Cursor, words_per_position
from .model import Conv1d, Dense, ModelSpec, Pool
from .oracle import dense_as_conv_weights

MAX_MAP_WORDS = 2 * BANK_WORDS
EFFECTIVE_CAPACITY = N_WL * N_PAIRS


class ValidationError(ValueError):
    def __init__(self, layer: Optional[int], message: str):
        self.layer = layer
        where = "model" if layer is None else f"layer {layer}"
        super().__init__(f"{where}: {message}")


class CompileError(ValueError):
    pass


@dataclass
class LoweredLayer:
    """A validated layer: either a convolution or a standalone pool."""

    kind: str                      # "conv" or "pool"
    model_layer: int
    c_in: int
    c_out: int
    in_len: int
    n_out: int                     # positions entering the pooling-write block
    out_len: int                   # positions written after pooling
    k: int = 1
    stride: int = 1
    pool: int = 1
    weights: Optional[np.ndarray] = None     # (C_out, K, C_in)
    bias: Optional[np.ndarray] = None

    @property
    def bias_rows(self) -> int:
        return 0 if self.bias is None else int(np.abs(self.bias).max(initial=0))

    @property
    def wl_count(self) -> int:
        return self.k * self.c_in + self.bias_rows

    @property
    def n_weights(self) -> int:
        return self.k * self.c_in * self.c_out if self.kind == "conv" else 0


def validate(model: ModelSpec) -> list[LoweredLayer]:
    """Check every mapping constraint; lower Dense to a full-length Conv1d."""
    if not model.layers:
        raise ValidationError(None, "empty layer list")
    if model.input_len < 1 or model.input_channels < 1:
        raise ValidationError(None, "input_len and input_channels must be >= 1")
    length, channels = model.input_len, model.input_channels
    out = []
    for i, layer in enumerate(model.layers):
        if isinstance(layer, Pool):
            if layer.window not in (2, 4, 8):
                raise ValidationError(i, f"pool window {layer.window} not in {{2, 4, 8}}")
            if length > 1024:
                raise ValidationError(i, f"{length} input positions > 1024")
            n = -(-length // layer.window)
            out.append(LoweredLayer("pool", i, channels, channels, length, length, n,
                                    pool=layer.window))
            length = n
            continue
        if isinstance(layer, Dense):
            if layer.in_features != length * channels:
                raise ValidationError(
                    i, f"in_features {layer.in_features} != {length} positions x {channels} channels")
            k, c_in, c_out, stride, pool = length, channels, layer.out_features, 1, None
            w = None if layer.weights is None else dense_as_conv_weights(layer, channels)
        elif isinstance(layer, Conv1d):
            k, c_in, c_out, stride, pool = layer.k, layer.c_in, layer.c_out, layer.stride, layer.pool
            w = layer.weights
            if c_in != channels:
                raise ValidationError(i, f"c_in {c_in} != incoming channels {channels}")
        else:
            raise ValidationError(i, f"unknown layer type {type(layer).__name__}")
        if k < 1 or c_out < 1:
            raise ValidationError(i, "kernel size and output channels must be >= 1")
        if stride not in isa.POW2:
            raise ValidationError(i, f"stride {stride} not in {isa.POW2}")
        pool = pool or 1
        if pool not in isa.POW2:
            raise ValidationError(i, f"pool window {pool} not in {isa.POW2}")
        if c_out > N_PAIRS:
            raise ValidationError(i, f"C_out {c_out} > {N_PAIRS} bitline pairs")
        if w is None:
            raise ValidationError(i, "weights missing")
        w = np.asarray(w)
        if w.shape != (c_out, k, c_in):
            raise ValidationError(i, f"weight shape {w.shape} != {(c_out, k, c_in)}")
        if not np.isin(w, (-1, 1)).all():
            raise ValidationError(i, "weights must be +1/-1")
        bias = layer.bias
        if bias is not None:
            bias = np.asarray(bias, dtype=np.int64)
            if bias.shape != (c_out,):
                raise ValidationError(i, f"bias has shape {bias.shape}, expected ({c_out},)")
        lowered = LoweredLayer("conv", i, c_in, c_out, length, 0, 0, k=k, stride=stride,
                               pool=pool, weights=w.astype(np.int8), bias=bias)
        if lowered.wl_count > N_WL:
            raise ValidationError(
                i, f"K*C_in + bias rows = {k}*{c_in} + {lowered.bias_rows} = "
                   f"{lowered.wl_count} > {N_WL} wordlines")
        if length < k:
            raise ValidationError(i, f"input length {length} shorter than kernel {k}")
        n = (length - k) // stride + 1
        if n > 1024:
            raise ValidationError(i, f"{n} output positions > 1024")
        lowered.n_out, lowered.out_len = n, -(-n // pool)
        out.append(lowered)
        length, channels = lowered.out_len, c_out
    return out


def pack_layer_weights(layer: LoweredLayer, pair_base: int = 0) -> np.ndarray:
    """TWM row images (wl_count, 1024) for one conv layer at ``pair_base``."""
    if pair_base < 0 or pair_base + layer.c_out > N_PAIRS:
        raise CompileError(f"pairs {pair_base}..{pair_base + layer.c_out - 1} exceed {N_PAIRS}")
    cols = np.zeros((layer.wl_count, layer.c_out), dtype=np.int8)
    # column q top-down: w[q, k, c] at row k*C_in + c
    cols[:layer.k * layer.c_in] = layer.weights.reshape(layer.c_out, -1).T
    if layer.bias is not None:
        r = np.arange(layer.bias_rows)[:, None]
        cols[layer.k * layer.c_in:] = np.where(r < np.abs(layer.bias), np.sign(layer.bias), 0)
    rows = np.zeros((layer.wl_count, N_BL), dtype=np.uint8)
    rows[:, 2 * pair_base:2 * (pair_base + layer.c_out)] = twm_encode(cols)
    return rows


def unpack_layer_weights(rows, layer: LoweredLayer, pair_base: int = 0):
    """Inverse of :func:`pack_layer_weights` -> (weights, bias)."""
    from .cim import twm_decode
    cols = twm_decode(np.asarray(rows)[:, 2 * pair_base:2 * (pair_base + layer.c_out)])
    n = layer.k * layer.c_in
    w = cols[:n].T.reshape(layer.c_out, layer.k, layer.c_in)
    bias = cols[n:].sum(axis=0).astype(np.int64) if layer.bias_rows else None
    return w, bias


def col_groups(pair_base: int, c_out: int) -> tuple[int, int]:
    """First sense group and number of groups covering a pair range."""
    g0 = pair_base // N_SA
    return g0, (pair_base + c_out - 1) // N_SA - g0 + 1


@dataclass
class Placement:
    wl_base: int
    wl_count: int
    pair_base: int
    pair_count: int
    resident: str                  # "macro" or "wsram"
    wsram_row: Optional[int] = None


@dataclass
class LayerEntry:
    """Side-table row for one MAC instruction."""

    kind: str
    layer: int
    model_layer: int
    c_in: int
    c_out: int
    k: int
    stride: int
    in_len: int
    n_out: int
    out_len: int
    pool: int = 1
    wl_base: int = 0
    pair_base: int = 0
    bias_rows: int = 0
    resident: str = "-"
    wsram_row: Optional[int] = None
    final: bool = True             # last MAC of its model layer

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class MappedModel:
    lowered: list
    placements: dict
    fused: bool
    program: list = field(default_factory=list)
    layer_table: list = field(default_factory=list)
    bank_plan: list = field(default_factory=list)
    macro_image: np.ndarray = None
    wsram_image: np.ndarray = None
    input_cursor: Cursor = None
    wsram_rows_used: int = 0

    @property
    def macro_weights(self) -> int:
        return sum(self.lowered[i].n_weights for i, p in self.placements.items()
                   if p.resident == "macro")

    @property
    def wsram_weights(self) -> int:
        return sum(self.lowered[i].n_weights for i, p in self.placements.items()
                   if p.resident == "wsram")

    @property
    def n_wrep(self) -> int:
        return sum(isinstance(isa.decode(w), isa.WeightReplace) for w in self.program)


def _place(lowered) -> tuple[dict, np.ndarray, np.ndarray, int]:
    conv = [i for i, l in enumerate(lowered) if l.kind == "conv"]
    top = np.zeros(N_PAIRS, dtype=np.int64)
    owner = np.full((N_WL, N_PAIRS), -1, dtype=np.int32)
    macro = np.zeros((N_WL, N_BL), dtype=np.uint8)
    placements, deferred = {}, []
    for i in conv:
        l = lowered[i]
        h, w = l.wl_count, l.c_out
        base = sliding_window_view(top, w).max(axis=1)
        fits = np.flatnonzero(base + h <= N_WL)
        if len(fits) == 0:
            deferred.append(i)
            continue
        p = int(fits[0])
        r = int(base[p])
        placements[i] = Placement(r, h, p, w, "macro")
        top[p:p + w] = r + h
        owner[r:r + h, p:p + w] = i
        macro[r:r + h] |= pack_layer_weights(l, p)
    wsram = np.zeros((WSRAM_ROWS, N_BL), dtype=np.uint8)
    cursor = 0
    live = owner.copy()
    for i in deferred:
        l = lowered[i]
        h = l.wl_count
        if h > WSRAM_ROWS or cursor + h > WSRAM_ROWS:
            raise CompileError(
                f"layer {l.model_layer}: {l.n_weights} weights do not fit the macro and "
                f"{h} rows exceed the free weight SRAM ({WSRAM_ROWS - cursor} rows)")
        row_max = live.max(axis=1)
        # rows holding weights of layers that still have to run cannot be replaced
        blocked = (row_max > i).astype(np.int64)
        windows_blocked = sliding_window_view(blocked, h).sum(axis=1)
        score = sliding_window_view(row_max, h).max(axis=1)
        ok = np.flatnonzero(windows_blocked == 0)
        if len(ok) == 0:
            raise CompileError(f"layer {l.model_layer}: no {h}-row band is free for replacement")
        r = int(ok[np.argmin(score[ok])])
        placements[i] = Placement(r, h, 0, l.c_out, "wsram", cursor)
        wsram[cursor:cursor + h] = pack_layer_weights(l, 0)
        live[r:r + h] = -1
        live[r:r + h, :l.c_out] = i
        cursor += h
    return placements, macro, wsram, cursor


def _alloc(words: int, avoid: tuple[int, ...], what: str) -> Cursor:
    if words > MAX_MAP_WORDS:
        raise CompileError(f"{what}: {words} words exceed the {MAX_MAP_WORDS}-word two-bank limit")
    if words > BANK_WORDS:
        for b in (0, 2):
            if b not in avoid and b + 1 not in avoid:
                return Cursor(b, 0, True)
    else:
        for b in range(N_BANKS):
            if b not in avoid:
                return Cursor(b, 0, False)
    raise CompileError(f"{what}: no bank free for a {words}-word map")


def map_model(model: ModelSpec, fused: bool = True) -> MappedModel:
    lowered = validate(model)
    if sum(l.n_weights for l in lowered) > EFFECTIVE_CAPACITY + WSRAM_ROWS * N_PAIRS:
        raise CompileError("model exceeds macro plus weight SRAM capacity")
    placements, macro, wsram, used = _place(lowered)
    mm = MappedModel(lowered, placements, fused, macro_image=macro, wsram_image=wsram,
                     wsram_rows_used=used)

    first = lowered[0]
    cur = _alloc(first.in_len * words_per_position(first.c_in), (), "input")
    mm.input_cursor = cur
    prog = []

    def emit_step(entry: LayerEntry, mac: isa.Mac):
        nonlocal cur
        words = entry.out_len * words_per_position(entry.c_out)
        ofm = _alloc(words, cur.banks, f"layer {entry.model_layer} output")
        prog.append(isa.Pointer(cur.bank, cur.word, ofm.bank, ofm.word, cur.span, ofm.span))
        prog.append(mac)
        mm.layer_table.append(entry)
        mm.bank_plan.append({"mac": len(mm.layer_table) - 1, "model_layer": entry.model_layer,
                             "ifm": [cur.bank, cur.word, cur.span],
                             "ofm": [ofm.bank, ofm.word, ofm.span], "ofm_words": words})
        cur = ofm

    for i, l in enumerate(lowered):
        if l.kind == "pool":
            emit_step(LayerEntry("pool", i, l.model_layer, l.c_in, l.c_out, 1, 1, l.in_len,
                                 l.n_out, l.out_len, pool=l.pool),
                      isa.Mac(isa.MacMode.BYPASS, n_out=l.n_out, pool_window=l.pool))
            continue
        p = placements[i]
        if p.resident == "wsram":
            prog.append(isa.WeightReplace(p.wl_base, p.wl_count, p.wsram_row))
        _, groups = col_groups(p.pair_base, l.c_out)
        split = l.pool > 1 and not fused
        pool = 1 if split else l.pool
        entry = LayerEntry("conv", i, l.model_layer, l.c_in, l.c_out, l.k, l.stride, l.in_len,
                           l.n_out, l.n_out if split else l.out_len, pool=pool,
                           wl_base=p.wl_base, pair_base=p.pair_base, bias_rows=l.bias_rows,
                           resident=p.resident, wsram_row=p.wsram_row, final=not split)
        mode = isa.MacMode.FUSED if pool > 1 else isa.MacMode.CONV
        emit_step(entry, isa.Mac(mode, n_out=l.n_out, wl_count=l.wl_count, col_groups=groups,
                                 pool_window=pool, stride=l.stride))
        if split:
            emit_step(LayerEntry("pool", i, l.model_layer, l.c_out, l.c_out, 1, 1, l.n_out,
                                 l.n_out, l.out_len, pool=l.pool),
                      isa.Mac(isa.MacMode.BYPASS, n_out=l.n_out, pool_window=l.pool))
    prog.append(isa.Halt())
    mm.program = [isa.encode(x) for x in prog]
    return mm


def output_shape(model: ModelSpec) -> tuple[int, int]:
    last = validate(model)[-1]
    return last.out_len, last.c_out
