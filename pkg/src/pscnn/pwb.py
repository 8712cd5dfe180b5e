"""Pooling-write block: max pooling on the macro output stream.

On {1, 0} activations max pooling is a bitwise OR. A ragged final window
pools only the elements that remain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WINDOWS = (1, 2, 4, 8)


@dataclass
class PoolState:
    window: int = 1
    accumulator: np.ndarray = field(default_factory=lambda: np.zeros(128, dtype=np.uint8))
    fill: int = 0

    def __post_init__(self):
        if self.window not in WINDOWS:
            raise ValueError(f"pool window must be one of {WINDOWS}, got {self.window}")


def pool_step(s: PoolState, v) -> tuple[PoolState, np.ndarray | None]:
    acc = s.accumulator | np.asarray(v, dtype=np.uint8)
    fill = s.fill + 1
    if fill == s.window:
        return PoolState(s.window, np.zeros_like(acc), 0), acc
    return PoolState(s.window, acc, fill), None


def pool_flush(s: PoolState) -> tuple[PoolState, np.ndarray | None]:
    """Emit a partially filled window (ragged tail), if any."""
    if s.fill == 0:
        return s, None
    return PoolState(s.window, np.zeros_like(s.accumulator), 0), s.accumulator


class PoolingWriteBlock:
    """One PoolState per 128-bit lane of a multi-word position."""

    def __init__(self, window: int, lanes: int, width: int = 128):
        self.window = window
        self.states = [PoolState(window, np.zeros(width, dtype=np.uint8)) for _ in range(lanes)]

    def push(self, words) -> list[np.ndarray] | None:
        out = []
        for i, w in enumerate(words):
            self.states[i], e = pool_step(self.states[i], w)
            out.append(e)
        return out if out[0] is not None else None

    def flush(self) -> list[np.ndarray] | None:
        out = []
        for i in range(len(self.states)):
            self.states[i], e = pool_flush(self.states[i])
            out.append(e)
        return out if out[0] is not None else None


def pooled_length(n: int, window: int) -> int:
    return -(-n // window)


def bypass_pool(mem, n_positions: int, window: int, words_per_pos: int, start_cycle: int) -> int:
    """Pool ``n_positions`` IFM positions into the OFM through the macro bypass.

    Reads and writes are serialized, one word per cycle. Returns the number
    of cycles consumed.
    """
    pwb = PoolingWriteBlock(window, words_per_pos)
    cycle = start_cycle
    out_pos = 0

    def write(words):
        nonlocal cycle, out_pos
        for j, w in enumerate(words):
            bank, word = mem.ofm.locate(out_pos * words_per_pos + j)
            mem.write_word(bank, word, w, cycle)
            cycle += 1
        out_pos += 1

    for t in range(n_positions):
        words = []
        for j in range(words_per_pos):
            bank, word = mem.ifm.locate(t * words_per_pos + j)
            words.append(mem.read_word(bank, word, cycle))
            cycle += 1
        emitted = pwb.push(words)
        if emitted is not None:
            write(emitted)
    tail = pwb.flush()
    if tail is not None:
        write(tail)
    return cycle - start_cycle
