"""Functional model of the 1Mb SRAM compute-in-memory macro.

The array is 1024 wordlines x 1024 bitlines with 128 sense amplifiers.
Currents are integer unit-cell counts: an activated wordline contributes one
unit to every bitline whose cell stores 1.

Two weight mappings are supported:

* TWM (ternary): weight q of a row sits on the bitline pair (2q, 2q+1);
  +1 -> (1, 0), -1 -> (0, 1), 0 -> (0, 0). (1, 1) is reserved. The SA
  compares the two bitlines of a pair, so 512 pairs are read in 4 groups
  of 128.
* BWM (binary): one cell per weight (+1 -> 1, -1 -> 0), compared against
  an ideal reference of half the active-input count. 1024 bitlines are read
  in 8 groups of 128.

Both binarize per ``out = 1 iff I_sig - I_ref (+ offset) >= 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

N_WL = 1024
N_BL = 1024
N_PAIRS = N_BL // 2
N_SA = 128


class MappingMode(enum.Enum):
    TWM = "twm"
    BWM = "bwm"


class ProgrammingError(ValueError):
    pass


@dataclass(frozen=True)
class VariationParams:
    """Gaussian SA input-referred offset, in unit-cell-current units."""

    sigma_sa: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sigma_sa >= 0:
            raise ValueError(f"sigma_sa must be >= 0, got {self.sigma_sa}")


TWM_CODES = {1: (1, 0), -1: (0, 1), 0: (0, 0)}


def twm_encode(weights) -> np.ndarray:
    """Ternary weights (..., n) -> TWM cell bits (..., 2n)."""
    w = np.asarray(weights)
    if not np.isin(w, (-1, 0, 1)).all():
        raise ValueError("ternary weights must be in {-1, 0, +1}")
    cells = np.empty(w.shape[:-1] + (2 * w.shape[-1],), dtype=np.uint8)
    cells[..., 0::2] = w == 1
    cells[..., 1::2] = w == -1
    return cells


def twm_decode(cells) -> np.ndarray:
    """TWM cell bits (..., 2n) -> ternary weights (..., n)."""
    c = np.asarray(cells, dtype=np.int8)
    pos, neg = c[..., 0::2], c[..., 1::2]
    if np.any(pos & neg):
        raise ValueError("reserved TWM pair pattern (1, 1)")
    return pos - neg


def bwm_encode(weights) -> np.ndarray:
    w = np.asarray(weights)
    if not np.isin(w, (-1, 1)).all():
        raise ValueError("binary weights must be in {-1, +1}")
    return (w == 1).astype(np.uint8)


class CimArray:
    """1024 x 1024 cell array with a fixed weight mapping."""

    def __init__(self, mode: MappingMode = MappingMode.TWM, cells=None):
        self.mode = MappingMode(mode)
        if cells is None:
            self.cells = np.zeros((N_WL, N_BL), dtype=np.uint8)
        else:
            cells = np.asarray(cells, dtype=np.uint8)
            if cells.shape != (N_WL, N_BL):
                raise ValueError(f"cell image must be {N_WL}x{N_BL}, got {cells.shape}")
            self.cells = cells.copy()
            if self.mode is MappingMode.TWM:
                _check_twm_rows(self.cells, 0)

    @property
    def mux_groups(self) -> int:
        return 4 if self.mode is MappingMode.TWM else 8

    def program_rows(self, row_base: int, rows) -> "CimArray":
        """Overwrite rows ``row_base .. row_base+len(rows)``; others untouched."""
        rows = np.asarray(rows, dtype=np.uint8)
        if rows.ndim == 1:
            rows = rows[None, :]
        if rows.ndim != 2 or rows.shape[1] != N_BL:
            raise ProgrammingError(f"rows must be (n, {N_BL}) bit arrays, got {rows.shape}")
        if not 0 <= row_base or row_base + len(rows) > N_WL:
            raise ProgrammingError(
                f"rows {row_base}..{row_base + len(rows) - 1} exceed the {N_WL}-row array")
        if np.any(rows > 1):
            raise ProgrammingError("cell values must be 0 or 1")
        if self.mode is MappingMode.TWM:
            _check_twm_rows(rows, row_base)
        self.cells[row_base:row_base + len(rows)] = rows
        return self

    def _check_window(self, wl_base, wl_count):
        if not (0 <= wl_base < N_WL and 1 <= wl_count and wl_base + wl_count <= N_WL):
            raise ValueError(f"wordline window {wl_base}+{wl_count} outside 0..{N_WL}")

    def _currents(self, x, wl_base, wl_count, cols):
        x = np.asarray(x, dtype=np.uint8)
        if x.shape != (N_WL,):
            raise ValueError(f"input must be a {N_WL}-bit vector")
        self._check_window(wl_base, wl_count)
        xa = x[wl_base:wl_base + wl_count].astype(np.float32)
        block = self.cells[wl_base:wl_base + wl_count, cols].astype(np.float32)
        # float32 sums of <= 1024 unit terms are exact
        return (xa @ block).astype(np.int64), int(xa.sum())

    def signal(self, x, wl_base: int, wl_count: int, col_group: int) -> np.ndarray:
        """Ideal SA input (I_sig - I_ref) for the 128 SAs of one group.

        Returned doubled under BWM so the value stays integral.
        """
        if not 0 <= col_group < self.mux_groups:
            raise ValueError(f"col_group {col_group} not in 0..{self.mux_groups - 1}")
        if self.mode is MappingMode.TWM:
            cols = slice(2 * N_SA * col_group, 2 * N_SA * (col_group + 1))
            cur, _ = self._currents(x, wl_base, wl_count, cols)
            return cur[0::2] - cur[1::2]
        cols = slice(N_SA * col_group, N_SA * (col_group + 1))
        cur, active = self._currents(x, wl_base, wl_count, cols)
        return 2 * cur - active

    def mac_cycle(self, x, wl_base: int, wl_count: int, col_group: int,
                  var: VariationParams | None = None,
                  rng: np.random.Generator | None = None) -> np.ndarray:
        """One sense event: 128 output bits for the selected column group."""
        s = self.signal(x, wl_base, wl_count, col_group).astype(np.float64)
        if self.mode is MappingMode.BWM:
            s = s / 2
        if var is not None and var.sigma_sa > 0:
            if rng is None:
                rng = np.random.default_rng(var.seed)
            s = s + rng.normal(0.0, var.sigma_sa, size=N_SA)
        return (s >= 0).astype(np.uint8)

    def sensing_margin(self, x, wl_base: int, wl_count: int, index: int):
        """|I_sig - I_ref| for one pair (TWM) or bitline (BWM).

        TWM margins are integers; BWM margins may be half-integers.
        """
        group, lane = divmod(index, N_SA)
        s = int(self.signal(x, wl_base, wl_count, group)[lane])
        if self.mode is MappingMode.TWM:
            return abs(s)
        return abs(s) / 2

    def margins(self, xs, wl_base: int, wl_count: int) -> np.ndarray:
        """Batched margins: xs (B, 1024) -> (B, 512) under TWM, (B, 1024) under BWM."""
        xs = np.asarray(xs)
        self._check_window(wl_base, wl_count)
        xa = xs[:, wl_base:wl_base + wl_count].astype(np.float32)
        cur = xa @ self.cells[wl_base:wl_base + wl_count].astype(np.float32)
        if self.mode is MappingMode.TWM:
            return np.abs(cur[:, 0::2] - cur[:, 1::2]).astype(np.int64)
        return np.abs(cur - xa.sum(axis=1, keepdims=True) / 2).astype(np.float64)


def _check_twm_rows(rows, row_base):
    bad = np.argwhere(rows[:, 0::2] & rows[:, 1::2])
    if len(bad):
        r, p = bad[0]
        raise ProgrammingError(
            f"reserved TWM pattern (1,1) at row {row_base + r}, pair {p}")


def weight_rows(weights, mode: MappingMode, wl_count: int | None = None) -> np.ndarray:
    """Place a weight column (n,) or matrix (n, cols) at bitline 0 of fresh rows."""
    w = np.asarray(weights)
    if w.ndim == 1:
        w = w[:, None]
    n = w.shape[0]
    rows = np.zeros((wl_count or n, N_BL), dtype=np.uint8)
    bits = twm_encode(w) if MappingMode(mode) is MappingMode.TWM else bwm_encode(w)
    rows[:n, :bits.shape[1]] = bits
    return rows


def monte_carlo_error_rate(n_rows: int, sigma_grid, trials: int, seed: int = 0,
                           density: float = 0.5):
    """SA decision error rate versus offset sigma for TWM and BWM.

    Each trial draws a random +-1 weight column of ``n_rows`` weights, a
    random input vector (each bit 1 with probability ``density``) and one
    standard-normal offset, all from a stream seeded by ``(seed, trial)``.
    The same draws are reused for both mappings and every sigma, so the two
    curves differ only through the sensing margin. An error is a noisy
    decision that differs from the ideal ``sum(x*w) >= 0``.

    Returns a list of ``(sigma, twm_rate, bwm_rate)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 1 <= n_rows <= N_WL:
        raise ValueError(f"n_rows must be in 1..{N_WL}")
    diff = np.empty(trials, dtype=np.int64)
    z = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        w = rng.integers(0, 2, n_rows) * 2 - 1
        x = rng.random(n_rows) < density
        diff[t] = int(w[x].sum())           # P - N
        z[t] = rng.standard_normal()
    ideal = diff >= 0
    out = []
    for sigma in sigma_grid:
        sigma = float(sigma)
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        twm = (diff + sigma * z) >= 0
        bwm = (diff / 2 + sigma * z) >= 0
        out.append((sigma, float(np.mean(twm != ideal)), float(np.mean(bwm != ideal))))
    return out


# -- weight-image files -----------------------------------------------------

def save_image(path, cells) -> None:
    """Row-major bit image, 8 bits per byte, MSB = lowest bitline index."""
    cells = np.asarray(cells, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(np.packbits(cells, axis=1).tobytes())


def load_image(path, rows: int = N_WL) -> np.ndarray:
    data = np.fromfile(path, dtype=np.uint8)
    if data.size != rows * N_BL // 8:
        raise ValueError(f"{path}: expected {rows * N_BL // 8} bytes, got {data.size}")
    return np.unpackbits(data.reshape(rows, N_BL // 8), axis=1)
