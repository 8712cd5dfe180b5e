"""Fetch-decode-execute engine and cycle accounting.

Cycle model (one unit cost per resource use):

* feature-SRAM word access, 1 cycle; macro sense of one 128-SA group, 1 cycle;
  WREP, 1 cycle per row; PTR, 1 cycle; HALT, free.
* A conv MAC runs as a two-stage pipeline. Stage 1 reads the fresh IFM words
  of step t into the line-buffer shadow; stage 2 senses ``col_groups`` groups
  and writes emitted OFM words during its last cycles (different banks, so
  writes never stall). Step t's fetch may start once step t-1's fetch is
  done and step t-1 has taken over the line buffer.
* A pooling MAC with the macro bypassed is fully serialized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import isa
from .cim import N_PAIRS, N_SA, N_WL, CimArray, MappingMode, VariationParams
from .compiler import LayerEntry, col_groups
from .memory import (N_BANKS, Cursor, FeatureSramSystem, LineBuffer, WeightSram,
                     pack_words, words_per_position)
from .pwb import PoolingWriteBlock, PoolState, bypass_pool


class SimulationError(RuntimeError):
    pass


class ResidenceError(SimulationError):
    pass


@dataclass
class SimStats:
    cycles: int = 0
    macs: int = 0
    reads: list = field(default_factory=lambda: [0] * N_BANKS)
    writes: list = field(default_factory=lambda: [0] * N_BANKS)
    gated_cycles: list = field(default_factory=lambda: [0] * N_BANKS)
    wrep_rows: int = 0
    sense_events: int = 0
    instructions: int = 0
    instr_cycles: list = field(default_factory=list)   # (mnemonic, cycles) per instruction

    @property
    def active_bank_cycles(self) -> int:
        return N_BANKS * self.cycles - sum(self.gated_cycles)

    def to_dict(self) -> dict:
        return {"cycles": self.cycles, "macs": self.macs, "reads": list(self.reads),
                "writes": list(self.writes), "gated_cycles": list(self.gated_cycles),
                "active_bank_cycles": self.active_bank_cycles, "wrep_rows": self.wrep_rows,
                "sense_events": self.sense_events, "instructions": self.instructions}


class System:
    """Macro, memories and controller state for one simulation."""

    def __init__(self, program, layer_table=(), macro_image=None, wsram_image=None,
                 var: Optional[VariationParams] = None, capture: bool = False):
        self.program = list(program)
        self.layer_table = [e if isinstance(e, LayerEntry) else LayerEntry.from_dict(e)
                            for e in layer_table]
        self.cim = CimArray(MappingMode.TWM, macro_image)
        self.mem = FeatureSramSystem()
        self.wsram = WeightSram(wsram_image)
        self.lb = LineBuffer()
        self.pwb = PoolState()
        self.var = var or VariationParams()
        self.rng = np.random.default_rng(self.var.seed)
        self.pc = 0
        self.capture = capture
        self.ofms: list = []          # (LayerEntry, (positions, channels) bits) per MAC
        self._owner = np.full((N_WL, N_PAIRS), -1, dtype=np.int32)
        self._wsram_owner = {}
        for e in self.layer_table:
            if e.kind != "conv":
                continue
            rows = e.k * e.c_in + e.bias_rows
            if e.resident == "macro":
                self._owner[e.wl_base:e.wl_base + rows, e.pair_base:e.pair_base + e.c_out] = e.layer
            elif e.resident == "wsram":
                self._wsram_owner[e.wsram_row] = (e.layer, rows, e.pair_base, e.c_out)

    @classmethod
    def from_mapped(cls, mm, **kw) -> "System":
        return cls(mm.program, mm.layer_table, mm.macro_image, mm.wsram_image, **kw)

    def load_input(self, x, cursor: Cursor) -> None:
        self.mem.store_map(x, cursor)

    # -- instruction semantics ---------------------------------------------

    def _wrep(self, w: isa.WeightReplace, stats: SimStats) -> int:
        rows = self.wsram.fetch_weight_rows(w.wsram_row, w.row_count)
        self.cim.program_rows(w.cim_row_base, rows)
        self._owner[w.cim_row_base:w.cim_row_base + w.row_count] = -1
        src = self._wsram_owner.get(w.wsram_row)
        if src is not None and src[1] == w.row_count:
            layer, _, pb, n = src
            self._owner[w.cim_row_base:w.cim_row_base + w.row_count, pb:pb + n] = layer
        stats.wrep_rows += w.row_count
        return w.row_count

    def _check_residence(self, e: LayerEntry, rows: int, cycle: int) -> None:
        block = self._owner[e.wl_base:e.wl_base + rows, e.pair_base:e.pair_base + e.c_out]
        if not (block == e.layer).all():
            raise ResidenceError(
                f"cycle {cycle}: weights of layer {e.model_layer} are not resident in "
                f"rows {e.wl_base}..{e.wl_base + rows - 1}, pairs {e.pair_base}.."
                f"{e.pair_base + e.c_out - 1}")

    def _conv(self, m: isa.Mac, e: LayerEntry, start: int, stats: SimStats) -> int:
        c_in, c_out, k, s = e.c_in, e.c_out, e.k, m.stride
        window_bits = k * c_in
        if m.wl_count != window_bits + e.bias_rows or s != e.stride:
            raise SimulationError(
                f"pc {self.pc}: MAC operands disagree with the layer table "
                f"(wl_count {m.wl_count}, stride {s})")
        g0, groups = col_groups(e.pair_base, c_out)
        if m.col_groups != groups:
            raise SimulationError(f"pc {self.pc}: col_groups {m.col_groups} != {groups}")
        self._check_residence(e, m.wl_count, start)
        wpp_in, wpp_out = words_per_position(c_in), words_per_position(c_out)
        mem, lb = self.mem, self.lb
        if e.bias_rows:
            lb.load(e.wl_base + window_bits, np.ones(e.bias_rows, dtype=np.uint8))
        pwb = PoolingWriteBlock(m.pool_window, wpp_out)
        lane0 = e.pair_base - N_SA * g0
        fetch_free = sense_free = start
        out_pos = 0
        for t in range(m.n_out):
            full = t == 0 or s >= k
            first = t * s if full else t * s + k - s
            last = t * s + k
            words = []
            f = fetch_free
            for pos in range(first, last):
                for j in range(wpp_in):
                    bank, word = mem.ifm.locate(pos * wpp_in + j)
                    words.append(mem.read_word(bank, word, f))
                    f += 1
            fresh = np.concatenate(words).reshape(last - first, wpp_in * 128)[:, :c_in].ravel()
            sense = max(f, sense_free)
            if full:
                lb.load(e.wl_base, fresh)
            else:
                lb.shift_in(e.wl_base, window_bits, fresh)
            out = np.concatenate([self.cim.mac_cycle(lb.bits, e.wl_base, m.wl_count, g0 + g,
                                                     self.var, self.rng)
                                  for g in range(groups)])
            stats.sense_events += groups
            emitted = pwb.push(list(pack_words(out[lane0:lane0 + c_out][None, :])))
            if emitted is None and t == m.n_out - 1:
                emitted = pwb.flush()
            if emitted is not None:
                w0 = sense + groups - wpp_out
                for j, w in enumerate(emitted):
                    bank, word = mem.ofm.locate(out_pos * wpp_out + j)
                    mem.write_word(bank, word, w, w0 + j)
                out_pos += 1
            fetch_free = max(f, sense)
            sense_free = sense + groups
        stats.macs += m.n_out * c_out * k * c_in
        return sense_free - start

    def _mac(self, m: isa.Mac, mac_index: int, start: int, stats: SimStats) -> int:
        if mac_index >= len(self.layer_table):
            raise SimulationError(f"pc {self.pc}: MAC #{mac_index} has no layer-table entry")
        e = self.layer_table[mac_index]
        self.pwb = PoolState(m.pool_window)
        if m.mode is isa.MacMode.BYPASS:
            if e.kind != "pool":
                raise SimulationError(f"pc {self.pc}: pooling MAC but table entry is {e.kind}")
            n = self._bypass(m, e, start)
        else:
            if e.kind != "conv":
                raise SimulationError(f"pc {self.pc}: conv MAC but table entry is {e.kind}")
            n = self._conv(m, e, start, stats)
        if self.capture:
            self.ofms.append((e, self.mem.load_map(self.mem.ofm, e.out_len, e.c_out)))
        return n

    def _bypass(self, m: isa.Mac, e: LayerEntry, start: int) -> int:
        return bypass_pool(self.mem, m.n_out, m.pool_window, words_per_position(e.c_in), start)

    def run(self, max_instructions: int = 1_000_000) -> SimStats:
        stats = SimStats()
        cycle = 0
        mac_index = 0
        self.pc = 0
        while True:
            if self.pc >= len(self.program):
                raise SimulationError(
                    f"pc {self.pc} ran past the end of the program without HALT at cycle {cycle}")
            if stats.instructions >= max_instructions:
                raise SimulationError(f"pc {self.pc}: instruction limit reached at cycle {cycle}")
            instr = isa.decode(self.program[self.pc])
            stats.instructions += 1
            if isinstance(instr, isa.Halt):
                stats.instr_cycles.append(("HALT", 0))
                break
            if isinstance(instr, isa.Pointer):
                self.mem.apply_pointer(instr)
                n, name = 1, "PTR"
            elif isinstance(instr, isa.WeightReplace):
                n, name = self._wrep(instr, stats), "WREP"
            else:
                n, name = self._mac(instr, mac_index, cycle, stats), "MAC"
                mac_index += 1
            self.mem.tick(n)
            cycle += n
            stats.instr_cycles.append((name, n))
            self.pc += 1
        stats.cycles = cycle
        stats.reads = list(self.mem.reads)
        stats.writes = list(self.mem.writes)
        stats.gated_cycles = list(self.mem.gated_cycles)
        return stats


def run(sys: System) -> SimStats:
    return sys.run()


def simulate(mm, x, var: Optional[VariationParams] = None, capture: bool = True):
    """Compile-time artefacts + input bits -> (stats, {model_layer: OFM})."""
    sys = System.from_mapped(mm, var=var, capture=capture)
    sys.load_input(x, mm.input_cursor)
    stats = sys.run()
    outs = {e.model_layer: ofm for e, ofm in sys.ofms if e.final}
    return stats, outs


def gops(macs: int, latency_s: float, ops_per_mac: int = 1) -> float:
    if latency_s <= 0:
        raise ValueError("latency must be > 0")
    return macs * ops_per_mac / latency_s / 1e9


def compute_throughput(stats: SimStats, freq_hz: float, ops_per_mac: int = 1) -> float:
    """GOPS at ``freq_hz``; 1 MAC counts as ``ops_per_mac`` operations."""
    if stats.cycles <= 0:
        raise ValueError("throughput undefined for a run of zero cycles")
    if stats.macs == 0:
        return 0.0
    return gops(stats.macs, stats.cycles / freq_hz, ops_per_mac)


COST_KEYS = ("sense", "feature_read", "feature_write", "wrep_row",
             "bank_active_cycle", "bank_gated_cycle")


def event_counts(stats: SimStats) -> dict:
    return {"sense": stats.sense_events, "feature_read": sum(stats.reads),
            "feature_write": sum(stats.writes), "wrep_row": stats.wrep_rows,
            "bank_active_cycle": stats.active_bank_cycles,
            "bank_gated_cycle": sum(stats.gated_cycles)}


def model_energy(stats: SimStats, costs: dict) -> float:
    """Modeled, relative energy in microjoules; ``costs`` are uJ per event."""
    missing = [k for k in COST_KEYS if k not in costs]
    if missing:
        raise KeyError(f"cost table lacks {', '.join(missing)}")
    counts = event_counts(stats)
    return float(sum(counts[k] * float(costs[k]) for k in COST_KEYS))


def load_cost_table(path) -> dict:
    with open(path) as f:
        costs = json.load(f)
    model_energy(SimStats(), costs)   # key check
    return costs
