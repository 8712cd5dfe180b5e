"""Feature SRAM (4 x 64Kb ping-pong banks), weight SRAM and line buffer.

Feature words are 128 bits, one per SA sense. A feature map is stored
position-major: position ``t`` occupies ``ceil(C/128)`` consecutive words,
channel ``c`` in bit ``c % 128`` of word ``c // 128``, zero padded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .isa import Pointer

N_BANKS = 4
BANK_WORDS = 512
WORD_BITS = 128
WSRAM_ROWS = 512
ROW_BITS = 1024
LB_BITS = 1024


class MemorySystemError(RuntimeError):
    """Base class for illegal memory-system operations."""


class PoweredOffError(MemorySystemError):
    pass


class PortConflictError(MemorySystemError):
    pass


class AddressError(MemorySystemError):
    pass


class BankConfigError(MemorySystemError):
    pass


def words_per_position(channels: int) -> int:
    return -(-channels // WORD_BITS)


@dataclass
class Cursor:
    bank: int = 0
    word: int = 0
    span: bool = False

    @property
    def banks(self) -> tuple[int, ...]:
        return (self.bank, self.bank + 1) if self.span else (self.bank,)

    def locate(self, offset: int) -> tuple[int, int]:
        """Map a word offset within the feature map to (bank, word)."""
        lin = self.bank * BANK_WORDS + self.word + offset
        bank, word = divmod(lin, BANK_WORDS)
        if offset < 0 or bank not in self.banks:
            raise AddressError(
                f"offset {offset} from bank {self.bank} word {self.word} leaves "
                f"the allocated bank(s) {self.banks}")
        return bank, word


class FeatureSramSystem:
    """Four single-port banks with power gating and per-bank counters."""

    def __init__(self):
        self.data = np.zeros((N_BANKS, BANK_WORDS, WORD_BITS), dtype=np.uint8)
        self.power = [True] * N_BANKS
        self.ifm = Cursor()
        self.ofm = Cursor()
        self.reads = [0] * N_BANKS
        self.writes = [0] * N_BANKS
        self.gated_cycles = [0] * N_BANKS
        self._last_access = [-1] * N_BANKS

    def apply_pointer(self, p: Pointer) -> None:
        ifm = Cursor(p.ifm_bank, p.ifm_word, p.ifm_span)
        ofm = Cursor(p.ofm_bank, p.ofm_word, p.ofm_span)
        shared = set(ifm.banks) & set(ofm.banks)
        if shared:
            raise BankConfigError(
                f"IFM banks {ifm.banks} and OFM banks {ofm.banks} share bank(s) "
                f"{sorted(shared)}; single-port banks cannot serve both")
        self.ifm, self.ofm = ifm, ofm
        used = set(ifm.banks) | set(ofm.banks)
        self.power = [b in used for b in range(N_BANKS)]

    def tick(self, cycles: int) -> None:
        """Account ``cycles`` elapsed cycles against the current power state."""
        for b in range(N_BANKS):
            if not self.power[b]:
                self.gated_cycles[b] += cycles

    def _claim(self, bank: int, word: int, cycle: int, what: str) -> None:
        if not 0 <= bank < N_BANKS:
            raise AddressError(f"cycle {cycle}: no bank {bank}")
        if not 0 <= word < BANK_WORDS:
            raise AddressError(f"cycle {cycle}: word {word} out of range in bank {bank}")
        if not self.power[bank]:
            raise PoweredOffError(f"cycle {cycle}: {what} of powered-off bank {bank}")
        if self._last_access[bank] == cycle:
            raise PortConflictError(
                f"cycle {cycle}: second access to single-port bank {bank}")
        self._last_access[bank] = cycle

    def read_word(self, bank: int, word: int, cycle: int) -> np.ndarray:
        self._claim(bank, word, cycle, "read")
        self.reads[bank] += 1
        return self.data[bank, word].copy()

    def write_word(self, bank: int, word: int, bits, cycle: int) -> None:
        self._claim(bank, word, cycle, "write")
        self.writes[bank] += 1
        self.data[bank, word] = np.asarray(bits, dtype=np.uint8)

    # -- whole-map helpers (untimed: preload and inspection only) ----------

    def store_map(self, fmap, cursor: Cursor) -> None:
        """Preload a (positions, channels) bit map at ``cursor``."""
        for i, w in enumerate(pack_words(fmap)):
            b, wd = cursor.locate(i)
            self.data[b, wd] = w

    def load_map(self, cursor: Cursor, positions: int, channels: int) -> np.ndarray:
        wpp = words_per_position(channels)
        words = np.stack([self.data[cursor.locate(i)] for i in range(positions * wpp)])
        return unpack_words(words, positions, channels)

    def dump_hex(self, bank: int) -> str:
        """One 128-bit word per line as 32 hex digits; the leading bit is channel lane 0."""
        packed = np.packbits(self.data[bank], axis=1)
        return "".join(row.tobytes().hex() + "\n" for row in packed)

    def load_hex(self, bank: int, text: str) -> None:
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if len(lines) != BANK_WORDS:
            raise ValueError(f"expected {BANK_WORDS} lines, got {len(lines)}")
        raw = np.frombuffer(bytes.fromhex("".join(lines)), dtype=np.uint8)
        self.data[bank] = np.unpackbits(raw.reshape(BANK_WORDS, WORD_BITS // 8), axis=1)


def pack_words(fmap) -> np.ndarray:
    """(positions, channels) bits -> (positions * wpp, 128) words."""
    fmap = np.asarray(fmap, dtype=np.uint8)
    positions, channels = fmap.shape
    wpp = words_per_position(channels)
    padded = np.zeros((positions, wpp * WORD_BITS), dtype=np.uint8)
    padded[:, :channels] = fmap
    return padded.reshape(positions * wpp, WORD_BITS)


def unpack_words(words, positions: int, channels: int) -> np.ndarray:
    wpp = words_per_position(channels)
    words = np.asarray(words, dtype=np.uint8).reshape(positions, wpp * WORD_BITS)
    return words[:, :channels].copy()


class WeightSram:
    """512 rows x 1024 bits of TWM-encoded macro row images."""

    def __init__(self, image=None):
        self.rows = np.zeros((WSRAM_ROWS, ROW_BITS), dtype=np.uint8)
        if image is not None:
            image = np.asarray(image, dtype=np.uint8)
            if image.shape != self.rows.shape:
                raise ValueError(f"weight SRAM image must be {self.rows.shape}, got {image.shape}")
            self.rows[:] = image
        self.read_count = 0

    def store_rows(self, row: int, rows) -> None:
        rows = np.asarray(rows, dtype=np.uint8)
        if row < 0 or row + len(rows) > WSRAM_ROWS:
            raise AddressError(f"weight SRAM rows {row}..{row + len(rows) - 1} out of range")
        self.rows[row:row + len(rows)] = rows

    def fetch_weight_rows(self, row: int, count: int) -> np.ndarray:
        if count < 1 or row < 0 or row + count > WSRAM_ROWS:
            raise AddressError(f"weight SRAM fetch {row}+{count} exceeds {WSRAM_ROWS} rows")
        self.read_count += count
        return self.rows[row:row + count].copy()


class LineBuffer:
    """1024-bit register driving the wordlines; bit j drives wordline j."""

    def __init__(self):
        self.bits = np.zeros(LB_BITS, dtype=np.uint8)

    def load(self, base: int, bits) -> None:
        bits = np.asarray(bits, dtype=np.uint8)
        if base < 0 or base + len(bits) > LB_BITS:
            raise AddressError(f"line buffer load {base}+{len(bits)} exceeds {LB_BITS} bits")
        self.bits[base:base + len(bits)] = bits

    def shift_in(self, base: int, length: int, bits) -> None:
        """Shift window ``[base, base+length)`` toward ``base`` by len(bits), append bits."""
        bits = np.asarray(bits, dtype=np.uint8)
        n = len(bits)
        if n > length or base < 0 or base + length > LB_BITS:
            raise AddressError(f"line buffer shift of {n} bits into {base}+{length}")
        window = self.bits[base:base + length]
        window[:length - n] = window[n:].copy()
        window[length - n:] = bits
