"""32-bit instruction words for the PSCNN controller.

Four instruction types share a 3-bit opcode in bits [31:29]:

    000  MAC     mode[28:27] n_out-1[26:17] wl_count-1[16:7]
                 col_groups-1[6:5] log2(pool)[4:3] log2(stride)[2:1] 0[0]
    001  WREP    cim_row_base[28:19] row_count-1[18:9] wsram_row[8:0]
    010  PTR     ifm_bank[28:27] ifm_word[26:18] ofm_bank[17:16]
                 ofm_word[15:7] ifm_span[6] ofm_span[5] 0[4:0]
    111  HALT    zero payload

Counts are stored biased by -1 so 1..1024 fits in ten bits.  Programs are
straight-line; there are no branches.
"""

from __future__ import annotations

import enum
import re
import struct
import warnings
from dataclasses import dataclass
from typing import Iterable, Union


class EncodingError(ValueError):
    """An instruction field is outside its encodable range."""

    def __init__(self, field: str, value, message: str | None = None):
        self.field = field
        self.value = value
        super().__init__(message or f"field {field!r} out of range: {value!r}")


class DecodeError(ValueError):
    """A word does not decode to a valid instruction."""

    def __init__(self, word: int, message: str):
        self.word = word
        super().__init__(f"0x{word:08X}: {message}")


class IllegalOpcodeError(DecodeError):
    def __init__(self, word: int):
        super().__init__(word, f"illegal opcode {word >> 29:03b}")


class AssemblyError(ValueError):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class MacMode(enum.IntEnum):
    CONV = 0        # convolution only
    FUSED = 1       # convolution with pooling in the write path
    BYPASS = 2      # pooling only, macro bypassed


OP_MAC = 0b000
OP_WREP = 0b001
OP_PTR = 0b010
OP_HALT = 0b111

POW2 = (1, 2, 4, 8)


@dataclass(frozen=True)
class Mac:
    mode: MacMode = MacMode.CONV
    n_out: int = 1
    wl_count: int = 1
    col_groups: int = 1
    pool_window: int = 1
    stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", MacMode(self.mode))
        _check_range("n_out", self.n_out, 1, 1024)
        _check_range("wl_count", self.wl_count, 1, 1024)
        _check_range("col_groups", self.col_groups, 1, 4)
        if self.pool_window not in POW2:
            raise EncodingError("pool_window", self.pool_window)
        if self.stride not in POW2:
            raise EncodingError("stride", self.stride)
        if (self.pool_window == 1) != (self.mode == MacMode.CONV):
            raise EncodingError(
                "pool_window", self.pool_window,
                f"pool_window={self.pool_window} is inconsistent with mode {self.mode.name}",
            )


@dataclass(frozen=True)
class WeightReplace:
    cim_row_base: int
    row_count: int
    wsram_row: int

    def __post_init__(self):
        _check_range("cim_row_base", self.cim_row_base, 0, 1023)
        _check_range("row_count", self.row_count, 1, 1024)
        _check_range("wsram_row", self.wsram_row, 0, 511)
        if self.cim_row_base + self.row_count > 1024:
            raise EncodingError("row_count", self.row_count,
                                "cim_row_base + row_count exceeds 1024")
        if self.wsram_row + self.row_count > 512:
            raise EncodingError("row_count", self.row_count,
                                "wsram_row + row_count exceeds 512")


@dataclass(frozen=True)
class Pointer:
    ifm_bank: int
    ifm_word: int
    ofm_bank: int
    ofm_word: int
    ifm_span: bool = False
    ofm_span: bool = False

    def __post_init__(self):
        _check_range("ifm_bank", self.ifm_bank, 0, 3)
        _check_range("ifm_word", self.ifm_word, 0, 511)
        _check_range("ofm_bank", self.ofm_bank, 0, 3)
        _check_range("ofm_word", self.ofm_word, 0, 511)
        object.__setattr__(self, "ifm_span", bool(self.ifm_span))
        object.__setattr__(self, "ofm_span", bool(self.ofm_span))
        if self.ifm_span and self.ifm_bank == 3:
            raise EncodingError("ifm_span", 1, "IFM cannot span past bank 3")
        if self.ofm_span and self.ofm_bank == 3:
            raise EncodingError("ofm_span", 1, "OFM cannot span past bank 3")


@dataclass(frozen=True)
class Halt:
    pass


Instruction = Union[Mac, WeightReplace, Pointer, Halt]


def _check_range(name, value, lo, hi):
    if not isinstance(value, int) or isinstance(value, bool) or not lo <= value <= hi:
        raise EncodingError(name, value, f"field {name!r}={value!r} not in [{lo}, {hi}]")


def _log2(v: int) -> int:
    return POW2.index(v)


def encode(instr: Instruction) -> int:
    if isinstance(instr, Mac):
        return ((OP_MAC << 29) | (int(instr.mode) << 27) | ((instr.n_out - 1) << 17)
                | ((instr.wl_count - 1) << 7) | ((instr.col_groups - 1) << 5)
                | (_log2(instr.pool_window) << 3) | (_log2(instr.stride) << 1))
    if isinstance(instr, WeightReplace):
        return ((OP_WREP << 29) | (instr.cim_row_base << 19)
                | ((instr.row_count - 1) << 9) | instr.wsram_row)
    if isinstance(instr, Pointer):
        return ((OP_PTR << 29) | (instr.ifm_bank << 27) | (instr.ifm_word << 18)
                | (instr.ofm_bank << 16) | (instr.ofm_word << 7)
                | (int(instr.ifm_span) << 6) | (int(instr.ofm_span) << 5))
    if isinstance(instr, Halt):
        return OP_HALT << 29
    raise TypeError(f"not an instruction: {instr!r}")


def decode(word: int) -> Instruction:
    if not 0 <= word <= 0xFFFFFFFF:
        raise DecodeError(word & 0xFFFFFFFF, "word is not 32 bits")
    op = word >> 29
    try:
        if op == OP_MAC:
            if word & 1:
                raise DecodeError(word, "reserved MAC bit 0 is set")
            mode = (word >> 27) & 0b11
            if mode == 3:
                raise DecodeError(word, "reserved MAC mode 3")
            return Mac(mode=MacMode(mode),
                       n_out=((word >> 17) & 0x3FF) + 1,
                       wl_count=((word >> 7) & 0x3FF) + 1,
                       col_groups=((word >> 5) & 0b11) + 1,
                       pool_window=POW2[(word >> 3) & 0b11],
                       stride=POW2[(word >> 1) & 0b11])
        if op == OP_WREP:
            return WeightReplace(cim_row_base=(word >> 19) & 0x3FF,
                                 row_count=((word >> 9) & 0x3FF) + 1,
                                 wsram_row=word & 0x1FF)
        if op == OP_PTR:
            if word & 0x1F:
                raise DecodeError(word, "reserved PTR bits [4:0] are set")
            return Pointer(ifm_bank=(word >> 27) & 0b11,
                           ifm_word=(word >> 18) & 0x1FF,
                           ofm_bank=(word >> 16) & 0b11,
                           ofm_word=(word >> 7) & 0x1FF,
                           ifm_span=bool((word >> 6) & 1),
                           ofm_span=bool((word >> 5) & 1))
        if op == OP_HALT:
            if word & 0x1FFFFFFF:
                raise DecodeError(word, "HALT payload must be zero")
            return Halt()
    except EncodingError as e:
        raise DecodeError(word, str(e)) from None
    raise IllegalOpcodeError(word)


# -- assembly text ----------------------------------------------------------

_MODE_NAMES = {"conv": MacMode.CONV, "fused": MacMode.FUSED, "pool": MacMode.BYPASS}
_MODE_TEXT = {v: k for k, v in _MODE_NAMES.items()}

# operand name -> (required, range check); ranges are re-checked by the dataclasses
_OPERANDS = {
    "MAC": {"mode": False, "n_out": True, "wl_count": False, "col_groups": False,
            "pool_window": False, "stride": False},
    "WREP": {"cim_row_base": True, "row_count": True, "wsram_row": True},
    "PTR": {"ifm_bank": True, "ifm_word": True, "ofm_bank": True, "ofm_word": True,
            "ifm_span": False, "ofm_span": False},
    "HALT": {},
}
_CLASSES = {"MAC": Mac, "WREP": WeightReplace, "PTR": Pointer, "HALT": Halt}
_LIMITS = {
    "n_out": (1, 1024), "wl_count": (1, 1024), "col_groups": (1, 4),
    "cim_row_base": (0, 1023), "row_count": (1, 1024), "wsram_row": (0, 511),
    "ifm_bank": (0, 3), "ifm_word": (0, 511), "ofm_bank": (0, 3), "ofm_word": (0, 511),
    "ifm_span": (0, 1), "ofm_span": (0, 1),
}
_OPERAND_RE = re.compile(r"^([a-z_]+)=(\S+)$")


def _parse_line(lineno: int, line: str) -> Instruction | None:
    line = line.split("#", 1)[0].strip()
    if not line:
        return None
    mnemonic, *ops = line.split()
    mnemonic = mnemonic.upper()
    if mnemonic not in _OPERANDS:
        raise AssemblyError(lineno, f"unknown mnemonic {mnemonic!r}")
    allowed = _OPERANDS[mnemonic]
    fields = {}
    for op in ops:
        m = _OPERAND_RE.match(op.lower())
        if not m:
            raise AssemblyError(lineno, f"malformed operand {op!r}")
        key, raw = m.groups()
        if key not in allowed:
            raise AssemblyError(lineno, f"{mnemonic} has no operand {key!r}")
        if key in fields:
            raise AssemblyError(lineno, f"duplicate operand {key!r}")
        if key == "mode":
            if raw not in _MODE_NAMES:
                raise AssemblyError(lineno, f"unknown MAC mode {raw!r}")
            fields[key] = _MODE_NAMES[raw]
            continue
        try:
            value = int(raw, 0)
        except ValueError:
            raise AssemblyError(lineno, f"operand {key!r} is not an integer: {raw!r}") from None
        if key in _LIMITS:
            lo, hi = _LIMITS[key]
            if not lo <= value <= hi:
                raise AssemblyError(lineno, f"operand {key}={value} not in [{lo}, {hi}]")
        fields[key] = value
    missing = [k for k, req in allowed.items() if req and k not in fields]
    if missing:
        raise AssemblyError(lineno, f"{mnemonic} missing operand(s): {', '.join(missing)}")
    if mnemonic == "MAC" and "pool_window" not in fields and fields.get("mode", MacMode.CONV) != MacMode.CONV:
        raise AssemblyError(lineno, "pooling MAC needs pool_window")
    try:
        return _CLASSES[mnemonic](**fields)
    except EncodingError as e:
        raise AssemblyError(lineno, str(e)) from None


def parse(text: str) -> list[Instruction]:
    """Parse assembly text into instructions (no implicit HALT)."""
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        instr = _parse_line(lineno, line)
        if instr is not None:
            out.append(instr)
    return out


def assemble(text: str) -> list[int]:
    """Assemble source text into 32-bit words.

    One instruction per line, ``key=value`` operands, ``#`` comments,
    case-insensitive. A HALT is appended (with a warning) if the source does
    not end with one.
    """
    instrs = parse(text)
    if not instrs or not isinstance(instrs[-1], Halt):
        warnings.warn("program does not end with HALT; appending one", stacklevel=2)
        instrs.append(Halt())
    return [encode(i) for i in instrs]


def format_instruction(instr: Instruction) -> str:
    if isinstance(instr, Mac):
        return (f"MAC mode={_MODE_TEXT[instr.mode]} n_out={instr.n_out} "
                f"wl_count={instr.wl_count} col_groups={instr.col_groups} "
                f"pool_window={instr.pool_window} stride={instr.stride}")
    if isinstance(instr, WeightReplace):
        return (f"WREP cim_row_base={instr.cim_row_base} row_count={instr.row_count} "
                f"wsram_row={instr.wsram_row}")
    if isinstance(instr, Pointer):
        return (f"PTR ifm_bank={instr.ifm_bank} ifm_word={instr.ifm_word} "
                f"ofm_bank={instr.ofm_bank} ofm_word={instr.ofm_word} "
                f"ifm_span={int(instr.ifm_span)} ofm_span={int(instr.ofm_span)}")
    if isinstance(instr, Halt):
        return "HALT"
    raise TypeError(f"not an instruction: {instr!r}")


def disassemble(words: Iterable[int]) -> str:
    return "".join(format_instruction(decode(w)) + "\n" for w in words)


# -- program binaries -------------------------------------------------------

def to_bytes(words: Iterable[int]) -> bytes:
    words = list(words)
    return struct.pack(f"<{len(words)}I", *words)


def from_bytes(data: bytes) -> list[int]:
    if len(data) % 4:
        raise ValueError(f"program binary length {len(data)} is not a multiple of 4")
    return list(struct.unpack(f"<{len(data) // 4}I", data))
