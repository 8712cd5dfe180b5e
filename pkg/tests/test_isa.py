import warnings
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from pscnn import isa
from pscnn.isa import Halt, Mac, MacMode, Pointer, WeightReplace

FIXTURES = Path(__file__).parent / "fixtures"


def pack_fields(*fields):
    """Independent reference packer: (value, width) pairs, MSB first."""
    bits = "".join(format(v, f"0{w}b") for v, w in fields)
    assert len(bits) == 32
    return int(bits, 2)


# -- strategies ---------------------------------------------------------------

pow2 = st.sampled_from([1, 2, 4, 8])


@st.composite
def macs(draw):
    mode = draw(st.sampled_from(list(MacMode)))
    pool = 1 if mode == MacMode.CONV else draw(st.sampled_from([2, 4, 8]))
    return Mac(mode, draw(st.integers(1, 1024)), draw(st.integers(1, 1024)),
               draw(st.integers(1, 4)), pool, draw(pow2))


@st.composite
def wreps(draw):
    count = draw(st.integers(1, 512))
    return WeightReplace(draw(st.integers(0, 1024 - count)), count,
                         draw(st.integers(0, 512 - count)))


@st.composite
def pointers(draw):
    ib, ob = draw(st.integers(0, 3)), draw(st.integers(0, 3))
    return Pointer(ib, draw(st.integers(0, 511)), ob, draw(st.integers(0, 511)),
                   draw(st.booleans()) and ib < 3, draw(st.booleans()) and ob < 3)


instructions = st.one_of(macs(), wreps(), pointers(), st.just(Halt()))


# -- encode -------------------------------------------------------------------

def test_halt_word():
    assert isa.encode(Halt()) == 0xE000_0000


def test_minimal_mac_is_zero():
    assert isa.encode(Mac()) == 0


def test_wrep_overflow_region_word():
    expected = pack_fields((0b001, 3), (884, 10), (140 - 1, 10), (0, 9))
    assert isa.encode(WeightReplace(884, 140, 0)) == expected == 0x3BA11600


@given(macs())
def test_mac_layout(m):
    lg = {1: 0, 2: 1, 4: 2, 8: 3}
    assert isa.encode(m) == pack_fields(
        (0, 3), (int(m.mode), 2), (m.n_out - 1, 10), (m.wl_count - 1, 10),
        (m.col_groups - 1, 2), (lg[m.pool_window], 2), (lg[m.stride], 2), (0, 1))


@given(pointers())
def test_pointer_layout(p):
    assert isa.encode(p) == pack_fields(
        (0b010, 3), (p.ifm_bank, 2), (p.ifm_word, 9), (p.ofm_bank, 2), (p.ofm_word, 9),
        (int(p.ifm_span), 1), (int(p.ofm_span), 1), (0, 5))


@pytest.mark.parametrize("make, field", [
    (lambda: Mac(n_out=1025), "n_out"),
    (lambda: Mac(wl_count=0), "wl_count"),
    (lambda: Mac(col_groups=5), "col_groups"),
    (lambda: Mac(stride=3), "stride"),
    (lambda: Mac(MacMode.CONV, pool_window=2), "pool_window"),
    (lambda: Mac(MacMode.BYPASS, pool_window=1), "pool_window"),
    (lambda: WeightReplace(1000, 100, 0), "row_count"),
    (lambda: WeightReplace(0, 100, 500), "row_count"),
    (lambda: WeightReplace(0, 1, 512), "wsram_row"),
    (lambda: Pointer(4, 0, 0, 0), "ifm_bank"),
    (lambda: Pointer(0, 512, 1, 0), "ifm_word"),
    (lambda: Pointer(0, 0, 3, 0, ofm_span=True), "ofm_span"),
])
def test_encoding_errors_name_the_field(make, field):
    with pytest.raises(isa.EncodingError) as e:
        make()
    assert e.value.field == field


# -- decode -------------------------------------------------------------------

def test_decode_examples():
    assert isa.decode(0xE000_0000) == Halt()
    assert isa.decode(0) == Mac()


@pytest.mark.parametrize("op", [0b011, 0b100, 0b101, 0b110])
def test_illegal_opcodes(op):
    word = op << 29 | 0x1234
    with pytest.raises(isa.IllegalOpcodeError) as e:
        isa.decode(word)
    assert e.value.word == word


@pytest.mark.parametrize("word", [
    0x0000_0001,            # MAC reserved bit
    0x1800_0000,            # MAC mode 3
    0x0800_0000,            # fused with pool_window 1
    0x4000_0001,            # PTR reserved bits
    0xE000_0001,            # HALT payload
    1 << 29 | 1023 << 19 | 1 << 9,  # WREP rows 1023..1024 overflow the array
])
def test_invalid_words_rejected(word):
    with pytest.raises(isa.DecodeError):
        isa.decode(word)


@settings(max_examples=500)
@given(instructions)
def test_round_trip_instruction(i):
    assert isa.decode(isa.encode(i)) == i


@settings(max_examples=2000)
@given(st.integers(0, 2**32 - 1))
def test_every_word_decodes_or_raises(word):
    try:
        i = isa.decode(word)
    except isa.DecodeError:
        return
    assert isa.encode(i) == word


# -- assembly -----------------------------------------------------------------

def test_assemble_halt():
    assert isa.assemble("HALT") == [0xE000_0000]


def test_assemble_three_words():
    src = ("PTR ifm_bank=0 ifm_word=0 ofm_bank=1 ofm_word=0\n"
           "MAC mode=conv n_out=16 wl_count=64 col_groups=1\nHALT")
    words = isa.assemble(src)
    assert [isa.decode(w) for w in words] == [Pointer(0, 0, 1, 0), Mac(n_out=16, wl_count=64),
                                             Halt()]


def test_assemble_case_and_comments():
    assert isa.assemble("  halt   # stop\n# nothing\n") == [0xE000_0000]
    assert isa.assemble("mac MODE=POOL n_out=4 pool_window=2\nHALT")[0] == isa.encode(
        Mac(MacMode.BYPASS, 4, pool_window=2))


def test_missing_halt_appended_with_warning():
    with pytest.warns(UserWarning):
        words = isa.assemble("MAC n_out=2")
    assert words[-1] == 0xE000_0000 and len(words) == 2


@pytest.mark.parametrize("src, line", [
    ("MAC n_out=2000", 1),
    ("HALT\nFOO x=1", 2),
    ("PTR ifm_bank=0 ifm_word=0 ofm_bank=1", 1),
    ("\n\nWREP cim_row_base=0 row_count=1 wsram_row=600", 3),
    ("MAC mode=fused n_out=3", 1),
    ("MAC n_out=abc", 1),
])
def test_assembly_errors_carry_line(src, line):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(isa.AssemblyError) as e:
            isa.assemble(src)
    assert e.value.lineno == line


@settings(max_examples=200)
@given(st.lists(instructions, max_size=30))
def test_assemble_disassemble_round_trip(body):
    words = [isa.encode(i) for i in body] + [0xE000_0000]
    assert isa.assemble(isa.disassemble(words)) == words


def test_binary_little_endian():
    assert isa.to_bytes([0xE000_0000, 1]) == b"\x00\x00\x00\xe0\x01\x00\x00\x00"
    assert isa.from_bytes(isa.to_bytes([7, 0xE000_0000])) == [7, 0xE000_0000]
    with pytest.raises(ValueError):
        isa.from_bytes(b"\x00\x00\x00")


def test_golden_fixture_bytes():
    words = isa.assemble((FIXTURES / "golden.asm").read_text())
    assert len(words) >= 20
    assert isa.to_bytes(words) == (FIXTURES / "golden.bin").read_bytes()
