"""Assemble a short program, look at its words, and disassemble it again."""

from pscnn import isa

source = """
# two layers, ping-pong between banks 0 and 1
PTR ifm_bank=0 ifm_word=0 ofm_bank=1 ofm_word=0
MAC mode=fused n_out=16 wl_count=192 col_groups=1 pool_window=2
PTR ifm_bank=1 ifm_word=0 ofm_bank=0 ofm_word=0
WREP cim_row_base=884 row_count=140 wsram_row=0
MAC mode=conv n_out=6 wl_count=256 col_groups=2
HALT
"""

words = isa.assemble(source)
for w in words:
    print(f"0x{w:08X}  {isa.format_instruction(isa.decode(w))}")

# the text rendering is canonical: it reassembles to the same words
assert isa.assemble(isa.disassemble(words)) == words
print(f"{len(isa.to_bytes(words))} bytes, little-endian")
