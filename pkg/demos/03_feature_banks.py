"""Pointer instructions, bank power gating and the single-port rule."""

import numpy as np

from pscnn.isa import Pointer
from pscnn.memory import FeatureSramSystem, PortConflictError, PoweredOffError

mem = FeatureSramSystem()
mem.apply_pointer(Pointer(0, 0, 1, 0))
print("PTR 0 -> 1          power:", mem.power)
mem.apply_pointer(Pointer(0, 0, 2, 0, ifm_span=True))
print("PTR 0-1 (span) -> 2 power:", mem.power)

mem.tick(100)
print("gated cycles after 100 cycles:", mem.gated_cycles)

word = np.random.default_rng(1).integers(0, 2, 128)
mem.write_word(2, 0, word, cycle=100)
for attempt, label in ((lambda: mem.write_word(2, 1, word, cycle=100), "same bank, same cycle"),
                       (lambda: mem.read_word(3, 0, cycle=101), "gated bank")):
    try:
        attempt()
    except (PortConflictError, PoweredOffError) as e:
        print(f"{label:22s} -> {type(e).__name__}: {e}")

print("first line of the bank-2 hex dump:", mem.dump_hex(2).splitlines()[0])
