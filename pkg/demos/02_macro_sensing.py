"""One bitline pair computing a binary dot product, and why TWM senses better."""

import numpy as np

from pscnn.cim import CimArray, MappingMode, weight_rows

rng = np.random.default_rng(0)
n = 16
w = rng.choice([-1, 1], n)
x = np.zeros(1024, dtype=np.uint8)
x[:n] = rng.integers(0, 2, n)

twm = CimArray(MappingMode.TWM).program_rows(0, weight_rows(w, MappingMode.TWM))
bwm = CimArray(MappingMode.BWM).program_rows(0, weight_rows(w, MappingMode.BWM))

dot = int(x[:n] @ w)
print("weights       ", w)
print("inputs        ", x[:n])
print("sum(x*w)      ", dot, "-> output bit", int(dot >= 0))
print("macro output  ", twm.mac_cycle(x, 0, n, 0)[0])
print("TWM margin    ", twm.sensing_margin(x, 0, n, 0))
print("BWM margin    ", bwm.sensing_margin(x, 0, n, 0))

# a tie still resolves to 1
tie = CimArray().program_rows(0, weight_rows(np.array([1, -1]), MappingMode.TWM))
print("tie (+1,-1)·(1,1) ->", tie.mac_cycle(np.r_[1, 1, np.zeros(1022, np.uint8)], 0, 2, 0)[0])
