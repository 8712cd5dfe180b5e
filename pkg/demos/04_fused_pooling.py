"""Pooling in the write path versus a separate bypass pass."""

import numpy as np

from pscnn import Conv1d, ModelSpec, map_model, simulate

model = ModelSpec(200, 32, [Conv1d(32, 64, 5, pool=4), Conv1d(64, 16, 3, pool=2)]).randomize(0)
x = np.random.default_rng(0).integers(0, 2, (200, 32)).astype(np.uint8)

fused, f_out = simulate(map_model(model, fused=True), x)
unfused, u_out = simulate(map_model(model, fused=False), x)

assert all(np.array_equal(f_out[i], u_out[i]) for i in f_out)
print(f"fused   {fused.cycles:6d} cycles, {sum(fused.reads):5d} reads, {sum(fused.writes):5d} writes")
print(f"unfused {unfused.cycles:6d} cycles, {sum(unfused.reads):5d} reads, {sum(unfused.writes):5d} writes")
print(f"latency reduction {100 * (1 - fused.cycles / unfused.cycles):.1f}%")
print("per-instruction cycles (unfused):", unfused.instr_cycles)
