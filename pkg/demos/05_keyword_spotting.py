"""Compile the reconstructed keyword-spotting network, run it, check it."""

import numpy as np

from pscnn import compute_throughput, map_model, ref_infer, simulate
from pscnn.controller import model_energy, COST_KEYS
from pscnn.kws import kws_model
from pscnn.oracle import count_macs

model = kws_model(seed=0)
mm = map_model(model)
print(f"{model.n_weights} weights: {mm.macro_weights} in the macro, "
      f"{mm.wsram_weights} in weight SRAM ({mm.wsram_rows_used} rows)")
for i, p in sorted(mm.placements.items()):
    layer = mm.lowered[i]
    print(f"  layer {layer.model_layer:2d}: rows {p.wl_base:4d}+{p.wl_count:<4d} "
          f"pairs {p.pair_base:3d}+{p.pair_count:<3d} {p.resident}")

x = np.random.default_rng(0).integers(0, 2, (model.input_len, model.input_channels)).astype(np.uint8)
stats, outs = simulate(mm, x)
refs = ref_infer(model, x)
assert all(np.array_equal(outs[i], r) for i, r in enumerate(refs))
print(f"all {len(refs)} layers match the reference; class bits {refs[-1][0]}")
print(f"{stats.macs} MACs (reference model: {count_macs(model)}), {stats.cycles} cycles")
print(f"{compute_throughput(stats, 10e6):.1f} GOPS at 10 MHz under the unit-cost cycle model")

costs = dict.fromkeys(COST_KEYS, 1e-6)
costs["bank_gated_cycle"] = 0.0
print(f"modeled, relative energy: {model_energy(stats, costs):.4f} uJ (toy cost table)")
