"""Representative keyword-spotting network (a reconstruction, not a trained model).

Only aggregate figures of the reference network are known: 652K binary
weights, about 350M MACs per inference and 12 output classes. The layer
shapes below reproduce those aggregates on this mapping:

* exactly 512K weights fill the macro (the rectangles tile the
  1024 x 512 pair grid with only a little waste), and
* one 140 x 512 layer (140K weights, 280 weight-SRAM rows) is swapped in
  by WREP.

The MAC count is 349,586,432, about 0.12% below 350M.
"""

from __future__ import annotations

from .model import Conv1d, Dense, ModelSpec, Pool

INPUT_LEN = 968
INPUT_CHANNELS = 128

# (C_in, C_out, K, fused pool)
CONV_STACK = [
    (128, 116, 8, None),
    (116, 96, 8, 2),
    (96, 96, 1, None),
    (96, 32, 8, None),
    (32, 32, 8, None),
    (32, 128, 8, None),
    (128, 128, 6, None),
    (128, 140, 4, 2),
    (140, 512, 2, 2),
    (512, 128, 1, 4),
]
CLASSES = 12


def kws_model(seed: int = 0) -> ModelSpec:
    """The reconstruction with seeded random +-1 weights."""
    layers = [Conv1d(ci, co, k, pool=p) for ci, co, k, p in CONV_STACK]
    layers.append(Pool(8))
    layers.append(Dense(4 * 128, CLASSES))
    return ModelSpec(INPUT_LEN, INPUT_CHANNELS, layers).randomize(seed)
