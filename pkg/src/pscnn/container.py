"""Compiled-model archive.

A zip file holding a JSON manifest, both program variants (pooling fused
into the write path, and pooling as separate bypass passes) with their
layer side-tables and bank plans, the macro preload image, the weight-SRAM
image, and the source model so results can be checked against the oracle.
"""

from __future__ import annotations

import json
import tempfile
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import isa
from .compiler import LayerEntry, MappedModel, map_model
from .memory import Cursor
from .model import ModelSpec, load_model, save_model

FORMAT = "pscnn-container"
VERSION = 1
VARIANTS = ("fused", "unfused")


@dataclass
class Program:
    words: list
    layer_table: list
    bank_plan: list


@dataclass
class Container:
    model: ModelSpec
    programs: dict
    macro_image: np.ndarray
    wsram_image: np.ndarray
    input_cursor: Cursor
    manifest: dict

    def mapped(self, variant: str = "fused") -> MappedModel:
        """A MappedModel view usable by the controller."""
        p = self.programs[variant]
        return MappedModel(lowered=[], placements={}, fused=variant == "fused",
                           program=p.words, layer_table=p.layer_table, bank_plan=p.bank_plan,
                           macro_image=self.macro_image, wsram_image=self.wsram_image,
                           input_cursor=self.input_cursor)


def _bits(a) -> bytes:
    return np.packbits(np.asarray(a, dtype=np.uint8), axis=1).tobytes()


def _unbits(data: bytes, rows: int) -> np.ndarray:
    raw = np.frombuffer(data, dtype=np.uint8)
    if raw.size != rows * 128:
        raise ValueError(f"image has {raw.size} bytes, expected {rows * 128}")
    return np.unpackbits(raw.reshape(rows, 128), axis=1)


def build(model: ModelSpec) -> tuple[MappedModel, MappedModel]:
    return map_model(model, fused=True), map_model(model, fused=False)


def save_container(model: ModelSpec, path) -> dict:
    fused, unfused = build(model)
    cur = fused.input_cursor
    manifest = {
        "format": FORMAT, "version": VERSION,
        "input": {"positions": model.input_len, "channels": model.input_channels,
                  "bank": cur.bank, "word": cur.word, "span": cur.span},
        "macro_weights": fused.macro_weights, "wsram_weights": fused.wsram_weights,
        "wsram_rows": fused.wsram_rows_used,
        "placements": {str(fused.lowered[i].model_layer): vars(p)
                       for i, p in sorted(fused.placements.items())},
        "programs": {},
    }
    with tempfile.TemporaryDirectory() as tmp:
        save_model(model, Path(tmp) / "model.ini", Path(tmp) / "weights.bin")
        model_ini = (Path(tmp) / "model.ini").read_bytes()
        weights = (Path(tmp) / "weights.bin").read_bytes()
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as z:
        for name, mm in zip(VARIANTS, (fused, unfused)):
            z.writestr(f"{name}/program.bin", isa.to_bytes(mm.program))
            z.writestr(f"{name}/layers.json",
                       json.dumps([e.to_dict() for e in mm.layer_table], indent=1))
            z.writestr(f"{name}/bankplan.json", json.dumps(mm.bank_plan, indent=1))
            manifest["programs"][name] = {"words": len(mm.program), "macs": len(mm.layer_table),
                                          "wrep": mm.n_wrep}
        z.writestr("macro.img", _bits(fused.macro_image))
        z.writestr("wsram.img", _bits(fused.wsram_image))
        z.writestr("model.ini", model_ini)
        z.writestr("weights.bin", weights)
        z.writestr("manifest.json", json.dumps(manifest, indent=1))
    return manifest


def load_container(path) -> Container:
    with zipfile.ZipFile(path) as z:
        manifest = json.loads(z.read("manifest.json"))
        if manifest.get("format") != FORMAT:
            raise ValueError(f"{path}: not a {FORMAT} archive")
        programs = {}
        for name in VARIANTS:
            programs[name] = Program(
                isa.from_bytes(z.read(f"{name}/program.bin")),
                [LayerEntry.from_dict(d) for d in json.loads(z.read(f"{name}/layers.json"))],
                json.loads(z.read(f"{name}/bankplan.json")))
        macro = _unbits(z.read("macro.img"), 1024)
        wsram = _unbits(z.read("wsram.img"), 512)
        with tempfile.TemporaryDirectory() as tmp:
            (Path(tmp) / "model.ini").write_bytes(z.read("model.ini"))
            (Path(tmp) / "weights.bin").write_bytes(z.read("weights.bin"))
            model = load_model(Path(tmp) / "model.ini", Path(tmp) / "weights.bin")
    inp = manifest["input"]
    return Container(model, programs, macro, wsram,
                     Cursor(inp["bank"], inp["word"], inp["span"]), manifest)
