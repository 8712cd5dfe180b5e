"""Cycle-level simulator and compiler for a binary CNN compute-in-memory processor."""

from .cim import CimArray, MappingMode, VariationParams, monte_carlo_error_rate
from .compiler import MappedModel, map_model, validate
from .controller import SimStats, System, compute_throughput, model_energy, simulate
from .model import Conv1d, Dense, ModelSpec, Pool
from .oracle import ref_infer

__all__ = [
    "CimArray", "MappingMode", "VariationParams", "monte_carlo_error_rate",
    "MappedModel", "map_model", "validate",
    "SimStats", "System", "compute_throughput", "model_energy", "simulate",
    "Conv1d", "Dense", "ModelSpec", "Pool", "ref_infer",
]
