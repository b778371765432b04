"""Pseudo-seed generation and evaluation for unsupervised multimodal
entity alignment over precomputed per-modality embeddings."""

from .errors import ConfigError, DataError, PsqeError
from .kg import AlignmentMap, MultiModalKG, load_kg, save_kg, validate_kg
from .similarity import (ModalityWeights, SeedPair, SeedSet, add_pairs,
                         cosine_sim_matrix, fused_features, fused_sim, uvp_seeds)
from .synth import SynthConfig, synth_generate
from .pipeline import PipelineConfig, RunRecord, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "AlignmentMap", "ConfigError", "DataError", "ModalityWeights",
    "MultiModalKG", "PipelineConfig", "PsqeError", "RunRecord", "SeedPair",
    "SeedSet", "SynthConfig", "add_pairs", "cosine_sim_matrix",
    "fused_features", "fused_sim", "load_kg", "run_pipeline", "save_kg",
    "synth_generate", "uvp_seeds", "validate_kg",
]
