"""Named, reproducible configurations for the synthetic experiments.

"zero-noise": both graphs observe identical latents; every stage should
recover only true pairs.

"imbalanced": a dense region with clean-ish visuals plus a sparse region
whose visuals are heavily noised, with low-dimensional but clean
attribute/relation signals. This realizes the precision-vs-coverage
tension the seed strategies are compared on.
"""

from __future__ import annotations

import json
from pathlib import Path

from .enhance import TrainConfig
from .errors import ConfigError
from .expansion import ExpansionConfig
from .pipeline import PipelineConfig
from .synth import SynthConfig


def zero_noise_config(rng_seed: int = 42, out_dir: str | None = None) -> PipelineConfig:
    synth = SynthConfig(
        n_pairs=1000,
        dim_visual=32, dim_attr=16, dim_rel=16,
        noise_visual=0.0, noise_attr=0.0, noise_rel=0.0,
        cluster_count=3, cluster_sep=1.0, intra_cluster_std=0.25,
        degree_profile="uniform", mean_degree=6.0,
        dense_fraction=1.0, dense_edge_fraction=0.0,
        rng_seed=rng_seed,
    )
    return PipelineConfig(
        synth=synth,
        n_init=1000,
        train=TrainConfig(epochs=30, lr=0.01, batch_size=2000,
                          hidden_dim=64, tau=0.1, rng_seed=rng_seed),
        expansion=ExpansionConfig(eta=0.8),
        rng_seed=rng_seed,
        out_dir=out_dir,
    )


def imbalanced_config(rng_seed: int = 42, out_dir: str | None = None) -> PipelineConfig:
    synth = SynthConfig(
        n_pairs=300,
        dim_visual=32, dim_attr=4, dim_rel=4,
        noise_visual=0.25, noise_attr=0.25, noise_rel=0.25,
        sparse_noise_scale=(3.5, 1.0, 1.0),
        cluster_count=4, cluster_sep=1.0, intra_cluster_std=0.25,
        degree_profile="uniform", mean_degree=6.0,
        dense_fraction=0.6, dense_edge_fraction=0.35,
        rng_seed=rng_seed,
    )
    return PipelineConfig(
        synth=synth,
        n_init=90,
        train=TrainConfig(epochs=150, lr=0.01, batch_size=2000,
                          hidden_dim=32, tau=0.1, rng_seed=rng_seed),
        expansion=ExpansionConfig(eta=0.55),
        rng_seed=rng_seed,
        out_dir=out_dir,
    )


PRESETS = {
    "zero-noise": zero_noise_config,
    "imbalanced": imbalanced_config,
}


def get_preset(name: str, rng_seed: int = 42,
               out_dir: str | None = None) -> PipelineConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name](rng_seed=rng_seed, out_dir=out_dir)


def write_preset(name: str, path: str | Path) -> None:
    cfg = get_preset(name)
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
