import numpy as np
import pytest

from psqe.errors import ConfigError
from psqe.kg import validate_kg
from psqe.similarity import fused_sim, uvp_seeds
from psqe.synth import SynthConfig, synth_generate


def test_deterministic_given_seed():
    cfg = SynthConfig(n_pairs=25, dim_visual=6, dim_attr=3, dim_rel=3,
                      noise_visual=0.3, cluster_count=3, mean_degree=4.0,
                      rng_seed=99)
    a1, a2, at = synth_generate(cfg)
    b1, b2, bt = synth_generate(cfg)
    assert np.array_equal(a1.visual, b1.visual)
    assert np.array_equal(a2.relation, b2.relation)
    assert all(np.array_equal(x, y) for x, y in zip(a1.adjacency, b1.adjacency))
    assert at.pairs == bt.pairs


def test_generated_graphs_are_valid():
    cfg = SynthConfig(n_pairs=30, cluster_count=3, mean_degree=5.0,
                      noise_visual=0.2, dense_fraction=0.5,
                      dense_edge_fraction=0.3, rng_seed=1)
    kg1, kg2, truth = synth_generate(cfg)
    assert validate_kg(kg1) == []
    assert validate_kg(kg2) == []
    assert len(truth) == 30


def test_zero_noise_true_pairs_have_unit_fused_similarity():
    cfg = SynthConfig(n_pairs=10, cluster_count=2, mean_degree=3.0, rng_seed=4)
    kg1, kg2, truth = synth_generate(cfg)
    sim = fused_sim(kg1, kg2)
    for i, j in truth.pairs:
        assert abs(sim[i, j] - 1.0) <= 1e-12


def test_zero_noise_uvp_recovers_all_true_pairs(small_clean_pair):
    kg1, kg2, truth = small_clean_pair
    sim = fused_sim(kg1, kg2)
    for k in (10, 40):
        seeds = uvp_seeds(sim, k)
        assert len(seeds) == k
        assert all((p.e1, p.e2) in truth.as_set() for p in seeds.pairs)


def test_power_law_mean_degree_in_band():
    cfg = SynthConfig(n_pairs=1000, degree_profile="power-law",
                      power_law_exponent=2.5, mean_degree=6.0, rng_seed=3)
    kg1, _, _ = synth_generate(cfg)
    # oracle: count realized edges directly
    realized = 2.0 * len(kg1.edges()) / kg1.n_entities
    assert 5.4 <= realized <= 6.6


def test_infeasible_degree_profile_rejected():
    with pytest.raises(ConfigError, match="infeasible"):
        synth_generate(SynthConfig(n_pairs=5, mean_degree=5.0))


def test_labels_mark_region_and_cluster():
    cfg = SynthConfig(n_pairs=20, cluster_count=2, mean_degree=3.0,
                      dense_fraction=0.5, rng_seed=8)
    kg1, kg2, truth = synth_generate(cfg)
    dense1 = sum("dense" in lab for lab in kg1.labels)
    assert dense1 == 10
    # the label travels with the entity through the alignment permutation
    for i, j in truth.pairs:
        assert kg1.labels[i] == kg2.labels[j]


def test_dense_region_gets_extra_edges():
    cfg = SynthConfig(n_pairs=200, mean_degree=6.0, dense_fraction=0.5,
                      dense_edge_fraction=0.5, noise_visual=0.1, rng_seed=2)
    kg1, _, _ = synth_generate(cfg)
    degrees = kg1.degrees()
    dense = np.array(["dense" in lab for lab in kg1.labels])
    assert degrees[dense].mean() > degrees[~dense].mean() * 1.5
