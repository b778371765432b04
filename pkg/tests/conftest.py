import numpy as np
import pytest

from psqe.kg import MultiModalKG
from psqe.synth import SynthConfig, synth_generate


def build_kg(n, edges, visual, attribute, relation, labels=None):
    """Assemble a graph directly from parts (tests only)."""
    nbrs = [[] for _ in range(n)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    adjacency = tuple(np.array(sorted(lst), dtype=np.int64) for lst in nbrs)
    return MultiModalKG(
        n_entities=n, adjacency=adjacency,
        visual=np.asarray(visual, dtype=np.float64),
        attribute=np.asarray(attribute, dtype=np.float64),
        relation=np.asarray(relation, dtype=np.float64),
        labels=labels,
    )


@pytest.fixture(scope="session")
def small_clean_pair():
    """40 noise-free aligned pairs, 3 clusters."""
    cfg = SynthConfig(n_pairs=40, dim_visual=8, dim_attr=4, dim_rel=4,
                      cluster_count=3, mean_degree=4.0, rng_seed=11)
    return synth_generate(cfg)


@pytest.fixture(scope="session")
def small_noisy_pair():
    cfg = SynthConfig(n_pairs=60, dim_visual=8, dim_attr=4, dim_rel=4,
                      noise_visual=0.2, noise_attr=0.1, noise_rel=0.1,
                      cluster_count=3, mean_degree=4.0, rng_seed=13)
    return synth_generate(cfg)
