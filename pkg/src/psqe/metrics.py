"""Seed-quality and alignment-quality metrics.

Graph coverage follows the composite
    S_a / (2 G_n) + Edge / (2 G_Edge) + S_f / G_n
where S_a / S_f split the seed entities into aggregated vs scattered by
degree (scattered = degree strictly below its graph's 25th percentile),
Edge counts graph edges incident to any seed entity, and G_n is the
per-graph entity count (the mean when the graphs differ in size). The
composite cannot reach exactly 1 under any reading; components are
always reported alongside the scalar, whose displayed value is clamped
to [0, 1.5] with the raw value preserved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kg import AlignmentMap, MultiModalKG
from .similarity import SeedSet


@dataclass(frozen=True)
class QualityReport:
    n_seeds: int
    n_correct: int | None
    precision: float | None
    s_a: int
    s_f: int
    edge_covered: int
    g_edge: int
    g_n: float
    coverage_raw: float
    coverage: float

    def to_dict(self) -> dict:
        return {
            "n_seeds": self.n_seeds,
            "n_correct": self.n_correct,
            "precision": self.precision,
            "s_a": self.s_a,
            "s_f": self.s_f,
            "edge_covered": self.edge_covered,
            "g_edge": self.g_edge,
            "g_n": self.g_n,
            "coverage_raw": self.coverage_raw,
            "coverage": self.coverage,
        }


@dataclass(frozen=True)
class RankingReport:
    hits1: float
    hits10: float
    mrr: float
    ranks: tuple

    def to_dict(self) -> dict:
        return {"hits1": self.hits1, "hits10": self.hits10, "mrr": self.mrr}


def seed_precision(seeds: SeedSet, truth: AlignmentMap) -> float:
    """Fraction of seed pairs present in the ground truth (empty set -> 0)."""
    if len(seeds) == 0:
        return 0.0
    truth_set = truth.as_set()
    correct = sum(1 for p in seeds.pairs if (p.e1, p.e2) in truth_set)
    return correct / len(seeds)


def _scattered_mask(kg: MultiModalKG) -> np.ndarray:
    degrees = kg.degrees()
    threshold = np.quantile(degrees, 0.25)
    return degrees < threshold  # strict: uniform degrees yield no scattered


def graph_coverage(seeds: SeedSet, kg1: MultiModalKG, kg2: MultiModalKG,
                   truth: AlignmentMap | None = None) -> QualityReport:
    """Coverage decomposition of the seed set over both graphs."""
    ents1 = {p.e1 for p in seeds.pairs}
    ents2 = {p.e2 for p in seeds.pairs}
    scat1 = _scattered_mask(kg1)
    scat2 = _scattered_mask(kg2)
    s_f = sum(1 for e in ents1 if scat1[e]) + sum(1 for e in ents2 if scat2[e])
    s_a = len(ents1) + len(ents2) - s_f
    edge_covered = 0
    for kg, ents in ((kg1, ents1), (kg2, ents2)):
        for u, v in kg.edges():
            if u in ents or v in ents:
                edge_covered += 1
    g_edge = kg1.n_edges() + kg2.n_edges()
    n1, n2 = kg1.n_entities, kg2.n_entities
    g_n = float(n1) if n1 == n2 else (n1 + n2) / 2.0
    raw = 0.0
    if g_n > 0:
        raw += s_a / (2.0 * g_n) + s_f / g_n
    if g_edge > 0:
        raw += edge_covered / (2.0 * g_edge)
    n_correct = None
    precision = None
    if truth is not None:
        truth_set = truth.as_set()
        n_correct = sum(1 for p in seeds.pairs if (p.e1, p.e2) in truth_set)
        precision = n_correct / len(seeds) if len(seeds) else 0.0
    return QualityReport(
        n_seeds=len(seeds), n_correct=n_correct, precision=precision,
        s_a=s_a, s_f=s_f, edge_covered=edge_covered, g_edge=g_edge, g_n=g_n,
        coverage_raw=float(raw), coverage=float(np.clip(raw, 0.0, 1.5)),
    )


def rank_alignment(f1: np.ndarray, f2: np.ndarray,
                   test: AlignmentMap) -> RankingReport:
    """Rank each test pair's true target among all second-graph entities
    by descending cosine; ties resolve toward the lower index.
    """
    f1 = np.asarray(f1, dtype=np.float64)
    f2 = np.asarray(f2, dtype=np.float64)
    n1 = np.linalg.norm(f1, axis=1, keepdims=True)
    n2 = np.linalg.norm(f2, axis=1, keepdims=True)
    a = f1 / np.maximum(n1, 1e-30)
    b = f2 / np.maximum(n2, 1e-30)
    ranks = []
    for i, j in test.pairs:
        scores = b @ a[i]
        target = scores[j]
        higher = int((scores > target).sum())
        tied_before = int((scores[:j] == target).sum())
        ranks.append(higher + tied_before + 1)
    ranks_arr = np.array(ranks, dtype=np.int64)
    return RankingReport(
        hits1=float((ranks_arr <= 1).mean()),
        hits10=float((ranks_arr <= 10).mean()),
        mrr=float((1.0 / ranks_arr).mean()),
        ranks=tuple(int(r) for r in ranks),
    )


@dataclass(frozen=True)
class StrategyResult:
    strategy: str
    rng_seed: int
    quality: QualityReport
    ranking: RankingReport

    def as_csv(self) -> str:
        return (f"{self.strategy},{self.quality.precision},{self.quality.coverage},"
                f"{self.ranking.hits1},{self.ranking.hits10},{self.ranking.mrr},"
                f"{self.rng_seed}")


def type_comparison(synth_cfg, n_seeds: int, train_cfg=None, weights=None,
                    expansion_cfg=None, rng_seed: int = 42,
                    cluster_range=(2, 5)) -> list[StrategyResult]:
    """Compare the three seed strategies on one synthetic graph pair.

    Type I: greedy one-to-one over visual cosine only.
    Type II: greedy one-to-one over the fused multimodal similarity.
    Type III: the full three-stage pipeline.
    Each strategy's seed set trains the enhancer with the same config;
    ranking is evaluated over the full ground-truth map (unsupervised, so
    no pair was ever supervised).
    """
    from dataclasses import replace
    from .enhance import TrainConfig, forward, train
    from .pipeline import PipelineConfig, run_pipeline
    from .similarity import ModalityWeights, cosine_sim_matrix, fused_sim, uvp_seeds
    from .synth import synth_generate

    weights = weights or ModalityWeights()
    train_cfg = train_cfg or TrainConfig(epochs=50, hidden_dim=32)
    synth_cfg = replace(synth_cfg, rng_seed=rng_seed)
    kg1, kg2, truth = synth_generate(synth_cfg)

    seeds_by_type = {
        "type1": uvp_seeds(cosine_sim_matrix(kg1.visual, kg2.visual), n_seeds),
        "type2": uvp_seeds(fused_sim(kg1, kg2, weights), n_seeds),
    }
    pipe_cfg = PipelineConfig(
        synth=synth_cfg, n_init=n_seeds, weights=weights,
        cluster_range=cluster_range, train=train_cfg,
        expansion=expansion_cfg, rng_seed=rng_seed,
    )
    record = run_pipeline(pipe_cfg)
    seeds_by_type["type3"] = record.final_seeds

    results = []
    for name in ("type1", "type2", "type3"):
        seeds = seeds_by_type[name]
        tcfg = replace(train_cfg, rng_seed=rng_seed)
        trained = train(kg1, kg2, seeds, tcfg)
        enh1 = forward(kg1, trained.params)
        enh2 = forward(kg2, trained.params)
        ranking = rank_alignment(enh1.concat, enh2.concat, truth)
        quality = graph_coverage(seeds, kg1, kg2, truth)
        results.append(StrategyResult(strategy=name, rng_seed=rng_seed,
                                      quality=quality, ranking=ranking))
    return results


def write_comparison_csv(path, rows: list[StrategyResult]) -> None:
    with open(path, "w") as fh:
        fh.write("strategy,precision,coverage,hits1,hits10,mrr,rng_seed\n")
        for row in rows:
            fh.write(row.as_csv() + "\n")
