"""End-to-end orchestration of the three-stage seed pipeline.

Stage flow: fused similarity + baseline greedy seeds (recorded as s0),
cluster-quota sampling (s1), contrastive enhancement with global
sampling and correction (s2), neighborhood expansion with recheck (s3).
Skipped stages pass their input through. The root rng_seed drives every
stochastic component (synthesis, clustering, training).
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .clustering import choose_and_cluster, cluster_quota, stage1_sample
from .enhance import TrainConfig, forward, global_sample, mic_correct, train
from .errors import ConfigError
from .expansion import AuditRow, ExpansionConfig, expand, recheck, write_audit_csv
from .kg import AlignmentMap, MultiModalKG, load_kg
from .metrics import QualityReport, RankingReport, graph_coverage, rank_alignment
from .similarity import ModalityWeights, SeedSet, fused_features, fused_sim, uvp_seeds
from .synth import SynthConfig, synth_generate

DROP_CHOICES = ("none", "visual", "attr", "rel")
_DROP_TO_KEY = {"visual": "visual", "attr": "attribute", "rel": "relation"}


@dataclass(frozen=True)
class PipelineConfig:
    synth: SynthConfig | None = None
    kg1_manifest: str | None = None
    kg2_manifest: str | None = None
    truth_path: str | None = None
    n_init: int = 1000
    weights: ModalityWeights = field(default_factory=ModalityWeights)
    cluster_range: tuple = (2, 5)
    train: TrainConfig = field(default_factory=TrainConfig)
    expansion: ExpansionConfig | None = None
    skip_stage2: bool = False
    skip_stage3: bool = False
    skip_mic: bool = False
    drop_modality: str = "none"
    warm_start_uvp: bool = False
    fixed_n: int | None = None
    rng_seed: int = 42
    out_dir: str | None = None

    def validate(self) -> None:
        if self.synth is None and (self.kg1_manifest is None or self.kg2_manifest is None):
            raise ConfigError("provide either a synth config or two KG manifests")
        if self.n_init < 0:
            raise ConfigError("n_init must be >= 0")
        if self.drop_modality not in DROP_CHOICES:
            raise ConfigError(f"drop_modality must be one of {DROP_CHOICES}")
        lo, hi = self.cluster_range
        if not (2 <= lo <= hi <= 5):
            raise ConfigError(f"cluster_range must lie within [2, 5], got {self.cluster_range}")
        self.train.validate()
        (self.expansion or ExpansionConfig()).validate()

    def active_modalities(self) -> tuple:
        if self.drop_modality == "none":
            return ("visual", "attribute", "relation")
        dropped = _DROP_TO_KEY[self.drop_modality]
        return tuple(m for m in ("visual", "attribute", "relation") if m != dropped)

    def effective_weights(self) -> ModalityWeights:
        w = self.weights
        if self.drop_modality == "visual":
            w = replace(w, w_visual=0.0)
        elif self.drop_modality == "attr":
            w = replace(w, w_attr=0.0)
        elif self.drop_modality == "rel":
            w = replace(w, w_rel=0.0)
        return w

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["cluster_range"] = list(self.cluster_range)
        if self.expansion is None:
            out["expansion"] = dataclasses.asdict(ExpansionConfig())
        return out

    def snapshot(self) -> dict:
        """Config as recorded in run outputs: the output location is
        incidental (like timing) and is excluded so reruns byte-match."""
        out = self.to_dict()
        out.pop("out_dir", None)
        return out

    @staticmethod
    def from_dict(data: dict) -> "PipelineConfig":
        data = dict(data)
        try:
            if data.get("synth") is not None:
                synth = dict(data["synth"])
                if "sparse_noise_scale" in synth:
                    synth["sparse_noise_scale"] = tuple(synth["sparse_noise_scale"])
                data["synth"] = SynthConfig(**synth)
            if data.get("weights") is not None:
                data["weights"] = ModalityWeights(**data["weights"])
            if data.get("train") is not None:
                data["train"] = TrainConfig(**data["train"])
            if data.get("expansion") is not None:
                data["expansion"] = ExpansionConfig(**data["expansion"])
            if data.get("cluster_range") is not None:
                data["cluster_range"] = tuple(data["cluster_range"])
            return PipelineConfig(**data)
        except TypeError as exc:
            raise ConfigError(f"bad pipeline config: {exc}") from exc

    @staticmethod
    def from_json(path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            return PipelineConfig.from_dict(json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


@dataclass
class RunRecord:
    config: dict
    chosen_k: int
    stage_seeds: dict          # name -> SeedSet
    stage_quality: dict        # name -> QualityReport
    ranking: RankingReport | None
    timing: dict
    loss_trace: list
    audit: list
    final_seeds: SeedSet

    def to_dict(self) -> dict:
        stages = {}
        for name, seeds in self.stage_seeds.items():
            stages[name] = {
                "count": len(seeds),
                "quality": self.stage_quality[name].to_dict(),
            }
        return {
            "config": self.config,
            "chosen_k": self.chosen_k,
            "stages": stages,
            "ranking": self.ranking.to_dict() if self.ranking else None,
            "timing_seconds": self.timing,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _load_inputs(cfg: PipelineConfig):
    if cfg.synth is not None:
        synth_cfg = replace(cfg.synth, rng_seed=cfg.rng_seed)
        return synth_generate(synth_cfg)
    kg1 = load_kg(cfg.kg1_manifest)
    kg2 = load_kg(cfg.kg2_manifest)
    truth = AlignmentMap.load(cfg.truth_path) if cfg.truth_path else None
    return kg1, kg2, truth


def run_pipeline(cfg: PipelineConfig) -> RunRecord:
    """Execute the configured stages; fully deterministic given rng_seed."""
    cfg.validate()
    timing: dict[str, float] = {}
    t_total = time.perf_counter()

    kg1, kg2, truth = _load_inputs(cfg)
    weights = cfg.effective_weights()
    modalities = cfg.active_modalities()
    expansion_cfg = cfg.expansion or ExpansionConfig()

    t0 = time.perf_counter()
    sim = fused_sim(kg1, kg2, weights)
    phi1 = fused_features(kg1, weights)
    phi2 = fused_features(kg2, weights)
    s0 = uvp_seeds(sim, cfg.n_init, stage="UVP")
    timing["s0_baseline"] = time.perf_counter() - t0

    # Stage I: cluster-quota sampling over both graphs' fused features
    t0 = time.perf_counter()
    points = np.vstack([phi1, phi2])
    assignment = choose_and_cluster(points, cfg.cluster_range, cfg.rng_seed,
                                    n_first=kg1.n_entities)
    quota = cluster_quota(assignment, cfg.n_init)
    existing = s0 if cfg.warm_start_uvp else SeedSet()
    s1 = stage1_sample(kg1, kg2, sim, assignment, quota, existing)
    timing["stage1"] = time.perf_counter() - t0

    # Stage II: contrastive enhancement, global sampling, correction
    t0 = time.perf_counter()
    params = None
    losses: list[float] = []
    enh1 = enh2 = None
    if cfg.skip_stage2:
        s2 = s1
    else:
        train_cfg = replace(cfg.train, rng_seed=cfg.rng_seed)
        result = train(kg1, kg2, s1, train_cfg, modalities)
        params = result.params
        losses = result.losses
        enh1 = forward(kg1, params, modalities)
        enh2 = forward(kg2, params, modalities)
        combined = global_sample(enh1, enh2, cfg.n_init, s1)
        if cfg.skip_mic:
            s2 = combined
        else:
            fresh = SeedSet([p for p in combined.pairs if p.stage == "S2"])
            kept = mic_correct(fresh, phi1, phi2)
            s2 = SeedSet([p for p in combined.pairs
                          if p.stage != "S2" or (p.e1, p.e2) in kept.as_pair_set()])
    timing["stage2"] = time.perf_counter() - t0

    # Stage III: neighborhood expansion and recheck
    t0 = time.perf_counter()
    audit: list[AuditRow] = []
    if cfg.skip_stage3:
        s3 = s2
    else:
        e1 = enh1.concat if enh1 is not None else None
        e2 = enh2.concat if enh2 is not None else None
        expanded, audit = expand(s2, expansion_cfg, kg1, kg2, phi1, phi2, e1, e2)
        s3 = expanded if cfg.skip_mic else recheck(expanded, phi1, phi2)
    timing["stage3"] = time.perf_counter() - t0

    final = s3
    if cfg.fixed_n is not None and len(final) > cfg.fixed_n:
        ranked = sorted(final.pairs, key=lambda p: (-p.score, p.e1, p.e2))
        final = SeedSet(ranked[: cfg.fixed_n])

    stage_seeds = {"s0": s0, "s1": s1, "s2": s2, "s3": final}
    stage_quality = {name: graph_coverage(seeds, kg1, kg2, truth)
                     for name, seeds in stage_seeds.items()}

    ranking = None
    if truth is not None:
        if params is not None:
            f1, f2 = forward(kg1, params, modalities).concat, \
                forward(kg2, params, modalities).concat
        else:
            f1, f2 = phi1, phi2
        ranking = rank_alignment(f1, f2, truth)

    timing["total"] = time.perf_counter() - t_total
    record = RunRecord(
        config=cfg.snapshot(),
        chosen_k=assignment.k,
        stage_seeds=stage_seeds,
        stage_quality=stage_quality,
        ranking=ranking,
        timing=timing,
        loss_trace=losses,
        audit=audit,
        final_seeds=final,
    )
    if cfg.out_dir:
        write_outputs(record, cfg.out_dir)
    return record


def write_outputs(record: RunRecord, out_dir: str | Path) -> None:
    """Seed files, record JSON, loss trace, expansion audit, and figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, seeds in record.stage_seeds.items():
        seeds.save(out_dir / f"seeds_{name}.txt")
    (out_dir / "record.json").write_text(record.to_json())
    with open(out_dir / "loss.csv", "w") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(record.loss_trace):
            fh.write(f"{epoch},{loss!r}\n")
    write_audit_csv(out_dir / "expansion.csv", record.audit)
    from .figures import render_loss_curve, render_stage_metrics
    if record.loss_trace:
        render_loss_curve(record.loss_trace, out_dir / "loss.png")
    render_stage_metrics(record, out_dir / "stages.png")
