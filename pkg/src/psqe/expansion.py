"""Stage III: neighborhood expansion of the seed set with a safety
threshold, followed by a recheck pass over original features.

Candidate pairs are the cross products of the two neighborhoods of each
seed pair. Each candidate is scored by the cosine of the normalized
concatenation [original fused features | enhanced features] and admitted
greedily in descending score order while both endpoints remain unused.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .kg import MultiModalKG
from .similarity import SeedPair, SeedSet, add_pairs
from .enhance import mic_correct


@dataclass(frozen=True)
class ExpansionConfig:
    eta: float = 0.8
    max_new: int | None = None

    def validate(self) -> None:
        if not (-1.0 < self.eta <= 1.0):
            raise ConfigError(f"eta must lie in (-1, 1], got {self.eta}")
        if self.max_new is not None and self.max_new < 0:
            raise ConfigError("max_new must be >= 0")


@dataclass(frozen=True)
class AuditRow:
    source_e1: int
    source_e2: int
    new_e1: int
    new_e2: int
    score: float
    admitted: bool
    reason: str

    def as_csv(self) -> str:
        return (f"{self.source_e1},{self.source_e2},{self.new_e1},"
                f"{self.new_e2},{self.score!r},{str(self.admitted).lower()},{self.reason}")


def neighbor_candidates(seeds: SeedSet, kg1: MultiModalKG,
                        kg2: MultiModalKG) -> list[tuple[int, int, tuple[int, int]]]:
    """Cross products of the neighborhoods of every seed pair.

    Deduplicated across source pairs; the first emitting seed (in seed
    order) is kept for attribution.
    """
    seen: set[tuple[int, int]] = set()
    out = []
    for pair in seeds.pairs:
        n1 = kg1.adjacency[pair.e1]
        n2 = kg2.adjacency[pair.e2]
        for i in n1:
            for j in n2:
                key = (int(i), int(j))
                if key in seen:
                    continue
                seen.add(key)
                out.append((key[0], key[1], (pair.e1, pair.e2)))
    return out


def _concat_unit(orig: np.ndarray, enh: np.ndarray | None) -> np.ndarray:
    if enh is None:
        mat = orig
    else:
        mat = np.concatenate([orig, enh], axis=1)
    norms = np.maximum(np.linalg.norm(mat, axis=1), 1e-30)
    return mat / norms[:, None]


def neighbor_score(i: int, j: int, orig1: np.ndarray, orig2: np.ndarray,
                   enh1: np.ndarray | None, enh2: np.ndarray | None) -> float:
    """Cosine of the normalized [original | enhanced] concatenations."""
    a = _concat_unit(orig1[i:i + 1], None if enh1 is None else enh1[i:i + 1])[0]
    b = _concat_unit(orig2[j:j + 1], None if enh2 is None else enh2[j:j + 1])[0]
    return float(np.dot(a, b))


def expand(seeds: SeedSet, cfg: ExpansionConfig, kg1: MultiModalKG,
           kg2: MultiModalKG, orig1: np.ndarray, orig2: np.ndarray,
           enh1: np.ndarray | None, enh2: np.ndarray | None
           ) -> tuple[SeedSet, list[AuditRow]]:
    """Admit neighborhood candidates scoring at least eta, greedily in
    descending score order (ties to lower indices), keeping one-to-one.

    Returns the enlarged seed set (additions tagged S3) and the full
    audit log of candidate decisions.
    """
    cfg.validate()
    candidates = neighbor_candidates(seeds, kg1, kg2)
    if not candidates:
        return add_pairs(seeds, []), []
    c1 = _concat_unit(orig1, enh1)
    c2 = _concat_unit(orig2, enh2)
    idx1 = np.array([c[0] for c in candidates])
    idx2 = np.array([c[1] for c in candidates])
    scores = (c1[idx1] * c2[idx2]).sum(axis=1)
    order = sorted(range(len(candidates)),
                   key=lambda t: (-scores[t], candidates[t][0], candidates[t][1]))
    result = add_pairs(seeds, [])
    audit: list[AuditRow] = []
    added = 0
    for t in order:
        i, j, src = candidates[t]
        score = float(scores[t])
        if score < cfg.eta:
            audit.append(AuditRow(src[0], src[1], i, j, score, False, "below_threshold"))
            continue
        if cfg.max_new is not None and added >= cfg.max_new:
            audit.append(AuditRow(src[0], src[1], i, j, score, False, "cap_reached"))
            continue
        if i in result.used1 or j in result.used2:
            audit.append(AuditRow(src[0], src[1], i, j, score, False, "endpoint_used"))
            continue
        result = add_pairs(result, [SeedPair(i, j, score, "S3")])
        added += 1
        audit.append(AuditRow(src[0], src[1], i, j, score, True, "ok"))
    return result, audit


def recheck(seeds: SeedSet, orig1: np.ndarray, orig2: np.ndarray) -> SeedSet:
    """Second correction pass over the expanded set, on original features."""
    return mic_correct(seeds, orig1, orig2)


def write_audit_csv(path, rows: list[AuditRow]) -> None:
    with open(path, "w") as fh:
        fh.write("source_e1,source_e2,new_e1,new_e2,score,admitted,reason\n")
        for row in rows:
            fh.write(row.as_csv() + "\n")
