"""Similarity matrices, multimodal fusion, and the greedy one-to-one
seed picker that excludes both entities of a pair once it is selected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .kg import MultiModalKG

STAGES = ("UVP", "S1", "S2", "S3")


@dataclass(frozen=True)
class ModalityWeights:
    w_visual: float = 0.8
    w_attr: float = 0.1
    w_rel: float = 0.1

    def normalized(self) -> tuple[float, float, float]:
        w = (self.w_visual, self.w_attr, self.w_rel)
        if any(x < 0 for x in w):
            raise ConfigError(f"negative modality weight in {w}")
        total = sum(w)
        if total <= 0:
            raise ConfigError("at least one modality weight must be positive")
        return tuple(x / total for x in w)


def normalize_rows(mat: np.ndarray, what: str = "matrix") -> np.ndarray:
    """L2-normalize rows; a zero-norm row is a data error naming the row."""
    norms = np.linalg.norm(mat, axis=1)
    zero = np.where(norms == 0.0)[0]
    if zero.size:
        raise DataError(f"{what} has zero-norm row(s): {zero.tolist()[:10]}")
    return mat / norms[:, None]


def cosine_sim_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities between rows of a and rows of b."""
    if a.shape[1] != b.shape[1]:
        raise DataError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    an = normalize_rows(np.asarray(a, dtype=np.float64), "left matrix")
    bn = normalize_rows(np.asarray(b, dtype=np.float64), "right matrix")
    return np.clip(an @ bn.T, -1.0, 1.0)


def fused_sim(kg1: MultiModalKG, kg2: MultiModalKG,
              weights: ModalityWeights = ModalityWeights()) -> np.ndarray:
    """Weighted sum of per-modality cosine matrices (weights renormalized).

    Modalities with weight zero are skipped entirely.
    """
    wv, wa, wr = weights.normalized()
    pairs = (("visual", wv), ("attribute", wa), ("relation", wr))
    sim = np.zeros((kg1.n_entities, kg2.n_entities))
    for name, w in pairs:
        if w == 0.0:
            continue
        m1, m2 = kg1.modality(name), kg2.modality(name)
        if m1.shape[1] != m2.shape[1]:
            raise DataError(f"{name} dims differ across graphs: "
                            f"{m1.shape[1]} vs {m2.shape[1]}")
        sim += w * cosine_sim_matrix(m1, m2)
    return sim


def fused_features(kg: MultiModalKG,
                   weights: ModalityWeights = ModalityWeights()) -> np.ndarray:
    """Unit-norm fused representation: concatenation of normalized modality
    blocks scaled by sqrt(weight), so dot products equal the fused similarity.
    """
    wv, wa, wr = weights.normalized()
    blocks = []
    for name, w in (("visual", wv), ("attribute", wa), ("relation", wr)):
        if w == 0.0:
            continue
        blocks.append(np.sqrt(w) * normalize_rows(kg.modality(name), f"{name} matrix"))
    return normalize_rows(np.concatenate(blocks, axis=1), "fused features")


@dataclass(frozen=True)
class SeedPair:
    e1: int
    e2: int
    score: float
    stage: str

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if not np.isfinite(self.score):
            raise ValueError(f"non-finite score for pair ({self.e1},{self.e2})")


class SeedSet:
    """Ordered pseudo-seed pairs under a one-to-one constraint per side."""

    def __init__(self, pairs=()):
        self.pairs: list[SeedPair] = []
        self.used1: set[int] = set()
        self.used2: set[int] = set()
        for p in pairs:
            if p.e1 in self.used1 or p.e2 in self.used2:
                raise ValueError(f"duplicate entity in seed pairs: ({p.e1},{p.e2})")
            self.pairs.append(p)
            self.used1.add(p.e1)
            self.used2.add(p.e2)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def as_pair_set(self) -> set[tuple[int, int]]:
        return {(p.e1, p.e2) for p in self.pairs}

    def check_one_to_one(self) -> bool:
        left = [p.e1 for p in self.pairs]
        right = [p.e2 for p in self.pairs]
        return (len(set(left)) == len(left) and len(set(right)) == len(right)
                and set(left) == self.used1 and set(right) == self.used2)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            for p in self.pairs:
                fh.write(f"{p.e1} {p.e2} {p.score!r} {p.stage}\n")

    @staticmethod
    def load(path) -> "SeedSet":
        pairs = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                e1, e2, score, stage = line.split()
                pairs.append(SeedPair(int(e1), int(e2), float(score), stage))
        return SeedSet(pairs)


def add_pairs(seeds: SeedSet, new_pairs) -> SeedSet:
    """Return a new SeedSet with `new_pairs` appended; pairs that would
    break the one-to-one constraint are skipped in input order.
    """
    out = SeedSet(seeds.pairs)
    for p in new_pairs:
        if p.e1 in out.used1 or p.e2 in out.used2:
            continue
        out.pairs.append(p)
        out.used1.add(p.e1)
        out.used2.add(p.e2)
    return out


def uvp_seeds(sim: np.ndarray, k: int, exclude: SeedSet | None = None,
              stage: str = "UVP") -> SeedSet:
    """Greedy one-to-one selection of the k highest-similarity pairs.

    Pairs are taken in descending similarity; after each pick both
    entities are removed from contention. Ties break toward the lower
    (row, column) index. Entities present in `exclude` are never chosen.
    """
    if k < 0:
        raise ConfigError("k must be >= 0")
    if not np.isfinite(sim).all():
        raise DataError("similarity matrix contains non-finite entries")
    n1, n2 = sim.shape
    used1 = set(exclude.used1) if exclude is not None else set()
    used2 = set(exclude.used2) if exclude is not None else set()
    picked: list[SeedPair] = []
    if k == 0 or n1 == 0 or n2 == 0:
        return SeedSet()
    flat = sim.ravel()
    # stable sort on the row-major flattening realizes the (e1, e2) tie-break
    order = np.argsort(-flat, kind="stable")
    for idx in order:
        i, j = divmod(int(idx), n2)
        if i in used1 or j in used2:
            continue
        picked.append(SeedPair(i, j, float(flat[idx]), stage))
        used1.add(i)
        used2.add(j)
        if len(picked) == k:
            break
    return SeedSet(picked)
