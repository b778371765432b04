"""Multimodal knowledge-graph data model and file ingestion.

A graph bundles an undirected adjacency structure with three per-entity
feature matrices (visual / attribute / relation). Graphs are described on
disk by a JSON manifest pointing at an adjacency text file, the three
binary matrix files, and an optional label file; all paths are resolved
relative to the manifest's directory.

Manifest schema::

    {
      "n_entities": 3,
      "adjacency": "adjacency.txt",
      "visual": "visual.mat",
      "attribute": "attribute.mat",
      "relation": "relation.mat",
      "labels": "labels.txt",          # optional
      "missing_fill_seed": 42          # optional, default 42
    }

Adjacency files hold one undirected edge per line ("u v"); duplicates are
dropped at load. A visual row that is entirely NaN marks a missing image
and is replaced at load by a draw from a normal distribution fitted
(per dimension) to the present rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .matio import read_matrix, write_matrix

MODALITIES = ("visual", "attribute", "relation")


@dataclass(frozen=True)
class MultiModalKG:
    """One knowledge graph: adjacency plus three modality feature matrices.

    Treated as immutable after construction; safe to share across workers.
    """

    n_entities: int
    adjacency: tuple  # tuple of sorted int64 neighbor arrays, one per entity
    visual: np.ndarray
    attribute: np.ndarray
    relation: np.ndarray
    labels: tuple | None = None

    def modality(self, name: str) -> np.ndarray:
        if name not in MODALITIES:
            raise KeyError(f"unknown modality {name!r}")
        return getattr(self, name)

    def degrees(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.adjacency], dtype=np.int64)

    def edges(self) -> list[tuple[int, int]]:
        """All undirected edges as (u, v) with u < v, sorted."""
        out = []
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if u < v:
                    out.append((u, int(v)))
        return out

    def n_edges(self) -> int:
        return sum(len(nb) for nb in self.adjacency) // 2


@dataclass(frozen=True)
class AlignmentMap:
    """Ground-truth equivalent entity pairs (one-to-one)."""

    pairs: tuple

    def __post_init__(self):
        left = [p[0] for p in self.pairs]
        right = [p[1] for p in self.pairs]
        if len(set(left)) != len(left) or len(set(right)) != len(right):
            raise DataError("alignment map is not one-to-one")

    def __len__(self) -> int:
        return len(self.pairs)

    def as_set(self) -> set[tuple[int, int]]:
        return set(self.pairs)

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for e1, e2 in self.pairs:
                fh.write(f"{e1} {e2}\n")

    @staticmethod
    def load(path: str | Path) -> "AlignmentMap":
        path = Path(path)
        if not path.exists():
            raise DataError(f"alignment file not found: {path}")
        pairs = []
        for line in path.read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            a, b = line.split()
            pairs.append((int(a), int(b)))
        return AlignmentMap(pairs=tuple(pairs))


@dataclass(frozen=True)
class Violation:
    kind: str
    entity: int | None
    message: str


def validate_kg(kg: MultiModalKG) -> list[Violation]:
    """Check every structural invariant; returns an empty list iff valid."""
    out: list[Violation] = []
    n = kg.n_entities
    if len(kg.adjacency) != n:
        out.append(Violation("adjacency_size", None,
                             f"adjacency has {len(kg.adjacency)} lists, expected {n}"))
        return out
    neighbor_sets = [set(int(v) for v in nb) for nb in kg.adjacency]
    for u, nbrs in enumerate(neighbor_sets):
        if u in nbrs:
            out.append(Violation("self_loop", u, f"entity {u} has a self-loop"))
        for v in nbrs:
            if v < 0 or v >= n:
                out.append(Violation("edge_range", u,
                                     f"entity {u} lists out-of-range neighbor {v}"))
            elif u not in neighbor_sets[v]:
                out.append(Violation("asymmetry", u,
                                     f"edge ({u},{v}) present but ({v},{u}) missing"))
    for name in MODALITIES:
        mat = kg.modality(name)
        if mat.shape[0] != n:
            out.append(Violation("row_count", None,
                                 f"{name} matrix has {mat.shape[0]} rows, expected {n}"))
            continue
        bad = np.where(~np.isfinite(mat).all(axis=1))[0]
        for ent in bad:
            out.append(Violation("non_finite", int(ent),
                                 f"{name} row {int(ent)} contains NaN/Inf"))
    if kg.labels is not None and len(kg.labels) != n:
        out.append(Violation("label_count", None,
                             f"{len(kg.labels)} labels for {n} entities"))
    return out


def _build_adjacency(n: int, edges: set[tuple[int, int]]) -> tuple:
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    return tuple(np.array(sorted(lst), dtype=np.int64) for lst in nbrs)


def _read_adjacency(path: Path, n: int, problems: list[str]) -> tuple:
    edges: set[tuple[int, int]] = set()
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            problems.append(f"{path}:{lineno}: expected 'u v', got {line!r}")
            continue
        u, v = int(parts[0]), int(parts[1])
        if u == v:
            problems.append(f"{path}:{lineno}: self-loop on entity {u}")
            continue
        if not (0 <= u < n and 0 <= v < n):
            problems.append(f"{path}:{lineno}: edge ({u},{v}) out of range for {n} entities")
            continue
        edges.add((min(u, v), max(u, v)))
    return _build_adjacency(n, edges)


def _fill_missing_visual(mat: np.ndarray, seed: int, problems: list[str]) -> np.ndarray:
    """Replace all-NaN rows with draws from a normal fitted to present rows."""
    nan_mask = np.isnan(mat)
    full_rows = np.where(nan_mask.all(axis=1))[0]
    partial = np.where(nan_mask.any(axis=1) & ~nan_mask.all(axis=1))[0]
    for ent in partial:
        problems.append(f"visual row {int(ent)} is partially NaN (not a valid missing marker)")
    if full_rows.size == 0:
        return mat
    present = np.delete(mat, full_rows, axis=0)
    if present.shape[0] == 0:
        problems.append("every visual row is missing; cannot fit fill distribution")
        return mat
    mean = present.mean(axis=0)
    std = present.std(axis=0)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    out = mat.copy()
    for ent in full_rows:
        out[ent] = rng.normal(mean, std)
    return out


def load_kg(manifest_path: str | Path) -> MultiModalKG:
    """Load and validate a graph from its JSON manifest.

    Raises DataError listing every problem found, each naming the
    offending entity or file.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise DataError(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    base = manifest_path.parent
    problems: list[str] = []

    try:
        n = int(manifest["n_entities"])
    except (KeyError, TypeError, ValueError):
        raise DataError(f"manifest {manifest_path} missing integer 'n_entities'")

    mats = {}
    for name in MODALITIES:
        key = {"visual": "visual", "attribute": "attribute", "relation": "relation"}[name]
        if key not in manifest:
            problems.append(f"manifest missing '{key}' entry")
            continue
        mat = read_matrix(base / manifest[key])
        if mat.shape[0] != n:
            problems.append(
                f"{name} matrix has {mat.shape[0]} rows but manifest declares {n} entities")
        mats[name] = mat
    if problems:
        raise DataError("; ".join(problems))

    fill_seed = int(manifest.get("missing_fill_seed", 42))
    mats["visual"] = _fill_missing_visual(mats["visual"], fill_seed, problems)
    for name in ("attribute", "relation"):
        bad = np.where(~np.isfinite(mats[name]).all(axis=1))[0]
        for ent in bad:
            problems.append(f"{name} row {int(ent)} contains NaN/Inf")
    bad = np.where(~np.isfinite(mats["visual"]).all(axis=1))[0]
    for ent in bad:
        problems.append(f"visual row {int(ent)} contains NaN/Inf after fill")

    adj_path = base / manifest.get("adjacency", "")
    if "adjacency" not in manifest or not adj_path.exists():
        problems.append(f"adjacency file not found: {adj_path}")
        raise DataError("; ".join(problems))
    adjacency = _read_adjacency(adj_path, n, problems)

    labels = None
    if manifest.get("labels"):
        label_path = base / manifest["labels"]
        if not label_path.exists():
            problems.append(f"label file not found: {label_path}")
        else:
            labels = tuple(label_path.read_text().splitlines())
            if len(labels) != n:
                problems.append(f"{len(labels)} labels for {n} entities")

    if problems:
        raise DataError("; ".join(problems))

    kg = MultiModalKG(n_entities=n, adjacency=adjacency,
                      visual=mats["visual"], attribute=mats["attribute"],
                      relation=mats["relation"], labels=labels)
    violations = validate_kg(kg)
    if violations:
        raise DataError("; ".join(v.message for v in violations))
    return kg


def save_kg(kg: MultiModalKG, out_dir: str | Path) -> Path:
    """Write a graph to out_dir; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_matrix(out_dir / "visual.mat", kg.visual)
    write_matrix(out_dir / "attribute.mat", kg.attribute)
    write_matrix(out_dir / "relation.mat", kg.relation)
    with open(out_dir / "adjacency.txt", "w") as fh:
        for u, v in kg.edges():
            fh.write(f"{u} {v}\n")
    manifest = {
        "n_entities": kg.n_entities,
        "adjacency": "adjacency.txt",
        "visual": "visual.mat",
        "attribute": "attribute.mat",
        "relation": "relation.mat",
    }
    if kg.labels is not None:
        with open(out_dir / "labels.txt", "w") as fh:
            fh.write("\n".join(kg.labels) + "\n")
        manifest["labels"] = "labels.txt"
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
