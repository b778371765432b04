"""Stage II: contrastive feature enhancement and correction.

The enhancer maps each modality through its own linear layer; the visual
branch is additionally aggregated over graph neighborhoods with a single
single-head attention layer (LeakyReLU slope 0.2, self-loop included,
identity output activation). All outputs are row-normalized. Training
minimizes the sum of per-modality bidirectional contrastive losses over
the current seed pairs, with in-batch negatives drawn from both graphs.

Gradients are exact analytic derivatives through the normalization, the
attention softmax, and the linear maps; they are validated against
central finite differences in the test suite.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .kg import MultiModalKG
from .matio import read_matrix, write_matrix
from .similarity import SeedPair, SeedSet, add_pairs, uvp_seeds

log = logging.getLogger(__name__)

MODALITY_KEYS = ("visual", "attribute", "relation")
LEAKY_SLOPE = 0.2
_NORM_FLOOR = 1e-30


@dataclass
class EnhancerParams:
    w_visual: np.ndarray   # (dim_visual, hidden)
    w_attr: np.ndarray     # (dim_attr, hidden)
    w_rel: np.ndarray      # (dim_rel, hidden)
    attention: np.ndarray  # (2 * hidden,)

    @property
    def hidden_dim(self) -> int:
        return self.w_visual.shape[1]

    def copy(self) -> "EnhancerParams":
        return EnhancerParams(self.w_visual.copy(), self.w_attr.copy(),
                              self.w_rel.copy(), self.attention.copy())

    def tensors(self):
        return (("w_visual", self.w_visual), ("w_attr", self.w_attr),
                ("w_rel", self.w_rel), ("attention", self.attention))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    lr: float = 0.01
    batch_size: int = 2000
    hidden_dim: int = 300
    tau: float = 0.1
    adaptive: bool = False  # per-parameter moment-based steps instead of plain GD
    rng_seed: int = 42

    def validate(self) -> None:
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        for name in ("lr", "batch_size", "hidden_dim", "tau"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")


@dataclass
class EnhancedFeatures:
    """Per-modality enhanced matrices plus their normalized concatenation."""

    visual: np.ndarray | None
    attr: np.ndarray | None
    rel: np.ndarray | None
    concat: np.ndarray


@dataclass
class TrainResult:
    params: EnhancerParams
    losses: list[float] = field(default_factory=list)


def _rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tags))


def init_params(dim_visual: int, dim_attr: int, dim_rel: int,
                hidden_dim: int, rng_seed: int = 42) -> EnhancerParams:
    """Uniform Glorot initialization drawn from one seeded stream."""
    rng = _rng(rng_seed, 7)

    def glorot(fan_in, fan_out, shape):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, shape)

    return EnhancerParams(
        w_visual=glorot(dim_visual, hidden_dim, (dim_visual, hidden_dim)),
        w_attr=glorot(dim_attr, hidden_dim, (dim_attr, hidden_dim)),
        w_rel=glorot(dim_rel, hidden_dim, (dim_rel, hidden_dim)),
        attention=glorot(2 * hidden_dim, 1, (2 * hidden_dim,)),
    )


def save_params(params: EnhancerParams, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"hidden_dim": params.hidden_dim}
    for name, tensor in params.tensors():
        mat = tensor if tensor.ndim == 2 else tensor[None, :]
        write_matrix(out_dir / f"{name}.mat", mat)
        manifest[name] = f"{name}.mat"
    path = out_dir / "params.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_params(manifest_path: str | Path) -> EnhancerParams:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "params.json"
    if not manifest_path.exists():
        raise DataError(f"params manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    mats = {name: read_matrix(base / manifest[name])
            for name in ("w_visual", "w_attr", "w_rel", "attention")}
    return EnhancerParams(w_visual=mats["w_visual"], w_attr=mats["w_attr"],
                          w_rel=mats["w_rel"], attention=mats["attention"][0])


# ---------------------------------------------------------------------------
# contrastive probability / loss
# ---------------------------------------------------------------------------

def icl_prob(anchor: np.ndarray, positive: np.ndarray, negatives, tau: float) -> float:
    """Alignment probability of the positive against the negative pool."""
    if tau <= 0:
        raise ConfigError("tau must be positive")
    logits = [float(np.dot(anchor, positive)) / tau]
    for neg in negatives:
        logits.append(float(np.dot(anchor, neg)) / tau)
    logits = np.array(logits)
    m = logits.max()
    e = np.exp(logits - m)
    return float(e[0] / e.sum())


def _icl_batch(x: np.ndarray, y: np.ndarray, tau: float):
    """Bidirectional in-batch contrastive terms for seed-pair rows.

    Negatives for pair i are every other pair's embeddings from both
    graphs. Returns the loss plus the softmax caches needed for the
    gradient.
    """
    b = x.shape[0]
    s = x @ y.T / tau          # s[i, j] = x_i . y_j
    tx = x @ x.T / tau
    ty = y @ y.T / tau
    off = ~np.eye(b, dtype=bool)

    def direction(pos_mat, neg_same):
        # anchor i: positive pos_mat[i, i]; negatives pos_mat[i, j!=i]
        # and neg_same[i, j!=i]
        stacked = np.where(off, neg_same, -np.inf)
        m = np.maximum(pos_mat.max(axis=1),
                       stacked.max(axis=1, initial=-np.inf))
        e_pos_mat = np.exp(pos_mat - m[:, None])
        e_same = np.where(off, np.exp(np.where(off, neg_same, 0.0) - m[:, None]), 0.0)
        z = e_pos_mat.sum(axis=1) + e_same.sum(axis=1)
        p = np.diagonal(e_pos_mat) / z
        q_cross = e_pos_mat / z[:, None]
        np.fill_diagonal(q_cross, 0.0)
        q_same = e_same / z[:, None]
        return p, q_cross, q_same

    p1, q_s1, q_t1 = direction(s, tx)
    p2, q_s2, q_t2 = direction(s.T, ty)
    loss = float(np.mean(-np.log(0.5 * (p1 + p2))))
    return loss, (p1, q_s1, q_t1, p2, q_s2, q_t2)


def _icl_batch_grad(x: np.ndarray, y: np.ndarray, tau: float):
    """Loss plus exact gradients with respect to the (unit) feature rows."""
    b = x.shape[0]
    loss, (p1, q_s1, q_t1, p2, q_s2, q_t2) = _icl_batch(x, y, tau)
    c = -1.0 / (b * (p1 + p2))  # dL/dp per direction

    gs = -(c * p1)[:, None] * q_s1          # coefficients on s[i, j] (negatives)
    np.fill_diagonal(gs, c * p1 * (1.0 - p1))
    gs_pos2 = c * p2 * (1.0 - p2)           # positives of direction 2 also hit s[i, i]
    gs[np.arange(b), np.arange(b)] += gs_pos2
    gs += (-(c * p2)[:, None] * q_s2).T     # direction-2 negatives sit at s[j, i]
    gtx = -(c * p1)[:, None] * q_t1
    gty = -(c * p2)[:, None] * q_t2

    dx = (gs @ y + (gtx + gtx.T) @ x) / tau
    dy = (gs.T @ x + (gty + gty.T) @ y) / tau
    return loss, dx, dy


def icl_loss(h1: np.ndarray, h2: np.ndarray, batch, tau: float) -> float:
    """Mean bidirectional contrastive loss over the selected seed rows."""
    if tau <= 0:
        raise ConfigError("tau must be positive")
    idx = np.asarray(list(batch), dtype=np.int64)
    loss, _ = _icl_batch(h1[idx], h2[idx], tau)
    return loss


# ---------------------------------------------------------------------------
# attention aggregation over neighborhoods
# ---------------------------------------------------------------------------

class _GraphStructure:
    """Edge arrays (including self-loops) grouped by source node, plus a
    permutation that regroups the same edges by destination for scatters.
    """

    def __init__(self, kg: MultiModalKG):
        src, dst = [], []
        ptr = [0]
        for i in range(kg.n_entities):
            js = np.sort(np.append(kg.adjacency[i], i))
            src.extend([i] * len(js))
            dst.extend(int(v) for v in js)
            ptr.append(len(src))
        self.src = np.array(src, dtype=np.int64)
        self.dst = np.array(dst, dtype=np.int64)
        self.ptr = np.array(ptr, dtype=np.int64)
        self.by_dst = np.argsort(self.dst, kind="stable")
        dst_sorted = self.dst[self.by_dst]
        self.dst_ptr = np.searchsorted(dst_sorted, np.arange(kg.n_entities + 1))

    def scatter_to_dst(self, edge_values: np.ndarray) -> np.ndarray:
        """Sum per-edge vectors into their destination node rows."""
        return np.add.reduceat(edge_values[self.by_dst], self.dst_ptr[:-1], axis=0)

    def scatter_to_src(self, edge_values: np.ndarray) -> np.ndarray:
        return np.add.reduceat(edge_values, self.ptr[:-1], axis=0)


def _normalize_with_cache(mat: np.ndarray):
    norms = np.maximum(np.linalg.norm(mat, axis=1), _NORM_FLOOR)
    return mat / norms[:, None], norms


def _gat_forward(x: np.ndarray, w: np.ndarray, a: np.ndarray, g: _GraphStructure):
    d = w.shape[1]
    z = x @ w
    a1, a2 = a[:d], a[d:]
    u = z[g.src] @ a1 + z[g.dst] @ a2
    logits = np.where(u > 0, u, LEAKY_SLOPE * u)
    seg_max = np.maximum.reduceat(logits, g.ptr[:-1])
    e = np.exp(logits - seg_max[g.src])
    seg_sum = np.add.reduceat(e, g.ptr[:-1])
    alpha = e / seg_sum[g.src]
    agg = g.scatter_to_src(alpha[:, None] * z[g.dst])
    h, norms = _normalize_with_cache(agg)
    return h, {"z": z, "u": u, "alpha": alpha, "agg": agg, "norms": norms, "h": h}


def _gat_backward(dh: np.ndarray, cache, x: np.ndarray, a: np.ndarray,
                  g: _GraphStructure):
    """Exact gradients of the attention branch: returns (dW, da)."""
    z, u, alpha = cache["z"], cache["u"], cache["alpha"]
    h, norms = cache["h"], cache["norms"]
    d = z.shape[1]
    a1, a2 = a[:d], a[d:]
    dagg = (dh - (dh * h).sum(axis=1, keepdims=True) * h) / norms[:, None]
    # aggregation: agg_i = sum_{j in J(i)} alpha_ij z_j
    dalpha = (dagg[g.src] * z[g.dst]).sum(axis=1)
    dz = g.scatter_to_dst(alpha[:, None] * dagg[g.src])
    # softmax over each source segment, then the LeakyReLU
    seg_dot = np.add.reduceat(alpha * dalpha, g.ptr[:-1])
    dlogits = alpha * (dalpha - seg_dot[g.src])
    du = dlogits * np.where(u > 0, 1.0, LEAKY_SLOPE)
    # u_e = z[src_e] . a1 + z[dst_e] . a2
    da = np.concatenate([du @ z[g.src], du @ z[g.dst]])
    du_src = np.add.reduceat(du, g.ptr[:-1])
    du_dst = np.add.reduceat(du[g.by_dst], g.dst_ptr[:-1])
    dz += du_src[:, None] * a1[None, :]
    dz += du_dst[:, None] * a2[None, :]
    dw = x.T @ dz
    return dw, da


def _linear_norm_forward(x: np.ndarray, w: np.ndarray):
    z = x @ w
    h, norms = _normalize_with_cache(z)
    return h, {"h": h, "norms": norms}


def _linear_norm_backward(dh: np.ndarray, cache, x: np.ndarray) -> np.ndarray:
    h, norms = cache["h"], cache["norms"]
    dz = (dh - (dh * h).sum(axis=1, keepdims=True) * h) / norms[:, None]
    return x.T @ dz


def _forward_cached(kg: MultiModalKG, params: EnhancerParams,
                    modalities=MODALITY_KEYS,
                    structure: _GraphStructure | None = None):
    """Per-modality enhanced features plus the caches for the backward pass."""
    out: dict[str, tuple[np.ndarray, dict]] = {}
    if "visual" in modalities:
        g = structure if structure is not None else _GraphStructure(kg)
        h, cache = _gat_forward(kg.visual, params.w_visual, params.attention, g)
        cache["structure"] = g
        out["visual"] = (h, cache)
    if "attribute" in modalities:
        out["attribute"] = _linear_norm_forward(kg.attribute, params.w_attr)
    if "relation" in modalities:
        out["relation"] = _linear_norm_forward(kg.relation, params.w_rel)
    return out


def forward(kg: MultiModalKG, params: EnhancerParams,
            modalities=MODALITY_KEYS) -> EnhancedFeatures:
    """Enhanced per-modality features and their normalized concatenation."""
    cached = _forward_cached(kg, params, modalities)
    blocks = [cached[m][0] for m in MODALITY_KEYS if m in cached]
    concat = np.concatenate(blocks, axis=1)
    concat, _ = _normalize_with_cache(concat)
    return EnhancedFeatures(
        visual=cached.get("visual", (None,))[0],
        attr=cached.get("attribute", (None,))[0],
        rel=cached.get("relation", (None,))[0],
        concat=concat,
    )


def loss_and_grad(kg1: MultiModalKG, kg2: MultiModalKG, params: EnhancerParams,
                  batch, tau: float, modalities=MODALITY_KEYS,
                  structures: tuple | None = None):
    """Total contrastive loss over the batch and its parameter gradients.

    `batch` is a sequence of (entity-in-G1, entity-in-G2) index pairs.
    The loss sums the per-modality bidirectional terms; gradients flow
    through the normalization, the attention softmax, and the linear maps.
    """
    if not batch:
        raise ConfigError("batch must be non-empty")
    if tau <= 0:
        raise ConfigError("tau must be positive")
    idx1 = np.array([p[0] for p in batch], dtype=np.int64)
    idx2 = np.array([p[1] for p in batch], dtype=np.int64)
    s1 = structures[0] if structures else None
    s2 = structures[1] if structures else None
    f1 = _forward_cached(kg1, params, modalities, s1)
    f2 = _forward_cached(kg2, params, modalities, s2)

    grads = EnhancerParams(np.zeros_like(params.w_visual),
                           np.zeros_like(params.w_attr),
                           np.zeros_like(params.w_rel),
                           np.zeros_like(params.attention))
    total = 0.0
    for m in modalities:
        h1, cache1 = f1[m]
        h2, cache2 = f2[m]
        loss_m, dx, dy = _icl_batch_grad(h1[idx1], h2[idx2], tau)
        total += loss_m
        dh1 = np.zeros_like(h1)
        dh2 = np.zeros_like(h2)
        dh1[idx1] = dx
        dh2[idx2] = dy
        if m == "visual":
            dw1, da1 = _gat_backward(dh1, cache1, kg1.visual, params.attention,
                                     cache1["structure"])
            dw2, da2 = _gat_backward(dh2, cache2, kg2.visual, params.attention,
                                     cache2["structure"])
            grads.w_visual += dw1 + dw2
            grads.attention += da1 + da2
        elif m == "attribute":
            grads.w_attr += _linear_norm_backward(dh1, cache1, kg1.attribute)
            grads.w_attr += _linear_norm_backward(dh2, cache2, kg2.attribute)
        else:
            grads.w_rel += _linear_norm_backward(dh1, cache1, kg1.relation)
            grads.w_rel += _linear_norm_backward(dh2, cache2, kg2.relation)
    return total, grads


def train(kg1: MultiModalKG, kg2: MultiModalKG, seeds: SeedSet,
          cfg: TrainConfig, modalities=MODALITY_KEYS) -> TrainResult:
    """Gradient-descent training of the enhancer on the seed pairs.

    Each epoch shuffles the seeds (stream derived from cfg.rng_seed) into
    batches of cfg.batch_size; the per-epoch mean batch loss is recorded.
    Deterministic given cfg.rng_seed.
    """
    cfg.validate()
    if len(seeds) == 0:
        raise ConfigError("cannot train on an empty seed set")
    params = init_params(kg1.visual.shape[1], kg1.attribute.shape[1],
                         kg1.relation.shape[1], cfg.hidden_dim, cfg.rng_seed)
    pairs = [(p.e1, p.e2) for p in seeds.pairs]
    rng = _rng(cfg.rng_seed, 11)
    structures = (_GraphStructure(kg1), _GraphStructure(kg2))
    losses: list[float] = []
    adam_m = adam_v = None
    adam_t = 0
    if cfg.adaptive:
        adam_m = [np.zeros_like(t) for _, t in params.tensors()]
        adam_v = [np.zeros_like(t) for _, t in params.tensors()]
    for _ in range(cfg.epochs):
        order = rng.permutation(len(pairs))
        batch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [pairs[i] for i in order[start:start + cfg.batch_size]]
            loss, grads = loss_and_grad(kg1, kg2, params, batch, cfg.tau,
                                        modalities, structures)
            batch_losses.append(loss)
            if cfg.adaptive:
                adam_t += 1
                for i, ((_, p), (_, gr)) in enumerate(zip(params.tensors(),
                                                          grads.tensors())):
                    adam_m[i] = 0.9 * adam_m[i] + 0.1 * gr
                    adam_v[i] = 0.999 * adam_v[i] + 0.001 * gr * gr
                    mhat = adam_m[i] / (1 - 0.9 ** adam_t)
                    vhat = adam_v[i] / (1 - 0.999 ** adam_t)
                    p -= cfg.lr * mhat / (np.sqrt(vhat) + 1e-8)
            else:
                params.w_visual -= cfg.lr * grads.w_visual
                params.w_attr -= cfg.lr * grads.w_attr
                params.w_rel -= cfg.lr * grads.w_rel
                params.attention -= cfg.lr * grads.attention
        losses.append(float(np.mean(batch_losses)))
    return TrainResult(params=params, losses=losses)


def global_sample(enh1: EnhancedFeatures, enh2: EnhancedFeatures, n: int,
                  existing: SeedSet) -> SeedSet:
    """Greedy one-to-one top-n pairs by enhanced-concatenation cosine,
    restricted to entities absent from `existing`; returns the combined set.
    """
    sim = enh1.concat @ enh2.concat.T
    picks = uvp_seeds(sim, n, exclude=existing, stage="S2")
    return add_pairs(existing, picks.pairs)


def mic_correct(seeds: SeedSet, feat1: np.ndarray, feat2: np.ndarray) -> SeedSet:
    """Drop every pair whose similarity-matrix diagonal entry is not the
    strict row maximum (ties count as failures).

    feat1/feat2 are full per-graph feature matrices with unit rows; the
    seed-indexed submatrices form M. Only the failing pair is removed;
    the competing column is logged.
    """
    if len(seeds) == 0:
        return SeedSet()
    rows1 = feat1[[p.e1 for p in seeds.pairs]]
    rows2 = feat2[[p.e2 for p in seeds.pairs]]
    m = rows1 @ rows2.T
    survivors = []
    for k, pair in enumerate(seeds.pairs):
        row = m[k].copy()
        diag = row[k]
        row[k] = -np.inf
        if diag > row.max(initial=-np.inf):
            survivors.append(pair)
        else:
            rival = int(np.argmax(row))
            log.info("mic: dropping pair (%d,%d); column %d (pair (%d,%d)) "
                     "dominates its row", pair.e1, pair.e2, rival,
                     seeds.pairs[rival].e1, seeds.pairs[rival].e2)
    return SeedSet(survivors)
