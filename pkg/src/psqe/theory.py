"""Numerical embodiment of the contrastive-learning analysis: the batch
lower bound with its attraction/repulsion decomposition, closed-form
gradients of the unidirectional loss, and the dense-vs-sparse gradient
skew experiment.

Conventions: the temperature is omitted (tau = 1), the batch holds unit
rows h1_i / h2_i, and the negatives of anchor h1_i are the other pairs'
second-graph vectors {h2_j : j != i}, so each anchor has D = |B| - 1
negatives. The bound exponent is computed from the inner-product form
that Jensen's inequality actually yields (equivalently via the squared
distance identity ||a - b||^2 = 2 - 2 a.b for unit vectors), which makes
the inequality exact at equal inner products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class BoundReport:
    loss: float
    bound: float
    margin: float
    d: int  # negatives per anchor


@dataclass(frozen=True)
class TermDecomposition:
    attraction: np.ndarray  # per anchor: 0.5 * ||h1_i - h2_i||
    repulsion: np.ndarray   # per anchor: (1 / 2D) * sum_j ||h1_i - h2_j||


@dataclass(frozen=True)
class GradientDiagnostics:
    p_pos: float
    p_neg: np.ndarray
    grad: np.ndarray
    repulsion_magnitude: float  # sum_j |P_ij|


def _check_unit_rows(mat: np.ndarray, name: str) -> None:
    norms = np.linalg.norm(mat, axis=1)
    bad = np.where(np.abs(norms - 1.0) > _UNIT_TOL)[0]
    if bad.size:
        raise DataError(f"{name} rows not unit-norm: indices {bad.tolist()[:10]}")


def icl_lower_bound(h1: np.ndarray, h2: np.ndarray) -> BoundReport:
    """Unidirectional batch loss and its Jensen lower bound (tau omitted).

    loss  = sum_i -log( exp(h1_i.h2_i) / (exp(h1_i.h2_i)
                        + sum_{j!=i} exp(h1_i.h2_j)) )
    bound = sum_i log(1 + D exp(mean_{j!=i}(h1_i.h2_j) - h1_i.h2_i))
    """
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    if h1.shape != h2.shape:
        raise DataError(f"batch shapes differ: {h1.shape} vs {h2.shape}")
    b = h1.shape[0]
    if b < 2:
        raise DataError("batch must contain at least 2 pairs")
    _check_unit_rows(h1, "h1")
    _check_unit_rows(h2, "h2")
    d = b - 1
    s = h1 @ h2.T
    pos = np.diagonal(s)
    off = ~np.eye(b, dtype=bool)
    loss = 0.0
    bound = 0.0
    for i in range(b):
        negs = s[i][off[i]]
        m = max(pos[i], negs.max())
        z = np.exp(pos[i] - m) + np.exp(negs - m).sum()
        loss += -(pos[i] - m - np.log(z))
        bound += np.log1p(d * np.exp(negs.mean() - pos[i]))
    return BoundReport(loss=float(loss), bound=float(bound),
                       margin=float(loss - bound), d=d)


def decompose_terms(h1: np.ndarray, h2: np.ndarray) -> TermDecomposition:
    """Per-anchor attraction and repulsion terms as printed in the bound."""
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    _check_unit_rows(h1, "h1")
    _check_unit_rows(h2, "h2")
    b = h1.shape[0]
    if b < 2:
        raise DataError("batch must contain at least 2 pairs")
    d = b - 1
    attraction = 0.5 * np.linalg.norm(h1 - h2, axis=1)
    diff = np.linalg.norm(h1[:, None, :] - h2[None, :, :], axis=2)
    off = ~np.eye(b, dtype=bool)
    repulsion = np.array([diff[i][off[i]].sum() / (2.0 * d) for i in range(b)])
    return TermDecomposition(attraction=attraction, repulsion=repulsion)


def gradient_diagnostics(anchor: np.ndarray, positive: np.ndarray,
                         negatives: np.ndarray) -> GradientDiagnostics:
    """Softmax weights and raw gradient of the unidirectional loss
    -log(exp(a.p) / (exp(a.p) + sum_j exp(a.n_j))) at the anchor.
    """
    anchor = np.asarray(anchor, dtype=np.float64)
    positive = np.asarray(positive, dtype=np.float64)
    negatives = np.atleast_2d(np.asarray(negatives, dtype=np.float64)) \
        if len(negatives) else np.empty((0, anchor.size))
    logits = np.concatenate([[anchor @ positive], negatives @ anchor])
    m = logits.max()
    e = np.exp(logits - m)
    z = e.sum()
    p_pos = float(e[0] / z)
    p_neg = e[1:] / z
    grad = positive * (p_pos - 1.0)
    if p_neg.size:
        grad = grad + p_neg @ negatives
    return GradientDiagnostics(p_pos=p_pos, p_neg=p_neg, grad=grad,
                               repulsion_magnitude=float(np.abs(p_neg).sum()))


def analytic_icl_gradient(anchor: np.ndarray, positive: np.ndarray,
                          negatives, with_normalization: bool = False) -> np.ndarray:
    """Closed-form gradient of the unidirectional loss at the anchor.

    Without normalization the anchor is treated as the embedding itself.
    With normalization the anchor is the pre-normalization vector w and
    the gradient is projected: (I - h h^T) / ||w|| applied to the raw
    gradient evaluated at h = w / ||w||.
    """
    anchor = np.asarray(anchor, dtype=np.float64)
    negatives = list(negatives)
    if with_normalization:
        norm = np.linalg.norm(anchor)
        if norm == 0:
            raise DataError("cannot normalize a zero anchor")
        h = anchor / norm
        diag = gradient_diagnostics(h, positive, np.array(negatives)
                                    if negatives else np.empty((0, anchor.size)))
        g = diag.grad
        return (g - h * (h @ g)) / norm
    diag = gradient_diagnostics(anchor, positive, np.array(negatives)
                                if negatives else np.empty((0, anchor.size)))
    return diag.grad


def unidirectional_loss(anchor: np.ndarray, positive: np.ndarray,
                        negatives, normalize_anchor: bool = False) -> float:
    """The scalar loss differentiated by analytic_icl_gradient (used by
    the finite-difference harness)."""
    anchor = np.asarray(anchor, dtype=np.float64)
    if normalize_anchor:
        anchor = anchor / np.linalg.norm(anchor)
    logits = [float(anchor @ positive)] + [float(anchor @ n) for n in negatives]
    logits = np.array(logits)
    m = logits.max()
    e = np.exp(logits - m)
    return float(-(logits[0] - m - np.log(e.sum())))


@dataclass(frozen=True)
class SkewReport:
    dense_contribution: float
    sparse_contribution: float
    dense_count: int
    sparse_count: int

    @property
    def ratio(self) -> float:
        if self.sparse_contribution == 0.0:
            return float("inf") if self.dense_contribution > 0 else 1.0
        return self.dense_contribution / self.sparse_contribution


def _tangent_unit(rng: np.random.Generator, anchor: np.ndarray) -> np.ndarray:
    v = rng.normal(size=anchor.size)
    v = v - anchor * (anchor @ v)
    return v / np.linalg.norm(v)


def _group(rng, anchor, count, dot, spread, dot_jitter=0.02):
    """Unit vectors near a target inner product with the anchor; spread 0
    collapses the group onto one direction (near-duplicates)."""
    out = np.empty((count, anchor.size))
    base = _tangent_unit(rng, anchor)
    for i in range(count):
        d = float(np.clip(dot + dot_jitter * rng.normal(), -0.999, 0.999))
        jitter = _tangent_unit(rng, anchor)
        direction = base + spread * jitter
        direction = direction - anchor * (anchor @ direction)
        direction = direction / np.linalg.norm(direction)
        out[i] = d * anchor + np.sqrt(1.0 - d * d) * direction
    return out


def repulsion_skew_experiment(dense_count: int, sparse_count: int,
                              rng_seed: int, dense_dot: float = 0.9,
                              sparse_dot: float = 0.0,
                              dense_spread: float = 0.05,
                              sparse_spread: float = 10.0,
                              dim: int = 16) -> SkewReport:
    """Aggregate gradient-magnitude contribution of a concentrated group
    of negatives versus a scattered far group.

    Each negative j contributes |P_ij| * ||n_j - (a.n_j) a|| (the
    tangential component of its gradient term); contributions are summed
    per group.
    """
    if dense_count < 0 or sparse_count < 0:
        raise DataError("group counts must be >= 0")
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(3,)))
    anchor = rng.normal(size=dim)
    anchor /= np.linalg.norm(anchor)
    positive = anchor.copy()
    groups = []
    for count, dot, spread in ((dense_count, dense_dot, dense_spread),
                               (sparse_count, sparse_dot, sparse_spread)):
        groups.append(_group(rng, anchor, count, dot, spread)
                      if count > 0 else np.empty((0, dim)))
    negatives = np.concatenate(groups, axis=0)
    if negatives.shape[0] == 0:
        return SkewReport(0.0, 0.0, dense_count, sparse_count)
    diag = gradient_diagnostics(anchor, positive, negatives)
    tangential = np.linalg.norm(
        negatives - np.outer(negatives @ anchor, anchor), axis=1)
    contrib = np.abs(diag.p_neg) * tangential
    return SkewReport(
        dense_contribution=float(contrib[:dense_count].sum()),
        sparse_contribution=float(contrib[dense_count:].sum()),
        dense_count=dense_count,
        sparse_count=sparse_count,
    )


def run_theory_checks(n_batches: int = 1000, rng_seed: int = 42,
                      fd_instances: int = 100) -> dict:
    """Randomized verification sweep used by the theory-check command.

    Returns {"bound_violations", "max_fd_error", "tightness_gap", ...}.
    """
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(9,)))
    violations = 0
    worst_margin = np.inf
    for _ in range(n_batches):
        b = int(rng.integers(2, 65))
        dim = int(rng.integers(4, 65))
        h1 = rng.normal(size=(b, dim))
        h2 = rng.normal(size=(b, dim))
        h1 /= np.linalg.norm(h1, axis=1, keepdims=True)
        h2 /= np.linalg.norm(h2, axis=1, keepdims=True)
        rep = icl_lower_bound(h1, h2)
        worst_margin = min(worst_margin, rep.margin)
        if rep.margin < -1e-9:
            violations += 1

    # tightness: all anchor-to-candidate inner products equal
    tightness_gap = 0.0
    for _ in range(50):
        b = int(rng.integers(2, 17))
        dim = int(rng.integers(4, 33))
        h1 = rng.normal(size=(b, dim))
        h1 /= np.linalg.norm(h1, axis=1, keepdims=True)
        shared = rng.normal(size=dim)
        shared /= np.linalg.norm(shared)
        h2 = np.tile(shared, (b, 1))
        rep = icl_lower_bound(h1, h2)
        tightness_gap = max(tightness_gap, abs(rep.margin))

    step = 1e-5
    max_fd = 0.0
    for _ in range(fd_instances):
        dim = int(rng.integers(3, 9))
        n_neg = int(rng.integers(1, 7))
        anchor = rng.normal(size=dim)
        positive = rng.normal(size=dim)
        positive /= np.linalg.norm(positive)
        negatives = rng.normal(size=(n_neg, dim))
        negatives /= np.linalg.norm(negatives, axis=1, keepdims=True)
        for normalize in (False, True):
            a0 = anchor if normalize else anchor / np.linalg.norm(anchor)
            grad = analytic_icl_gradient(a0, positive, negatives,
                                         with_normalization=normalize)
            for c in range(dim):
                shift = np.zeros(dim)
                shift[c] = step
                lp = unidirectional_loss(a0 + shift, positive, negatives,
                                         normalize_anchor=normalize)
                lm = unidirectional_loss(a0 - shift, positive, negatives,
                                         normalize_anchor=normalize)
                fd = (lp - lm) / (2 * step)
                rel = abs(fd - grad[c]) / max(abs(fd) + abs(grad[c]), 1e-6)
                max_fd = max(max_fd, rel)

    return {
        "batches": n_batches,
        "bound_violations": violations,
        "worst_margin": float(worst_margin),
        "tightness_gap": float(tightness_gap),
        "max_fd_error": float(max_fd),
    }
