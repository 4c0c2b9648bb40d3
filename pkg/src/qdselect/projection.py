"""Exact t-SNE projection of archive genomes into a 2-D similarity space.

Distances between genomes of different tasks are made comparable by
per-gene min-max scaling to the unit box before computing affinities. The
descent is fully deterministic: initialization comes from the top two
principal components (with a fixed sign convention), so the map depends
only on the input data and configuration.

Only the sampled image of the archive is ever computed here; freezing the
map for out-of-sample genomes is the regression model's job (see
:mod:`qdselect.gp`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform
from sklearn.base import BaseEstimator

_EPS = 1e-12


@dataclass(frozen=True)
class ProjectionConfig:
    """Exact t-SNE settings (standard defaults)."""

    perplexity: float = 30.0
    iterations: int = 1000
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    # "auto" follows the common heuristic max(m / exaggeration / 4, 50);
    # fixed rates around 200 tear disconnected clusters apart at small m
    learning_rate: float | str = "auto"
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    momentum_switch: int = 250
    seed: int = 0
    output_dim: int = 2

    def __post_init__(self):
        if self.output_dim != 2:
            raise ValueError("the similarity space is two-dimensional")
        if self.perplexity <= 1:
            raise ValueError("perplexity must exceed 1")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if self.learning_rate != "auto" and not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive or 'auto'")

    def resolve_learning_rate(self, m: int) -> float:
        if self.learning_rate == "auto":
            return max(m / self.early_exaggeration / 4.0, 50.0)
        return float(self.learning_rate)

    def to_dict(self) -> dict:
        return {
            "perplexity": self.perplexity,
            "iterations": self.iterations,
            "early_exaggeration": self.early_exaggeration,
            "exaggeration_iters": self.exaggeration_iters,
            "learning_rate": self.learning_rate,
            "momentum_start": self.momentum_start,
            "momentum_final": self.momentum_final,
            "momentum_switch": self.momentum_switch,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectionConfig":
        return cls(**d)


@dataclass
class Embedding:
    """Result of one projection run."""

    points: np.ndarray
    kl_final: float
    kl_exaggeration_end: float
    kl_history: np.ndarray
    perplexity_effective: float

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def normalize_unit_box(X: np.ndarray):
    """Per-gene min-max scaling of the data to [0, 1].

    Returns (scaled, lo, span); constant genes get span 1 so they map to 0.
    The same (lo, span) must be reused for any later queries.
    """
    X = np.asarray(X, dtype=np.float64)
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span = np.where(span > 0.0, span, 1.0)
    return (X - lo) / span, lo, span


def effective_perplexity(perplexity: float, m: int) -> float:
    """Cap the perplexity so the row-entropy target stays reachable."""
    return float(min(perplexity, max(1.1, (m - 1) / 3.0)))


def conditional_affinities(X: np.ndarray, perplexity: float):
    """Row-conditional Gaussian affinities with per-row bandwidth bisection.

    Each row's bandwidth is tuned until the Shannon entropy (nats) of the
    conditional distribution equals log(perplexity). Returns (P_cond, betas).
    """
    X = np.asarray(X, dtype=np.float64)
    m = X.shape[0]
    if m < 3:
        raise ValueError("need at least 3 points")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite values")
    D2 = squareform(pdist(X, "sqeuclidean"))
    if not D2.any():
        raise ValueError("all points are identical; affinities are undefined")
    target = math.log(perplexity)
    P = np.zeros((m, m))
    betas = np.ones(m)
    idx = np.arange(m)
    for i in range(m):
        d2 = np.delete(D2[i], i)
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        row = None
        for _ in range(100):
            expd = np.exp(-d2 * beta)
            s = expd.sum()
            if s <= 0.0:
                # bandwidth underflow: limit is uniform over nearest neighbors
                row = (d2 == d2.min()).astype(np.float64)
                row /= row.sum()
                h = math.log(row.max() ** -1)
            else:
                h = math.log(s) + beta * float((d2 * expd).sum()) / s
                row = expd / s
            diff = h - target
            if abs(diff) < 1e-7:
                break
            if diff > 0:
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else 0.5 * (beta + beta_max)
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == -np.inf else 0.5 * (beta + beta_min)
        betas[i] = beta
        P[i, idx != i] = row
    return P, betas


def row_entropies(P_cond: np.ndarray) -> np.ndarray:
    """Shannon entropy (nats) of each conditional affinity row."""
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.where(P_cond > 0, np.log(P_cond), 0.0)
    return -(P_cond * logp).sum(axis=1)


def pairwise_affinities(X: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetrized joint affinities; the whole matrix sums to 1."""
    P_cond, _ = conditional_affinities(X, perplexity)
    P = (P_cond + P_cond.T) / (2.0 * X.shape[0])
    return P


def _pca_init(X: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic initial layout from the top-2 principal components,
    rescaled to the usual tiny spread."""
    Xc = X - X.mean(axis=0)
    U, S, Vt = np.linalg.svd(Xc, full_matrices=False)
    for k in range(min(2, Vt.shape[0])):
        j = int(np.argmax(np.abs(Vt[k])))
        if Vt[k, j] < 0:
            U[:, k] = -U[:, k]
    scores = np.zeros((X.shape[0], 2))
    take = min(2, U.shape[1])
    scores[:, :take] = U[:, :take] * S[:take]
    std0 = scores[:, 0].std()
    if std0 > 0:
        return scores / std0 * 1e-4
    return np.random.default_rng(seed).normal(0.0, 1e-4, size=(X.shape[0], 2))


def _kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    mask = P > 0
    return float((P[mask] * np.log(P[mask] / Q[mask])).sum())


def run_tsne(genomes: np.ndarray, config: Optional[ProjectionConfig] = None,
             normalize: bool = True) -> Embedding:
    """Project genomes to 2-D by gradient descent on the t-SNE objective.

    KL divergence against the (un-exaggerated) affinities is tracked every
    iteration; the output is centered on the origin. Rows are processed in
    a canonical (lexicographic) order internally, so permuting the input
    permutes the output exactly: the descent amplifies even last-bit
    differences, and the reordering removes them at the source.
    """
    config = config or ProjectionConfig()
    X = np.asarray(genomes, dtype=np.float64)
    if normalize:
        X, _, _ = normalize_unit_box(X)
    order = np.lexsort(X.T[::-1])
    inverse = np.empty_like(order)
    inverse[order] = np.arange(order.size)
    X = X[order]
    m = X.shape[0]
    perp = effective_perplexity(config.perplexity, m)
    P = pairwise_affinities(X, perp)
    P = np.maximum(P, _EPS)

    learning_rate = config.resolve_learning_rate(m)
    Y = _pca_init(X, config.seed)
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    kl_history = np.empty(config.iterations)
    exag_end = min(config.exaggeration_iters, config.iterations) - 1

    for it in range(config.iterations):
        exaggerating = it < config.exaggeration_iters
        P_eff = P * config.early_exaggeration if exaggerating else P
        momentum = (config.momentum_start if it < config.momentum_switch
                    else config.momentum_final)
        # Student-t responsibilities in the embedding
        sq = np.sum(Y * Y, axis=1)
        D = sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T)
        num = 1.0 / (1.0 + D)
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), _EPS)
        PQ = (P_eff - Q) * num
        grad = 4.0 * ((np.diag(PQ.sum(axis=1)) - PQ) @ Y)
        flip = np.sign(grad) != np.sign(velocity)
        gains = np.where(flip, gains + 0.2, gains * 0.8)
        np.clip(gains, 0.01, None, out=gains)
        velocity = momentum * velocity - learning_rate * (gains * grad)
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)
        kl_history[it] = _kl_divergence(P, Q)

    return Embedding(points=Y[inverse], kl_final=float(kl_history[-1]),
                     kl_exaggeration_end=float(kl_history[exag_end]),
                     kl_history=kl_history, perplexity_effective=perp)


class ExactTSNE(BaseEstimator):
    """Estimator wrapper around :func:`run_tsne`.

    ``fit_transform(X)`` returns the (m, 2) embedding; the full
    :class:`Embedding` record lands in ``embedding_``.
    """

    def __init__(self, perplexity: float = 30.0, iterations: int = 1000,
                 early_exaggeration: float = 12.0, exaggeration_iters: int = 250,
                 learning_rate: float | str = "auto", seed: int = 0, normalize: bool = True):
        self.perplexity = perplexity
        self.iterations = iterations
        self.early_exaggeration = early_exaggeration
        self.exaggeration_iters = exaggeration_iters
        self.learning_rate = learning_rate
        self.seed = seed
        self.normalize = normalize

    def fit_transform(self, X, y=None) -> np.ndarray:
        config = ProjectionConfig(
            perplexity=self.perplexity, iterations=self.iterations,
            early_exaggeration=self.early_exaggeration,
            exaggeration_iters=self.exaggeration_iters,
            learning_rate=self.learning_rate, seed=self.seed)
        self.embedding_ = run_tsne(X, config, normalize=self.normalize)
        return self.embedding_.points

    def fit(self, X, y=None):
        self.fit_transform(X)
        return self
