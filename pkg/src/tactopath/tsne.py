"""Exact t-SNE: perplexity calibration by per-point bandwidth search,
PCA initialization, early exaggeration, and momentum gradient descent.

N stays small here (tens of points), so the O(N^2) exact formulation is
used throughout; that keeps the analytic gradient checkable against finite
differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

P_FLOOR = 1e-12


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 5.0
    iterations: int = 5000
    learning_rate: float = 100.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    momentum_switch_iter: int = 250
    seed: int = 0
    init: str = "pca"  # pca | random

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True)
class AffinityMatrix:
    P: np.ndarray          # symmetric joint probabilities, sums to 1
    bandwidths: np.ndarray  # per-point Gaussian sigma_i


@dataclass(frozen=True)
class Embedding:
    points: np.ndarray  # (N, 2)
    kl_trace: np.ndarray  # per-iteration KL divergence (un-exaggerated P)


def pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def pca_project(X: np.ndarray, dims: int = 2, scale: float = 1e-4) -> np.ndarray:
    """Mean-centered projection onto the top principal directions.

    Uses the N x N Gram matrix (suitable when the feature dimension far
    exceeds the point count). Degenerate all-identical input projects to
    zeros. The output is scaled down for use as a t-SNE init.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    Xc = X - X.mean(axis=0)
    gram = Xc @ Xc.T
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1][:dims]
    out = np.zeros((n, dims))
    for j, idx in enumerate(order):
        lam = evals[idx]
        if lam > 1e-10:
            out[:, j] = evecs[:, idx] * np.sqrt(lam)
    return out * scale


def _entropy_and_probs(d2_row: np.ndarray, beta: float):
    """Shannon entropy (nats) and conditional probabilities for one point.

    If every exponential underflows (large beta on near-equidistant rows),
    retry with distances shifted by the row minimum; the shift leaves the
    normalized distribution (and hence its entropy) unchanged.
    """
    with np.errstate(under="ignore"):
        p = np.exp(-d2_row * beta)
    s = p.sum()
    if s <= 0:
        d2_row = d2_row - d2_row.min()
        p = np.exp(-d2_row * beta)
        s = p.sum()
    h = np.log(s) + beta * (d2_row * p).sum() / s
    return h, p / s


def calibrate_affinities(X: np.ndarray, perplexity: float,
                         max_iter: int = 50, tol: float = 1e-5) -> AffinityMatrix:
    """Binary-search each point's Gaussian bandwidth to the target perplexity,
    then symmetrize the conditionals into joint affinities."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if perplexity >= n:
        raise ValueError(f"perplexity {perplexity} must be < point count {n}")
    d2 = pairwise_sq_dists(X)
    if np.all(d2 < 1e-24):
        raise ValueError("all points identical; affinities undefined")
    target = np.log(perplexity)  # entropy target in nats
    P_cond = np.zeros((n, n))
    betas = np.ones(n)
    mask = ~np.eye(n, dtype=bool)
    for i in range(n):
        row = d2[i][mask[i]]
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        h, p = _entropy_and_probs(row, beta)
        for _ in range(max_iter):
            # tolerance is stated on the log2 scale
            if abs(h - target) / np.log(2) < tol:
                break
            if h > target:
                beta_min = beta
                beta = beta * 2.0 if np.isinf(beta_max) else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if np.isinf(beta_min) else (beta + beta_min) / 2.0
            h, p = _entropy_and_probs(row, beta)
        betas[i] = beta
        P_cond[i][mask[i]] = p
    P = (P_cond + P_cond.T) / (2.0 * n)
    P = np.maximum(P, P_FLOOR)
    np.fill_diagonal(P, 0.0)
    return AffinityMatrix(P=P, bandwidths=np.sqrt(1.0 / (2.0 * betas)))


def _q_matrix(Y: np.ndarray):
    num = 1.0 / (1.0 + pairwise_sq_dists(Y))
    np.fill_diagonal(num, 0.0)
    Q = num / num.sum()
    return np.maximum(Q, P_FLOOR), num


def kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    Q, _ = _q_matrix(Y)
    mask = P > 0
    return float((P[mask] * np.log(P[mask] / Q[mask])).sum())


def tsne_gradient(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """dKL/dY: 4 * sum_j (p_ij - q_ij) (y_i - y_j) / (1 + |y_i - y_j|^2)."""
    Q, num = _q_matrix(Y)
    W = (P - Q) * num
    return 4.0 * ((np.diag(W.sum(axis=1)) - W) @ Y)


def tsne_run(X: np.ndarray, config: TsneConfig) -> Embedding:
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    aff = calibrate_affinities(X, config.perplexity)
    P = aff.P
    rng = np.random.Generator(np.random.PCG64(config.seed))
    if config.init == "pca":
        Y = pca_project(X, dims=2)
        if not Y.any():
            Y = rng.normal(0.0, 1e-4, size=(n, 2))
    else:
        Y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(Y)
    kl_trace = np.empty(config.iterations)
    for it in range(config.iterations):
        P_eff = P * config.early_exaggeration if it < config.exaggeration_iters else P
        grad = tsne_gradient(P_eff, Y)
        if not np.isfinite(grad).all():
            raise FloatingPointError(f"t-SNE gradient overflow at iteration {it}")
        mom = (config.momentum_start if it < config.momentum_switch_iter
               else config.momentum_final)
        velocity = mom * velocity - config.learning_rate * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)
        kl_trace[it] = kl_divergence(P, Y)
    return Embedding(points=Y, kl_trace=kl_trace)
