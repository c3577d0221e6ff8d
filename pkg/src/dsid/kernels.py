"""Kernel primitives for the feature-independence loss.

RBF and linear kernels over feature vectors, their closed-form gradients,
and the L2 normalization applied to features before kernel evaluation.
All arithmetic is 64-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# Below this Euclidean norm a vector counts as degenerate and normalizes to zero.
DEGENERATE_NORM_EPS = 1e-12


class KernelKind(str, Enum):
    RBF = "rbf"
    LINEAR = "linear"


@dataclass(frozen=True)
class KernelConfig:
    """Kernel choice plus RBF bandwidth.

    ``sigma`` is ignored for the linear kernel. With ``median_heuristic``
    set, batch-level consumers re-derive sigma from the batch at hand
    (median pairwise distance / sqrt(2)) via :func:`resolve_kernel`; the
    derived sigma is treated as a constant when differentiating.
    """

    kind: KernelKind = KernelKind.RBF
    sigma: float = 1.0
    median_heuristic: bool = False

    def __post_init__(self) -> None:
        if self.kind is KernelKind.RBF and not self.sigma > 0.0:
            raise ValueError(f"RBF bandwidth must be positive, got {self.sigma}")


def l2_normalize(x: np.ndarray) -> tuple[np.ndarray, bool]:
    """Scale ``x`` to unit Euclidean norm.

    Returns ``(normalized, degenerate)``. Vectors with norm at or below
    DEGENERATE_NORM_EPS come back as the zero vector with ``degenerate=True``
    rather than dividing by ~0; the caller decides what to do with the flag.
    """
    x = np.asarray(x, dtype=np.float64)
    norm = float(np.linalg.norm(x))
    if norm <= DEGENERATE_NORM_EPS:
        return np.zeros_like(x), True
    return x / norm, False


def _as_pair(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
        raise ValueError(f"kernel dimension mismatch: {u.shape} vs {v.shape}")
    return u, v


def kernel_eval(u: np.ndarray, v: np.ndarray, cfg: KernelConfig) -> float:
    """k(u, v): exp(-||u-v||^2 / (2 sigma^2)) for RBF, u.v for linear."""
    u, v = _as_pair(u, v)
    if cfg.kind is KernelKind.RBF:
        d = u - v
        return float(np.exp(-(d @ d) / (2.0 * cfg.sigma**2)))
    return float(u @ v)


def kernel_eval_grad(
    u: np.ndarray, v: np.ndarray, cfg: KernelConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives (dk/du, dk/dv) of :func:`kernel_eval`."""
    u, v = _as_pair(u, v)
    if cfg.kind is KernelKind.RBF:
        d = u - v
        k = np.exp(-(d @ d) / (2.0 * cfg.sigma**2))
        du = k * (v - u) / cfg.sigma**2
        return du, -du
    return v.copy(), u.copy()


def gram_matrix(vectors: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """N x N kernel matrix over the rows of ``vectors``."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-d row matrix, got shape {x.shape}")
    if cfg.kind is KernelKind.RBF:
        sq = np.sum(x * x, axis=1)
        d2 = sq[:, None] - 2.0 * (x @ x.T) + sq[None, :]
        np.maximum(d2, 0.0, out=d2)  # clamp expansion round-off
        return np.exp(-d2 / (2.0 * cfg.sigma**2))
    return x @ x.T


def median_heuristic_sigma(vectors: np.ndarray) -> float:
    """Median pairwise Euclidean distance divided by sqrt(2).

    Falls back to 1.0 when fewer than two rows are given or the median
    distance is zero (sigma must stay positive).
    """
    x = np.asarray(vectors, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        return 1.0
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] - 2.0 * (x @ x.T) + sq[None, :]
    np.maximum(d2, 0.0, out=d2)
    dists = np.sqrt(d2[np.triu_indices(n, k=1)])
    sigma = float(np.median(dists)) / np.sqrt(2.0)
    return sigma if sigma > 0.0 else 1.0


def resolve_kernel(cfg: KernelConfig, batch_vectors: np.ndarray) -> KernelConfig:
    """Pin the bandwidth for one batch.

    Median-heuristic configs get a concrete sigma derived from
    ``batch_vectors``; anything else passes through unchanged.
    """
    if cfg.kind is KernelKind.RBF and cfg.median_heuristic:
        return KernelConfig(kind=cfg.kind, sigma=median_heuristic_sigma(batch_vectors))
    return cfg
