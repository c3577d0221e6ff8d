"""Feature-independence losses (HSIC) with exact gradients.

Two batch modes are shipped:

* ``PAPER_PER_SAMPLE``: the mean over samples of
  ``(k(x_i, y_i) - k(x_i, x_i) * k(y_i, y_i))^2``, self-kernels included.
  Under an RBF kernel the self-kernels are identically 1, so each term
  degenerates to ``(k(x_i, y_i) - 1)^2``: zero at x_i = y_i and strictly
  positive otherwise. That degeneracy is deliberate and is asserted by the
  test suite rather than silently repaired.
* ``CLASSICAL_BIASED``: the standard biased batch estimator
  ``tr(K H L H) / (N - 1)^2`` with centering matrix ``H = I - (1/N) 11^T``,
  which is zero in expectation for statistically independent batches. It
  doubles as an oracle for the per-sample mode and as the loss for callers
  who want the textbook statistic.

A permutation test over the classical statistic provides an end-to-end
independence check.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .kernels import (
    KernelConfig,
    KernelKind,
    gram_matrix,
    kernel_eval,
    kernel_eval_grad,
    l2_normalize,
    resolve_kernel,
)


class HsicMode(str, Enum):
    PAPER_PER_SAMPLE = "paper"
    CLASSICAL_BIASED = "classical"


@dataclass(frozen=True, eq=False)
class FeaturePair:
    """One sample's normalized branch features entering the HSIC loss."""

    x_hat: np.ndarray
    y_hat: np.ndarray
    x_degenerate: bool = False
    y_degenerate: bool = False

    def __post_init__(self) -> None:
        if (
            self.x_hat.ndim != 1
            or self.y_hat.ndim != 1
            or self.x_hat.shape != self.y_hat.shape
        ):
            raise ValueError(
                f"feature pair dimension mismatch: {self.x_hat.shape} vs {self.y_hat.shape}"
            )

    @classmethod
    def from_raw(cls, x: np.ndarray, y: np.ndarray) -> "FeaturePair":
        """Normalize raw branch features and record degeneracy flags."""
        x_hat, x_deg = l2_normalize(x)
        y_hat, y_deg = l2_normalize(y)
        return cls(x_hat, y_hat, x_deg, y_deg)


def hsic_per_sample(pair: FeaturePair, cfg: KernelConfig) -> float:
    """(k_xy - k_xx * k_yy)^2 for one feature pair; always >= 0."""
    k_xy = kernel_eval(pair.x_hat, pair.y_hat, cfg)
    k_xx = kernel_eval(pair.x_hat, pair.x_hat, cfg)
    k_yy = kernel_eval(pair.y_hat, pair.y_hat, cfg)
    return (k_xy - k_xx * k_yy) ** 2


def _stack(pairs: Sequence[FeaturePair]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([p.x_hat for p in pairs])
    y = np.stack([p.y_hat for p in pairs])
    return x, y


def _centering(n: int) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


def _classical_value(x: np.ndarray, y: np.ndarray, cfg: KernelConfig) -> float:
    # tr(K H L H) = sum((H K H) * L) elementwise, L symmetric.
    n = x.shape[0]
    k = gram_matrix(x, cfg)
    l = gram_matrix(y, cfg)
    h = _centering(n)
    return float(np.sum((h @ k @ h) * l)) / (n - 1) ** 2


def hsic_batch_loss(
    pairs: Sequence[FeaturePair], cfg: KernelConfig, mode: HsicMode
) -> float:
    """Batch-level independence loss under the selected mode."""
    n = len(pairs)
    if n == 0:
        raise ValueError("empty batch")
    x, y = _stack(pairs)
    cfg = resolve_kernel(cfg, np.vstack([x, y]))
    if mode is HsicMode.PAPER_PER_SAMPLE:
        return float(np.mean([hsic_per_sample(p, cfg) for p in pairs]))
    if n < 2:
        raise ValueError("centering requires N >= 2")
    return _classical_value(x, y, cfg)


def _self_kernel_total_grad(v: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    # d k(v, v) / dv through both arguments: zero for RBF, 2v for linear.
    du, dv = kernel_eval_grad(v, v, cfg)
    return du + dv


def hsic_batch_grad(
    pairs: Sequence[FeaturePair], cfg: KernelConfig, mode: HsicMode
) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradients of :func:`hsic_batch_loss` w.r.t. every x_hat and y_hat.

    Returns ``(grad_x, grad_y)``, each N x d. The chain through the L2
    normalization that produced the features is the caller's business.
    """
    n = len(pairs)
    if n == 0:
        raise ValueError("empty batch")
    x, y = _stack(pairs)
    cfg = resolve_kernel(cfg, np.vstack([x, y]))

    if mode is HsicMode.PAPER_PER_SAMPLE:
        grad_x = np.zeros_like(x)
        grad_y = np.zeros_like(y)
        for i, p in enumerate(pairs):
            k_xy = kernel_eval(p.x_hat, p.y_hat, cfg)
            k_xx = kernel_eval(p.x_hat, p.x_hat, cfg)
            k_yy = kernel_eval(p.y_hat, p.y_hat, cfg)
            r = k_xy - k_xx * k_yy
            d_xy_du, d_xy_dv = kernel_eval_grad(p.x_hat, p.y_hat, cfg)
            grad_x[i] = (2.0 / n) * r * (
                d_xy_du - k_yy * _self_kernel_total_grad(p.x_hat, cfg)
            )
            grad_y[i] = (2.0 / n) * r * (
                d_xy_dv - k_xx * _self_kernel_total_grad(p.y_hat, cfg)
            )
        return grad_x, grad_y

    if n < 2:
        raise ValueError("centering requires N >= 2")
    k = gram_matrix(x, cfg)
    l = gram_matrix(y, cfg)
    h = _centering(n)
    m_x = h @ l @ h  # d tr(K H L H) / dK
    m_y = h @ k @ h  # d tr(K H L H) / dL
    c = 2.0 / (n - 1) ** 2
    if cfg.kind is KernelKind.RBF:
        # dK_pj/dx_p = K_pj (x_j - x_p) / sigma^2, summed against M over j
        # (diagonal terms vanish because the RBF self-kernel is constant).
        w_x = m_x * k
        w_y = m_y * l
        s2 = cfg.sigma**2
        grad_x = (c / s2) * (w_x @ x - w_x.sum(axis=1, keepdims=True) * x)
        grad_y = (c / s2) * (w_y @ y - w_y.sum(axis=1, keepdims=True) * y)
    else:
        grad_x = c * (m_x @ x)
        grad_y = c * (m_y @ y)
    return grad_x, grad_y


def permutation_independence_test(
    x_set: np.ndarray,
    y_set: np.ndarray,
    cfg: KernelConfig,
    n_perm: int,
    seed: int,
) -> tuple[float, float]:
    """Permutation test of independence using the classical biased statistic.

    The p-value is the add-one-smoothed fraction of row-permuted statistics
    at or above the observed one: ``(1 + hits) / (1 + n_perm)``.
    """
    x = np.asarray(x_set, dtype=np.float64)
    y = np.asarray(y_set, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError(f"paired row matrices required, got {x.shape} and {y.shape}")
    n = x.shape[0]
    if n < 5:
        raise ValueError(f"independence test requires N >= 5, got {n}")
    if n_perm < 100:
        raise ValueError(f"independence test requires n_perm >= 100, got {n_perm}")

    cfg = resolve_kernel(cfg, np.vstack([x, y]))
    k = gram_matrix(x, cfg)
    l = gram_matrix(y, cfg)
    h = _centering(n)
    kc = h @ k @ h
    denom = (n - 1) ** 2
    statistic = float(np.sum(kc * l)) / denom  # tr(K H L H) rearranged

    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_perm):
        perm = rng.permutation(n)
        stat_perm = float(np.sum(kc * l[np.ix_(perm, perm)])) / denom
        if stat_perm >= statistic:
            hits += 1
    p_value = (1 + hits) / (1 + n_perm)
    return statistic, p_value
