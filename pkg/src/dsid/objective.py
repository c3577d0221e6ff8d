"""Classification losses and the weighted training objective.

The total objective is ``L_total = L_true + beta * L_disguised + alpha * L_hsic``:
two plain cross-entropy terms, one per branch, plus the feature-independence
loss over the normalized branch features. Component values are reported
unweighted; alpha and beta enter only the sum and the combined gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .independence import FeaturePair, HsicMode, hsic_batch_grad, hsic_batch_loss
from .kernels import KernelConfig


@dataclass(frozen=True)
class ObjectiveConfig:
    """Loss weights plus the kernel/mode the independence term runs under."""

    alpha: float = 0.5
    beta: float = 1.0
    kernel: KernelConfig = field(default_factory=KernelConfig)
    hsic_mode: HsicMode = HsicMode.PAPER_PER_SAMPLE

    def __post_init__(self) -> None:
        for name, value in (("alpha", self.alpha), ("beta", self.beta)):
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


def cross_entropy(
    logits: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean negative log-softmax likelihood and its logit gradient.

    Stabilized with the log-sum-exp shift; the gradient is
    ``(softmax - onehot) / N``, so each row sums to zero.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.ndim != 1 or logits.shape[0] != labels.shape[0]:
        raise ValueError(
            f"logits {logits.shape} and labels {labels.shape} do not align"
        )
    n, c = logits.shape
    if n < 1:
        raise ValueError("empty batch")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"label out of range [0, {c})")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(n)
    loss = float(-np.mean(log_probs[rows, labels]))
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    grad /= n
    return loss, grad


@dataclass
class TotalLossResult:
    """Total objective value, unweighted components, and combined gradients.

    ``grad_x_hat``/``grad_y_hat`` are the alpha-weighted independence-loss
    gradients w.r.t. the normalized branch features; they are None when
    alpha is zero (nothing to propagate).
    """

    total: float
    loss_true: float
    loss_disguised: float
    loss_hsic: float
    grad_true_logits: np.ndarray
    grad_disg_logits: np.ndarray
    grad_x_hat: np.ndarray | None
    grad_y_hat: np.ndarray | None


def total_loss(
    true_logits: np.ndarray,
    disg_logits: np.ndarray,
    pairs: Sequence[FeaturePair],
    true_labels: np.ndarray,
    disg_labels: np.ndarray,
    cfg: ObjectiveConfig,
) -> TotalLossResult:
    """Evaluate the full objective and the gradients of each path."""
    n = len(pairs)
    shapes = {
        np.asarray(true_logits).shape[0],
        np.asarray(disg_logits).shape[0],
        np.asarray(true_labels).shape[0],
        np.asarray(disg_labels).shape[0],
        n,
    }
    if len(shapes) != 1:
        raise ValueError(f"inconsistent batch sizes across objective inputs: {shapes}")

    loss_t, grad_t = cross_entropy(true_logits, true_labels)
    loss_d, grad_d = cross_entropy(disg_logits, disg_labels)
    loss_h = hsic_batch_loss(pairs, cfg.kernel, cfg.hsic_mode)

    if cfg.alpha > 0.0:
        gx, gy = hsic_batch_grad(pairs, cfg.kernel, cfg.hsic_mode)
        grad_x_hat: np.ndarray | None = cfg.alpha * gx
        grad_y_hat: np.ndarray | None = cfg.alpha * gy
    else:
        grad_x_hat = None
        grad_y_hat = None

    total = loss_t + cfg.beta * loss_d + cfg.alpha * loss_h
    return TotalLossResult(
        total=total,
        loss_true=loss_t,
        loss_disguised=loss_d,
        loss_hsic=loss_h,
        grad_true_logits=grad_t,
        grad_disg_logits=cfg.beta * grad_d,
        grad_x_hat=grad_x_hat,
        grad_y_hat=grad_y_hat,
    )
