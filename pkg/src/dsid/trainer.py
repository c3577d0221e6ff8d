"""Fold training loop and leave-one-subject-out orchestration.

Reproducibility contract: a fold is a pure function of (data, configs, fold
seed). The fold seed feeds a SeedSequence whose children drive, in order,
parameter init, per-epoch shuffling, the three dropout layer streams, and the
optional inner monitor split. Branch gating never consumes draws from the
streams of the layers that remain active, so variants can be compared on
identical randomness.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dataio import Dataset, split_by_subject
from .metrics import PooledScores, pool_folds, predict_labels
from .netcore import (
    BOTH_STREAMS,
    DISGUISED_ONLY,
    TRUE_ONLY,
    ActiveStreams,
    DropoutStreams,
    DsidModel,
    Mode,
    ModelDims,
    backward,
    clone_model,
    forward,
    init_params,
    named_grads,
    named_params,
)
from .objective import ObjectiveConfig, cross_entropy, total_loss


class MonitorMode(str, Enum):
    # Score each epoch on the held-out subject itself. This mirrors the
    # original protocol; it leaks the evaluation fold into the stopping
    # decision, which is why the inner holdout exists as an alternative.
    HELD_OUT_FOLD = "heldout"
    # Score on a seeded split carved from the training subjects instead.
    INNER_HOLDOUT = "inner"


class MethodVariant(str, Enum):
    """What to train.

    The two SINGLE_* variants gate one branch of the dual topology off (the
    other branch trains exactly as it would inside the full model). The
    BASELINE_* variants train the shallow probe instead (head straight on
    the shared adapter, d_feat = 0): BASELINE_TRUE fits trunk and head on
    the true task; BASELINE_DISG replays that same fit bitwise, then trains
    only the disguised head on the frozen trunk, so its score measures how
    much disguise signal the true-task model retains.
    """

    DSID = "dsid"
    DSID_NO_HSIC = "dsid-no-hsic"
    SINGLE_TRUE = "single-true"
    SINGLE_DISG = "single-disguised"
    BASELINE_TRUE = "baseline-true"
    BASELINE_DISG = "baseline-disguised"


def active_streams(variant: MethodVariant) -> ActiveStreams:
    if variant in (MethodVariant.SINGLE_TRUE, MethodVariant.BASELINE_TRUE):
        return TRUE_ONLY
    if variant in (MethodVariant.SINGLE_DISG, MethodVariant.BASELINE_DISG):
        return DISGUISED_ONLY
    return BOTH_STREAMS


def variant_dims(variant: MethodVariant, dims: ModelDims) -> ModelDims:
    """Baseline variants train the probe topology regardless of d_feat."""
    if variant in (MethodVariant.BASELINE_TRUE, MethodVariant.BASELINE_DISG):
        return dataclasses.replace(dims, d_feat=0)
    return dims


def effective_objective(variant: MethodVariant, cfg: ObjectiveConfig) -> ObjectiveConfig:
    """Variant semantics: everything except plain DSID forces alpha to 0."""
    if variant is MethodVariant.DSID:
        return cfg
    return dataclasses.replace(cfg, alpha=0.0)


def monitor_blend(streams: ActiveStreams, beta: float) -> tuple[float, float]:
    """Per-task weights (w_true, w_disg) for the early-stopping accuracy.

    Single-stream models watch their own task. Dual-stream models watch the
    beta-weighted mean (acc_T + beta * acc_D) / (1 + beta), mirroring how the
    objective weights the two task losses. At beta = 0 this reduces exactly
    to the true-task accuracy, so checkpoint selection matches a single-stream
    run with the same seeds.
    """
    if not streams.both:
        return (1.0, 0.0) if streams.true else (0.0, 1.0)
    return 1.0 / (1.0 + beta), beta / (1.0 + beta)


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 5e-4

    def __post_init__(self) -> None:
        if not 0.0 < self.lr:
            raise ValueError("lr must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must be in [0, 1)")
        if self.eps <= 0.0 or self.weight_decay < 0.0:
            raise ValueError("eps must be > 0 and weight_decay >= 0")


@dataclass
class AdamState:
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: list[tuple[str, np.ndarray, bool]],
    grads: dict[str, np.ndarray],
    state: AdamState,
    cfg: AdamConfig,
) -> None:
    """One in-place update. Parameters absent from ``grads`` are frozen:
    no moment update and no decay, so their Adam state never advances.

    Weight decay is coupled (added to the gradient before the moments) and
    applies only to parameters flagged for it."""
    state.t += 1
    t = state.t
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    for name, theta, decays in params:
        if name not in grads:
            continue
        g = grads[name]
        if decays and cfg.weight_decay > 0.0:
            g = g + cfg.weight_decay * theta
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(theta)
        v = state.v.get(name)
        if v is None:
            v = state.v[name] = np.zeros_like(theta)
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        theta -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 200
    batch_size: int = 32
    adam: AdamConfig = field(default_factory=AdamConfig)
    dropout_p: float = 0.5
    patience: int = 50
    monitor: MonitorMode = MonitorMode.HELD_OUT_FOLD
    inner_fraction: float = 0.2
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self) -> None:
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch statistics)")
        if not 0.0 < self.inner_fraction < 1.0:
            raise ValueError("inner_fraction must be in (0, 1)")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss_true: float
    loss_disguised: float
    loss_hsic: float
    monitor_accuracy: float


@dataclass
class TrainOutcome:
    model: DsidModel
    best_epoch: int
    epochs_run: int
    history: list[EpochStats]


def _batch_index_slices(perm: np.ndarray, batch_size: int) -> list[np.ndarray]:
    out = []
    for start in range(0, perm.size, batch_size):
        idx = perm[start : start + batch_size]
        if idx.size >= 2:  # a 1-sample tail has no batch statistics
            out.append(idx)
    return out


def _monitor_accuracy(
    model: DsidModel,
    x: np.ndarray,
    y_true: np.ndarray,
    y_disg: np.ndarray,
    streams: ActiveStreams,
    weights: tuple[float, float],
) -> float:
    result = forward(model, x, Mode.EVAL, active=streams)
    w_true, w_disg = weights
    acc = 0.0
    if w_true != 0.0:
        acc += w_true * float(np.mean(predict_labels(result.true_logits) == y_true))
    if w_disg != 0.0:
        acc += w_disg * float(np.mean(predict_labels(result.disg_logits) == y_disg))
    return acc


def train_fold(
    dims: ModelDims,
    x_train: np.ndarray,
    y_true_train: np.ndarray,
    y_disg_train: np.ndarray,
    x_monitor: np.ndarray,
    y_true_monitor: np.ndarray,
    y_disg_monitor: np.ndarray,
    variant: MethodVariant,
    objective_cfg: ObjectiveConfig,
    train_cfg: TrainConfig,
    seed: int | np.random.SeedSequence,
) -> TrainOutcome:
    """Train one fold to the early-stopping checkpoint.

    Early stopping tracks monitor accuracy (per-task weighting per
    :func:`monitor_blend`) with strict improvement, ties keeping the earlier
    epoch; training stops once ``patience`` consecutive epochs fail to
    improve, and the best epoch's full state (running statistics included) is
    what comes back. Under MonitorMode.INNER_HOLDOUT the monitor arguments
    are ignored and a seeded fraction of the training samples is held out
    instead.

    BASELINE_DISG runs two fits: the true-task probe first (identical to a
    BASELINE_TRUE run on the same seed), then the disguised head alone on
    that model's frozen trunk. Its history and epoch counts describe the
    head fit.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    y_true_train = np.asarray(y_true_train, dtype=np.int64)
    y_disg_train = np.asarray(y_disg_train, dtype=np.int64)
    streams = active_streams(variant)
    dims = variant_dims(variant, dims)
    objective_cfg = effective_objective(variant, objective_cfg)
    weights = monitor_blend(streams, objective_cfg.beta)

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    init_ss, shuffle_ss, dropout_ss, inner_ss = ss.spawn(4)

    if train_cfg.monitor is MonitorMode.INNER_HOLDOUT:
        n = x_train.shape[0]
        n_inner = max(1, int(n * train_cfg.inner_fraction))
        perm = np.random.default_rng(inner_ss).permutation(n)
        inner_idx = perm[n - n_inner :]
        train_idx = perm[: n - n_inner]
        x_monitor = x_train[inner_idx]
        y_true_monitor = y_true_train[inner_idx]
        y_disg_monitor = y_disg_train[inner_idx]
        x_train = x_train[train_idx]
        y_true_train = y_true_train[train_idx]
        y_disg_train = y_disg_train[train_idx]
    else:
        x_monitor = np.asarray(x_monitor, dtype=np.float64)
        y_true_monitor = np.asarray(y_true_monitor, dtype=np.int64)
        y_disg_monitor = np.asarray(y_disg_monitor, dtype=np.int64)

    n_train = x_train.shape[0]
    if n_train < 2:
        raise ValueError("need at least 2 training samples")
    if x_monitor.shape[0] < 1:
        raise ValueError("monitor set is empty")

    model = init_params(
        dims,
        init_ss,
        dropout_p=train_cfg.dropout_p,
        bn_momentum=train_cfg.bn_momentum,
        bn_eps=train_cfg.bn_eps,
    )
    shuffle_rng = np.random.default_rng(shuffle_ss)
    dropout_rngs = DropoutStreams.from_seed(dropout_ss)

    if variant is MethodVariant.BASELINE_DISG:
        # variant (a)'s trunk first, replayed exactly
        trunk = _fit(
            model,
            x_train,
            y_true_train,
            y_disg_train,
            x_monitor,
            y_true_monitor,
            y_disg_monitor,
            TRUE_ONLY,
            monitor_blend(TRUE_ONLY, objective_cfg.beta),
            objective_cfg,
            train_cfg,
            shuffle_rng,
            dropout_rngs,
        )
        (head_ss,) = ss.spawn(1)
        return _fit_disguised_head(
            trunk.model, x_train, y_disg_train, x_monitor, y_disg_monitor, train_cfg, head_ss
        )

    return _fit(
        model,
        x_train,
        y_true_train,
        y_disg_train,
        x_monitor,
        y_true_monitor,
        y_disg_monitor,
        streams,
        weights,
        objective_cfg,
        train_cfg,
        shuffle_rng,
        dropout_rngs,
    )


def _fit(
    model: DsidModel,
    x_train: np.ndarray,
    y_true_train: np.ndarray,
    y_disg_train: np.ndarray,
    x_monitor: np.ndarray,
    y_true_monitor: np.ndarray,
    y_disg_monitor: np.ndarray,
    streams: ActiveStreams,
    weights: tuple[float, float],
    objective_cfg: ObjectiveConfig,
    train_cfg: TrainConfig,
    shuffle_rng: np.random.Generator,
    dropout_rngs: DropoutStreams,
) -> TrainOutcome:
    n_train = x_train.shape[0]
    adam_state = AdamState()
    params = named_params(model)

    best_acc = -math.inf
    best_epoch = 0
    best_model = clone_model(model)
    since_best = 0
    history: list[EpochStats] = []
    epochs_run = 0

    for epoch in range(1, train_cfg.max_epochs + 1):
        epochs_run = epoch
        perm = shuffle_rng.permutation(n_train)
        sum_lt = sum_ld = sum_lh = 0.0
        n_seen = 0
        for idx in _batch_index_slices(perm, train_cfg.batch_size):
            xb = x_train[idx]
            yt = y_true_train[idx]
            yd = y_disg_train[idx]
            fw = forward(model, xb, Mode.TRAIN, dropout_rngs=dropout_rngs, active=streams)
            if streams.both:
                res = total_loss(fw.true_logits, fw.disg_logits, fw.pairs, yt, yd, objective_cfg)
                grad_pairs = None
                if res.grad_x_hat is not None:
                    grad_pairs = (res.grad_x_hat, res.grad_y_hat)
                grads = backward(model, fw.trace, res.grad_true_logits, res.grad_disg_logits, grad_pairs)
                lt, ld, lh = res.loss_true, res.loss_disguised, res.loss_hsic
            elif streams.true:
                lt, g = cross_entropy(fw.true_logits, yt)
                grads = backward(model, fw.trace, g, None, None)
                ld = lh = math.nan
            else:
                ld, g = cross_entropy(fw.disg_logits, yd)
                grads = backward(model, fw.trace, None, g, None)
                lt = lh = math.nan
            adam_step(params, named_grads(grads), adam_state, train_cfg.adam)
            nb = idx.size
            n_seen += nb
            if not math.isnan(lt):
                sum_lt += lt * nb
            if not math.isnan(ld):
                sum_ld += ld * nb
            if not math.isnan(lh):
                sum_lh += lh * nb

        acc = _monitor_accuracy(
            model, x_monitor, y_true_monitor, y_disg_monitor, streams, weights
        )
        history.append(
            EpochStats(
                epoch=epoch,
                loss_true=sum_lt / n_seen if streams.true else math.nan,
                loss_disguised=sum_ld / n_seen if streams.disguised else math.nan,
                loss_hsic=sum_lh / n_seen if streams.both else math.nan,
                monitor_accuracy=acc,
            )
        )
        if acc > best_acc:
            best_acc = acc
            best_epoch = epoch
            best_model = clone_model(model)
            since_best = 0
        else:
            since_best += 1
            if since_best >= train_cfg.patience:
                break

    return TrainOutcome(model=best_model, best_epoch=best_epoch, epochs_run=epochs_run, history=history)


def _fit_disguised_head(
    model: DsidModel,
    x_train: np.ndarray,
    y_disg_train: np.ndarray,
    x_monitor: np.ndarray,
    y_disg_monitor: np.ndarray,
    train_cfg: TrainConfig,
    shuffle_ss: np.random.SeedSequence,
) -> TrainOutcome:
    """Fit only the disguised head of a probe model on its frozen trunk.

    Features come from eval-mode passes, so the trunk (and the untouched
    true head) stays bitwise identical to the fitted model: no batch
    statistic moves and Adam sees just the head parameters. Same schedule,
    batching and early stopping as a full fit, monitored on disguised
    accuracy. The model is updated in place, the best-epoch head restored.
    """
    f_train = forward(model, x_train, Mode.EVAL, active=DISGUISED_ONLY).trace.masked.out
    f_monitor = forward(model, x_monitor, Mode.EVAL, active=DISGUISED_ONLY).trace.masked.out
    head = model.disguised_head
    params = [
        ("disguised_head.weight", head.weight, True),
        ("disguised_head.bias", head.bias, True),
    ]
    adam_state = AdamState()
    shuffle_rng = np.random.default_rng(shuffle_ss)
    n_train = f_train.shape[0]

    best_acc = -math.inf
    best_epoch = 0
    best_weight = head.weight.copy()
    best_bias = head.bias.copy()
    since_best = 0
    history: list[EpochStats] = []
    epochs_run = 0

    for epoch in range(1, train_cfg.max_epochs + 1):
        epochs_run = epoch
        perm = shuffle_rng.permutation(n_train)
        sum_ld = 0.0
        n_seen = 0
        for idx in _batch_index_slices(perm, train_cfg.batch_size):
            fb = f_train[idx]
            logits = fb @ head.weight.T + head.bias
            ld, g = cross_entropy(logits, y_disg_train[idx])
            grads = {
                "disguised_head.weight": g.T @ fb,
                "disguised_head.bias": np.sum(g, axis=0),
            }
            adam_step(params, grads, adam_state, train_cfg.adam)
            sum_ld += ld * idx.size
            n_seen += idx.size

        preds = predict_labels(f_monitor @ head.weight.T + head.bias)
        acc = float(np.mean(preds == y_disg_monitor))
        history.append(
            EpochStats(
                epoch=epoch,
                loss_true=math.nan,
                loss_disguised=sum_ld / n_seen,
                loss_hsic=math.nan,
                monitor_accuracy=acc,
            )
        )
        if acc > best_acc:
            best_acc = acc
            best_epoch = epoch
            best_weight = head.weight.copy()
            best_bias = head.bias.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= train_cfg.patience:
                break

    head.weight[...] = best_weight
    head.bias[...] = best_bias
    return TrainOutcome(model=model, best_epoch=best_epoch, epochs_run=epochs_run, history=history)


@dataclass
class FoldOutcome:
    subject: int
    best_epoch: int
    epochs_run: int
    model: DsidModel
    true_preds: np.ndarray | None
    disg_preds: np.ndarray | None
    true_labels: np.ndarray
    disg_labels: np.ndarray
    history: list[EpochStats]


@dataclass
class LosoResult:
    variant: MethodVariant
    folds: list[FoldOutcome]
    true_scores: PooledScores | None
    disg_scores: PooledScores | None


def run_single_fold(
    dataset: Dataset,
    subject: int,
    dims: ModelDims,
    variant: MethodVariant,
    objective_cfg: ObjectiveConfig,
    train_cfg: TrainConfig,
    base_seed: int,
) -> FoldOutcome:
    """Train and evaluate the fold that holds out one subject."""
    train_ds, test_ds = split_by_subject(dataset, subject)
    outcome = train_fold(
        dims,
        train_ds.embedding_matrix(),
        train_ds.true_labels(),
        train_ds.disguised_labels(),
        test_ds.embedding_matrix(),
        test_ds.true_labels(),
        test_ds.disguised_labels(),
        variant,
        objective_cfg,
        train_cfg,
        seed=base_seed + subject,
    )
    streams = active_streams(variant)
    result = forward(outcome.model, test_ds.embedding_matrix(), Mode.EVAL, active=streams)
    true_preds = predict_labels(result.true_logits) if streams.true else None
    disg_preds = predict_labels(result.disg_logits) if streams.disguised else None
    return FoldOutcome(
        subject=subject,
        best_epoch=outcome.best_epoch,
        epochs_run=outcome.epochs_run,
        model=outcome.model,
        true_preds=true_preds,
        disg_preds=disg_preds,
        true_labels=test_ds.true_labels(),
        disg_labels=test_ds.disguised_labels(),
        history=outcome.history,
    )


def run_loso(
    dataset: Dataset,
    dims: ModelDims,
    variant: MethodVariant,
    objective_cfg: ObjectiveConfig,
    train_cfg: TrainConfig,
    base_seed: int = 0,
    jobs: int = 1,
) -> LosoResult:
    """One fold per subject, ascending; fold seed = base_seed + subject id.

    Results do not depend on ``jobs``: every fold is seeded independently and
    collected in subject order.
    """
    if base_seed < 0:
        raise ValueError("base_seed must be >= 0")
    subjects = dataset.subjects()
    if len(subjects) < 2:
        raise ValueError("leave-one-subject-out needs at least 2 subjects")
    if dims.d_emb != dataset.d_emb:
        raise ValueError(f"dims.d_emb {dims.d_emb} does not match dataset {dataset.d_emb}")

    if jobs > 1:
        args = [
            (dataset, s, dims, variant, objective_cfg, train_cfg, base_seed) for s in subjects
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            folds = list(pool.map(_run_one_fold_star, args))
    else:
        folds = [
            run_single_fold(dataset, s, dims, variant, objective_cfg, train_cfg, base_seed)
            for s in subjects
        ]

    streams = active_streams(variant)
    true_scores = None
    disg_scores = None
    if streams.true:
        true_scores = pool_folds(
            [f.true_preds for f in folds], [f.true_labels for f in folds], dims.c_true
        )
    if streams.disguised:
        disg_scores = pool_folds(
            [f.disg_preds for f in folds], [f.disg_labels for f in folds], dims.c_disg
        )
    return LosoResult(variant=variant, folds=folds, true_scores=true_scores, disg_scores=disg_scores)


def _run_one_fold_star(args: tuple) -> FoldOutcome:
    return run_single_fold(*args)
