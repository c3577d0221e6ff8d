"""Dual-branch adapter network with hand-derived forward/backward passes.

Topology: a shared masked-expression adapter maps backbone embeddings into a
common space; two parallel branch adapters (true emotion, disguised emotion)
produce task features; one linear head per branch emits class logits. Every
adapter is Linear -> BatchNorm -> ReLU -> Dropout, in that order. Setting
d_feat = 0 drops the branch adapters and puts the heads directly on the
shared space (the single-stream probe used as a baseline).

Branch features are additionally L2-normalized into the pairs consumed by the
independence loss; the classifier heads read the un-normalized features. The
backward pass is exact, including the chain through batch statistics and
through the normalization ``x_hat = x / ||x||`` (whose gradient is defined as
zero for degenerate zero-norm features).
"""

from __future__ import annotations

import copy
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .independence import FeaturePair
from .kernels import DEGENERATE_NORM_EPS

CHECKPOINT_MAGIC = b"DSM1"
CHECKPOINT_VERSION = 1


class Mode(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


@dataclass(frozen=True)
class ModelDims:
    """Layer widths. ``d_feat = 0`` selects the probe topology: no branch
    adapters, heads read the shared adapter output directly (the
    single-stream baseline; one active stream at a time)."""

    d_emb: int
    d_shared: int = 256
    d_feat: int = 128
    c_true: int = 6
    c_disg: int = 6

    def __post_init__(self) -> None:
        for name in ("d_emb", "d_shared", "c_true", "c_disg"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.d_feat < 0:
            raise ValueError("d_feat must be >= 0")

    @property
    def probe(self) -> bool:
        return self.d_feat == 0

    @property
    def head_in(self) -> int:
        return self.d_shared if self.probe else self.d_feat


@dataclass(frozen=True)
class ActiveStreams:
    """Which branches take part in a forward/backward pass."""

    true: bool = True
    disguised: bool = True

    def __post_init__(self) -> None:
        if not (self.true or self.disguised):
            raise ValueError("at least one stream must be active")

    @property
    def both(self) -> bool:
        return self.true and self.disguised


BOTH_STREAMS = ActiveStreams(True, True)
TRUE_ONLY = ActiveStreams(True, False)
DISGUISED_ONLY = ActiveStreams(False, True)


@dataclass
class LinearParams:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)


@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5


@dataclass
class AdapterBlock:
    linear: LinearParams
    bn: BatchNormParams
    dropout_p: float = 0.5


@dataclass
class DsidModel:
    """Dual-branch model; ``None`` branch adapters mark the probe topology."""

    masked_adapter: AdapterBlock
    true_adapter: AdapterBlock | None
    disguised_adapter: AdapterBlock | None
    true_head: LinearParams
    disguised_head: LinearParams

    @property
    def dims(self) -> ModelDims:
        return ModelDims(
            d_emb=self.masked_adapter.linear.weight.shape[1],
            d_shared=self.masked_adapter.linear.weight.shape[0],
            d_feat=0 if self.true_adapter is None else self.true_adapter.linear.weight.shape[0],
            c_true=self.true_head.weight.shape[0],
            c_disg=self.disguised_head.weight.shape[0],
        )


def init_params(
    dims: ModelDims,
    seed: int | np.random.SeedSequence,
    dropout_p: float = 0.5,
    bn_momentum: float = 0.1,
    bn_eps: float = 1e-5,
) -> DsidModel:
    """Seeded init: linear weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
    zero biases, identity BatchNorm affine, unit running variance."""
    if not 0.0 <= dropout_p < 1.0:
        raise ValueError(f"dropout_p must be in [0, 1), got {dropout_p}")
    rng = np.random.default_rng(seed)

    def linear(n_out: int, fan_in: int) -> LinearParams:
        bound = np.sqrt(6.0 / fan_in)
        weight = rng.uniform(-bound, bound, size=(n_out, fan_in))
        return LinearParams(weight=weight, bias=np.zeros(n_out))

    def block(n_out: int, fan_in: int) -> AdapterBlock:
        return AdapterBlock(
            linear=linear(n_out, fan_in),
            bn=BatchNormParams(
                gamma=np.ones(n_out),
                beta=np.zeros(n_out),
                running_mean=np.zeros(n_out),
                running_var=np.ones(n_out),
                momentum=bn_momentum,
                eps=bn_eps,
            ),
            dropout_p=dropout_p,
        )

    if dims.probe:
        return DsidModel(
            masked_adapter=block(dims.d_shared, dims.d_emb),
            true_adapter=None,
            disguised_adapter=None,
            true_head=linear(dims.c_true, dims.d_shared),
            disguised_head=linear(dims.c_disg, dims.d_shared),
        )
    return DsidModel(
        masked_adapter=block(dims.d_shared, dims.d_emb),
        true_adapter=block(dims.d_feat, dims.d_shared),
        disguised_adapter=block(dims.d_feat, dims.d_shared),
        true_head=linear(dims.c_true, dims.d_feat),
        disguised_head=linear(dims.c_disg, dims.d_feat),
    )


def clone_model(model: DsidModel) -> DsidModel:
    """Deep copy, running statistics included (checkpoint snapshots)."""
    return copy.deepcopy(model)


@dataclass
class DropoutStreams:
    """One generator per dropout layer.

    Keeping the streams separate means skipping a branch (stream gating)
    never perturbs the draws of the remaining layers, so gated and ungated
    runs stay comparable step for step.
    """

    masked: np.random.Generator
    true: np.random.Generator
    disguised: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int | np.random.SeedSequence) -> "DropoutStreams":
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        masked, true, disguised = ss.spawn(3)
        return cls(
            masked=np.random.default_rng(masked),
            true=np.random.default_rng(true),
            disguised=np.random.default_rng(disguised),
        )


@dataclass
class AdapterCache:
    x: np.ndarray  # block input
    z_centered: np.ndarray  # linear output minus the mean used by BN
    inv_std: np.ndarray
    z_norm: np.ndarray  # pre-affine normalized activations
    relu_mask: np.ndarray
    drop_scale: np.ndarray | None  # mask/(1-p); None when dropout inactive
    out: np.ndarray


@dataclass
class ForwardTrace:
    mode: Mode
    active: ActiveStreams
    masked: AdapterCache
    true: AdapterCache | None
    disguised: AdapterCache | None
    true_norms: np.ndarray | None = None
    disg_norms: np.ndarray | None = None
    x_hat: np.ndarray | None = None
    y_hat: np.ndarray | None = None
    x_degenerate: np.ndarray | None = None
    y_degenerate: np.ndarray | None = None
    consumed: bool = False


@dataclass
class ForwardResult:
    true_logits: np.ndarray | None
    disg_logits: np.ndarray | None
    pairs: list[FeaturePair] | None
    trace: ForwardTrace


def _adapter_forward(
    block: AdapterBlock,
    x: np.ndarray,
    mode: Mode,
    rng: np.random.Generator | None,
) -> tuple[np.ndarray, AdapterCache]:
    z = x @ block.linear.weight.T + block.linear.bias
    bn = block.bn
    if mode is Mode.TRAIN:
        n = z.shape[0]
        mu = z.mean(axis=0)
        z_centered = z - mu
        var = np.mean(z_centered * z_centered, axis=0)  # biased, for the batch
        inv_std = 1.0 / np.sqrt(var + bn.eps)
        # running stats keep the unbiased variance
        bn.running_mean = (1.0 - bn.momentum) * bn.running_mean + bn.momentum * mu
        bn.running_var = (
            (1.0 - bn.momentum) * bn.running_var
            + bn.momentum * var * (n / (n - 1))
        )
    else:
        z_centered = z - bn.running_mean
        inv_std = 1.0 / np.sqrt(bn.running_var + bn.eps)
    z_norm = z_centered * inv_std
    a = bn.gamma * z_norm + bn.beta
    relu_mask = a > 0.0
    h = np.where(relu_mask, a, 0.0)
    drop_scale = None
    if mode is Mode.TRAIN and block.dropout_p > 0.0:
        if rng is None:
            raise ValueError("train-mode dropout requires a generator stream")
        keep = rng.random(h.shape) >= block.dropout_p
        drop_scale = keep / (1.0 - block.dropout_p)  # inverted dropout
        h = h * drop_scale
    return h, AdapterCache(
        x=x,
        z_centered=z_centered,
        inv_std=inv_std,
        z_norm=z_norm,
        relu_mask=relu_mask,
        drop_scale=drop_scale,
        out=h,
    )


def _normalize_rows(f: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    norms = np.linalg.norm(f, axis=1)
    degenerate = norms <= DEGENERATE_NORM_EPS
    safe = np.where(degenerate, 1.0, norms)
    f_hat = f / safe[:, None]
    f_hat[degenerate] = 0.0
    return f_hat, norms, degenerate


def forward(
    model: DsidModel,
    batch: np.ndarray,
    mode: Mode,
    dropout_rngs: DropoutStreams | None = None,
    active: ActiveStreams = BOTH_STREAMS,
) -> ForwardResult:
    """Run the network over a batch.

    Train mode uses batch statistics (and updates the running ones) plus
    inverted dropout drawn from ``dropout_rngs``; eval mode is a pure
    deterministic function of (model, batch). ``pairs`` holds the
    L2-normalized branch features and is produced only when both streams
    are active.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ValueError(f"batch must be N x d_emb, got shape {batch.shape}")
    n = batch.shape[0]
    if n < 1:
        raise ValueError("empty batch")
    if mode is Mode.TRAIN and n < 2:
        raise ValueError("batch statistics undefined: train mode needs N >= 2")
    dims = model.dims
    if batch.shape[1] != dims.d_emb:
        raise ValueError(
            f"batch dimension {batch.shape[1]} does not match model d_emb {dims.d_emb}"
        )

    if dims.probe and active.both:
        raise ValueError("probe topology supports a single active stream")

    blocks = (model.masked_adapter, model.true_adapter, model.disguised_adapter)
    needs_rng = mode is Mode.TRAIN and any(
        b.dropout_p > 0.0 for b in blocks if b is not None
    )
    if needs_rng and dropout_rngs is None:
        raise ValueError("train-mode dropout requires DropoutStreams")

    rng_m = dropout_rngs.masked if dropout_rngs else None
    rng_t = dropout_rngs.true if dropout_rngs else None
    rng_d = dropout_rngs.disguised if dropout_rngs else None

    shared, cache_m = _adapter_forward(model.masked_adapter, batch, mode, rng_m)

    true_logits = None
    disg_logits = None
    cache_t = None
    cache_d = None
    if active.true:
        if model.true_adapter is None:
            f_t = shared
        else:
            f_t, cache_t = _adapter_forward(model.true_adapter, shared, mode, rng_t)
        true_logits = f_t @ model.true_head.weight.T + model.true_head.bias
    if active.disguised:
        if model.disguised_adapter is None:
            f_d = shared
        else:
            f_d, cache_d = _adapter_forward(model.disguised_adapter, shared, mode, rng_d)
        disg_logits = f_d @ model.disguised_head.weight.T + model.disguised_head.bias

    trace = ForwardTrace(mode=mode, active=active, masked=cache_m, true=cache_t, disguised=cache_d)
    pairs = None
    if active.both:
        x_hat, t_norms, x_deg = _normalize_rows(cache_t.out)
        y_hat, d_norms, y_deg = _normalize_rows(cache_d.out)
        trace.true_norms = t_norms
        trace.disg_norms = d_norms
        trace.x_hat = x_hat
        trace.y_hat = y_hat
        trace.x_degenerate = x_deg
        trace.y_degenerate = y_deg
        pairs = [
            FeaturePair(x_hat[i], y_hat[i], bool(x_deg[i]), bool(y_deg[i]))
            for i in range(n)
        ]
    return ForwardResult(true_logits=true_logits, disg_logits=disg_logits, pairs=pairs, trace=trace)


@dataclass
class LinearGrads:
    weight: np.ndarray
    bias: np.ndarray


@dataclass
class BlockGrads:
    linear: LinearGrads
    gamma: np.ndarray
    beta: np.ndarray


@dataclass
class ModelGrads:
    masked_adapter: BlockGrads
    true_adapter: BlockGrads | None
    disguised_adapter: BlockGrads | None
    true_head: LinearGrads | None
    disguised_head: LinearGrads | None


def _adapter_backward(
    block: AdapterBlock, cache: AdapterCache, grad_out: np.ndarray
) -> tuple[np.ndarray, BlockGrads]:
    g = grad_out
    if cache.drop_scale is not None:
        g = g * cache.drop_scale
    g = np.where(cache.relu_mask, g, 0.0)

    # BatchNorm backward through the batch statistics (biased variance).
    n = g.shape[0]
    d_gamma = np.sum(g * cache.z_norm, axis=0)
    d_beta = np.sum(g, axis=0)
    dzn = g * block.bn.gamma
    d_var = np.sum(dzn * cache.z_centered, axis=0) * (-0.5) * cache.inv_std**3
    d_mu = -np.sum(dzn, axis=0) * cache.inv_std + d_var * (-2.0) * np.mean(
        cache.z_centered, axis=0
    )
    dz = dzn * cache.inv_std + d_var * (2.0 / n) * cache.z_centered + d_mu / n

    d_weight = dz.T @ cache.x
    d_bias = np.sum(dz, axis=0)
    d_x = dz @ block.linear.weight
    return d_x, BlockGrads(
        linear=LinearGrads(weight=d_weight, bias=d_bias), gamma=d_gamma, beta=d_beta
    )


def _normalization_backward(
    grad_hat: np.ndarray,
    f_hat: np.ndarray,
    norms: np.ndarray,
    degenerate: np.ndarray,
) -> np.ndarray:
    # d x_hat / d x = (I - x_hat x_hat^T) / ||x||; zero for degenerate rows.
    dot = np.sum(f_hat * grad_hat, axis=1, keepdims=True)
    safe = np.where(degenerate, 1.0, norms)
    g = (grad_hat - dot * f_hat) / safe[:, None]
    g[degenerate] = 0.0
    return g


def backward(
    model: DsidModel,
    trace: ForwardTrace,
    grad_true_logits: np.ndarray | None,
    grad_disg_logits: np.ndarray | None,
    grad_pairs: tuple[np.ndarray, np.ndarray] | None,
) -> ModelGrads:
    """Exact parameter gradients for a train-mode forward.

    ``grad_pairs`` carries the objective's gradients w.r.t. the normalized
    pair features (x_hat, y_hat); pass None when the independence loss is
    off. A trace feeds exactly one backward pass. Gated streams come back
    with None gradients.
    """
    if trace.consumed:
        raise ValueError("trace already consumed by a backward pass")
    if trace.mode is not Mode.TRAIN:
        raise ValueError("backward requires a train-mode trace")
    if grad_pairs is not None and trace.x_hat is None:
        raise ValueError("grad_pairs requires a both-streams trace")
    dims = model.dims
    if trace.masked.x.shape[1] != dims.d_emb or trace.masked.out.shape[1] != dims.d_shared:
        raise ValueError("trace does not match model shapes")
    if (trace.true is not None) != (trace.active.true and not dims.probe) or (
        trace.disguised is not None
    ) != (trace.active.disguised and not dims.probe):
        raise ValueError("trace does not match model shapes")
    trace.consumed = True
    n = trace.masked.x.shape[0]

    grad_shared = np.zeros((n, dims.d_shared))
    true_block_grads = None
    disg_block_grads = None
    true_head_grads = None
    disg_head_grads = None

    if trace.active.true:
        f_t = trace.masked.out if trace.true is None else trace.true.out
        g_logits = (
            np.zeros((n, dims.c_true)) if grad_true_logits is None else np.asarray(grad_true_logits, dtype=np.float64)
        )
        if g_logits.shape != (n, dims.c_true):
            raise ValueError("grad_true_logits does not match trace/model shapes")
        true_head_grads = LinearGrads(weight=g_logits.T @ f_t, bias=np.sum(g_logits, axis=0))
        g_feat = g_logits @ model.true_head.weight
        if grad_pairs is not None:
            g_feat = g_feat + _normalization_backward(
                np.asarray(grad_pairs[0], dtype=np.float64),
                trace.x_hat,
                trace.true_norms,
                trace.x_degenerate,
            )
        if trace.true is None:
            grad_shared += g_feat
        else:
            g_in, true_block_grads = _adapter_backward(model.true_adapter, trace.true, g_feat)
            grad_shared += g_in

    if trace.active.disguised:
        f_d = trace.masked.out if trace.disguised is None else trace.disguised.out
        g_logits = (
            np.zeros((n, dims.c_disg)) if grad_disg_logits is None else np.asarray(grad_disg_logits, dtype=np.float64)
        )
        if g_logits.shape != (n, dims.c_disg):
            raise ValueError("grad_disg_logits does not match trace/model shapes")
        disg_head_grads = LinearGrads(weight=g_logits.T @ f_d, bias=np.sum(g_logits, axis=0))
        g_feat = g_logits @ model.disguised_head.weight
        if grad_pairs is not None:
            g_feat = g_feat + _normalization_backward(
                np.asarray(grad_pairs[1], dtype=np.float64),
                trace.y_hat,
                trace.disg_norms,
                trace.y_degenerate,
            )
        if trace.disguised is None:
            grad_shared += g_feat
        else:
            g_in, disg_block_grads = _adapter_backward(model.disguised_adapter, trace.disguised, g_feat)
            grad_shared += g_in

    _, masked_block_grads = _adapter_backward(model.masked_adapter, trace.masked, grad_shared)
    return ModelGrads(
        masked_adapter=masked_block_grads,
        true_adapter=true_block_grads,
        disguised_adapter=disg_block_grads,
        true_head=true_head_grads,
        disguised_head=disg_head_grads,
    )


# --- optimizer-facing parameter walk ---------------------------------------

_BLOCK_FIELDS = ("masked_adapter", "true_adapter", "disguised_adapter")
_HEAD_FIELDS = ("true_head", "disguised_head")


def named_params(model: DsidModel) -> list[tuple[str, np.ndarray, bool]]:
    """(path, array, weight_decay_applies) for every trainable parameter.

    Decay applies to linear weights and biases (adapters and heads) and
    never to the BatchNorm affine parameters or running statistics.
    """
    out: list[tuple[str, np.ndarray, bool]] = []
    for name in _BLOCK_FIELDS:
        block: AdapterBlock | None = getattr(model, name)
        if block is None:
            continue
        out.append((f"{name}.linear.weight", block.linear.weight, True))
        out.append((f"{name}.linear.bias", block.linear.bias, True))
        out.append((f"{name}.bn.gamma", block.bn.gamma, False))
        out.append((f"{name}.bn.beta", block.bn.beta, False))
    for name in _HEAD_FIELDS:
        head: LinearParams = getattr(model, name)
        out.append((f"{name}.weight", head.weight, True))
        out.append((f"{name}.bias", head.bias, True))
    return out


def named_grads(grads: ModelGrads) -> dict[str, np.ndarray]:
    """Flatten ModelGrads to the named_params paths; gated streams are absent."""
    out: dict[str, np.ndarray] = {}
    for name in _BLOCK_FIELDS:
        bg: BlockGrads | None = getattr(grads, name)
        if bg is None:
            continue
        out[f"{name}.linear.weight"] = bg.linear.weight
        out[f"{name}.linear.bias"] = bg.linear.bias
        out[f"{name}.bn.gamma"] = bg.gamma
        out[f"{name}.bn.beta"] = bg.beta
    for name in _HEAD_FIELDS:
        hg: LinearGrads | None = getattr(grads, name)
        if hg is None:
            continue
        out[f"{name}.weight"] = hg.weight
        out[f"{name}.bias"] = hg.bias
    return out


# --- checkpoint format (DSM1) -----------------------------------------------
#
# Little-endian. Layout:
#   bytes 0..3   magic "DSM1"
#   bytes 4..7   u32 version = 1
#   bytes 8..27  u32 d_emb, d_shared, d_feat, c_true, c_disg
#   then for each adapter block in order (masked, true, disguised):
#     f64 weight[out*in] row-major, f64 bias[out],
#     f64 gamma[out], f64 beta[out], f64 running_mean[out], f64 running_var[out],
#     f64 momentum, f64 eps, f64 dropout_p
#   then for each head in order (true, disguised):
#     f64 weight[c*head_in] row-major, f64 bias[c]
# d_feat = 0 marks the probe topology: the two branch blocks are absent and
# head_in = d_shared (otherwise head_in = d_feat). No trailing bytes.


class CheckpointError(ValueError):
    """Malformed DSM1 checkpoint."""


def save_model(model: DsidModel, path: str) -> None:
    dims = model.dims
    chunks = [
        CHECKPOINT_MAGIC,
        struct.pack(
            "<IIIIII",
            CHECKPOINT_VERSION,
            dims.d_emb,
            dims.d_shared,
            dims.d_feat,
            dims.c_true,
            dims.c_disg,
        ),
    ]

    def arr(a: np.ndarray) -> bytes:
        return np.ascontiguousarray(a, dtype="<f8").tobytes()

    for name in _BLOCK_FIELDS:
        block: AdapterBlock | None = getattr(model, name)
        if block is None:
            continue
        chunks.append(arr(block.linear.weight))
        chunks.append(arr(block.linear.bias))
        chunks.append(arr(block.bn.gamma))
        chunks.append(arr(block.bn.beta))
        chunks.append(arr(block.bn.running_mean))
        chunks.append(arr(block.bn.running_var))
        chunks.append(struct.pack("<ddd", block.bn.momentum, block.bn.eps, block.dropout_p))
    for name in _HEAD_FIELDS:
        head: LinearParams = getattr(model, name)
        chunks.append(arr(head.weight))
        chunks.append(arr(head.bias))
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def load_model(path: str) -> DsidModel:
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 4 or buf[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("bad magic at byte 0")
    if len(buf) < 28:
        raise CheckpointError(f"truncated header at byte {len(buf)}")
    version, d_emb, d_shared, d_feat, c_true, c_disg = struct.unpack("<IIIIII", buf[4:28])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported version {version} at byte 4")

    offset = 28

    def take_array(count: int, shape: tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        nbytes = count * 8
        if offset + nbytes > len(buf):
            raise CheckpointError(f"truncated parameter data at byte {offset}")
        out = np.frombuffer(buf, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += nbytes
        return out

    def take_scalars(n: int) -> tuple[float, ...]:
        nonlocal offset
        nbytes = n * 8
        if offset + nbytes > len(buf):
            raise CheckpointError(f"truncated parameter data at byte {offset}")
        vals = struct.unpack_from(f"<{n}d", buf, offset)
        offset += nbytes
        return vals

    def take_block(n_out: int, fan_in: int) -> AdapterBlock:
        weight = take_array(n_out * fan_in, (n_out, fan_in))
        bias = take_array(n_out, (n_out,))
        gamma = take_array(n_out, (n_out,))
        beta = take_array(n_out, (n_out,))
        running_mean = take_array(n_out, (n_out,))
        running_var = take_array(n_out, (n_out,))
        momentum, eps, dropout_p = take_scalars(3)
        return AdapterBlock(
            linear=LinearParams(weight=weight, bias=bias),
            bn=BatchNormParams(
                gamma=gamma,
                beta=beta,
                running_mean=running_mean,
                running_var=running_var,
                momentum=momentum,
                eps=eps,
            ),
            dropout_p=dropout_p,
        )

    def take_head(n_out: int, fan_in: int) -> LinearParams:
        weight = take_array(n_out * fan_in, (n_out, fan_in))
        bias = take_array(n_out, (n_out,))
        return LinearParams(weight=weight, bias=bias)

    if d_feat == 0:
        model = DsidModel(
            masked_adapter=take_block(d_shared, d_emb),
            true_adapter=None,
            disguised_adapter=None,
            true_head=take_head(c_true, d_shared),
            disguised_head=take_head(c_disg, d_shared),
        )
    else:
        model = DsidModel(
            masked_adapter=take_block(d_shared, d_emb),
            true_adapter=take_block(d_feat, d_shared),
            disguised_adapter=take_block(d_feat, d_shared),
            true_head=take_head(c_true, d_feat),
            disguised_head=take_head(c_disg, d_feat),
        )
    if offset != len(buf):
        raise CheckpointError(f"trailing bytes at byte {offset}")
    return model
