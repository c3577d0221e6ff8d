"""Dual-stream independence decoupling for masked-expression emotion recognition.

Numpy implementation of a dual-branch adapter head that separates true-emotion
from disguised-expression features via a kernel independence (HSIC) penalty,
plus the leave-one-subject-out experiment harness around it.
"""

from .dataio import (
    DataFormatError,
    Dataset,
    EmbeddingRecord,
    FrameType,
    SynthConfig,
    import_csv,
    read_embeddings,
    split_by_subject,
    synth_generate,
    write_embeddings,
)
from .independence import (
    FeaturePair,
    HsicMode,
    hsic_batch_grad,
    hsic_batch_loss,
    hsic_per_sample,
    permutation_independence_test,
)
from .kernels import KernelConfig, KernelKind, l2_normalize, median_heuristic_sigma
from .metrics import PooledScores, Scored, pool_folds, predict_labels, score
from .netcore import (
    ActiveStreams,
    CheckpointError,
    DropoutStreams,
    DsidModel,
    Mode,
    ModelDims,
    backward,
    clone_model,
    forward,
    init_params,
    load_model,
    save_model,
)
from .objective import ObjectiveConfig, TotalLossResult, cross_entropy, total_loss
from .trainer import (
    AdamConfig,
    AdamState,
    LosoResult,
    MethodVariant,
    MonitorMode,
    TrainConfig,
    adam_step,
    monitor_blend,
    run_loso,
    run_single_fold,
    train_fold,
    variant_dims,
)

__version__ = "0.1.0"
