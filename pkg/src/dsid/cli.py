"""Batch experiment front end.

Subcommands: ``synth`` (write a synthetic embedding file), ``train`` (one
fold), ``loso`` (leave-one-subject-out over method variants), ``sweep``
(weight grid), ``ablate`` (fixed three-variant comparison), ``inspect``
(summarize an embedding file or checkpoint).

Outputs are deterministic given identical inputs and seeds; the only
timestamp lives in the run manifest's ``clock`` field. Exit codes: 0 success,
1 I/O failure, 2 invalid arguments, 3 data invariant violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime, timezone

import numpy as np

from .dataio import (
    DataFormatError,
    Dataset,
    DSE1_MAGIC,
    N_CLASSES,
    SynthConfig,
    import_csv,
    read_embeddings,
    synth_generate,
    write_embeddings,
)
from .independence import HsicMode
from .kernels import KernelConfig, KernelKind
from .metrics import PooledScores, score
from .netcore import CHECKPOINT_MAGIC, CheckpointError, ModelDims, load_model, save_model
from .objective import ObjectiveConfig
from .trainer import (
    AdamConfig,
    LosoResult,
    MethodVariant,
    MonitorMode,
    TrainConfig,
    run_loso,
    run_single_fold,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_DATA = 3

ROW_BASELINE = "vit-equivalent"
ROW_NO_HSIC = "dsid-no-hsic"
ROW_DSID = "dsid"
TABLE_ROW_ORDER = (ROW_BASELINE, ROW_NO_HSIC, ROW_DSID)

DEFAULT_SWEEP_GRID = (0.1, 0.3, 0.5, 0.7, 0.9, 1.0)


class UsageError(ValueError):
    """Bad flag/config values; maps to exit code 2."""


# --- config resolution -------------------------------------------------------


def _cast_int(key: str, raw: str, low: int | None = None) -> int:
    try:
        v = int(raw)
    except ValueError as exc:
        raise UsageError(f"invalid integer for {key}: {raw!r}") from exc
    if low is not None and v < low:
        raise UsageError(f"{key} must be >= {low}, got {v}")
    return v


def _cast_float(key: str, raw: str, low: float | None = None) -> float:
    try:
        v = float(raw)
    except ValueError as exc:
        raise UsageError(f"invalid number for {key}: {raw!r}") from exc
    if low is not None and v < low:
        raise UsageError(f"{key} must be >= {low}, got {v}")
    return v


def _cast_choice(key: str, raw: str, choices: tuple[str, ...]) -> str:
    if raw not in choices:
        raise UsageError(f"invalid {key}: {raw!r} (choose from {', '.join(choices)})")
    return raw


def _cast_sigma(key: str, raw: str) -> str:
    if raw == "median":
        return raw
    v = _cast_float(key, raw)
    if v <= 0.0:
        raise UsageError(f"{key} must be positive or 'median', got {raw}")
    return raw


def _cast_lambda(key: str, raw: str) -> float:
    v = _cast_float(key, raw)
    if not 0.0 <= v <= 1.0:
        raise UsageError("lambda out of range [0, 1]")
    return v


def _cast_fraction(key: str, raw: str) -> float:
    v = _cast_float(key, raw)
    if not 0.0 < v < 1.0:
        raise UsageError(f"{key} must be in (0, 1), got {raw}")
    return v


def _cast_dropout(key: str, raw: str) -> float:
    v = _cast_float(key, raw)
    if not 0.0 <= v < 1.0:
        raise UsageError(f"{key} must be in [0, 1), got {raw}")
    return v


def _cast_variants(key: str, raw: str) -> str:
    names = [s.strip() for s in raw.split(",") if s.strip()]
    for name in names:
        if name not in TABLE_ROW_ORDER:
            raise UsageError(
                f"unknown variant {name!r} (choose from {', '.join(TABLE_ROW_ORDER)})"
            )
    if not names:
        raise UsageError("variants must name at least one method")
    # canonical table order regardless of how they were listed
    return ",".join(v for v in TABLE_ROW_ORDER if v in names)


def _cast_values(key: str, raw: str) -> str:
    parts = [s.strip() for s in raw.split(",") if s.strip()]
    if not parts:
        raise UsageError("values must list at least one number")
    for p in parts:
        if _cast_float(key, p) < 0.0:
            raise UsageError(f"negative value for {key}: {p}")
    return ",".join(parts)


_CASTERS = {
    "data": lambda k, r: r,
    "out": lambda k, r: r,
    "seed": lambda k, r: _cast_int(k, r, low=0),
    "alpha": lambda k, r: _cast_float(k, r, low=0.0),
    "beta": lambda k, r: _cast_float(k, r, low=0.0),
    "hsic_mode": lambda k, r: _cast_choice(k, r, ("paper", "classical")),
    "kernel": lambda k, r: _cast_choice(k, r, ("rbf", "linear")),
    "sigma": _cast_sigma,
    "monitor": lambda k, r: _cast_choice(k, r, ("heldout", "inner")),
    "jobs": lambda k, r: _cast_int(k, r, low=1),
    "d_shared": lambda k, r: _cast_int(k, r, low=1),
    "d_feat": lambda k, r: _cast_int(k, r, low=1),
    "max_epochs": lambda k, r: _cast_int(k, r, low=1),
    "batch_size": lambda k, r: _cast_int(k, r, low=2),
    "lr": lambda k, r: _cast_float(k, r, low=0.0),
    "weight_decay": lambda k, r: _cast_float(k, r, low=0.0),
    "dropout": _cast_dropout,
    "patience": lambda k, r: _cast_int(k, r, low=1),
    "inner_fraction": _cast_fraction,
    "variants": _cast_variants,
    "variant": lambda k, r: _cast_choice(k, r, tuple(v.value for v in MethodVariant)),
    "subject": lambda k, r: _cast_int(k, r, low=0),
    "param": lambda k, r: _cast_choice(k, r, ("alpha", "beta")),
    "values": _cast_values,
    "subjects": lambda k, r: _cast_int(k, r, low=1),
    "samples_per_subject": lambda k, r: _cast_int(k, r, low=1),
    "d_emb": lambda k, r: _cast_int(k, r, low=1),
    "lambda": _cast_lambda,
    "noise_sigma": lambda k, r: _cast_float(k, r, low=0.0),
    "bias_sigma": lambda k, r: _cast_float(k, r, low=0.0),
}

_DEFAULTS = {
    "seed": 0,
    "alpha": 0.5,
    "beta": 1.0,
    "hsic_mode": "paper",
    "kernel": "rbf",
    "sigma": "median",
    "monitor": "heldout",
    "jobs": 1,
    "d_shared": 256,
    "d_feat": 128,
    "max_epochs": 200,
    "batch_size": 32,
    "lr": 5e-4,
    "weight_decay": 5e-4,
    "dropout": 0.5,
    "patience": 50,
    "inner_fraction": 0.2,
    "variants": ",".join(TABLE_ROW_ORDER),
    "variant": MethodVariant.DSID.value,
    "subjects": 22,
    "samples_per_subject": 40,
    "d_emb": 768,
    "lambda": 0.5,
    "noise_sigma": 0.6,
    "bias_sigma": 0.3,
}


def load_config_file(path: str) -> dict[str, object]:
    """Plain-text ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in stripped.split("=", 1))
            if key not in _CASTERS:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = _CASTERS[key](key, raw)
    return out


def resolve_config(args: argparse.Namespace) -> dict[str, object]:
    """Defaults, then config file, then command-line flags."""
    cfg: dict[str, object] = dict(_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        cfg.update(load_config_file(config_path))
    for key in _CASTERS:
        attr = "lam" if key == "lambda" else key
        raw = getattr(args, attr, None)
        if raw is not None:
            cfg[key] = _CASTERS[key](key, str(raw))
    return cfg


def _kernel_config(cfg: dict[str, object]) -> KernelConfig:
    kind = KernelKind(str(cfg["kernel"]))
    sigma = cfg["sigma"]
    if sigma == "median":
        return KernelConfig(kind=kind, sigma=1.0, median_heuristic=True)
    return KernelConfig(kind=kind, sigma=float(sigma), median_heuristic=False)


def _objective_config(cfg: dict[str, object]) -> ObjectiveConfig:
    return ObjectiveConfig(
        alpha=float(cfg["alpha"]),
        beta=float(cfg["beta"]),
        kernel=_kernel_config(cfg),
        hsic_mode=HsicMode(str(cfg["hsic_mode"])),
    )


def _train_config(cfg: dict[str, object]) -> TrainConfig:
    return TrainConfig(
        max_epochs=int(cfg["max_epochs"]),
        batch_size=int(cfg["batch_size"]),
        adam=AdamConfig(lr=float(cfg["lr"]), weight_decay=float(cfg["weight_decay"])),
        dropout_p=float(cfg["dropout"]),
        patience=int(cfg["patience"]),
        monitor=MonitorMode(str(cfg["monitor"])),
        inner_fraction=float(cfg["inner_fraction"]),
    )


def _model_dims(cfg: dict[str, object], d_emb: int) -> ModelDims:
    return ModelDims(
        d_emb=d_emb, d_shared=int(cfg["d_shared"]), d_feat=int(cfg["d_feat"])
    )


def _load_dataset(path: str) -> Dataset:
    if path.endswith(".csv"):
        return import_csv(path)
    return read_embeddings(path)


# --- output helpers ----------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def format_tables(headers: list[str], rows: list[list[str]]) -> tuple[str, str]:
    """(aligned text, csv). First column left-aligned, the rest right-aligned."""
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))

    def line(cells: list[str]) -> str:
        parts = [cells[0].ljust(widths[0])]
        parts += [cells[i].rjust(widths[i]) for i in range(1, len(cells))]
        return "  ".join(parts).rstrip()

    text_lines = [line(headers), line(["-" * w for w in widths])]
    text_lines += [line(r) for r in rows]
    text = "\n".join(text_lines) + "\n"
    csv = "\n".join([",".join(headers)] + [",".join(r) for r in rows]) + "\n"
    return text, csv


_METRIC_HEADERS = ["method", "ter_accuracy", "ter_f1", "der_accuracy", "der_f1"]


def _metric_cells(ter: PooledScores | None, der: PooledScores | None) -> list[str]:
    cells = []
    for scores in (ter, der):
        if scores is None:
            cells += ["-", "-"]
        else:
            cells += [_fmt(scores.pooled.accuracy), _fmt(scores.pooled.macro_f1)]
    return cells


_MANIFEST_CONFIG_KEYS = (
    # jobs is deliberately absent: parallelism must not change any output
    "data",
    "seed",
    "alpha",
    "beta",
    "hsic_mode",
    "kernel",
    "sigma",
    "monitor",
    "d_shared",
    "d_feat",
    "max_epochs",
    "batch_size",
    "lr",
    "weight_decay",
    "dropout",
    "patience",
    "inner_fraction",
)


def _manifest_path(out_dir: str) -> str:
    return os.path.join(out_dir, "manifest.txt")


def _check_manifest_overwrite(out_dir: str, force: bool) -> None:
    path = _manifest_path(out_dir)
    if os.path.exists(path) and not force:
        raise UsageError(f"manifest already exists: {path} (rerun with --force)")


def _write_lines(path: str, entries: list[tuple[str, object]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for key, value in entries:
            f.write(f"{key} = {value}\n")


def _clock_entry() -> tuple[str, str]:
    return ("clock", datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"))


def _config_entries(cfg: dict[str, object], data_path: str) -> list[tuple[str, object]]:
    entries: list[tuple[str, object]] = []
    for key in _MANIFEST_CONFIG_KEYS:
        entries.append((key, data_path if key == "data" else cfg[key]))
    return entries


def _fold_metric_entries(
    run_label: str, result: LosoResult, base_seed: int
) -> list[tuple[str, object]]:
    entries: list[tuple[str, object]] = []
    for i, fold in enumerate(result.folds):
        prefix = f"fold.{run_label}.{fold.subject}"
        entries.append((f"{prefix}.seed", base_seed + fold.subject))
        entries.append((f"{prefix}.best_epoch", fold.best_epoch))
        entries.append((f"{prefix}.epochs_run", fold.epochs_run))
        entries.append((f"{prefix}.n_test", fold.true_labels.size))
        if result.true_scores is not None:
            s = result.true_scores.fold_scores[i]
            entries.append((f"{prefix}.ter_accuracy", _fmt(s.accuracy)))
            entries.append((f"{prefix}.ter_macro_f1", _fmt(s.macro_f1)))
        if result.disg_scores is not None:
            s = result.disg_scores.fold_scores[i]
            entries.append((f"{prefix}.der_accuracy", _fmt(s.accuracy)))
            entries.append((f"{prefix}.der_macro_f1", _fmt(s.macro_f1)))
    return entries


def _pooled_entries(label: str, ter: PooledScores | None, der: PooledScores | None) -> list[tuple[str, object]]:
    entries: list[tuple[str, object]] = []
    for tag, scores in (("ter", ter), ("der", der)):
        if scores is None:
            continue
        entries.append((f"result.{label}.{tag}_accuracy", _fmt(scores.pooled.accuracy)))
        entries.append((f"result.{label}.{tag}_macro_f1", _fmt(scores.pooled.macro_f1)))
        entries.append((f"result.{label}.{tag}_fold_mean_accuracy", _fmt(scores.fold_mean_accuracy)))
        entries.append((f"result.{label}.{tag}_fold_mean_macro_f1", _fmt(scores.fold_mean_macro_f1)))
    return entries


def _write_fold_outputs(out_dir: str, run_label: str, result: LosoResult, base_seed: int) -> None:
    fold_dir = os.path.join(out_dir, "folds", run_label)
    os.makedirs(fold_dir, exist_ok=True)
    for i, fold in enumerate(result.folds):
        stem = f"subject_{fold.subject:03d}"
        save_model(fold.model, os.path.join(fold_dir, stem + ".dsm1"))
        entries: list[tuple[str, object]] = [
            ("run", run_label),
            ("subject", fold.subject),
            ("fold_seed", base_seed + fold.subject),
            ("best_epoch", fold.best_epoch),
            ("epochs_run", fold.epochs_run),
            ("n_test", fold.true_labels.size),
            ("checkpoint", stem + ".dsm1"),
        ]
        if result.true_scores is not None:
            s = result.true_scores.fold_scores[i]
            entries.append(("ter_accuracy", _fmt(s.accuracy)))
            entries.append(("ter_macro_f1", _fmt(s.macro_f1)))
        if result.disg_scores is not None:
            s = result.disg_scores.fold_scores[i]
            entries.append(("der_accuracy", _fmt(s.accuracy)))
            entries.append(("der_macro_f1", _fmt(s.macro_f1)))
        _write_lines(os.path.join(fold_dir, stem + ".txt"), entries)


def _write_result_tables(out_dir: str, headers: list[str], rows: list[list[str]]) -> str:
    text, csv = format_tables(headers, rows)
    with open(os.path.join(out_dir, "results.txt"), "w", encoding="utf-8") as f:
        f.write(text)
    with open(os.path.join(out_dir, "results.csv"), "w", encoding="utf-8") as f:
        f.write(csv)
    return text


# --- variant execution ---------------------------------------------------------


def _run_table_variant(
    row: str,
    dataset: Dataset,
    dims: ModelDims,
    objective: ObjectiveConfig,
    train_cfg: TrainConfig,
    seed: int,
    jobs: int,
) -> dict[str, LosoResult]:
    """The trained runs backing one table row, keyed by run label.

    The baseline row needs two runs: its TER column comes from a true-only
    probe and its DER column from a separately trained disguised-only
    probe (the dual rows report both columns from one joint model)."""
    if row == ROW_BASELINE:
        return {
            MethodVariant.BASELINE_TRUE.value: run_loso(
                dataset, dims, MethodVariant.BASELINE_TRUE, objective, train_cfg, seed, jobs
            ),
            MethodVariant.BASELINE_DISG.value: run_loso(
                dataset, dims, MethodVariant.BASELINE_DISG, objective, train_cfg, seed, jobs
            ),
        }
    variant = MethodVariant.DSID if row == ROW_DSID else MethodVariant.DSID_NO_HSIC
    return {variant.value: run_loso(dataset, dims, variant, objective, train_cfg, seed, jobs)}


def _row_scores(row: str, runs: dict[str, LosoResult]) -> tuple[PooledScores, PooledScores]:
    if row == ROW_BASELINE:
        ter = runs[MethodVariant.BASELINE_TRUE.value].true_scores
        der = runs[MethodVariant.BASELINE_DISG.value].disg_scores
    else:
        label = ROW_DSID if row == ROW_DSID else ROW_NO_HSIC
        ter = runs[label].true_scores
        der = runs[label].disg_scores
    return ter, der


# --- subcommands ----------------------------------------------------------------


def cmd_synth(args: argparse.Namespace, cfg: dict[str, object]) -> int:
    out_path = cfg.get("out") or getattr(args, "out", None)
    if not out_path:
        raise UsageError("synth requires --out")
    synth_cfg = SynthConfig(
        n_subjects=int(cfg["subjects"]),
        samples_per_subject=int(cfg["samples_per_subject"]),
        d_emb=int(cfg["d_emb"]),
        lam=float(cfg["lambda"]),
        noise_sigma=float(cfg["noise_sigma"]),
        subject_bias_sigma=float(cfg["bias_sigma"]),
        seed=int(cfg["seed"]),
    )
    dataset = synth_generate(synth_cfg)
    parent = os.path.dirname(out_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    write_embeddings(dataset, str(out_path))
    print(
        f"wrote {out_path}: subjects={synth_cfg.n_subjects} "
        f"samples={len(dataset)} d_emb={synth_cfg.d_emb} "
        f"lambda={synth_cfg.lam:.4f}"
    )
    return EXIT_OK


def cmd_train(args: argparse.Namespace, cfg: dict[str, object]) -> int:
    data_path, out_dir = _require_data_out(cfg)
    subject = cfg.get("subject")
    if subject is None:
        raise UsageError("train requires --subject")
    os.makedirs(out_dir, exist_ok=True)
    _check_manifest_overwrite(out_dir, args.force)

    dataset = _load_dataset(data_path)
    if int(subject) not in dataset.subjects():
        raise UsageError(f"subject {subject} not present in {data_path}")
    variant = MethodVariant(str(cfg["variant"]))
    dims = _model_dims(cfg, dataset.d_emb)
    fold = run_single_fold(
        dataset, int(subject), dims, variant, _objective_config(cfg), _train_config(cfg), int(cfg["seed"])
    )
    ckpt = "checkpoint.dsm1"
    save_model(fold.model, os.path.join(out_dir, ckpt))

    entries: list[tuple[str, object]] = [("command", "train"), _clock_entry()]
    entries += _config_entries(cfg, data_path)
    entries += [
        ("variant", variant.value),
        ("subject", fold.subject),
        ("fold_seed", int(cfg["seed"]) + fold.subject),
        ("best_epoch", fold.best_epoch),
        ("epochs_run", fold.epochs_run),
        ("n_test", fold.true_labels.size),
        ("checkpoint", ckpt),
    ]
    report: list[tuple[str, object]] = []
    if fold.true_preds is not None:
        s = score(fold.true_preds, fold.true_labels, dims.c_true)
        report += [("ter_accuracy", _fmt(s.accuracy)), ("ter_macro_f1", _fmt(s.macro_f1))]
    if fold.disg_preds is not None:
        s = score(fold.disg_preds, fold.disg_labels, dims.c_disg)
        report += [("der_accuracy", _fmt(s.accuracy)), ("der_macro_f1", _fmt(s.macro_f1))]
    entries += report
    _write_lines(_manifest_path(out_dir), entries)
    for key, value in [("subject", fold.subject), ("best_epoch", fold.best_epoch)] + report:
        print(f"{key} = {value}")
    return EXIT_OK


def cmd_loso(args: argparse.Namespace, cfg: dict[str, object]) -> int:
    data_path, out_dir = _require_data_out(cfg)
    os.makedirs(out_dir, exist_ok=True)
    _check_manifest_overwrite(out_dir, args.force)

    dataset = _load_dataset(data_path)
    dims = _model_dims(cfg, dataset.d_emb)
    objective = _objective_config(cfg)
    train_cfg = _train_config(cfg)
    seed = int(cfg["seed"])
    jobs = int(cfg["jobs"])
    rows = str(cfg["variants"]).split(",")

    table_rows: list[list[str]] = []
    manifest: list[tuple[str, object]] = [("command", "loso"), _clock_entry()]
    manifest += _config_entries(cfg, data_path)
    manifest += [
        ("variants", cfg["variants"]),
        ("n_samples", len(dataset)),
        ("d_emb", dataset.d_emb),
        ("n_subjects", len(dataset.subjects())),
        ("subjects", ",".join(str(s) for s in dataset.subjects())),
    ]
    fold_entries: list[tuple[str, object]] = []
    for row in rows:
        runs = _run_table_variant(row, dataset, dims, objective, train_cfg, seed, jobs)
        ter, der = _row_scores(row, runs)
        table_rows.append([row] + _metric_cells(ter, der))
        manifest += _pooled_entries(row, ter, der)
        for run_label, result in runs.items():
            _write_fold_outputs(out_dir, run_label, result, seed)
            fold_entries += _fold_metric_entries(run_label, result, seed)
    manifest += fold_entries

    text = _write_result_tables(out_dir, _METRIC_HEADERS, table_rows)
    _write_lines(_manifest_path(out_dir), manifest)
    print(text, end="")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, cfg: dict[str, object]) -> int:
    data_path, out_dir = _require_data_out(cfg)
    param = str(cfg.get("param") or "alpha")
    if cfg.get("values") is None:
        values = list(DEFAULT_SWEEP_GRID)
    else:
        values = [float(v) for v in str(cfg["values"]).split(",")]
    os.makedirs(out_dir, exist_ok=True)
    _check_manifest_overwrite(out_dir, args.force)

    dataset = _load_dataset(data_path)
    dims = _model_dims(cfg, dataset.d_emb)
    train_cfg = _train_config(cfg)
    seed = int(cfg["seed"])
    jobs = int(cfg["jobs"])

    # the swept weight varies; the companion weight stays at its configured value
    companion_key = "beta" if param == "alpha" else "alpha"
    companion_value = float(cfg[companion_key])

    headers = [param, "ter_accuracy", "ter_f1", "der_accuracy", "der_f1"]
    table_rows: list[list[str]] = []
    manifest: list[tuple[str, object]] = [("command", "sweep"), _clock_entry()]
    manifest += _config_entries(cfg, data_path)
    manifest += [
        ("param", param),
        ("values", ",".join(_fmt(v) for v in values)),
        (f"companion_{companion_key}", companion_value),
        ("n_samples", len(dataset)),
        ("d_emb", dataset.d_emb),
        ("n_subjects", len(dataset.subjects())),
    ]
    for value in values:
        weights = {"alpha": float(cfg["alpha"]), "beta": float(cfg["beta"])}
        weights[param] = value
        objective = ObjectiveConfig(
            alpha=weights["alpha"],
            beta=weights["beta"],
            kernel=_kernel_config(cfg),
            hsic_mode=HsicMode(str(cfg["hsic_mode"])),
        )
        result = run_loso(dataset, dims, MethodVariant.DSID, objective, train_cfg, seed, jobs)
        table_rows.append([_fmt(value)] + _metric_cells(result.true_scores, result.disg_scores))
        manifest += _pooled_entries(f"{param}_{_fmt(value)}", result.true_scores, result.disg_scores)

    text = _write_result_tables(out_dir, headers, table_rows)
    _write_lines(_manifest_path(out_dir), manifest)
    print(text, end="")
    return EXIT_OK


_VARIANT_MANIFEST_STREAMS = {
    ROW_BASELINE: "split",  # two probes, one per task
    ROW_NO_HSIC: "joint",
    ROW_DSID: "joint",
}


def cmd_ablate(args: argparse.Namespace, cfg: dict[str, object]) -> int:
    data_path, out_dir = _require_data_out(cfg)
    os.makedirs(out_dir, exist_ok=True)
    _check_manifest_overwrite(out_dir, args.force)

    dataset = _load_dataset(data_path)
    dims = _model_dims(cfg, dataset.d_emb)
    objective = _objective_config(cfg)
    train_cfg = _train_config(cfg)
    seed = int(cfg["seed"])
    jobs = int(cfg["jobs"])
    subjects = dataset.subjects()

    variant_dir = os.path.join(out_dir, "variants")
    os.makedirs(variant_dir, exist_ok=True)

    table_rows: list[list[str]] = []
    manifest: list[tuple[str, object]] = [("command", "ablate"), _clock_entry()]
    manifest += _config_entries(cfg, data_path)
    manifest += [
        ("n_samples", len(dataset)),
        ("d_emb", dataset.d_emb),
        ("n_subjects", len(subjects)),
        ("subjects", ",".join(str(s) for s in subjects)),
    ]
    fold_entries: list[tuple[str, object]] = []
    for row in TABLE_ROW_ORDER:
        runs = _run_table_variant(row, dataset, dims, objective, train_cfg, seed, jobs)
        ter, der = _row_scores(row, runs)
        table_rows.append([row] + _metric_cells(ter, der))
        manifest += _pooled_entries(row, ter, der)
        for run_label, result in runs.items():
            _write_fold_outputs(out_dir, run_label, result, seed)
            fold_entries += _fold_metric_entries(run_label, result, seed)

        # config-only variant manifest: comparable line by line across
        # variants (no method name, no metrics, no clock)
        effective_alpha = objective.alpha if row == ROW_DSID else 0.0
        effective_d_feat = 0 if row == ROW_BASELINE else cfg["d_feat"]
        entries: list[tuple[str, object]] = [("data", data_path), ("seed", seed)]
        entries.append(("streams", _VARIANT_MANIFEST_STREAMS[row]))
        entries.append(("alpha", effective_alpha))
        for key in _MANIFEST_CONFIG_KEYS:
            if key in ("data", "seed", "alpha"):
                continue
            entries.append((key, effective_d_feat if key == "d_feat" else cfg[key]))
        entries.append(("fold_subjects", ",".join(str(s) for s in subjects)))
        entries.append(("fold_seeds", ",".join(str(seed + s) for s in subjects)))
        _write_lines(os.path.join(variant_dir, f"{row}.txt"), entries)
    manifest += fold_entries

    text = _write_result_tables(out_dir, _METRIC_HEADERS, table_rows)
    _write_lines(_manifest_path(out_dir), manifest)
    print(text, end="")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace, cfg: dict[str, object]) -> int:
    data_path = cfg.get("data")
    if not data_path:
        raise UsageError("inspect requires --data")
    data_path = str(data_path)
    with open(data_path, "rb") as f:
        magic = f.read(4)
    if magic == CHECKPOINT_MAGIC:
        model = load_model(data_path)
        dims = model.dims
        print(f"checkpoint {data_path}")
        for name in ("d_emb", "d_shared", "d_feat", "c_true", "c_disg"):
            print(f"{name} = {getattr(dims, name)}")
        print(f"dropout_p = {model.masked_adapter.dropout_p}")
        print(f"bn_momentum = {model.masked_adapter.bn.momentum}")
        print(f"bn_eps = {model.masked_adapter.bn.eps}")
        return EXIT_OK
    if magic == DSE1_MAGIC or data_path.endswith(".csv"):
        dataset = _load_dataset(data_path)
        subjects = dataset.subjects()
        print(f"embeddings {data_path}")
        print(f"n_samples = {len(dataset)}")
        print(f"d_emb = {dataset.d_emb}")
        print(f"n_subjects = {len(subjects)}")
        print(f"subjects = {','.join(str(s) for s in subjects)}")
        true_hist = np.bincount(dataset.true_labels(), minlength=N_CLASSES)
        disg_hist = np.bincount(dataset.disguised_labels(), minlength=N_CLASSES)
        frames = dataset.frame_types()
        print(f"true_label_counts = {','.join(str(int(c)) for c in true_hist)}")
        print(f"disguised_label_counts = {','.join(str(int(c)) for c in disg_hist)}")
        print(f"onset_count = {int(np.sum(frames == 0))}")
        print(f"apex_count = {int(np.sum(frames == 1))}")
        return EXIT_OK
    raise DataFormatError("bad magic at byte 0")


def _require_data_out(cfg: dict[str, object]) -> tuple[str, str]:
    data_path = cfg.get("data")
    out_dir = cfg.get("out")
    if not data_path:
        raise UsageError("missing --data")
    if not out_dir:
        raise UsageError("missing --out")
    return str(data_path), str(out_dir)


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsid",
        description="Dual-stream true/disguised emotion experiments on embedding files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, with_training: bool = True) -> None:
        p.add_argument("--config", help="key = value config file; flags override it")
        p.add_argument("--out", help="output path")
        p.add_argument("--seed", help="base seed (fold seed = seed + subject id)")
        p.add_argument("--force", action="store_true", help="overwrite an existing manifest")
        if with_training:
            p.add_argument("--data", help="DSE1 embedding file (or label CSV)")
            p.add_argument("--alpha", help="independence loss weight")
            p.add_argument("--beta", help="disguised loss weight")
            p.add_argument("--hsic-mode", dest="hsic_mode", help="paper | classical")
            p.add_argument("--kernel", help="rbf | linear")
            p.add_argument("--sigma", help="RBF bandwidth or 'median'")
            p.add_argument("--monitor", help="heldout | inner")
            p.add_argument("--jobs", help="max concurrent folds")
            p.add_argument("--d-shared", dest="d_shared", help="shared adapter width")
            p.add_argument("--d-feat", dest="d_feat", help="branch feature width")
            p.add_argument("--max-epochs", dest="max_epochs")
            p.add_argument("--batch-size", dest="batch_size")
            p.add_argument("--lr")
            p.add_argument("--weight-decay", dest="weight_decay")
            p.add_argument("--dropout")
            p.add_argument("--patience")
            p.add_argument("--inner-fraction", dest="inner_fraction")

    p_synth = sub.add_parser("synth", help="generate a synthetic embedding file")
    common(p_synth, with_training=False)
    p_synth.add_argument("--subjects")
    p_synth.add_argument("--samples-per-subject", dest="samples_per_subject")
    p_synth.add_argument("--d-emb", dest="d_emb")
    p_synth.add_argument("--lambda", dest="lam", help="disguise mixing weight in [0, 1]")
    p_synth.add_argument("--noise-sigma", dest="noise_sigma")
    p_synth.add_argument("--bias-sigma", dest="bias_sigma")

    p_train = sub.add_parser("train", help="train one held-out-subject fold")
    common(p_train)
    p_train.add_argument("--subject", help="subject id to hold out")
    p_train.add_argument("--variant", help="|".join(v.value for v in MethodVariant))

    p_loso = sub.add_parser("loso", help="leave-one-subject-out over method variants")
    common(p_loso)
    p_loso.add_argument("--variants", help="comma list: " + ",".join(TABLE_ROW_ORDER))

    p_sweep = sub.add_parser("sweep", help="LOSO once per weight value")
    common(p_sweep)
    p_sweep.add_argument("--param", help="alpha | beta")
    p_sweep.add_argument("--values", help="comma list of non-negative weights")

    p_ablate = sub.add_parser("ablate", help="three-variant decoupling comparison")
    common(p_ablate)

    p_inspect = sub.add_parser("inspect", help="summarize an embedding file or checkpoint")
    p_inspect.add_argument("--data", help="DSE1/CSV embedding file or DSM1 checkpoint")

    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "loso": cmd_loso,
    "sweep": cmd_sweep,
    "ablate": cmd_ablate,
    "inspect": cmd_inspect,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return _COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
