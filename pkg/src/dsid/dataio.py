"""Datasets, the DSE1 embedding container, and the synthetic generator.

A sample is one face-image embedding plus two labels: the true (felt) emotion
and the disguised (displayed) emotion, which never coincide, together with
the frame type the image was taken from (onset or apex of the expression).

Embeddings are stored as float32 on disk and promoted to float64 for all
computation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

N_CLASSES = 6

DSE1_MAGIC = b"DSE1"
DSE1_VERSION = 1
_HEADER = struct.Struct("<III")  # version, n, d_emb
_RECORD_FIXED = struct.Struct("<HBBB3s")  # subject, true, disguised, frame, pad


class DataFormatError(ValueError):
    """Malformed embedding file or label table."""


class FrameType(IntEnum):
    ONSET = 0
    APEX = 1


@dataclass(frozen=True)
class EmbeddingRecord:
    subject: int
    true_label: int
    disguised_label: int
    frame_type: FrameType
    embedding: np.ndarray  # (d_emb,) float32

    def __post_init__(self) -> None:
        if not 0 <= self.subject <= 0xFFFF:
            raise DataFormatError(f"subject {self.subject} outside u16 range")
        for name in ("true_label", "disguised_label"):
            v = getattr(self, name)
            if not 0 <= v < N_CLASSES:
                raise DataFormatError(f"{name} {v} out of range [0, {N_CLASSES})")
        if self.true_label == self.disguised_label:
            raise DataFormatError(
                f"labels coincide: true_label == disguised_label == {self.true_label}"
            )
        if self.frame_type not in (FrameType.ONSET, FrameType.APEX):
            raise DataFormatError(f"frame_type {self.frame_type} not in {{0, 1}}")
        emb = np.ascontiguousarray(self.embedding, dtype=np.float32)
        if emb.ndim != 1 or emb.size == 0:
            raise DataFormatError("embedding must be a non-empty 1-D vector")
        object.__setattr__(self, "embedding", emb)
        object.__setattr__(self, "frame_type", FrameType(self.frame_type))


@dataclass
class Dataset:
    records: list[EmbeddingRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        dims = {r.embedding.size for r in self.records}
        if len(dims) > 1:
            raise DataFormatError(f"inconsistent embedding dimensions: {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def d_emb(self) -> int:
        if not self.records:
            raise ValueError("empty dataset has no embedding dimension")
        return self.records[0].embedding.size

    def subjects(self) -> list[int]:
        return sorted({r.subject for r in self.records})

    def embedding_matrix(self) -> np.ndarray:
        return np.stack([r.embedding for r in self.records]).astype(np.float64)

    def true_labels(self) -> np.ndarray:
        return np.array([r.true_label for r in self.records], dtype=np.int64)

    def disguised_labels(self) -> np.ndarray:
        return np.array([r.disguised_label for r in self.records], dtype=np.int64)

    def frame_types(self) -> np.ndarray:
        return np.array([int(r.frame_type) for r in self.records], dtype=np.int64)


def split_by_subject(dataset: Dataset, subject: int) -> tuple[Dataset, Dataset]:
    """(train, held-out) split: held-out = every sample of the given subject."""
    if subject not in set(r.subject for r in dataset.records):
        raise ValueError(f"subject {subject} not present in dataset")
    train = [r for r in dataset.records if r.subject != subject]
    test = [r for r in dataset.records if r.subject == subject]
    return Dataset(train), Dataset(test)


# --- synthetic generator -----------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    """Two-factor mixture: embedding = (1-lam)*A u_t + lam*B v_g + bias + noise.

    ``lam`` interpolates between the true-emotion component (lam -> 0) and the
    disguised-expression component (lam -> 1); a sample is tagged APEX when
    the displayed expression dominates (lam >= 0.5), ONSET otherwise. A and B
    are fixed per-seed Gaussian mixing matrices with unit-norm columns, one
    column per emotion class.
    """

    n_subjects: int = 22
    samples_per_subject: int = 40
    d_emb: int = 768
    lam: float = 0.5
    noise_sigma: float = 0.6
    subject_bias_sigma: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_subjects < 1 or self.samples_per_subject < 1 or self.d_emb < 1:
            raise ValueError("n_subjects, samples_per_subject, d_emb must be >= 1")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        if self.noise_sigma < 0.0 or self.subject_bias_sigma < 0.0:
            raise ValueError("sigmas must be >= 0")


def _mixing_matrix(rng: np.random.Generator, d_emb: int) -> np.ndarray:
    m = rng.standard_normal((d_emb, N_CLASSES))
    return m / np.linalg.norm(m, axis=0)


def synth_generate(cfg: SynthConfig) -> Dataset:
    """Deterministic synthetic dataset; subjects are numbered from 1.

    Draw order is fixed (A, B, then per subject: bias, then per sample:
    label pair, noise) so a given config always reproduces bit for bit.
    """
    rng = np.random.default_rng(cfg.seed)
    a = _mixing_matrix(rng, cfg.d_emb)
    b = _mixing_matrix(rng, cfg.d_emb)
    frame = FrameType.APEX if cfg.lam >= 0.5 else FrameType.ONSET

    records: list[EmbeddingRecord] = []
    for subject in range(1, cfg.n_subjects + 1):
        bias = rng.normal(0.0, cfg.subject_bias_sigma, size=cfg.d_emb)
        for _ in range(cfg.samples_per_subject):
            # 30 ordered (true, disguised) pairs with distinct labels
            pair = int(rng.integers(0, N_CLASSES * (N_CLASSES - 1)))
            t = pair // (N_CLASSES - 1)
            g = [c for c in range(N_CLASSES) if c != t][pair % (N_CLASSES - 1)]
            noise = rng.normal(0.0, cfg.noise_sigma, size=cfg.d_emb)
            emb = (1.0 - cfg.lam) * a[:, t] + cfg.lam * b[:, g] + bias + noise
            records.append(
                EmbeddingRecord(
                    subject=subject,
                    true_label=t,
                    disguised_label=g,
                    frame_type=frame,
                    embedding=emb.astype(np.float32),
                )
            )
    return Dataset(records)


# --- DSE1 container -----------------------------------------------------------
#
# Little-endian. Layout:
#   bytes 0..3   magic "DSE1"
#   bytes 4..7   u32 version = 1
#   bytes 8..11  u32 n (record count)
#   bytes 12..15 u32 d_emb
#   then n records of 8 + 4*d_emb bytes:
#     u16 subject, u8 true_label, u8 disguised_label, u8 frame_type,
#     3 zero pad bytes, d_emb float32 embedding values
# No trailing bytes.


def write_embeddings(dataset: Dataset, path: str) -> None:
    if not dataset.records:
        raise ValueError("refusing to write an empty dataset")
    d_emb = dataset.d_emb
    chunks = [DSE1_MAGIC, _HEADER.pack(DSE1_VERSION, len(dataset.records), d_emb)]
    for r in dataset.records:
        chunks.append(
            _RECORD_FIXED.pack(r.subject, r.true_label, r.disguised_label, int(r.frame_type), b"\x00\x00\x00")
        )
        chunks.append(np.ascontiguousarray(r.embedding, dtype="<f4").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def read_embeddings(path: str) -> Dataset:
    """Strict DSE1 reader; every rejection names the offending byte offset."""
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 4 or buf[:4] != DSE1_MAGIC:
        raise DataFormatError("bad magic at byte 0")
    if len(buf) < 16:
        raise DataFormatError(f"truncated header at byte {len(buf)}")
    version, n, d_emb = _HEADER.unpack_from(buf, 4)
    if version != DSE1_VERSION:
        raise DataFormatError(f"unsupported version {version} at byte 4")
    if d_emb == 0:
        raise DataFormatError("d_emb of 0 at byte 12")

    record_size = _RECORD_FIXED.size + 4 * d_emb
    records: list[EmbeddingRecord] = []
    offset = 16
    for _ in range(n):
        if offset + record_size > len(buf):
            raise DataFormatError(f"truncated record at byte {len(buf)}")
        subject, true_label, disguised_label, frame_raw, pad = _RECORD_FIXED.unpack_from(buf, offset)
        if true_label >= N_CLASSES:
            raise DataFormatError(
                f"true_label {true_label} out of range [0, {N_CLASSES}) at byte {offset + 2}"
            )
        if disguised_label >= N_CLASSES:
            raise DataFormatError(
                f"disguised_label {disguised_label} out of range [0, {N_CLASSES}) at byte {offset + 3}"
            )
        if true_label == disguised_label:
            raise DataFormatError(f"labels coincide at byte {offset + 2}")
        if frame_raw not in (0, 1):
            raise DataFormatError(f"frame_type {frame_raw} not in {{0, 1}} at byte {offset + 4}")
        if pad != b"\x00\x00\x00":
            raise DataFormatError(f"nonzero padding at byte {offset + 5}")
        embedding = np.frombuffer(
            buf, dtype="<f4", count=d_emb, offset=offset + _RECORD_FIXED.size
        ).copy()
        records.append(
            EmbeddingRecord(
                subject=subject,
                true_label=true_label,
                disguised_label=disguised_label,
                frame_type=FrameType(frame_raw),
                embedding=embedding,
            )
        )
        offset += record_size
    if offset != len(buf):
        raise DataFormatError(f"trailing bytes at byte {offset}")
    return Dataset(records)


# --- CSV import ----------------------------------------------------------------

_CSV_PREFIX = ["subject", "true_label", "disguised_label", "frame_type"]
_FRAME_NAMES = {"onset": FrameType.ONSET, "apex": FrameType.APEX}


def import_csv(path: str) -> Dataset:
    """Read `subject,true_label,disguised_label,frame_type,e0,...` rows.

    frame_type is the case-insensitive name (Onset/Apex). Errors carry the
    1-based line number; the header is line 1.
    """
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f]
    lines = [ln for ln in lines if ln.strip() != ""]
    if not lines:
        raise DataFormatError("empty file")
    header = [c.strip() for c in lines[0].split(",")]
    if header[: len(_CSV_PREFIX)] != _CSV_PREFIX:
        raise DataFormatError(
            f"line 1: bad header, expected it to start with {','.join(_CSV_PREFIX)}"
        )
    emb_cols = header[len(_CSV_PREFIX) :]
    if not emb_cols or emb_cols != [f"e{i}" for i in range(len(emb_cols))]:
        raise DataFormatError("line 1: embedding columns must be e0,e1,...")
    d_emb = len(emb_cols)

    records: list[EmbeddingRecord] = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(header):
            raise DataFormatError(
                f"line {lineno}: expected {len(header)} columns, got {len(cells)}"
            )
        try:
            subject = int(cells[0])
            true_label = int(cells[1])
            disguised_label = int(cells[2])
        except ValueError as exc:
            raise DataFormatError(f"line {lineno}: non-integer label field") from exc
        frame_name = cells[3].lower()
        if frame_name not in _FRAME_NAMES:
            raise DataFormatError(f"line {lineno}: unknown frame_type {cells[3]!r}")
        try:
            embedding = np.array([float(c) for c in cells[4:]], dtype=np.float32)
        except ValueError as exc:
            raise DataFormatError(f"line {lineno}: non-numeric embedding value") from exc
        try:
            records.append(
                EmbeddingRecord(
                    subject=subject,
                    true_label=true_label,
                    disguised_label=disguised_label,
                    frame_type=_FRAME_NAMES[frame_name],
                    embedding=embedding,
                )
            )
        except DataFormatError as exc:
            raise DataFormatError(f"line {lineno}: {exc}") from exc
    if not records:
        raise DataFormatError("no data rows")
    if d_emb != records[0].embedding.size:
        raise DataFormatError("embedding width does not match header")
    return Dataset(records)
